//! Regenerate the bundled demo: a synthetic two-class dataset whose words
//! all lean toward one label, plus the mock table that scores it.
//!
//! cargo run -p biascal --example make_demo [-- <dir>]

use std::path::PathBuf;

use biascal::synthetic::SyntheticSpec;

fn main() -> std::io::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/demo"));
    let task = SyntheticSpec::default().build();
    task.write_to(&dir, "mock-biased")?;
    std::fs::write(
        dir.join("run.toml"),
        r#"datasets = ["synthetic_hate"]
data_dir = "."
methods = ["none", "cc", "dc-eng", "dc-id"]
k = 4
seeds = [1, 2, 3, 4, 5]
m_samples = 20
out_dir = "reports"

[backend]
kind = "mock"
mock_tables = ["synthetic_hate.mock.json"]

[sensitivity]
dataset = "synthetic_hate"
axis = "m_samples"
grid = [1, 5, 20]
"#,
    )?;
    println!("wrote demo into {}", dir.display());
    Ok(())
}
