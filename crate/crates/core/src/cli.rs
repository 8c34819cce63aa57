//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure or any failed cell, 2 usage
//! error, 3 configuration error (bad config, missing dataset or table).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::backend::{Backend, BackendKind, CacheStats};
use crate::calibration::Method;
use crate::config::{
    BackendFile, ConfigError, GridValue, RunFile, RunSpec, SensitivityFile, SweepAxis,
    DEFAULT_REMOTE_CACHE_DIR,
};
use crate::dataset::Dataset;
use crate::harness::{
    self, bias_scan_csv, correlation_csv, evaluate, run_bias_scan, run_sensitivity,
    write_eval_report, HarnessError,
};
use crate::sampling::WordList;

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "biascal",
    version,
    about = "Label-bias measurement and calibration for in-context classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Only print errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    pub quiet: bool,

    /// More logging (repeat for debug output).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate calibration methods over datasets and seeds.
    Eval(RunArgs),
    /// Measure domain-label bias per dataset and model.
    BiasScan(RunArgs),
    /// Sweep one calibration setting on one dataset.
    Sensitivity(SensitivityArgs),
    /// Inspect or clear the score cache.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Debug, Subcommand)]
pub enum CacheAction {
    /// Print the number of entries and bytes on disk.
    Stats(CacheArgs),
    /// Delete every cache entry.
    Clear(CacheArgs),
}

#[derive(Debug, Args)]
pub struct CacheArgs {
    /// Run file whose `backend.cache_dir` names the cache.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

/// Flags shared by the run subcommands. Each has a run-file key of the same
/// name (backend flags live under `[backend]`).
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// TOML run file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding `<id>.toml` dataset configs and their data.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
    /// Calibration methods: none, cc, dc-eng, dc-id.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    /// Demonstrations per context.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Random texts per prior estimate.
    #[arg(long)]
    pub m_samples: Option<usize>,
    /// Largest evaluation set; bigger sets are subsampled once.
    #[arg(long)]
    pub eval_cap: Option<usize>,
    #[arg(long)]
    pub cc_token: Option<String>,
    /// Words per random text (default: the dataset's average length).
    #[arg(long)]
    pub cal_length: Option<usize>,
    /// English word list, one word per line (default: bundled list).
    #[arg(long)]
    pub wordlist: Option<PathBuf>,
    /// Replacement label names, in label order.
    #[arg(long, value_delimiter = ',')]
    pub label_names: Option<Vec<String>>,
    /// Texts used to build the in-domain word bag.
    #[arg(long)]
    pub corpus_cap: Option<usize>,
    /// Random texts per side of the bias measurement.
    #[arg(long)]
    pub bias_samples: Option<usize>,
    #[arg(long)]
    pub bias_seed: Option<u64>,
    /// Seed of the evaluation subsample.
    #[arg(long)]
    pub subset_seed: Option<u64>,
    /// Skip the bias measurement during eval.
    #[arg(long)]
    pub no_bias: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Base URL of an OpenAI-compatible completions server.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Model id; repeat or comma-separate for several (bias-scan).
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    /// Mock association table (JSON); several give several models.
    #[arg(long, value_delimiter = ',')]
    pub mock_table: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Concurrent requests per batch.
    #[arg(long)]
    pub parallel: Option<usize>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_cache: bool,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long)]
    pub dataset: Option<String>,
    #[arg(long, value_enum)]
    pub axis: Option<SweepAxis>,
    /// Comma-separated grid; `full` means the whole corpus.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<GridValue>>,
}

impl RunArgs {
    fn flags(&self) -> RunFile {
        RunFile {
            datasets: self.datasets.clone(),
            data_dir: self.data_dir.clone(),
            methods: self.methods.clone(),
            k: self.k,
            seeds: self.seeds.clone(),
            m_samples: self.m_samples,
            eval_cap: self.eval_cap,
            cc_token: self.cc_token.clone(),
            cal_length: self.cal_length,
            wordlist: self.wordlist.clone(),
            label_names: self.label_names.clone(),
            corpus_cap: self.corpus_cap,
            bias_samples: self.bias_samples,
            bias_seed: self.bias_seed,
            subset_seed: self.subset_seed,
            with_bias: self.no_bias.then_some(false),
            out_dir: self.out_dir.clone(),
            backend: BackendFile {
                kind: self.backend,
                endpoint: self.endpoint.clone(),
                models: self.model.clone(),
                mock_tables: self.mock_table.clone(),
                timeout_secs: self.timeout_secs,
                parallelism: self.parallel,
                cache_dir: self.cache_dir.clone(),
                no_cache: self.no_cache.then_some(true),
                api_key_env: self.api_key_env.clone(),
            },
            sensitivity: SensitivityFile::default(),
        }
    }

    /// Run file (if any) overlaid with flags.
    pub fn run_file(&self) -> Result<RunFile, CliError> {
        let file = match &self.config {
            Some(path) => RunFile::load(path)?,
            None => RunFile::default(),
        };
        Ok(file.overlay(&self.flags()))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dataset(_) | HarnessError::Config(_) | HarnessError::Sampling(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "error",
        (_, 0) => "warn",
        (_, 1) => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parse `args` and run. Usage errors print to stderr and exit 2.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { EXIT_OK });
        }
    };
    init_logging(&cli);
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn main() -> ExitCode {
    main_with(std::env::args_os())
}

/// Dispatch a parsed command. `Ok` carries 0, or 1 when some cell failed.
pub fn run(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Eval(args) => cmd_eval(args, cli.quiet),
        Command::BiasScan(args) => cmd_bias_scan(args, cli.quiet),
        Command::Sensitivity(args) => cmd_sensitivity(args, cli.quiet),
        Command::Cache { action } => cmd_cache(action),
    }
}

struct Loaded {
    spec: RunSpec,
    datasets: Vec<Dataset>,
    wordlist: WordList,
    backends: Vec<std::sync::Arc<dyn Backend>>,
}

fn load(spec: RunSpec) -> Result<Loaded, CliError> {
    if spec.datasets.is_empty() {
        return Err(CliError::Config(
            "no datasets given (use --datasets)".into(),
        ));
    }
    let datasets = harness::load_datasets(&spec)?;
    let wordlist = match &spec.wordlist {
        Some(p) => WordList::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => WordList::bundled(),
    };
    let hint = datasets.first().map(|d| d.label_set.len());
    let backends =
        harness::build_backends(&spec, hint).map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Loaded {
        spec,
        datasets,
        wordlist,
        backends,
    })
}

fn report_errors(errors: &[harness::CellError]) -> u8 {
    for e in errors {
        let seed = e.seed.map(|s| format!(" seed {s}")).unwrap_or_default();
        let method = e.method.map(|m| format!(" {m}")).unwrap_or_default();
        eprintln!("error: {}{seed}{method}: {}", e.dataset, e.message);
    }
    if errors.is_empty() {
        EXIT_OK
    } else {
        EXIT_RUNTIME
    }
}

fn cmd_eval(args: &RunArgs, quiet: bool) -> Result<u8, CliError> {
    let spec = args.run_file()?.resolve()?;
    let l = load(spec)?;
    if l.backends.len() > 1 {
        return Err(CliError::Config(
            "eval takes a single model; use bias-scan to compare several".into(),
        ));
    }
    let report = evaluate(&l.spec, &l.datasets, l.backends[0].as_ref(), &l.wordlist);
    let written = write_eval_report(&report, &l.spec.out_dir)?;
    for p in &written {
        log::info!("wrote {}", p.display());
    }
    if !quiet {
        print!("{}", harness::aggregates_csv(&report));
    }
    Ok(report_errors(&report.errors))
}

fn cmd_bias_scan(args: &RunArgs, quiet: bool) -> Result<u8, CliError> {
    let spec = args.run_file()?.resolve()?;
    let l = load(spec)?;
    let report = run_bias_scan(
        &l.datasets,
        &l.backends,
        &l.wordlist,
        l.spec.bias_samples,
        l.spec.bias_seed,
    );
    let csv = bias_scan_csv(&report.scores, &report.tiers);
    let out = &l.spec.out_dir;
    write(out, "bias.csv", &csv)?;
    if !report.correlations.is_empty() {
        let corr = correlation_csv(&report.correlations);
        write(out, "bias_correlation.csv", &corr)?;
        if !quiet {
            eprint!("{corr}");
        }
    }
    if !quiet {
        print!("{csv}");
    }
    Ok(report_errors(&report.errors))
}

fn cmd_sensitivity(args: &SensitivityArgs, quiet: bool) -> Result<u8, CliError> {
    let mut file = args.run.run_file()?;
    let over = SensitivityFile {
        dataset: args.dataset.clone(),
        axis: args.axis,
        grid: args.grid.clone(),
    };
    let sweep = std::mem::take(&mut file.sensitivity);
    let sweep = RunFile {
        sensitivity: sweep,
        ..RunFile::default()
    }
    .overlay(&RunFile {
        sensitivity: over,
        ..RunFile::default()
    })
    .sensitivity;
    let dataset = match (sweep.dataset, &file.datasets) {
        (Some(d), _) => d,
        (None, Some(ds)) if ds.len() == 1 => ds[0].clone(),
        _ => {
            return Err(CliError::Config(
                "sensitivity needs exactly one --dataset".into(),
            ))
        }
    };
    file.datasets = Some(vec![dataset]);
    let axis = sweep
        .axis
        .ok_or_else(|| CliError::Config("sensitivity needs --axis".into()))?;
    let grid = sweep
        .grid
        .filter(|g| !g.is_empty())
        .ok_or_else(|| CliError::Config("sensitivity needs a non-empty --grid".into()))?;

    let l = load(file.resolve()?)?;
    if l.backends.len() > 1 {
        return Err(CliError::Config("sensitivity takes a single model".into()));
    }
    let ds = &l.datasets[0];
    let table = run_sensitivity(
        &l.spec,
        ds,
        l.backends[0].as_ref(),
        &l.wordlist,
        axis,
        &grid,
        &l.spec.seeds,
    )?;
    let stem = format!("sensitivity_{}_{}", ds.id, axis.as_str());
    write(&l.spec.out_dir, &format!("{stem}.csv"), &table.points_csv())?;
    write(
        &l.spec.out_dir,
        &format!("{stem}_rows.csv"),
        &table.rows_csv(),
    )?;
    if !quiet {
        print!("{}", table.points_csv());
    }
    Ok(EXIT_OK)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error, p: &Path| CliError::Runtime(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| io(e, &path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_cache(action: &CacheAction) -> Result<u8, CliError> {
    let (CacheAction::Stats(args) | CacheAction::Clear(args)) = action;
    let from_file = match &args.config {
        Some(p) => RunFile::load(p)?.backend.cache_dir,
        None => None,
    };
    let dir = args
        .cache_dir
        .clone()
        .or(from_file)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_REMOTE_CACHE_DIR));
    let io = |e: std::io::Error| CliError::Runtime(format!("{}: {e}", dir.display()));
    match action {
        CacheAction::Stats(_) => {
            let s = CacheStats::collect(&dir).map_err(io)?;
            println!(
                "dir: {}\nentries: {}\nbytes: {}",
                dir.display(),
                s.entries,
                s.bytes
            );
        }
        CacheAction::Clear(_) => {
            let n = CacheStats::clear(&dir).map_err(io)?;
            println!("removed {n} entries from {}", dir.display());
        }
    }
    Ok(EXIT_OK)
}
