use std::process::ExitCode;

fn main() -> ExitCode {
    biascal::cli::main()
}
