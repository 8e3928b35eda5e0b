use std::process::ExitCode;

fn main() -> ExitCode {
    lockeval_cli::run()
}
