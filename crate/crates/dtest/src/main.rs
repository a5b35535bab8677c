use std::process::ExitCode;

fn main() -> ExitCode {
    dtest::cli::run()
}
