use std::process::ExitCode;

fn main() -> ExitCode {
    freelimit_cli::run(std::env::args_os())
}
