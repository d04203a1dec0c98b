use std::process::ExitCode;

fn main() -> ExitCode {
    overprior::cli::run(std::env::args_os())
}
