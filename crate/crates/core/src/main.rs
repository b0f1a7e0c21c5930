use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(drowsewatch::cli::run(std::env::args_os()))
}
