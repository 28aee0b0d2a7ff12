use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(preview_lqr::cli::run(std::env::args_os()))
}
