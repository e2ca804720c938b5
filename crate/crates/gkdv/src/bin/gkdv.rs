use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gkdv::cli::run(std::env::args()) as u8)
}
