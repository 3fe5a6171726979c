use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tes_jitter_cli::run(std::env::args_os()))
}
