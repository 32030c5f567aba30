use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(fblab_cli::run(std::env::args_os()))
}
