use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(supermap_forge::cli::run(std::env::args_os()))
}
