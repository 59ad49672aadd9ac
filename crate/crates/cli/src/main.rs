use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(pcpq_cli::run(std::env::args_os()))
}
