use std::process::ExitCode;

use clap::Parser;
use layerpot_cli::commands::{execute, Cli};
use layerpot_cli::init_threads;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| execute(cli));
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
