use std::io;
use std::process::ExitCode;

use clap::Parser;
use cubic_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli, &mut io::stdout().lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cubic: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
