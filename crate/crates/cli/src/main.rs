use std::process::ExitCode;

use clap::Parser;
use problabel_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match problabel_cli::run(&cli.command, &cli.global) {
        Ok(summary) => {
            if !cli.global.quiet {
                print!("{summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
