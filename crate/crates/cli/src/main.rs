use std::process::ExitCode;

use clap::Parser;

use chowfilter_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match chowfilter_cli::execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
