use clap::error::ErrorKind;
use clap::Parser;

use mvsfusion_cli::{exit, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            std::process::exit(exit::SUCCESS);
        }
        Err(e) => {
            eprint!("{e}");
            std::process::exit(exit::USAGE);
        }
    };
    if let Err(e) = run(&cli) {
        eprintln!("mvsfuse: error: {e}");
        std::process::exit(exit::DATA);
    }
}
