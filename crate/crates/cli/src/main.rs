use clap::Parser;

use tqff_cli::commands::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| run(cli));
    if let Err(e) = outcome {
        eprintln!("tqff: {e}");
        std::process::exit(e.exit_code());
    }
}
