use clap::Parser;
use combworks_bench::cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    let status = init_threads().and_then(|()| run(&cli)).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        2
    });
    std::process::exit(status);
}
