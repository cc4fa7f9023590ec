//! `mediflow`: server, device simulator, fleet and benchmarks in one binary.

mod args;
mod commands;
mod config;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use crate::args::{Action, Cli};
use crate::commands::Failure;
use crate::config::RunConfig;

fn main() {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    if let Err(f) = run(cli) {
        eprintln!("error: {}", f.message());
        std::process::exit(f.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path).map_err(Failure::Usage)?,
        None => RunConfig::default(),
    };
    let action = cli.command.apply(&mut cfg);
    eprintln!("config: {}", cfg.printable());
    match action {
        Action::Serve => commands::serve(&cfg),
        Action::SeedData => commands::seed_data(&cfg),
        Action::Device => commands::device(&cfg),
        Action::Fleet => commands::fleet(&cfg),
        Action::BenchLoad => commands::bench_load(&cfg),
        Action::BenchAccuracy => commands::bench_accuracy(&cfg),
    }
}
