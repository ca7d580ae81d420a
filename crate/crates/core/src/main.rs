use clap::Parser;

use varthresh::cli::{self, RunConfig};

fn main() {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    let config = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            std::process::exit(e.exit_code());
        }
    };
    if let Err(e) = cli::run(&config) {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
