//! `aberrasim`: command-line front end for ray tracing, PSF grids, image
//! degradation, datasets, image metrics and invertible-network checks.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 I/O.

mod args;
mod commands;
mod error;

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = args::Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.into())
            .build_global()
        {
            eprintln!("error: cannot start {n} worker threads: {e}");
            std::process::exit(3);
        }
    }
    if let Err(e) = commands::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
