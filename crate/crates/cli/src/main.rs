//! `wcexplain`: explain black-box pairwise preferences with weak constraints.

mod args;
mod commands;
mod files;

use clap::Parser;

fn main() {
    let cli = args::Cli::parse();
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
