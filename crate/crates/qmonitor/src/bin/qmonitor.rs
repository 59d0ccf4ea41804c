use clap::Parser;
use qmonitor::cli;

fn main() {
    std::process::exit(cli::run_cli(cli::Cli::parse()));
}
