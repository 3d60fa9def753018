use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    softgrasp::cli::main_with(softgrasp::cli::Cli::parse())
}
