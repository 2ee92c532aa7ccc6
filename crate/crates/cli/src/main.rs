mod args;
mod commands;
mod error;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    mamsr::init_thread_pool();

    let result = match cli.command {
        Command::Train(a) => commands::train::run(a),
        Command::Sr(a) => commands::sr::run(a),
        Command::Eval(a) => commands::eval::run(a),
        Command::Params(a) => commands::params::run(a),
        Command::Inspect(a) => commands::inspect::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
