mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn run() -> Result<(), commands::Failure> {
    let mut argv: Vec<_> = std::env::args_os().collect();
    if let Some(path) = args::find_config(&argv) {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| commands::Failure::Usage(format!("--config {}: {e}", path.display())))?;
        let extra = args::config_args(&text).map_err(|e| commands::Failure::Usage(format!("--config {}: {e}", path.display())))?;
        argv = args::splice_config(argv, extra);
    }
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| commands::Failure::Usage(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Point(a) => commands::point(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Front(a) => commands::front(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Validate(a) => commands::validate(a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
