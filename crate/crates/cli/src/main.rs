use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use macc_cli::{config_from_manifest, run, RunConfig};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    // `macc --manifest <file> [--out <dir>]` reruns a recorded configuration
    let args: Vec<String> = std::env::args().collect();
    let config = match args.iter().position(|a| a == "--manifest") {
        Some(i) => {
            let Some(path) = args.get(i + 1) else {
                eprintln!("error: --manifest needs a path");
                return ExitCode::from(2);
            };
            let out = args
                .iter()
                .position(|a| a == "--out")
                .and_then(|j| args.get(j + 1))
                .map(PathBuf::from);
            match config_from_manifest(path.as_ref(), out) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
        }
        None => RunConfig::parse(),
    };

    match run(&config) {
        Ok(outcome) => {
            for f in &outcome.outputs {
                println!("{}", config.out.join(f).display());
            }
            match outcome.bench_failure {
                Some(code) => ExitCode::from(code as u8),
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
