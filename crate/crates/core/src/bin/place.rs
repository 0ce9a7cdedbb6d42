//! `place <config> [--mode M] [--seed S] [--out DIR]`
//!
//! Exit status: 0 on success, 1 for bad input, 2 when the computation fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sensor_place::cli_io::{run_experiment, ExperimentConfig, Mode};

#[derive(Parser, Debug)]
#[command(name = "place", version, about = "Place circular sensors in a polygon")]
struct Args {
    /// Experiment config (`key = value` lines).
    config: PathBuf,
    /// OPTIMIZE, DISTANCE_FIELD, GRADIENT_CHECK or EPSILON_SWEEP.
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let run = || -> sensor_place::Result<()> {
        let mut cfg = ExperimentConfig::from_file(&args.config)?;
        if let Some(mode) = args.mode {
            cfg.mode = mode;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &args.out {
            cfg.out = out.clone();
        }
        let manifest = run_experiment(&cfg)?;
        println!(
            "{}",
            cfg.out
                .join(manifest.artifacts.last().expect("manifest is listed"))
                .display()
        );
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
