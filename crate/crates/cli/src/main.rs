use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use specrecon_cli::config::{Command, RunConfig};
use specrecon_cli::run::run;

/// Inverse Sturm–Liouville reconstruction runs driven by a config file.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Overrides the `command` key of the config.
    command: Option<String>,
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var("SPECRECON_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SPECRECON_THREADS = '{value}' is not a positive integer"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = configure_threads().and_then(|()| {
        let mut cfg = RunConfig::from_path(&args.config).map_err(|e| e.to_string())?;
        if let Some(c) = &args.command {
            cfg.command = c.parse::<Command>().map_err(|e| e.to_string())?;
            cfg.validate().map_err(|e| e.to_string())?;
        }
        if let Some(out) = args.out {
            cfg.out = out;
        }
        if let Some(seed) = args.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    });
    match config {
        Ok(cfg) => ExitCode::from(run(&cfg, args.quiet) as u8),
        Err(e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
    }
}
