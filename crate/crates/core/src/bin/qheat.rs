use std::path::PathBuf;

use clap::Parser;
use qheat::cli::{execute, Command, RunConfig};

/// Forward and inverse solvers for the q-heat equation.
#[derive(Parser)]
#[command(name = "qheat", version)]
struct Args {
    /// selftest, forward, inverse-source or inverse-initial
    command: String,
    /// Flat key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set q=0.3
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build(args: &Args) -> qheat::Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &args.config {
        config.merge_file(path)?;
    }
    for assignment in &args.set {
        config.apply_override(assignment)?;
    }
    config.command = Some(args.command.parse::<Command>()?);
    if let Some(out) = &args.out {
        config.out_path = Some(out.clone());
    }
    Ok(config)
}

fn main() {
    let args = Args::parse();
    let code = match build(&args) {
        Ok(config) => execute(&config),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
