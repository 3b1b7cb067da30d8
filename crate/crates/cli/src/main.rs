//! `zvlab`: run validation, simulation, transform construction and
//! transportation-cost checks from a TOML experiment file.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "zvlab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Override a configuration key, e.g. `--set harness.time_steps=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long)]
    seed: Option<u64>,
    /// Shorthand for `--set output.dir=PATH`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the model assumptions on a sampled box.
    Validate(Common),
    /// Simulate an ensemble of the original equation.
    Simulate(Common),
    /// Solve for `u`, build `Φ` and export the contraction history.
    Zvonkin(Common),
    /// Build the transform and run the configured harness checks.
    Tci(Common),
    /// Run only the discrete invariance trials.
    Invariance(Common),
}

fn configure_workers() -> Result<(), String> {
    let Ok(raw) = std::env::var("ZVLAB_WORKERS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| format!("ZVLAB_WORKERS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err("ZVLAB_WORKERS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_workers() {
        eprintln!("error: {e}");
        return ExitCode::from(commands::EXIT_USAGE);
    }
    let (common, run): (&Common, fn(&config::ExperimentConfig) -> commands::Outcome) = match &cli.command {
        Command::Validate(c) => (c, commands::validate),
        Command::Simulate(c) => (c, commands::simulate),
        Command::Zvonkin(c) => (c, commands::zvonkin),
        Command::Tci(c) => (c, commands::tci),
        Command::Invariance(c) => (c, commands::invariance),
    };
    let mut overrides = common.overrides.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("seed={s}"));
    }
    if let Some(o) = &common.out {
        overrides.push(format!("output.dir={}", toml::Value::String(o.display().to_string())));
    }
    let cfg = match config::load(&common.config, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_USAGE);
        }
    };
    match run(&cfg) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
