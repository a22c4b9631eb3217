//! `pdlab`: run experiments from a config file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure
//! (including a failed `verify`), 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pd_dynamics::experiment::{self, figure_configs, ExperimentConfig, Mode, Scale};
use pd_dynamics::Error;

#[derive(Parser, Debug)]
#[command(name = "pdlab", version, about = "Partner-selection learning dynamics experiments")]
struct Cli {
    /// Experiment config (TOML, or JSON).
    #[arg(long, required_unless_present = "emit_configs")]
    config: Option<PathBuf>,
    /// Override the config's mode.
    #[arg(long)]
    mode: Option<Mode>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shrink to 200 agents and 5 replicates, keeping simulated time.
    #[arg(long)]
    desk_scale: bool,
    /// Write the bundled figure configs to DIR/full and DIR/desk and exit.
    #[arg(long, value_name = "DIR", conflicts_with = "config")]
    emit_configs: Option<PathBuf>,
}

fn emit(dir: &std::path::Path) -> Result<(), Error> {
    for (sub, scale) in [("full", Scale::Full), ("desk", Scale::Desk)] {
        for (name, cfg) in figure_configs(scale) {
            let path = dir.join(sub).join(format!("{name}.toml"));
            experiment::output::write_atomic(&path, cfg.to_toml()?.as_bytes())?;
        }
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), Error> {
    if let Some(dir) = &cli.emit_configs {
        return emit(dir);
    }
    let path = cli.config.expect("clap enforces --config");
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(mode) = cli.mode {
        cfg.mode = mode;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.desk_scale {
        cfg = cfg.to_desk_scale();
    }
    let summary = experiment::run(&cfg, cli.out.as_deref())?;
    for c in &summary.checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for r in &summary.compare {
        println!("t={:<10} W1(abm,fpe)={:.4} W1(fpe,mf)={:.4}", r.t, r.w1_abm_fpe, r.w1_fpe_meanfield);
    }
    println!("wrote {} ({})", summary.out_dir.display(), summary.config_hash);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
