//! Experiment orchestration: configuration files, pipeline selection and
//! the on-disk output schema.
//!
//! Every run directory gets `meta.json` (resolved config, its SHA-256, seed,
//! crate version, wall time) and, per pipeline, `snapshots.csv` with columns
//! `t,bin_center,density` plus `atoms.json` for boundary point masses.
//! Compare mode writes one sub-directory per pipeline (`abm/`, `fpe/`,
//! `meanfield/`) and a top-level `compare.csv`.

mod config;
mod figures;
pub mod output;
mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::Serialize;
use serde_json::json;

pub use config::{
    AbmBlock, ExperimentConfig, FpeBlock, MeanfieldBlock, Mode, ParticleBlock, StationaryBlock, DESK_AGENTS,
    DESK_PARTICLES, DESK_REPLICATES,
};
pub use figures::{figure_config, figure_configs, Scale};
pub use output::CompareRow;
pub use verify::{run_checks, CheckResult};

use crate::abm::replicate;
use crate::error::{Error, Result};
use crate::fpe::{sde_particles, solve_fpe_at};
use crate::game::{PartnerRule, PayoffParams};
use crate::meanfield;
use crate::par::Execution;
use crate::population::{init_density, wasserstein1, Grid};
use crate::snapshot::{time_schedule, Snapshot};
use crate::stationary::solve_stationary;

/// The settings two snapshot series must share to be comparable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Settings {
    pub rule: PartnerRule,
    pub payoff: PayoffParams,
    pub grid: Grid,
}

impl Settings {
    pub fn of(config: &ExperimentConfig) -> Self {
        Settings {
            rule: config.rule,
            payoff: config.payoff,
            grid: config.grid,
        }
    }
}

/// Snapshots tagged with the settings that produced them.
#[derive(Clone, Debug)]
pub struct Series {
    pub settings: Settings,
    pub snapshots: Vec<Snapshot>,
}

/// Row-by-row comparison of the three pipelines. Refuses series produced
/// under different settings or at different times.
pub fn compare_series(abm: &Series, fpe: &Series, mf: &Series) -> Result<Vec<CompareRow>> {
    for other in [fpe, mf] {
        if other.settings != abm.settings {
            return Err(Error::config(format!(
                "cannot compare runs with different settings: {:?} vs {:?}",
                abm.settings, other.settings
            )));
        }
        if other.snapshots.len() != abm.snapshots.len() {
            return Err(Error::Trajectory("snapshot counts differ".into()));
        }
    }
    abm.snapshots
        .iter()
        .zip(&fpe.snapshots)
        .zip(&mf.snapshots)
        .map(|((a, f), m)| {
            if (a.t - f.t).abs() > 1e-9 * a.t.max(1.0) || (a.t - m.t).abs() > 1e-9 * a.t.max(1.0) {
                return Err(Error::Trajectory(format!("snapshot times differ: {} / {} / {}", a.t, f.t, m.t)));
            }
            Ok(CompareRow {
                t: a.t,
                w1_abm_fpe: wasserstein1(&a.density, &f.density)?,
                w1_fpe_meanfield: wasserstein1(&f.density, &m.density)?,
                mean_abm: a.mean,
                mean_fpe: f.mean,
                var_abm: a.variance,
                var_fpe: f.variance,
            })
        })
        .collect()
}

/// What a run produced.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub config_hash: String,
    pub files: Vec<PathBuf>,
    pub compare: Vec<CompareRow>,
    pub checks: Vec<CheckResult>,
}

/// Mean-field step for a horizon: fine enough for RK4, coarse enough that
/// long learning-rate-scaled runs stay cheap (step halving refines it).
fn meanfield_dt(t_end: f64) -> f64 {
    (t_end / 2000.0).max(0.1)
}

/// Runs `config` and writes its outputs to `out` (or the config's
/// `output_dir`).
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    run_with(config, out, Execution::default())
}

pub fn run_with(config: &ExperimentConfig, out: Option<&Path>, exec: Execution) -> Result<RunSummary> {
    config.validate()?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| Error::config("no output directory given"))?;
    let hash = config.hash();
    let started = Instant::now();
    let scale = config.time_scale;
    let mut summary = RunSummary {
        out_dir: out_dir.clone(),
        config_hash: hash.clone(),
        files: Vec::new(),
        compare: Vec::new(),
        checks: Vec::new(),
    };
    let mut diagnostics = serde_json::Value::Null;
    info!("running {:?} ({}) into {}", config.mode, config.rule, out_dir.display());

    match config.mode {
        Mode::Abm => {
            let sim = config.sim_config()?;
            let reps = config.abm.as_ref().map_or(1, |a| a.replicates);
            let result = replicate(&sim, reps, exec)?;
            output::write_snapshots(&out_dir, &result.averaged, scale, &hash)?;
            summary.files.push(out_dir.join("snapshots.csv"));
        }
        Mode::Fpe => {
            let cfg = config.fpe_config()?;
            let (snaps, diag) = solve_fpe_at(&cfg, &cfg.times())?;
            output::write_snapshots(&out_dir, &snaps, scale, &hash)?;
            summary.files.push(out_dir.join("snapshots.csv"));
            diagnostics = json!({ "fpe": diag });
            if let Some(sde) = config.sde_config() {
                let dir = out_dir.join("particles");
                let ps = sde_particles(&cfg, &sde, &cfg.times(), exec)?;
                output::write_snapshots(&dir, &ps, scale, &hash)?;
                summary.files.push(dir.join("snapshots.csv"));
            }
        }
        Mode::Meanfield => {
            let m = config.meanfield.as_ref().expect("validated");
            let rho0 = init_density(&config.init, config.grid)?;
            let times = time_schedule(m.t_end, m.n_snapshots);
            let snaps = meanfield::evolve(config.rule, &rho0, &config.payoff, &times, m.dt)?;
            output::write_snapshots(&out_dir, &snaps, scale, &hash)?;
            summary.files.push(out_dir.join("snapshots.csv"));
        }
        Mode::Stationary => {
            let (density, report) = solve_stationary(&config.stationary_config()?)?;
            let snap = Snapshot::of_density(f64::INFINITY, density);
            output::write_snapshots(&out_dir, &[snap], 1.0, &hash)?;
            let path = out_dir.join("residual.json");
            output::write_json(&path, &json!({ "config_hash": hash, "report": report }))?;
            summary.files.extend([out_dir.join("snapshots.csv"), path]);
            diagnostics = json!({ "all_converged": report.all_converged() });
        }
        Mode::Compare => {
            let sim = config.sim_config()?;
            let reps = config.abm.as_ref().map_or(1, |a| a.replicates);
            let abm = replicate(&sim, reps, exec)?.averaged;
            let times: Vec<f64> = abm.iter().map(|s| s.t).collect();
            let fcfg = config.fpe_config()?;
            let (fpe, diag) = solve_fpe_at(&fcfg, &times)?;
            let rho0 = init_density(&config.init, config.grid)?;
            let mf = meanfield::evolve(
                config.rule,
                &rho0,
                &config.payoff,
                &times,
                meanfield_dt(sim.horizon_time()),
            )?;
            let settings = Settings::of(config);
            let series = |s: Vec<Snapshot>| Series {
                settings: settings.clone(),
                snapshots: s,
            };
            let (abm, fpe, mf) = (series(abm), series(fpe), series(mf));
            summary.compare = compare_series(&abm, &fpe, &mf)?;
            for (name, s) in [("abm", &abm), ("fpe", &fpe), ("meanfield", &mf)] {
                let dir = out_dir.join(name);
                output::write_snapshots(&dir, &s.snapshots, scale, &hash)?;
                summary.files.push(dir.join("snapshots.csv"));
            }
            let mut rows = summary.compare.clone();
            rows.iter_mut().for_each(|r| r.t *= scale);
            let path = out_dir.join("compare.csv");
            output::write_atomic(&path, output::compare_csv(&rows, &hash).as_bytes())?;
            summary.files.push(path);
            diagnostics = json!({ "fpe": diag });
        }
        Mode::Verify => {
            summary.checks = run_checks(config.seed)?;
            let path = out_dir.join("verify.json");
            output::write_json(&path, &json!({ "config_hash": hash, "checks": summary.checks }))?;
            summary.files.push(path);
        }
    }

    let meta = json!({
        "config": config,
        "config_hash": hash,
        "seed": config.seed,
        "mode": config.mode,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
        "diagnostics": diagnostics,
    });
    let meta_path = out_dir.join("meta.json");
    output::write_json(&meta_path, &meta)?;
    summary.files.push(meta_path);

    let failed: Vec<&str> = summary.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        return Err(Error::numerical(format!("verification failed: {}", failed.join(", "))));
    }
    Ok(summary)
}
