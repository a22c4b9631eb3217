use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::abm::SimConfig;
use crate::error::{Error, Result};
use crate::fpe::{FpeConfig, SdeConfig};
use crate::game::{PartnerRule, PayoffParams};
use crate::population::{Grid, InitSpec};
use crate::stationary::StationaryConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Abm,
    Fpe,
    Meanfield,
    Stationary,
    Compare,
    Verify,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "abm" => Mode::Abm,
            "fpe" => Mode::Fpe,
            "meanfield" => Mode::Meanfield,
            "stationary" => Mode::Stationary,
            "compare" => Mode::Compare,
            "verify" => Mode::Verify,
            other => return Err(Error::config(format!("unknown mode `{other}`"))),
        })
    }
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbmBlock {
    pub n_agents: usize,
    pub episodes: u64,
    pub snapshot_every: u64,
    #[serde(default = "one")]
    pub replicates: usize,
}

fn half() -> f64 {
    0.5
}

fn unit() -> f64 {
    1.0
}

fn twenty() -> usize {
    20
}

fn tenth() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpeBlock {
    /// Final time; in compare mode the ABM horizon is used instead.
    #[serde(default)]
    pub t_end: f64,
    #[serde(default = "half")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub drift_only: bool,
    #[serde(default = "unit")]
    pub max_dt: f64,
    #[serde(default = "twenty")]
    pub n_snapshots: usize,
    /// Optional particle ensemble run alongside the PDE.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particles: Option<ParticleBlock>,
}

impl Default for FpeBlock {
    fn default() -> Self {
        FpeBlock {
            t_end: 0.0,
            cfl_safety: half(),
            drift_only: false,
            max_dt: unit(),
            n_snapshots: twenty(),
            particles: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleBlock {
    pub n_particles: usize,
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldBlock {
    pub t_end: f64,
    #[serde(default = "tenth")]
    pub dt: f64,
    #[serde(default = "twenty")]
    pub n_snapshots: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryBlock {
    pub epsilon_schedule: Vec<f64>,
    pub damping: f64,
    pub max_iters: usize,
    pub tol_w1: f64,
}

impl Default for StationaryBlock {
    fn default() -> Self {
        let d = StationaryConfig::new(PartnerRule::Oft, PayoffParams::default(), Grid::default());
        StationaryBlock {
            epsilon_schedule: d.epsilon_schedule,
            damping: d.damping,
            max_iters: d.max_iters,
            tol_w1: d.tol_w1,
        }
    }
}

/// One experiment. Only the block of the selected mode is required; compare
/// mode needs `abm` and takes PDE settings from `fpe` when present.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub rule: PartnerRule,
    pub payoff: PayoffParams,
    pub init: InitSpec,
    #[serde(default)]
    pub grid: Grid,
    pub seed: u64,
    /// Reported time is `t * time_scale` (learning-rate scaled sweeps).
    #[serde(default = "unit")]
    pub time_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abm: Option<AbmBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fpe: Option<FpeBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meanfield: Option<MeanfieldBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<StationaryBlock>,
}

fn missing(mode: Mode, block: &str) -> Error {
    Error::config(format!("mode {mode:?} needs a [{block}] section"))
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::config(format!("invalid JSON config: {e}")))?
        } else {
            toml::from_str(text).map_err(|e| Error::config(format!("invalid TOML config: {e}")))?
        };
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.payoff.validate()?;
        self.init.validate()?;
        if !(self.time_scale > 0.0 && self.time_scale.is_finite()) {
            return Err(Error::config("time_scale must be positive"));
        }
        match self.mode {
            Mode::Abm => {
                self.sim_config()?.validate()?;
                if self.abm.as_ref().is_some_and(|a| a.replicates == 0) {
                    return Err(Error::config("replicates must be at least 1"));
                }
            }
            Mode::Fpe => self.fpe_config()?.validate()?,
            Mode::Meanfield => {
                let m = self.meanfield.as_ref().ok_or_else(|| missing(self.mode, "meanfield"))?;
                if !(m.t_end >= 0.0 && m.dt > 0.0) {
                    return Err(Error::config("meanfield needs t_end >= 0 and dt > 0"));
                }
            }
            Mode::Stationary => self.stationary_config()?.validate()?,
            Mode::Compare => {
                self.sim_config()?.validate()?;
                self.fpe_config()?.validate()?;
            }
            Mode::Verify => {}
        }
        Ok(())
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let a = self.abm.as_ref().ok_or_else(|| missing(self.mode, "abm"))?;
        Ok(SimConfig {
            n_agents: a.n_agents,
            episodes: a.episodes,
            rule: self.rule,
            payoff: self.payoff,
            init: self.init,
            seed: self.seed,
            snapshot_every: a.snapshot_every,
            grid: self.grid,
        })
    }

    /// PDE settings; in compare mode the horizon is the ABM's `E / N`.
    pub fn fpe_config(&self) -> Result<FpeConfig> {
        let block = match (self.mode, &self.fpe) {
            (_, Some(b)) => b.clone(),
            (Mode::Compare, None) => FpeBlock::default(),
            _ => return Err(missing(self.mode, "fpe")),
        };
        let t_end = if self.mode == Mode::Compare {
            self.sim_config()?.horizon_time()
        } else {
            block.t_end
        };
        Ok(FpeConfig {
            rule: self.rule,
            payoff: self.payoff,
            init: self.init,
            grid: self.grid,
            t_end,
            cfl_safety: block.cfl_safety,
            drift_only: block.drift_only,
            max_dt: block.max_dt,
            n_snapshots: block.n_snapshots,
        })
    }

    pub fn sde_config(&self) -> Option<SdeConfig> {
        let p = self.fpe.as_ref()?.particles.as_ref()?;
        Some(SdeConfig {
            n_particles: p.n_particles,
            dt: p.dt,
            seed: self.seed,
        })
    }

    pub fn stationary_config(&self) -> Result<StationaryConfig> {
        let s = self.stationary.as_ref().ok_or_else(|| missing(self.mode, "stationary"))?;
        Ok(StationaryConfig {
            rule: self.rule,
            payoff: self.payoff,
            grid: self.grid,
            init: self.init,
            epsilon_schedule: s.epsilon_schedule.clone(),
            damping: s.damping,
            max_iters: s.max_iters,
            tol_w1: s.tol_w1,
        })
    }

    /// Hex SHA-256 of the canonical JSON form (output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Desk-scale variant: 200 agents and at most 5 replicates, with the
    /// episode count adjusted so the simulated time `E / N` is unchanged.
    pub fn to_desk_scale(&self) -> Self {
        let mut c = self.clone();
        if let Some(a) = c.abm.as_mut() {
            let t = a.episodes as f64 / a.n_agents as f64;
            let every_t = a.snapshot_every as f64 / a.n_agents as f64;
            a.n_agents = DESK_AGENTS;
            a.episodes = (t * DESK_AGENTS as f64).round() as u64;
            a.snapshot_every = ((every_t * DESK_AGENTS as f64).round() as u64).max(1);
            a.replicates = a.replicates.min(DESK_REPLICATES);
        }
        if let Some(p) = c.fpe.as_mut().and_then(|f| f.particles.as_mut()) {
            p.n_particles = p.n_particles.min(DESK_PARTICLES);
        }
        c
    }
}

pub const DESK_AGENTS: usize = 200;
pub const DESK_REPLICATES: usize = 5;
pub const DESK_PARTICLES: usize = 100_000;
