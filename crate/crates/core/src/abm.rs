//! Agent-based ground truth.
//!
//! Each episode picks a focal agent uniformly at random. It plays `H` rounds
//! against opponents drawn uniformly from the rest of the population (never
//! itself), with the partner replaced after each round whenever the partner
//! rule says so, and then applies the REINFORCE update to its own logit.
//! Opponents never learn.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    clamp_logit, clamped_logit_from_policy, payoff, policy_from_logit, score_sum, stay_decision, Action,
    EpisodeTrajectory, PartnerRule, PayoffParams,
};
use crate::par::{self, Execution};
use crate::population::{empirical_histogram, Density, Grid, InitSpec};
use crate::rng::{self, SimRng};
use crate::snapshot::{episode_schedule, Snapshot};
use crate::stats::SampleMoments;

/// Population of single-logit softmax agents with its random stream.
#[derive(Clone, Debug)]
pub struct AgentPopulation {
    logits: Vec<f64>,
    policies: Vec<f64>,
    rng: SimRng,
}

impl AgentPopulation {
    pub fn from_logits(logits: Vec<f64>, rng: SimRng) -> Result<Self> {
        if logits.len() < 2 {
            return Err(Error::config(format!(
                "population needs at least 2 agents, got {}",
                logits.len()
            )));
        }
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::config("population logits must be finite"));
        }
        let logits: Vec<f64> = logits.into_iter().map(clamp_logit).collect();
        let policies = logits.iter().map(|&z| policy_from_logit(z)).collect();
        Ok(AgentPopulation { logits, policies, rng })
    }

    /// `n` agents with policies drawn from `init` on the init stream of
    /// `seed`; episodes then use the episode stream.
    pub fn sample(n: usize, init: &InitSpec, seed: u64) -> Result<Self> {
        init.validate()?;
        let mut init_rng = rng::stream(seed, rng::streams::INIT);
        let logits = (0..n)
            .map(|_| clamped_logit_from_policy(init.sample(&mut init_rng)))
            .collect();
        AgentPopulation::from_logits(logits, rng::stream(seed, rng::streams::EPISODES))
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn policies(&self) -> &[f64] {
        &self.policies
    }

    /// Adds `delta` to agent `i`'s logit (clamped).
    pub fn nudge(&mut self, i: usize, delta: f64) {
        let z = clamp_logit(self.logits[i] + delta);
        self.logits[i] = z;
        self.policies[i] = policy_from_logit(z);
    }

    fn draw_other(&mut self, focal: usize) -> usize {
        let j = self.rng.random_range(0..(self.logits.len() as u64 - 1)) as usize;
        if j >= focal {
            j + 1
        } else {
            j
        }
    }

    pub fn snapshot(&self, t: f64, grid: Grid) -> Result<Snapshot> {
        let stats: SampleMoments = self.policies.iter().copied().collect();
        let n = stats.count();
        Ok(Snapshot {
            t,
            density: empirical_histogram(&self.logits, grid)?,
            mean: stats.mean(),
            // population (not sample) variance of the policies
            variance: stats.variance() * (n - 1.0) / n,
        })
    }
}

/// Plays one episode for a focal agent of policy `x`, with `draw` supplying
/// fresh opponents as `(id, policy)`.
fn play_episode<R: Rng + ?Sized>(
    rng: &mut R,
    x: f64,
    rule: PartnerRule,
    p: &PayoffParams,
    mut draw: impl FnMut(&mut R) -> (usize, f64),
) -> EpisodeTrajectory {
    let h = p.horizon;
    let mut traj = EpisodeTrajectory {
        actions: Vec::with_capacity(h),
        rewards: Vec::with_capacity(h),
        opponent_ids: Vec::with_capacity(h),
        switches: Vec::with_capacity(h.saturating_sub(1)),
    };
    let (mut opp, mut y) = draw(rng);
    for round in 0..h {
        let focal_a = Action::sample(x, rng.random());
        let opp_a = Action::sample(y, rng.random());
        traj.actions.push((focal_a, opp_a));
        traj.rewards.push(payoff(focal_a, opp_a, p));
        traj.opponent_ids.push(opp);
        if round + 1 < h {
            let stay = stay_decision(rule, focal_a, opp_a);
            traj.switches.push(!stay);
            if !stay {
                (opp, y) = draw(rng);
            }
        }
    }
    traj
}

/// Plays one episode for `focal` against the rest of `pop`.
pub fn run_episode(
    pop: &mut AgentPopulation,
    focal: usize,
    rule: PartnerRule,
    p: &PayoffParams,
) -> Result<EpisodeTrajectory> {
    if pop.len() < 2 {
        return Err(Error::config("an episode needs at least 2 agents"));
    }
    if focal >= pop.len() {
        return Err(Error::config(format!("focal index {focal} out of range")));
    }
    let x = pop.policies[focal];
    // The opponent draw needs the population's own stream, so take it out
    // for the duration of the episode.
    let mut rng = pop.rng.clone();
    let traj = play_episode(&mut rng, x, rule, p, |r| {
        std::mem::swap(&mut pop.rng, r);
        let j = pop.draw_other(focal);
        std::mem::swap(&mut pop.rng, r);
        (j, pop.policies[j])
    });
    pop.rng = rng;
    Ok(traj)
}

/// Agent-based training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_agents: usize,
    pub episodes: u64,
    pub rule: PartnerRule,
    pub payoff: PayoffParams,
    pub init: InitSpec,
    pub seed: u64,
    /// Episodes between snapshots (plus geometric early snapshots).
    pub snapshot_every: u64,
    #[serde(default)]
    pub grid: Grid,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.payoff.validate()?;
        self.init.validate()?;
        if self.n_agents < 2 {
            return Err(Error::config("n_agents must be at least 2"));
        }
        if self.episodes == 0 {
            return Err(Error::config("episodes must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::config("snapshot_every must be at least 1"));
        }
        Ok(())
    }

    /// Simulation time `episodes / n_agents` at the end of the run.
    pub fn horizon_time(&self) -> f64 {
        self.episodes as f64 / self.n_agents as f64
    }
}

/// Output of a single training run.
#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub snapshots: Vec<Snapshot>,
    pub final_logits: Vec<f64>,
}

/// Runs `config.episodes` episodes, recording snapshots on the schedule of
/// [`episode_schedule`].
pub fn train(config: &SimConfig) -> Result<TrainOutput> {
    config.validate()?;
    let mut pop = AgentPopulation::sample(config.n_agents, &config.init, config.seed)?;
    let n = pop.len() as u64;
    let schedule = episode_schedule(config.episodes, config.snapshot_every);
    let p = &config.payoff;
    let mut snapshots = Vec::with_capacity(schedule.len());
    let mut done = 0u64;
    for &target in &schedule {
        while done < target {
            let focal = pop.rng.random_range(0..n) as usize;
            let x = pop.policies[focal];
            let traj = run_episode(&mut pop, focal, config.rule, p)?;
            let dpsi = p.alpha * score_sum(traj.actions.iter().map(|a| a.0), &traj.rewards, x, p.beta);
            // z = psi_C - psi_D moves by twice the psi_C increment
            pop.nudge(focal, 2.0 * dpsi);
            done += 1;
        }
        snapshots.push(pop.snapshot(done as f64 / n as f64, config.grid)?);
    }
    Ok(TrainOutput {
        snapshots,
        final_logits: pop.logits,
    })
}

/// Output of [`replicate`]: every run plus the cell-wise average.
#[derive(Clone, Debug)]
pub struct ReplicateOutput {
    pub runs: Vec<TrainOutput>,
    pub averaged: Vec<Snapshot>,
}

/// Independent runs with seeds derived from `config.seed`, averaged
/// snapshot-by-snapshot. Run `r` uses [`rng::replicate_seed`]`(seed, r)`.
pub fn replicate(config: &SimConfig, n_runs: usize, exec: Execution) -> Result<ReplicateOutput> {
    if n_runs == 0 {
        return Err(Error::config("n_runs must be at least 1"));
    }
    config.validate()?;
    let runs = par::map_range(exec, n_runs, |r| {
        let cfg = SimConfig {
            seed: rng::replicate_seed(config.seed, r as u64),
            ..config.clone()
        };
        train(&cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let n_snap = runs[0].snapshots.len();
    let mut averaged = Vec::with_capacity(n_snap);
    for s in 0..n_snap {
        let at: Vec<&Snapshot> = runs.iter().map(|r| &r.snapshots[s]).collect();
        let densities: Vec<Density> = at.iter().map(|s| s.density.clone()).collect();
        let k = at.len() as f64;
        let mean = at.iter().map(|s| s.mean).sum::<f64>() / k;
        let second = at.iter().map(|s| s.variance + s.mean * s.mean).sum::<f64>() / k;
        averaged.push(Snapshot {
            t: at[0].t,
            density: Density::average(&densities)?,
            mean,
            variance: (second - mean * mean).max(0.0),
        });
    }
    Ok(ReplicateOutput { runs, averaged })
}

/// Empirical statistics of the per-episode increment of `psi_C`.
#[derive(Clone, Copy, Debug)]
pub struct UpdateStats {
    pub episodes: u64,
    pub mean: f64,
    pub variance: f64,
    pub se_mean: f64,
    pub se_variance: f64,
}

/// Number of independent Monte Carlo streams; fixed so results do not depend
/// on the thread count.
const MC_CHUNKS: u64 = 64;

/// Plays `episodes` episodes for a focal agent of fixed policy `x` against a
/// frozen opponent pool (the focal agent is not part of the pool) and
/// collects the `psi_C` increments. Nothing is updated.
pub fn frozen_update_stats(
    pool: &[f64],
    x: f64,
    rule: PartnerRule,
    p: &PayoffParams,
    episodes: u64,
    seed: u64,
    exec: Execution,
) -> Result<UpdateStats> {
    if pool.is_empty() {
        return Err(Error::config("opponent pool is empty"));
    }
    p.validate()?;
    let n = pool.len() as u64;
    let parts = par::map_range(exec, MC_CHUNKS as usize, |c| {
        let c = c as u64;
        let count = episodes / MC_CHUNKS + u64::from(c < episodes % MC_CHUNKS);
        let mut r = rng::stream(seed, rng::streams::MONTE_CARLO_BASE + c);
        let mut acc = SampleMoments::default();
        for _ in 0..count {
            let traj = play_episode(&mut r, x, rule, p, |r| {
                let j = r.random_range(0..n) as usize;
                (j, pool[j])
            });
            acc.push(p.alpha * score_sum(traj.actions.iter().map(|a| a.0), &traj.rewards, x, p.beta));
        }
        acc
    });
    let total = parts
        .iter()
        .fold(SampleMoments::default(), |acc, s| acc.merge(s));
    Ok(UpdateStats {
        episodes,
        mean: total.mean(),
        variance: total.variance(),
        se_mean: total.std_error_mean(),
        se_variance: total.std_error_variance(),
    })
}
