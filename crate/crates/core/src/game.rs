//! Stage game: payoffs, partner-selection rules, the two-action softmax
//! policy and the episodic REINFORCE update.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Logits are kept inside `[-LOGIT_BOUND, LOGIT_BOUND]` after every update.
pub const LOGIT_BOUND: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    C,
    D,
}

impl Action {
    pub fn is_cooperate(self) -> bool {
        self == Action::C
    }

    /// `C` with probability `x`, given a uniform draw `u` in `[0, 1)`.
    pub fn sample(x: f64, u: f64) -> Action {
        if u < x {
            Action::C
        } else {
            Action::D
        }
    }
}

/// Partner-selection rule applied after every round.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartnerRule {
    /// Out-for-Tat: keep the partner iff both cooperated.
    Oft,
    /// Reverse Out-for-Tat: keep the partner iff both defected.
    Roft,
    Stay,
    Switch,
}

impl PartnerRule {
    pub const ALL: [PartnerRule; 4] = [
        PartnerRule::Oft,
        PartnerRule::Roft,
        PartnerRule::Stay,
        PartnerRule::Switch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PartnerRule::Oft => "oft",
            PartnerRule::Roft => "roft",
            PartnerRule::Stay => "stay",
            PartnerRule::Switch => "switch",
        }
    }
}

impl fmt::Display for PartnerRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PartnerRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oft" => Ok(PartnerRule::Oft),
            "roft" => Ok(PartnerRule::Roft),
            "stay" => Ok(PartnerRule::Stay),
            "switch" => Ok(PartnerRule::Switch),
            other => Err(Error::config(format!("unknown partner rule `{other}`"))),
        }
    }
}

/// Game constants and learning hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffParams {
    pub b: f64,
    pub c: f64,
    /// Rounds per episode.
    pub horizon: usize,
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
}

impl Default for PayoffParams {
    fn default() -> Self {
        PayoffParams {
            b: 3.0,
            c: 0.1,
            horizon: 2,
            alpha: 0.01,
            beta: 0.0,
        }
    }
}

impl PayoffParams {
    pub fn new(b: f64, c: f64, horizon: usize, alpha: f64, beta: f64) -> Result<Self> {
        let p = PayoffParams {
            b,
            c,
            horizon,
            alpha,
            beta,
        };
        p.validate()?;
        Ok(p)
    }

    /// Checks `b > c > 0`, `H >= 1` and `alpha >= 0`.
    ///
    /// A zero learning rate is accepted so that frozen-population runs can be
    /// expressed with the same type.
    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.c.is_finite() && self.beta.is_finite()) {
            return Err(Error::config("payoff parameters must be finite"));
        }
        if !(self.b > self.c && self.c > 0.0) {
            return Err(Error::config(format!(
                "payoff requires b > c > 0, got b = {}, c = {}",
                self.b, self.c
            )));
        }
        if self.horizon == 0 {
            return Err(Error::config("episode horizon must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config(format!(
                "learning rate must be non-negative, got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Reward to the focal player.
pub fn payoff(focal: Action, opponent: Action, p: &PayoffParams) -> f64 {
    match (focal, opponent) {
        (Action::C, Action::C) => p.b,
        (Action::C, Action::D) => 0.0,
        (Action::D, Action::C) => p.b + p.c,
        (Action::D, Action::D) => p.c,
    }
}

/// Whether the focal agent keeps its current partner for the next round.
pub fn stay_decision(rule: PartnerRule, focal: Action, opponent: Action) -> bool {
    match rule {
        PartnerRule::Oft => focal == Action::C && opponent == Action::C,
        PartnerRule::Roft => focal == Action::D && opponent == Action::D,
        PartnerRule::Stay => true,
        PartnerRule::Switch => false,
    }
}

/// Cooperation probability of the softmax policy with logit `z = psi_C - psi_D`.
pub fn policy_from_logit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn logit_from_policy(x: f64) -> f64 {
    x.ln() - (-x).ln_1p()
}

/// Logit of `x`, with `x` first pulled inside the representable range.
pub fn clamped_logit_from_policy(x: f64) -> f64 {
    clamp_logit(logit_from_policy(x))
}

pub fn clamp_logit(z: f64) -> f64 {
    z.clamp(-LOGIT_BOUND, LOGIT_BOUND)
}

/// One focal-agent episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrajectory {
    /// `(focal, opponent)` actions per round.
    pub actions: Vec<(Action, Action)>,
    pub rewards: Vec<f64>,
    pub opponent_ids: Vec<usize>,
    /// `switches[h]` is true when the partner was replaced after round `h`.
    pub switches: Vec<bool>,
}

impl EpisodeTrajectory {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Checks the internal consistency of the record against `rule` and `p`.
    pub fn validate(&self, rule: PartnerRule, p: &PayoffParams) -> Result<()> {
        let h = self.actions.len();
        if self.rewards.len() != h || self.opponent_ids.len() != h {
            return Err(Error::Trajectory(format!(
                "{} actions, {} rewards, {} opponents",
                h,
                self.rewards.len(),
                self.opponent_ids.len()
            )));
        }
        if self.switches.len() + 1 != h.max(1) {
            return Err(Error::Trajectory(format!(
                "{} switch flags for {} rounds",
                self.switches.len(),
                h
            )));
        }
        for (round, (&(f, o), &r)) in self.actions.iter().zip(&self.rewards).enumerate() {
            if r != payoff(f, o, p) {
                return Err(Error::Trajectory(format!("reward mismatch in round {round}")));
            }
        }
        for (round, &switched) in self.switches.iter().enumerate() {
            let (f, o) = self.actions[round];
            if switched == stay_decision(rule, f, o) {
                return Err(Error::Trajectory(format!("switch flag mismatch in round {round}")));
            }
        }
        Ok(())
    }
}

/// Increment of the cooperation parameter `psi_C` over one episode,
/// `alpha * sum_h (R^h - beta)(1{a_h = C} - x)` with undiscounted
/// reward-to-go `R^h`.
///
/// The defection parameter moves by the negated amount, so the logit
/// `z = psi_C - psi_D` moves by twice this value.
pub fn reinforce_update(traj: &EpisodeTrajectory, x: f64, p: &PayoffParams) -> Result<f64> {
    if traj.rewards.len() != p.horizon || traj.actions.len() != p.horizon {
        return Err(Error::Trajectory(format!(
            "trajectory has {} rounds, horizon is {}",
            traj.rewards.len(),
            p.horizon
        )));
    }
    Ok(p.alpha * score_sum(traj.actions.iter().map(|a| a.0), &traj.rewards, x, p.beta))
}

/// `sum_h (R^h - beta)(1{a_h = C} - x)` for focal actions and per-round rewards.
pub(crate) fn score_sum(
    focal_actions: impl DoubleEndedIterator<Item = Action>,
    rewards: &[f64],
    x: f64,
    beta: f64,
) -> f64 {
    let mut to_go = 0.0;
    let mut total = 0.0;
    for (a, &r) in focal_actions.rev().zip(rewards.iter().rev()) {
        to_go += r;
        let score = if a.is_cooperate() { 1.0 - x } else { -x };
        total += (to_go - beta) * score;
    }
    total
}
