//! Stationary solutions of the Fokker-Planck equation.
//!
//! For a frozen trial density `eta` the stationary no-flux equation is a
//! linear ODE whose normalized solution is
//! `w(x) = exp(int_0^x 2A/(B^2 + eps)) / (B^2 + eps)`. A fixed point of
//! `eta -> w/int w` solves the regularized nonlocal problem. We iterate with
//! damping and walk `eps` down a schedule, warm-starting each stage.

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fpe::{coefficients, FpeCoefficients};
use crate::game::{PartnerRule, PayoffParams};
use crate::population::{init_density, wasserstein1, Density, Grid, InitSpec};

fn default_schedule() -> Vec<f64> {
    vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4]
}

fn default_damping() -> f64 {
    0.5
}

fn default_max_iters() -> usize {
    20_000
}

fn default_tol() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryConfig {
    pub rule: PartnerRule,
    pub payoff: PayoffParams,
    #[serde(default)]
    pub grid: Grid,
    /// Starting trial density.
    #[serde(default = "uniform_init")]
    pub init: InitSpec,
    #[serde(default = "default_schedule")]
    pub epsilon_schedule: Vec<f64>,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol_w1: f64,
}

fn uniform_init() -> InitSpec {
    InitSpec::Uniform
}

impl StationaryConfig {
    pub fn new(rule: PartnerRule, payoff: PayoffParams, grid: Grid) -> Self {
        StationaryConfig {
            rule,
            payoff,
            grid,
            init: uniform_init(),
            epsilon_schedule: default_schedule(),
            damping: default_damping(),
            max_iters: default_max_iters(),
            tol_w1: default_tol(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.payoff.validate()?;
        self.init.validate()?;
        if self.payoff.horizon != 2 {
            return Err(Error::config("the stationary problem needs H = 2"));
        }
        let s = &self.epsilon_schedule;
        if s.is_empty() || s.iter().any(|&e| !(e > 0.0)) || s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("epsilon schedule must be positive and strictly decreasing"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("damping must lie in (0, 1]"));
        }
        if !(self.tol_w1 > 0.0) || self.max_iters == 0 {
            return Err(Error::config("tol_w1 and max_iters must be positive"));
        }
        Ok(())
    }
}

/// Normalized stationary solution of the linear problem with coefficients
/// frozen at `eta`.
pub fn fixed_point_map(eta: &Density, epsilon: f64, p: &PayoffParams, rule: PartnerRule) -> Result<Density> {
    let coeffs = coefficients(rule, eta, p, false)?;
    stationary_of(&coeffs, epsilon, eta.grid())
}

/// `w / int w` for given coefficients, accumulated in log space.
pub fn stationary_of(coeffs: &FpeCoefficients, epsilon: f64, grid: Grid) -> Result<Density> {
    if !(epsilon > 0.0) {
        return Err(Error::config("epsilon must be positive"));
    }
    let dx = grid.width();
    let g: Vec<f64> = coeffs
        .a
        .iter()
        .zip(&coeffs.b2)
        .map(|(a, b2)| 2.0 * a / (b2 + epsilon))
        .collect();
    // exponent at the first centre; the common offset cancels anyway
    let mut psi = g[0] * 0.5 * dx;
    let mut log_w = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        if i > 0 {
            psi += 0.5 * dx * (g[i - 1] + g[i]);
        }
        log_w.push(psi - (coeffs.b2[i] + epsilon).ln());
    }
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::numerical(format!(
            "stationary exponent overflowed at epsilon = {epsilon}"
        )));
    }
    let weights = log_w.iter().map(|l| (l - top).exp()).collect();
    Density::from_weights(grid, weights, 0.0, 0.0)
}

/// Test functions for the weak residual: `phi_k'(x) = x(1-x) x^k`,
/// `k = 0..=3` (so `phi_k` is a polynomial of degree `k + 3 <= 6` with
/// `phi_k'(0) = phi_k'(1) = 0`), each scaled so `sup |phi_k''| = 1`.
pub const TEST_FUNCTIONS: usize = 4;

fn test_function(k: usize) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
    let kf = k as i32;
    let d1 = move |x: f64| x * (1.0 - x) * x.powi(kf);
    let d2 = move |x: f64| (kf + 1) as f64 * x.powi(kf) - (kf + 2) as f64 * x.powi(kf + 1);
    let scale = (0..=10_000)
        .map(|i| d2(i as f64 / 10_000.0).abs())
        .fold(0.0, f64::max);
    (move |x| d1(x) / scale, move |x| d2(x) / scale)
}

/// Largest `|int [A phi' + 1/2 (B^2 + eps) phi''] d rho|` over the test
/// family, with `A`, `B^2` evaluated at `rho` itself. `eps = 0` gives the
/// residual of the unregularized stationary equation.
pub fn weak_residual(rho: &Density, epsilon: f64, p: &PayoffParams, rule: PartnerRule) -> Result<f64> {
    let coeffs = coefficients(rule, rho, p, false)?;
    let grid = rho.grid();
    let mut worst = 0.0f64;
    for k in 0..TEST_FUNCTIONS {
        let (d1, d2) = test_function(k);
        let r: f64 = rho
            .cell_mass()
            .iter()
            .enumerate()
            .map(|(i, &m)| {
                let x = grid.center(i);
                m * (coeffs.a[i] * d1(x) + 0.5 * (coeffs.b2[i] + epsilon) * d2(x))
            })
            .sum();
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

#[derive(Clone, Debug, Serialize)]
pub struct EpsilonStage {
    pub epsilon: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `W1(eta, F[eta])` of the final iterate.
    pub fixed_point_w1: f64,
    /// Weak residual of the regularized equation (solver accuracy).
    pub residual_regularized: f64,
    /// Weak residual of the unregularized equation.
    pub residual: f64,
    /// Mass within 5% of either boundary.
    pub boundary_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StationaryReport {
    pub rule: PartnerRule,
    pub stages: Vec<EpsilonStage>,
    /// Set when continuation stopped before the end of the schedule.
    pub stopped_at: Option<f64>,
}

impl StationaryReport {
    pub fn last(&self) -> Option<&EpsilonStage> {
        self.stages.last()
    }

    pub fn all_converged(&self) -> bool {
        self.stopped_at.is_none() && self.stages.iter().all(|s| s.converged)
    }
}

/// Damped fixed-point iteration with epsilon continuation. Returns the last
/// iterate even when some stage did not converge (the report says so).
pub fn solve_stationary(config: &StationaryConfig) -> Result<(Density, StationaryReport)> {
    config.validate()?;
    let p = &config.payoff;
    let lambda = config.damping;
    let mut eta = init_density(&config.init, config.grid)?;
    let mut stages = Vec::with_capacity(config.epsilon_schedule.len());
    let mut stopped_at = None;
    'schedule: for &eps in &config.epsilon_schedule {
        let mut iterations = 0;
        let mut converged = false;
        let mut gap = f64::INFINITY;
        while iterations < config.max_iters {
            let image = match fixed_point_map(&eta, eps, p, config.rule) {
                Ok(d) => d,
                Err(Error::Numerical(msg)) => {
                    warn!("stopping continuation: {msg}");
                    stopped_at = Some(eps);
                    break 'schedule;
                }
                Err(e) => return Err(e),
            };
            gap = wasserstein1(&eta, &image)?;
            iterations += 1;
            if gap < config.tol_w1 {
                converged = true;
                break;
            }
            eta = eta.mix(&image, lambda)?;
        }
        if !converged {
            warn!("epsilon = {eps}: no convergence after {iterations} iterations (W1 gap {gap:e})");
        }
        let stage = EpsilonStage {
            epsilon: eps,
            iterations,
            converged,
            fixed_point_w1: gap,
            residual_regularized: weak_residual(&eta, eps, p, config.rule)?,
            residual: weak_residual(&eta, 0.0, p, config.rule)?,
            boundary_mass: eta.boundary_fraction(0.05),
        };
        info!("{stage:?}");
        stages.push(stage);
    }
    Ok((
        eta,
        StationaryReport {
            rule: config.rule,
            stages,
            stopped_at,
        },
    ))
}
