//! Nonlocal Fokker-Planck equation for the policy density.
//!
//! `d_t rho = -d_x(A rho) + 1/2 d_xx(B^2 rho)` with
//! `A = 2 alpha x^2 (1-x)^2 dG + 2 x (1-x)(1-2x) Sigma` and
//! `B^2 = 4 x^2 (1-x)^2 Sigma`, where `dG` and `Sigma` depend on the moments
//! of the current density. Solved by an explicit finite-volume scheme with
//! upwind advection, centred diffusion and no-flux boundaries. The particle
//! ensemble of the matching SDE serves as an independent cross-check.

use log::{debug, warn};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{PartnerRule, PayoffParams};
use crate::par::{self, Execution};
use crate::population::{histogram_of_policies, init_density, Density, Grid, InitSpec, MomentVector};
use crate::reward::{delta_g, sigma_cc, DEFAULT_MOMENT_ORDER};
use crate::rng::{self, SimRng};
use crate::snapshot::{time_schedule, Snapshot};

/// Drift and squared diffusion at the cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct FpeCoefficients {
    pub a: Vec<f64>,
    pub b2: Vec<f64>,
}

fn moment_order(p: &PayoffParams) -> usize {
    DEFAULT_MOMENT_ORDER.max(2 * p.horizon + 2)
}

/// `(A(x), B^2(x))` at a single point for population moments `m`.
pub fn coefficients_at(
    rule: PartnerRule,
    x: f64,
    m: &MomentVector,
    p: &PayoffParams,
    drift_only: bool,
) -> Result<(f64, f64)> {
    let w = x * (1.0 - x);
    let dg = delta_g(rule, p.horizon, x, m, p)?;
    let sigma = if drift_only { 0.0 } else { sigma_cc(rule, x, m, p)? };
    Ok((
        2.0 * p.alpha * w * w * dg + 2.0 * w * (1.0 - 2.0 * x) * sigma,
        4.0 * w * w * sigma,
    ))
}

fn check_horizon(p: &PayoffParams, drift_only: bool) -> Result<()> {
    if !drift_only && p.horizon != 2 {
        return Err(Error::config(format!(
            "the diffusion coefficient is only available for H = 2, got H = {} (use drift_only)",
            p.horizon
        )));
    }
    Ok(())
}

/// Coefficients on `d`'s grid, from the moments of `d` itself.
pub fn coefficients(rule: PartnerRule, d: &Density, p: &PayoffParams, drift_only: bool) -> Result<FpeCoefficients> {
    coefficients_with(rule, d, p, drift_only, Execution::Sequential)
}

pub fn coefficients_with(
    rule: PartnerRule,
    d: &Density,
    p: &PayoffParams,
    drift_only: bool,
    exec: Execution,
) -> Result<FpeCoefficients> {
    check_horizon(p, drift_only)?;
    let m = d.moments(moment_order(p));
    if !m.is_feasible(1e-9) {
        return Err(Error::numerical("density produced infeasible moments"));
    }
    let centers = d.grid().centers();
    let vals = par::map_slice(exec, &centers, |&x| coefficients_at(rule, x, &m, p, drift_only));
    let mut a = Vec::with_capacity(vals.len());
    let mut b2 = Vec::with_capacity(vals.len());
    for v in vals {
        let (ai, bi) = v?;
        a.push(ai);
        b2.push(bi);
    }
    Ok(FpeCoefficients { a, b2 })
}

/// Largest stable explicit step for `coeffs` on `grid` at safety factor 1.
pub fn cfl_limit(coeffs: &FpeCoefficients, grid: Grid) -> f64 {
    let dx = grid.width();
    let a_max = coeffs.a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let b_max = coeffs.b2.iter().fold(0.0f64, |m, v| m.max(*v));
    let mut limit = f64::INFINITY;
    if a_max > 0.0 {
        limit = limit.min(dx / a_max);
    }
    if b_max > 0.0 {
        limit = limit.min(dx * dx / b_max);
    }
    limit
}

/// One explicit finite-volume step. Boundary atoms are untouched (both
/// coefficients vanish there).
pub fn fpe_step(d: &Density, coeffs: &FpeCoefficients, dt: f64) -> Result<Density> {
    let grid = d.grid();
    let n = grid.n_cells();
    if coeffs.a.len() != n || coeffs.b2.len() != n {
        return Err(Error::GridMismatch(coeffs.a.len(), n));
    }
    let limit = cfl_limit(coeffs, grid);
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::numerical(format!(
            "time step {dt} violates the CFL limit {limit}"
        )));
    }
    let dx = grid.width();
    let mass = d.cell_mass();
    let rho = |i: usize| mass[i] / dx;
    // flux[i] is the flux through the face between cells i and i + 1
    let mut flux = vec![0.0; n - 1];
    for (i, f) in flux.iter_mut().enumerate() {
        let a_face = 0.5 * (coeffs.a[i] + coeffs.a[i + 1]);
        let upwind = if a_face > 0.0 { rho(i) } else { rho(i + 1) };
        let diffusive = (coeffs.b2[i + 1] * rho(i + 1) - coeffs.b2[i] * rho(i)) / (2.0 * dx);
        *f = a_face * upwind - diffusive;
    }
    let mut next = mass.to_vec();
    for (i, f) in flux.iter().enumerate() {
        next[i] -= dt * f;
        next[i + 1] += dt * f;
    }
    let negative: f64 = next.iter().filter(|&&v| v < 0.0).sum();
    if negative < 0.0 {
        debug!("flooring negative mass {negative:e}");
        let target: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v *= target / total);
    }
    Density::from_parts(grid, next, d.left_atom(), d.right_atom())
}

fn default_cfl() -> f64 {
    0.5
}

fn default_max_dt() -> f64 {
    1.0
}

fn default_snapshots() -> usize {
    20
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FpeConfig {
    pub rule: PartnerRule,
    pub payoff: PayoffParams,
    pub init: InitSpec,
    #[serde(default)]
    pub grid: Grid,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub drift_only: bool,
    /// Upper bound on the step, independent of the CFL condition.
    #[serde(default = "default_max_dt")]
    pub max_dt: f64,
    #[serde(default = "default_snapshots")]
    pub n_snapshots: usize,
}

impl FpeConfig {
    pub fn new(rule: PartnerRule, payoff: PayoffParams, init: InitSpec, grid: Grid, t_end: f64) -> Self {
        FpeConfig {
            rule,
            payoff,
            init,
            grid,
            t_end,
            cfl_safety: default_cfl(),
            drift_only: false,
            max_dt: default_max_dt(),
            n_snapshots: default_snapshots(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.payoff.validate()?;
        self.init.validate()?;
        check_horizon(&self.payoff, self.drift_only)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("t_end must be finite and non-negative"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::config("cfl_safety must lie in (0, 1]"));
        }
        if !(self.max_dt > 0.0) {
            return Err(Error::config("max_dt must be positive"));
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        time_schedule(self.t_end, self.n_snapshots)
    }
}

/// Summary of a finished solve.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FpeDiagnostics {
    pub steps: u64,
    /// Largest `|total mass - 1|` seen over the run.
    pub max_mass_error: f64,
    /// Mass in the outer 2% of the domain at the final time.
    pub boundary_mass: f64,
}

/// Solution at the configured snapshot times.
pub fn solve_fpe(config: &FpeConfig) -> Result<Vec<Snapshot>> {
    Ok(solve_fpe_at(config, &config.times())?.0)
}

/// Solution at the given (sorted) times; coefficients are refreshed from
/// the current density before every step.
pub fn solve_fpe_at(config: &FpeConfig, times: &[f64]) -> Result<(Vec<Snapshot>, FpeDiagnostics)> {
    config.validate()?;
    let d0 = init_density(&config.init, config.grid)?;
    solve_from(config, d0, times)
}

pub fn solve_from(config: &FpeConfig, mut d: Density, times: &[f64]) -> Result<(Vec<Snapshot>, FpeDiagnostics)> {
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::config("snapshot times must be sorted and non-negative"));
    }
    let mut diag = FpeDiagnostics::default();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let coeffs = coefficients(config.rule, &d, &config.payoff, config.drift_only)?;
            let limit = config.cfl_safety * cfl_limit(&coeffs, config.grid);
            let mut dt = limit.min(config.max_dt);
            let last = target - t <= dt * (1.0 + 1e-12);
            if last {
                dt = target - t;
            }
            d = fpe_step(&d, &coeffs, dt)?;
            t = if last { target } else { t + dt };
            diag.steps += 1;
            diag.max_mass_error = diag.max_mass_error.max((d.total_mass() - 1.0).abs());
        }
        out.push(Snapshot::of_density(t, d.clone()));
    }
    diag.boundary_mass = d.boundary_fraction(0.02);
    Ok((out, diag))
}

/// Clamp interval for SDE particles.
const PARTICLE_EPS: f64 = 1e-9;
const PARTICLE_CHUNKS: usize = 64;
/// Resolution of the coefficient table interpolated for particles.
const TABLE_NODES: usize = 2049;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub seed: u64,
}

struct ParticleChunk {
    x: Vec<f64>,
    rng: SimRng,
}

fn interp(table: &[f64], x: f64) -> f64 {
    let pos = x * (table.len() - 1) as f64;
    let i = (pos.floor() as usize).min(table.len() - 2);
    let w = pos - i as f64;
    table[i] * (1.0 - w) + table[i + 1] * w
}

/// Euler-Maruyama ensemble for
/// `dx = A dt + 2 x (1-x) sqrt(Sigma) dW`, with `dG` and `Sigma` evaluated
/// from the ensemble's own moments every step. Snapshots are histograms on
/// `config.grid`; means and variances are those of the particles.
pub fn sde_particles(config: &FpeConfig, sde: &SdeConfig, times: &[f64], exec: Execution) -> Result<Vec<Snapshot>> {
    config.validate()?;
    if sde.n_particles < 100 {
        return Err(Error::config(format!(
            "at least 100 particles are needed, got {}",
            sde.n_particles
        )));
    }
    if !(sde.dt > 0.0) {
        return Err(Error::config("particle time step must be positive"));
    }
    let p = &config.payoff;
    let order = moment_order(p);
    let mut chunks: Vec<ParticleChunk> = (0..PARTICLE_CHUNKS)
        .map(|c| {
            let count = sde.n_particles / PARTICLE_CHUNKS + usize::from(c < sde.n_particles % PARTICLE_CHUNKS);
            let mut rng = rng::stream(sde.seed, rng::streams::PARTICLES_BASE + c as u64);
            let x = (0..count)
                .map(|_| config.init.sample(&mut rng).clamp(PARTICLE_EPS, 1.0 - PARTICLE_EPS))
                .collect();
            ParticleChunk { x, rng }
        })
        .collect();

    let moments = |chunks: &[ParticleChunk]| {
        let mut sums = vec![0.0; order + 1];
        for c in chunks {
            for &x in &c.x {
                let mut pw = 1.0;
                for s in sums.iter_mut() {
                    *s += pw;
                    pw *= x;
                }
            }
        }
        let n = sums[0];
        MomentVector::new(&sums[1..].iter().map(|s| s / n).collect::<Vec<_>>())
    };
    let snapshot = |t: f64, chunks: &[ParticleChunk]| -> Result<Snapshot> {
        let all: Vec<f64> = chunks.iter().flat_map(|c| c.x.iter().copied()).collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let variance = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(Snapshot {
            t,
            density: histogram_of_policies(&all, config.grid)?,
            mean,
            variance,
        })
    };

    let nodes: Vec<f64> = (0..TABLE_NODES).map(|i| i as f64 / (TABLE_NODES - 1) as f64).collect();
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    for &target in times {
        while t < target {
            let dt = sde.dt.min(target - t);
            let m = moments(&chunks);
            let vals = par::map_slice(exec, &nodes, |&x| coefficients_at(config.rule, x, &m, p, config.drift_only));
            let mut a_tab = Vec::with_capacity(TABLE_NODES);
            let mut s_tab = Vec::with_capacity(TABLE_NODES);
            for v in vals {
                let (a, b2) = v?;
                a_tab.push(a);
                s_tab.push(b2.max(0.0).sqrt());
            }
            let sq = dt.sqrt();
            par::for_each_mut(exec, &mut chunks, |_, c| {
                for x in c.x.iter_mut() {
                    let z: f64 = StandardNormal.sample(&mut c.rng);
                    let next = *x + interp(&a_tab, *x) * dt + interp(&s_tab, *x) * sq * z;
                    *x = next.clamp(PARTICLE_EPS, 1.0 - PARTICLE_EPS);
                }
            });
            t = if target - t <= sde.dt { target } else { t + dt };
        }
        out.push(snapshot(t, &chunks)?);
    }
    Ok(out)
}

/// Result of the early-time mean cooperation check.
#[derive(Clone, Debug, Serialize)]
pub struct MeanDerivativeReport {
    /// Reward difference of the initial law (at `x = 1/2` for `H > 2`).
    pub delta_g0: f64,
    pub precondition_met: bool,
    /// `I(0) = int x^2 (1-x)^2 dG rho0`.
    pub i0: f64,
    pub alpha_star: f64,
    /// `(alpha, d mean / dt at t = 0, alpha < alpha_star)`.
    pub derivatives: Vec<(f64, f64, bool)>,
    /// True when every `alpha < alpha_star` produced a positive derivative.
    pub passed: bool,
}

/// For each learning rate, one FPE step from the initial law; the mean's
/// forward difference estimates its initial time derivative. The guaranteed
/// positive regime is `alpha < alpha* = 4 I(0) / (H^2 (H (b + c) + |beta|)^2)`.
pub fn mean_policy_derivative_check(config: &FpeConfig, alphas: &[f64]) -> Result<MeanDerivativeReport> {
    config.validate()?;
    let p = &config.payoff;
    let d0 = init_density(&config.init, config.grid)?;
    let m = d0.moments(moment_order(p));
    let dg_at = |x: f64| delta_g(config.rule, p.horizon, x, &m, p);
    let delta_g0 = dg_at(0.5)?;
    let mut i0 = 0.0;
    let grid = d0.grid();
    for (i, &w) in d0.cell_mass().iter().enumerate() {
        let x = grid.center(i);
        i0 += w * (x * (1.0 - x)).powi(2) * dg_at(x)?;
    }
    let h = p.horizon as f64;
    let alpha_star = (4.0 * i0 / (h * h * (h * (p.b + p.c) + p.beta.abs()).powi(2))).max(0.0);
    let precondition_met = delta_g0 > 0.0;
    if !precondition_met {
        warn!("reward difference {delta_g0} of the initial law is not positive");
    }
    let mut derivatives = Vec::with_capacity(alphas.len());
    for &alpha in alphas {
        let pa = p.with_alpha(alpha);
        let coeffs = coefficients(config.rule, &d0, &pa, config.drift_only)?;
        let dt = config.cfl_safety * cfl_limit(&coeffs, grid).min(1.0);
        let d1 = fpe_step(&d0, &coeffs, dt)?;
        derivatives.push((alpha, (d1.mean() - d0.mean()) / dt, alpha < alpha_star));
    }
    let passed = precondition_met && derivatives.iter().filter(|d| d.2).all(|d| d.1 > 0.0);
    Ok(MeanDerivativeReport {
        delta_g0,
        precondition_met,
        i0,
        alpha_star,
        derivatives,
        passed,
    })
}
