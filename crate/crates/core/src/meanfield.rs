//! Deterministic mean-field dynamics.
//!
//! Without noise every policy follows `dx/dt = 2 alpha x^2 (1-x)^2 dG[rho]`.
//! With `F` below, `dF(X)/dt = 2 alpha dG`, so the whole flow is described by
//! the time-integrated velocity `K(t)`: `X = F^{-1}(F(x0) + 2 alpha K)`.
//! Under Stay/Switch `dG = -2c` and `K = -2ct`; under OFT/ROFT at `H = 2`
//! `K' = h(K) = b Var((X_K)#rho0) - 2c`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{policy_from_logit, PartnerRule, PayoffParams};
use crate::par::{self, Execution};
use crate::population::{Density, Grid};
use crate::snapshot::Snapshot;

const F_CLAMP: f64 = 1e-12;

/// `F(x) = 1/(1-x) - 1/x + 2 ln(x/(1-x))`, which in logit coordinates is
/// `2 sinh z + 2 z`. Inputs are clamped to `[1e-12, 1 - 1e-12]`.
pub fn f_char(x: f64) -> f64 {
    let x = x.clamp(F_CLAMP, 1.0 - F_CLAMP);
    let z = x.ln() - (-x).ln_1p();
    2.0 * z.sinh() + 2.0 * z
}

/// Logit `z` with `2 sinh z + 2 z = v`: safeguarded Newton on a bracket.
fn f_inv_logit(v: f64) -> f64 {
    // |2 sinh z + 2z| >= 2|z|, so the root lies in [-|v|/2, |v|/2];
    // asinh(v/2) is also a bound and much tighter for large |v|.
    let r = (v.abs() / 2.0).asinh().min(v.abs() / 2.0) + 1.0;
    let (mut lo, mut hi) = (-r, r);
    let mut z = (v / 4.0).clamp(lo, hi);
    for _ in 0..200 {
        let g = 2.0 * z.sinh() + 2.0 * z - v;
        if g == 0.0 {
            return z;
        }
        if g > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        let step = g / (2.0 * z.cosh() + 2.0);
        let mut next = z - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - z).abs() <= 1e-15 * (1.0 + z.abs()) || hi - lo <= 1e-15 * (1.0 + z.abs()) {
            return next;
        }
        z = next;
    }
    z
}

/// Inverse of [`f_char`]; defined for every finite `v`.
pub fn f_inv(v: f64) -> f64 {
    policy_from_logit(f_inv_logit(v)).clamp(F_CLAMP, 1.0 - F_CLAMP)
}

/// Characteristic map `x0 -> F^{-1}(F(x0) + 2 alpha K)`. Exact endpoints are
/// fixed points.
pub fn characteristic(x0: f64, k: f64, alpha: f64) -> f64 {
    if x0 <= 0.0 || x0 >= 1.0 {
        return x0;
    }
    f_inv(f_char(x0) + 2.0 * alpha * k)
}

/// Closed-form Stay/Switch flow `F(X_t) = F(x0) - 4 alpha c t`.
pub fn flow_stay_switch(x0: f64, t: f64, p: &PayoffParams) -> f64 {
    characteristic(x0, -2.0 * p.c * t, p.alpha)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicState {
    pub t: f64,
    pub k: f64,
}

/// Quadrature nodes of a density: cell centers and the two atoms.
fn nodes(rho0: &Density) -> (Vec<f64>, Vec<f64>) {
    let g = rho0.grid();
    let mut xs = g.centers();
    let mut ws = rho0.cell_mass().to_vec();
    xs.extend([0.0, 1.0]);
    ws.extend([rho0.left_atom(), rho0.right_atom()]);
    (xs, ws)
}

/// `h(K) = b Var((X_K)#rho0) - 2c`.
pub fn k_velocity(rho0: &Density, k: f64, p: &PayoffParams) -> f64 {
    let (xs, ws) = nodes(rho0);
    k_velocity_nodes(&xs, &ws, k, p, Execution::Sequential)
}

fn k_velocity_nodes(xs: &[f64], ws: &[f64], k: f64, p: &PayoffParams, exec: Execution) -> f64 {
    let pushed = par::map_slice(exec, xs, |&x| characteristic(x, k, p.alpha));
    let (mut m1, mut m2) = (0.0, 0.0);
    for (&x, &w) in pushed.iter().zip(ws) {
        m1 += w * x;
        m2 += w * x * x;
    }
    p.b * (m2 - m1 * m1).max(0.0) - 2.0 * p.c
}

/// Trajectory of `K` on a uniform time grid.
#[derive(Clone, Debug)]
pub struct KTrajectory {
    pub dt: f64,
    pub states: Vec<CharacteristicState>,
}

impl KTrajectory {
    /// `K(t)` by linear interpolation; clamped to the solved range.
    pub fn k_at(&self, t: f64) -> f64 {
        let s = &self.states;
        let pos = (t / self.dt).max(0.0);
        let i = (pos.floor() as usize).min(s.len() - 1);
        if i + 1 >= s.len() {
            return s[s.len() - 1].k;
        }
        let w = pos - i as f64;
        s[i].k * (1.0 - w) + s[i + 1].k * w
    }
}

fn rk4_k(xs: &[f64], ws: &[f64], p: &PayoffParams, t_end: f64, dt: f64, exec: Execution) -> Vec<CharacteristicState> {
    let steps = (t_end / dt).ceil().max(1.0) as usize;
    let h = |k: f64| k_velocity_nodes(xs, ws, k, p, exec);
    let mut out = Vec::with_capacity(steps + 1);
    let mut k = 0.0;
    out.push(CharacteristicState { t: 0.0, k });
    for s in 0..steps {
        let k1 = h(k);
        let k2 = h(k + 0.5 * dt * k1);
        let k3 = h(k + 0.5 * dt * k2);
        let k4 = h(k + dt * k3);
        k += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        out.push(CharacteristicState {
            t: (s + 1) as f64 * dt,
            k,
        });
    }
    out
}

/// Integrates `K' = h(K)`, `K(0) = 0` on `[0, t_end]` with RK4, starting at
/// step `dt` and halving it until two successive trajectories agree to 1e-8
/// in sup norm on the coarser grid.
pub fn solve_k(rho0: &Density, p: &PayoffParams, t_end: f64, dt: f64) -> Result<KTrajectory> {
    solve_k_with(rho0, p, t_end, dt, Execution::default())
}

pub fn solve_k_with(rho0: &Density, p: &PayoffParams, t_end: f64, dt: f64, exec: Execution) -> Result<KTrajectory> {
    if p.horizon != 2 {
        return Err(Error::config(format!(
            "the K equation is only available for H = 2, got H = {}",
            p.horizon
        )));
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::config("solve_k needs dt > 0 and t_end >= 0"));
    }
    let (xs, ws) = nodes(rho0);
    let mut dt = dt.min(t_end.max(f64::MIN_POSITIVE));
    // Use a step that divides t_end.
    dt = t_end.max(dt) / (t_end.max(dt) / dt).ceil();
    let mut coarse = rk4_k(&xs, &ws, p, t_end, dt, exec);
    for _ in 0..20 {
        let fine = rk4_k(&xs, &ws, p, t_end, dt / 2.0, exec);
        let diff = coarse
            .iter()
            .enumerate()
            .map(|(i, s)| (s.k - fine[2 * i].k).abs())
            .fold(0.0, f64::max);
        dt /= 2.0;
        coarse = fine;
        if diff < 1e-8 {
            return Ok(KTrajectory { dt, states: coarse });
        }
    }
    Err(Error::numerical("K equation did not converge under step halving"))
}

/// Moves each source cell's mass to the cell containing
/// `X_K(center)`; atoms stay where they are.
pub fn pushforward_density(rho0: &Density, k: f64, alpha: f64, grid: Grid) -> Result<Density> {
    let src = rho0.grid();
    let mut cells = vec![0.0; grid.n_cells()];
    for (i, &m) in rho0.cell_mass().iter().enumerate() {
        if m > 0.0 {
            cells[grid.cell_of(characteristic(src.center(i), k, alpha))] += m;
        }
    }
    Density::from_weights(grid, cells, rho0.left_atom(), rho0.right_atom())
}

/// Mean-field snapshots at `times` for any rule (`H = 2` for OFT/ROFT).
pub fn evolve(rule: PartnerRule, rho0: &Density, p: &PayoffParams, times: &[f64], dt: f64) -> Result<Vec<Snapshot>> {
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let k_of: Box<dyn Fn(f64) -> f64> = match rule {
        PartnerRule::Stay | PartnerRule::Switch => {
            let c = p.c;
            Box::new(move |t| -2.0 * c * t)
        }
        PartnerRule::Oft | PartnerRule::Roft => {
            let traj = solve_k(rho0, p, t_end, dt)?;
            Box::new(move |t| traj.k_at(t))
        }
    };
    times
        .iter()
        .map(|&t| Ok(Snapshot::of_density(t, pushforward_density(rho0, k_of(t), p.alpha, rho0.grid())?)))
        .collect()
}
