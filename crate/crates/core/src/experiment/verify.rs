//! Fast invariant suite behind `--mode verify`.

use rand::Rng;
use serde::Serialize;

use crate::abm::{train, SimConfig};
use crate::error::Result;
use crate::fpe::{solve_fpe_at, FpeConfig};
use crate::game::{PartnerRule, PayoffParams};
use crate::meanfield::{f_char, f_inv};
use crate::population::{Grid, InitSpec, MomentVector};
use crate::reward::{delta_g, delta_m, g_sequence, sigma_cc, sigma_cc_bound};
use crate::rng;
use crate::stationary::{solve_stationary, StationaryConfig};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, worst: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: worst <= tol,
        detail: format!("worst {worst:.3e} (tolerance {tol:.0e})"),
    }
}

/// Moments of a random discrete law with up to five atoms.
fn random_moments<R: Rng>(r: &mut R, order: usize) -> MomentVector {
    let k = r.random_range(1..=5);
    let pts: Vec<f64> = (0..k).map(|_| r.random()).collect();
    let ws: Vec<f64> = (0..k).map(|_| r.random::<f64>() + 1e-3).collect();
    let total: f64 = ws.iter().sum();
    let ws: Vec<f64> = ws.iter().map(|w| w / total).collect();
    MomentVector::of_points(&pts, &ws, order)
}

pub fn run_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let p = PayoffParams::default();
    let mut r = rng::stream(seed, rng::streams::INIT);
    let mut out = Vec::new();

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = random_moments(&mut r, 8);
        let x = r.random();
        let var = m.get(2) - m.get(1) * m.get(1);
        for rule in PartnerRule::ALL {
            let want = match rule {
                PartnerRule::Oft | PartnerRule::Roft => p.b * var - 2.0 * p.c,
                _ => -2.0 * p.c,
            };
            worst = worst.max((delta_g(rule, 2, x, &m, &p)? - want).abs());
        }
    }
    out.push(check("H=2 reward identity", worst, 1e-12));

    let mut lowest: f64 = 0.0;
    for _ in 0..1000 {
        let m = random_moments(&mut r, 8);
        let x = r.random();
        let h = r.random_range(1..=6);
        let k = r.random_range(0..h);
        for rule in [PartnerRule::Oft, PartnerRule::Roft] {
            lowest = lowest.min(delta_m(rule, k, h, x, &m)?);
        }
    }
    out.push(check("delta_m non-negative", -lowest, 1e-12));

    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = random_moments(&mut r, 12);
        let gs = g_sequence(8, &m)?;
        for a in 1..8 {
            for b in 1..=(8 - a) {
                let lhs = (&gs[a - 1] * &gs[b - 1]).expect_y(&m)?;
                worst = worst.max((lhs - gs[a + b - 1].expect_y(&m)?).abs());
            }
        }
    }
    out.push(check("self-adjoint g recursion", worst, 1e-9));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = random_moments(&mut r, 8);
        let x = r.random();
        for rule in PartnerRule::ALL {
            worst = worst.max(sigma_cc(rule, x, &m, &p)? - sigma_cc_bound(&p));
        }
    }
    out.push(check("update variance below bound", worst.max(0.0), 0.0));

    let mut worst: f64 = 0.0;
    for i in 0..=998 {
        let x = 0.001 + 0.001 * i as f64;
        worst = worst.max((f_inv(f_char(x)) - x).abs());
    }
    out.push(check("F inverse round trip", worst, 1e-10));

    let mut cfg = FpeConfig::new(PartnerRule::Oft, p, InitSpec::Beta { a: 2.0, b: 2.0 }, Grid::new(100)?, 200.0);
    cfg.max_dt = 0.5;
    let (_, diag) = solve_fpe_at(&cfg, &[200.0])?;
    out.push(check("FPE mass conservation", diag.max_mass_error, 1e-10));

    let mut st = StationaryConfig::new(PartnerRule::Oft, p, Grid::new(100)?);
    st.epsilon_schedule = vec![1e-2, 1e-3];
    let (_, report) = solve_stationary(&st)?;
    let gap = report.stages.iter().map(|s| s.fixed_point_w1).fold(0.0, f64::max);
    let mut c = check("stationary fixed point", gap, st.tol_w1);
    c.passed &= report.all_converged();
    out.push(c);

    let sim = SimConfig {
        n_agents: 20,
        episodes: 2000,
        rule: PartnerRule::Roft,
        payoff: p,
        init: InitSpec::Uniform,
        seed,
        snapshot_every: 500,
        grid: Grid::new(20)?,
    };
    let same = train(&sim)?.final_logits == train(&sim)?.final_logits;
    out.push(CheckResult {
        name: "seeded ABM determinism",
        passed: same,
        detail: String::new(),
    });
    Ok(out)
}
