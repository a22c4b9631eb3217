//! Conditional opponent laws and the episodic reward difference for any
//! horizon.
//!
//! After the focal agent fixes its action in round `k`, the difference
//! between the opponent's mean cooperation when it cooperated and when it
//! defected, `h - k` rounds later, is a sum of terms `x^j E[Y g^j(Y)]` where
//! `g^1(y) = y - mu_1` and `g^j(y) = y g^{j-1}(y) - E[Y g^{j-1}(Y)]`.
//! Reverse Out-for-Tat reduces to the same recursion for the reflected law
//! `1 - Y` and the reflected policy `1 - x`.

use crate::error::{Error, Result};
use crate::game::{PartnerRule, PayoffParams};
use crate::population::MomentVector;

use super::poly::PolyInY;

/// Moment order carried through the analytic routines by default.
pub const DEFAULT_MOMENT_ORDER: usize = 8;

/// One round of the conditional opponent law, as a density relative to the
/// population law: `q^{h+1}` from `q^h`, where `x` is the probability that
/// the focal agent cooperates in round `h` (0 or 1 when its action is fixed).
pub fn opponent_dist_step(rule: PartnerRule, x: f64, q: &PolyInY, m: &MomentVector) -> Result<PolyInY> {
    match rule {
        PartnerRule::Oft => {
            // kept with probability x*y, otherwise redrawn from the population
            let mean = q.expect_y(m)?;
            Ok(q.times_y().scale(x).plus_const(1.0 - x * mean))
        }
        PartnerRule::Roft => {
            // kept with probability (1-x)(1-y)
            let mean = q.expect_y(m)?;
            let kept = (q - &q.times_y()).scale(1.0 - x);
            Ok(kept.plus_const(1.0 - (1.0 - x) * (1.0 - mean)))
        }
        PartnerRule::Stay | PartnerRule::Switch => Ok(PolyInY::constant(1.0)),
    }
}

/// `g^h` for the law with moments `m`; `E[g^h(Y)] = 0`.
pub fn g_recursion(h: usize, m: &MomentVector) -> Result<PolyInY> {
    if h == 0 {
        return Err(Error::config("g recursion starts at h = 1"));
    }
    Ok(g_sequence(h, m)?.pop().expect("non-empty"))
}

/// `[g^1, ..., g^h]`.
pub fn g_sequence(h: usize, m: &MomentVector) -> Result<Vec<PolyInY>> {
    m.require(h)?;
    let mut out = Vec::with_capacity(h);
    let mut g = PolyInY::new(vec![-m.get(1), 1.0]);
    for _ in 1..h {
        let shift = g.expect_y(m)?;
        let next = g.times_y().plus_const(-shift);
        out.push(g);
        g = next;
    }
    out.push(g);
    Ok(out)
}

/// `E[Y g^j(Y)]` for `j = 1..=n` (index `j - 1`).
fn g_inner_products(n: usize, m: &MomentVector) -> Result<Vec<f64>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    m.require(n + 1)?;
    g_sequence(n, m)?.iter().map(|g| g.expect_y(m)).collect()
}

fn oft_delta_m(k: usize, h: usize, x: f64, inner: &[f64]) -> f64 {
    (0..=k)
        .map(|j| {
            let idx = h - k + j;
            x.powi((idx - 1) as i32) * inner[idx - 1]
        })
        .sum()
}

/// Difference in the opponent's mean cooperation at round `h` between the
/// focal agent cooperating and defecting at round `k < h`.
pub fn delta_m(rule: PartnerRule, k: usize, h: usize, x: f64, m: &MomentVector) -> Result<f64> {
    if h <= k {
        return Err(Error::config(format!("delta_m needs h > k, got k = {k}, h = {h}")));
    }
    match rule {
        PartnerRule::Stay | PartnerRule::Switch => Ok(0.0),
        PartnerRule::Oft => Ok(oft_delta_m(k, h, x, &g_inner_products(h, m)?)),
        PartnerRule::Roft => {
            let reflected = m.reflected();
            Ok(oft_delta_m(k, h, 1.0 - x, &g_inner_products(h, &reflected)?))
        }
    }
}

/// Expected episodic return difference between cooperating and defecting,
/// summed over the rounds of an episode of `horizon` rounds.
pub fn delta_g(rule: PartnerRule, horizon: usize, x: f64, m: &MomentVector, p: &PayoffParams) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let future: f64 = match rule {
        PartnerRule::Stay | PartnerRule::Switch => 0.0,
        PartnerRule::Oft | PartnerRule::Roft => {
            let (xe, inner) = if rule == PartnerRule::Oft {
                (x, g_inner_products(horizon - 1, m)?)
            } else {
                (1.0 - x, g_inner_products(horizon - 1, &m.reflected())?)
            };
            let mut acc = 0.0;
            for k in 0..horizon {
                for h in (k + 1)..horizon {
                    acc += oft_delta_m(k, h, xe, &inner);
                }
            }
            acc
        }
    };
    Ok(-(horizon as f64) * p.c + p.b * future)
}

/// `(H - 1)(b Var - c) - c`, a lower bound on [`delta_g`] under OFT and ROFT.
pub fn delta_g_lower_bound(horizon: usize, var: f64, p: &PayoffParams) -> f64 {
    (horizon as f64 - 1.0) * (p.b * var - p.c) - p.c
}
