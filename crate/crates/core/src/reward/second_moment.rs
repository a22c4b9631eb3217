//! Second moments of the episodic return and the variance of the REINFORCE
//! update for two-round episodes.
//!
//! All four partner rules share one template. What distinguishes them is the
//! probability `s_a(y)` that the round-0 partner (of type `y`) is kept when
//! the focal agent plays `a`, averaged over the partner's own action:
//!
//! | rule   | `s_C(y)` | `s_D(y)` |
//! |--------|----------|----------|
//! | OFT    | `y`      | `0`      |
//! | ROFT   | `0`      | `1 - y`  |
//! | Stay   | `1`      | `1`      |
//! | Switch | `0`      | `0`      |
//!
//! From it, `E[Y1 | Y0, a0] = s Y0 + (1 - s) mu_1` gives the round-1 opponent
//! mean `E[Y1 | a0]` and the cross moment `E[Y0 Y1 | a0]`, which fill the
//! tabulated variances, covariances and conditional means.

use crate::error::{Error, Result};
use crate::game::{Action, PartnerRule, PayoffParams};
use crate::population::MomentVector;

use super::poly::PolyInY;
use super::recursion::opponent_dist_step;

const NEGATIVE_VARIANCE_TOL: f64 = 1e-12;

fn idx(a: Action) -> usize {
    match a {
        Action::C => 0,
        Action::D => 1,
    }
}

fn defect(a: Action) -> f64 {
    f64::from(u8::from(a == Action::D))
}

fn keep_probability(rule: PartnerRule, a: Action) -> PolyInY {
    match (rule, a) {
        (PartnerRule::Oft, Action::C) => PolyInY::identity(),
        (PartnerRule::Roft, Action::D) => PolyInY::new(vec![1.0, -1.0]),
        (PartnerRule::Stay, _) => PolyInY::constant(1.0),
        _ => PolyInY::constant(0.0),
    }
}

fn require_two_rounds(p: &PayoffParams) -> Result<()> {
    if p.horizon != 2 {
        return Err(Error::config(format!(
            "second-moment tables exist only for two-round episodes, got H = {}",
            p.horizon
        )));
    }
    Ok(())
}

/// Opponent statistics linking rounds 0 and 1, conditioned on the focal
/// action in round 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundPairTerms {
    /// `E[Y1 | a0]`, indexed by `[C, D]`.
    pub ey1: [f64; 2],
    /// `E[Y0 Y1 | a0]`.
    pub ey0y1: [f64; 2],
    /// Round-1 opponent mean when the round-0 action is drawn from the
    /// policy, `m^1(x)`.
    pub round1_mean: f64,
    pub mu1: f64,
}

impl RoundPairTerms {
    pub fn new(rule: PartnerRule, x: f64, m: &MomentVector) -> Result<Self> {
        m.require(3)?;
        let mu1 = m.get(1);
        let mut ey1 = [0.0; 2];
        let mut ey0y1 = [0.0; 2];
        for a in [Action::C, Action::D] {
            let s = keep_probability(rule, a);
            let s_y = s.expect_y(m)?;
            ey1[idx(a)] = s_y + mu1 * (1.0 - s.expect(m)?);
            ey0y1[idx(a)] = s.expect_shifted(m, 2)? + mu1 * (mu1 - s_y);
        }
        let q1 = opponent_dist_step(rule, x, &PolyInY::constant(1.0), m)?;
        Ok(RoundPairTerms {
            ey1,
            ey0y1,
            round1_mean: q1.expect_y(m)?,
            mu1,
        })
    }

    /// `Cov(Y0, Y1 | a0)`.
    pub fn cov(&self, a: Action) -> f64 {
        self.ey0y1[idx(a)] - self.mu1 * self.ey1[idx(a)]
    }
}

/// Conditional return moments `Var(R^h | a_h = a)` and `G^h_a = E[R^h | a_h = a]`
/// for `h in {0, 1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SecondMomentTable {
    pub rule: PartnerRule,
    pub terms: RoundPairTerms,
    /// `Var(R^h | a_h = a)`, indexed `[h][a]`.
    pub var_return: [[f64; 2]; 2],
    /// `G^h_a`, indexed `[h][a]`.
    pub gain: [[f64; 2]; 2],
    /// `Cov(r_0, r_1 | a_0 = a)`.
    pub cov_rewards: [f64; 2],
    beta: f64,
}

impl SecondMomentTable {
    pub fn new(rule: PartnerRule, x: f64, m: &MomentVector, p: &PayoffParams) -> Result<Self> {
        require_two_rounds(p)?;
        let t = RoundPairTerms::new(rule, x, m)?;
        let (b, c, mu1) = (p.b, p.c, t.mu1);
        let b2 = b * b;
        let explore = c * c * x * (1.0 - x);

        let mut var_return = [[0.0; 2]; 2];
        let mut gain = [[0.0; 2]; 2];
        let mut cov_rewards = [0.0; 2];
        for a in [Action::C, Action::D] {
            let i = idx(a);
            let var_r0 = b2 * mu1 * (1.0 - mu1);
            let ey1 = t.ey1[i];
            let var_r1 = b2 * ey1 * (1.0 - ey1) + explore;
            cov_rewards[i] = b2 * t.cov(a);
            var_return[0][i] = var_r0 + var_r1 + 2.0 * cov_rewards[i];
            gain[0][i] = b * mu1 + c * defect(a) + b * ey1 + c * (1.0 - x);

            let m1 = t.round1_mean;
            var_return[1][i] = b2 * m1 * (1.0 - m1);
            gain[1][i] = b * m1 + c * defect(a);
        }
        Ok(SecondMomentTable {
            rule,
            terms: t,
            var_return,
            gain,
            cov_rewards,
            beta: p.beta,
        })
    }

    /// `S^h_a = Var(R^h | a_h = a) + (G^h_a - beta)^2`.
    pub fn s(&self, h: usize, a: Action) -> f64 {
        let g = self.gain[h][idx(a)] - self.beta;
        self.var_return[h][idx(a)] + g * g
    }

    /// `Delta G^h = G^h_C - G^h_D`.
    pub fn delta_gain(&self, h: usize) -> f64 {
        self.gain[h][0] - self.gain[h][1]
    }
}

/// `S^h_a`, the second moment of `R^h - beta` given the round-`h` action.
pub fn second_moment_s(
    rule: PartnerRule,
    h: usize,
    a: Action,
    x: f64,
    m: &MomentVector,
    p: &PayoffParams,
) -> Result<f64> {
    if h > 1 {
        return Err(Error::config(format!("second moments are tabulated for h in {{0, 1}}, got {h}")));
    }
    Ok(SecondMomentTable::new(rule, x, m, p)?.s(h, a))
}

/// `M^{0,1}_{a,a1} = E[(R^0 - beta)(R^1 - beta) | a_0 = a, a_1 = a1]`.
pub fn conditional_moment_m(
    rule: PartnerRule,
    a: Action,
    a1: Action,
    x: f64,
    m: &MomentVector,
    p: &PayoffParams,
) -> Result<f64> {
    require_two_rounds(p)?;
    let t = RoundPairTerms::new(rule, x, m)?;
    Ok(round_pair_moment(&t, a, a1, p))
}

fn round_pair_moment(t: &RoundPairTerms, a: Action, a1: Action, p: &PayoffParams) -> f64 {
    let (b, c, beta) = (p.b, p.c, p.beta);
    let (d0, d1) = (defect(a), defect(a1));
    let ey1 = t.ey1[idx(a)];
    // r_l = b zeta_l + c 1{a_l = D}; round-1 opponent law depends on a0 only.
    let e_r0r1 = b * b * t.ey0y1[idx(a)] + b * c * d1 * t.mu1 + b * c * d0 * ey1 + c * c * d0 * d1;
    let e_r1_sq = b * b * ey1 + 2.0 * b * c * d1 * ey1 + c * c * d1;
    let e_r0 = b * t.mu1 + c * d0;
    let e_r1 = b * ey1 + c * d1;
    e_r0r1 + e_r1_sq - beta * e_r0 - 2.0 * beta * e_r1 + beta * beta
}

/// Per-episode variance of the cooperation-parameter update, `Var(Delta psi_C)`.
pub fn sigma_cc(rule: PartnerRule, x: f64, m: &MomentVector, p: &PayoffParams) -> Result<f64> {
    let table = SecondMomentTable::new(rule, x, m, p)?;
    let (xc, xd) = (x, 1.0 - x);
    let w = xc * xc * xd * xd;

    let var_u = |h: usize| {
        xc * xd * xd * table.s(h, Action::C) + xc * xc * xd * table.s(h, Action::D)
            - w * table.delta_gain(h).powi(2)
    };
    let mm = |a, a1| round_pair_moment(&table.terms, a, a1, p);
    use Action::{C, D};
    let cov = w * (mm(C, C) - mm(D, C) - mm(C, D) + mm(D, D) - table.delta_gain(0) * table.delta_gain(1));

    let sigma = p.alpha * p.alpha * (var_u(0) + var_u(1) + 2.0 * cov);
    if sigma < -NEGATIVE_VARIANCE_TOL {
        return Err(Error::numerical(format!(
            "negative update variance {sigma} for {rule} at x = {x}"
        )));
    }
    Ok(sigma.max(0.0))
}

/// `alpha^2 H^2 (H (b + c) + |beta|)^2`, a uniform upper bound on [`sigma_cc`].
pub fn sigma_cc_bound(p: &PayoffParams) -> f64 {
    let h = p.horizon as f64;
    let r = h * (p.b + p.c) + p.beta.abs();
    p.alpha * p.alpha * h * h * r * r
}
