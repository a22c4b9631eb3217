//! Closed-form reward structure of an episode under each partner rule.
//!
//! Every expectation over the population law reduces to a contraction of a
//! polynomial in the opponent type `y` against a [`MomentVector`], so the
//! results are exact given enough moments.
//!
//! [`MomentVector`]: crate::population::MomentVector

mod poly;
mod recursion;
mod second_moment;

pub use poly::PolyInY;
pub use recursion::{
    delta_g, delta_g_lower_bound, delta_m, g_recursion, g_sequence, opponent_dist_step, DEFAULT_MOMENT_ORDER,
};
pub use second_moment::{
    conditional_moment_m, second_moment_s, sigma_cc, sigma_cc_bound, RoundPairTerms, SecondMomentTable,
};
