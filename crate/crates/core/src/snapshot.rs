//! Common output record of every pipeline.

use crate::population::Density;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Simulation time; for the agent-based model `episodes / n_agents`.
    pub t: f64,
    pub density: Density,
    /// Mean cooperation probability.
    pub mean: f64,
    pub variance: f64,
}

impl Snapshot {
    /// Snapshot whose summary statistics are taken from the density itself.
    pub fn of_density(t: f64, density: Density) -> Self {
        let mu = density.moments(2);
        Snapshot {
            t,
            mean: mu.mean(),
            variance: mu.variance(),
            density,
        }
    }
}

/// Episode counts at which to record: every multiple of `every`, the final
/// episode, and a geometric run `1, 2, 4, ...` below `every` so the fast
/// initial transient is resolved. Always starts at 0.
pub fn episode_schedule(episodes: u64, every: u64) -> Vec<u64> {
    let every = every.max(1);
    let mut out = vec![0];
    let mut g = 1;
    while g < every && g < episodes {
        out.push(g);
        g *= 2;
    }
    let mut k = every;
    while k < episodes {
        out.push(k);
        k += every;
    }
    out.push(episodes);
    out.dedup();
    out
}

/// `n` equally spaced times on `[0, t_end]` with geometric early refinement.
pub fn time_schedule(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let step = t_end / n as f64;
    let mut out = vec![0.0];
    for j in (1..=6).rev() {
        out.push(step / f64::from(1u32 << j));
    }
    out.extend((1..=n).map(|k| step * k as f64));
    out
}
