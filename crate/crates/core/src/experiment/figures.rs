use crate::game::{PartnerRule, PayoffParams};
use crate::population::{Grid, InitSpec};

use super::config::{AbmBlock, ExperimentConfig, FpeBlock, Mode};

/// Paper scale: 1000 agents, 30 replicates, `t = E / N = 5000` at
/// `alpha = 0.01`.
const FULL_AGENTS: usize = 1000;
const FULL_REPLICATES: usize = 30;
const BASE_ALPHA: f64 = 0.01;
const BASE_HORIZON: f64 = 5000.0;
const SNAPSHOTS: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Full,
    Desk,
}

fn compare_config(rule: PartnerRule, init: InitSpec, alpha: f64, seed: u64) -> ExperimentConfig {
    let t_end = BASE_HORIZON * BASE_ALPHA / alpha;
    let episodes = (t_end * FULL_AGENTS as f64).round() as u64;
    ExperimentConfig {
        mode: Mode::Compare,
        rule,
        payoff: PayoffParams::default().with_alpha(alpha),
        init,
        grid: Grid::default(),
        seed,
        time_scale: alpha / BASE_ALPHA,
        output_dir: None,
        abm: Some(AbmBlock {
            n_agents: FULL_AGENTS,
            episodes,
            snapshot_every: (episodes as f64 / SNAPSHOTS).round() as u64,
            replicates: FULL_REPLICATES,
        }),
        fpe: Some(FpeBlock::default()),
        meanfield: None,
        stationary: None,
    }
}

/// The bundled experiment configurations, by name.
pub fn figure_configs(scale: Scale) -> Vec<(String, ExperimentConfig)> {
    let mut out = Vec::new();
    let beta22 = InitSpec::Beta { a: 2.0, b: 2.0 };
    for rule in PartnerRule::ALL {
        out.push((format!("fig1_{rule}"), compare_config(rule, beta22, BASE_ALPHA, 1)));
    }
    for (label, alpha) in [("0.001", 0.001), ("0.01", 0.01), ("0.1", 0.1)] {
        out.push((
            format!("fig2_alpha_{label}"),
            compare_config(PartnerRule::Oft, InitSpec::Dirac { p: 0.5 }, alpha, 2),
        ));
    }
    for rule in PartnerRule::ALL {
        out.push((format!("fig3_uniform_{rule}"), compare_config(rule, InitSpec::Uniform, BASE_ALPHA, 3)));
    }
    for rule in PartnerRule::ALL {
        out.push((
            format!("fig4_beta33_{rule}"),
            compare_config(rule, InitSpec::Beta { a: 3.0, b: 3.0 }, BASE_ALPHA, 4),
        ));
    }
    if scale == Scale::Desk {
        for (_, c) in out.iter_mut() {
            *c = c.to_desk_scale();
        }
    }
    out
}

/// Looks up a bundled configuration by name.
pub fn figure_config(name: &str, scale: Scale) -> Option<ExperimentConfig> {
    figure_configs(scale)
        .into_iter()
        .find(|(n, _)| n == name)
        .map(|(_, c)| c)
}
