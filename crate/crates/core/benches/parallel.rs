use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pd_dynamics::abm::{frozen_update_stats, replicate, SimConfig};
use pd_dynamics::fpe::{coefficients_with, sde_particles, FpeConfig, SdeConfig};
use pd_dynamics::par::Execution;
use pd_dynamics::population::{init_density, Grid, InitSpec};
use pd_dynamics::{PartnerRule, PayoffParams};

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn replicates(c: &mut Criterion) {
    let cfg = SimConfig {
        n_agents: 200,
        episodes: 20_000,
        rule: PartnerRule::Oft,
        payoff: PayoffParams::default(),
        init: InitSpec::Beta { a: 2.0, b: 2.0 },
        seed: 1,
        snapshot_every: 5_000,
        grid: Grid::default(),
    };
    let mut g = c.benchmark_group("abm_replicates");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| replicate(&cfg, 8, exec).unwrap())
        });
    }
    g.finish();
}

fn frozen_monte_carlo(c: &mut Criterion) {
    let pool: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
    let p = PayoffParams::default();
    let mut g = c.benchmark_group("frozen_monte_carlo");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| frozen_update_stats(&pool, 0.5, PartnerRule::Oft, &p, 200_000, 3, exec).unwrap())
        });
    }
    g.finish();
}

fn coefficients(c: &mut Criterion) {
    let d = init_density(&InitSpec::Beta { a: 2.0, b: 2.0 }, Grid::new(2000).unwrap()).unwrap();
    let p = PayoffParams::default();
    let mut g = c.benchmark_group("fpe_coefficients_2000_cells");
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| coefficients_with(PartnerRule::Oft, &d, &p, false, exec).unwrap())
        });
    }
    g.finish();
}

fn particles(c: &mut Criterion) {
    let cfg = FpeConfig::new(
        PartnerRule::Oft,
        PayoffParams::default(),
        InitSpec::Beta { a: 2.0, b: 2.0 },
        Grid::default(),
        10.0,
    );
    let sde = SdeConfig {
        n_particles: 100_000,
        dt: 1.0,
        seed: 4,
    };
    let mut g = c.benchmark_group("sde_particles_1e5");
    g.sample_size(10);
    for (name, exec) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sde_particles(&cfg, &sde, &[10.0], exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, replicates, frozen_monte_carlo, coefficients, particles);
criterion_main!(benches);
