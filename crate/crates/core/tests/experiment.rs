use std::fs;
use std::path::Path;

use pd_dynamics::experiment::{
    compare_series, figure_config, figure_configs, run, AbmBlock, ExperimentConfig, MeanfieldBlock, Mode, Scale,
    Series, Settings, StationaryBlock,
};
use pd_dynamics::population::{Grid, InitSpec};
use pd_dynamics::{Error, PartnerRule, PayoffParams};

fn tiny(mode: Mode) -> ExperimentConfig {
    ExperimentConfig {
        mode,
        rule: PartnerRule::Oft,
        payoff: PayoffParams::default(),
        init: InitSpec::Beta { a: 2.0, b: 2.0 },
        grid: Grid::new(10).unwrap(),
        seed: 11,
        time_scale: 1.0,
        output_dir: None,
        abm: Some(AbmBlock {
            n_agents: 12,
            episodes: 120,
            snapshot_every: 60,
            replicates: 2,
        }),
        fpe: None,
        meanfield: Some(MeanfieldBlock {
            t_end: 10.0,
            dt: 0.1,
            n_snapshots: 2,
        }),
        stationary: Some(StationaryBlock::default()),
    }
}

#[test]
fn bundled_configs_round_trip() {
    for scale in [Scale::Full, Scale::Desk] {
        for (name, cfg) in figure_configs(scale) {
            cfg.validate().unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg, "{name}");
            let json = serde_json::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::parse(&json).unwrap(), cfg, "{name}");
        }
    }
}

#[test]
fn shipped_config_files_match_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for (dir, scale) in [("full", Scale::Full), ("desk", Scale::Desk)] {
        let generated = figure_configs(scale);
        let mut seen = 0;
        for entry in fs::read_dir(root.join(dir)).unwrap() {
            let path = entry.unwrap().path();
            let name = path.file_stem().unwrap().to_string_lossy().to_string();
            let cfg = ExperimentConfig::load(&path).unwrap();
            assert_eq!(Some(cfg), figure_config(&name, scale), "{}", path.display());
            seen += 1;
        }
        assert_eq!(seen, generated.len());
    }
}

#[test]
fn desk_scale_keeps_simulated_time() {
    let full = figure_config("fig1_oft", Scale::Full).unwrap();
    let desk = figure_config("fig1_oft", Scale::Desk).unwrap();
    let a = full.sim_config().unwrap();
    let b = desk.sim_config().unwrap();
    assert_eq!(b.n_agents, 200);
    assert_eq!(a.horizon_time(), b.horizon_time());
    assert_eq!(desk.abm.unwrap().replicates, 5);
}

#[test]
fn learning_rate_sweep_scales_time() {
    let slow = figure_config("fig2_alpha_0.001", Scale::Full).unwrap();
    let base = figure_config("fig2_alpha_0.01", Scale::Full).unwrap();
    let t_slow = slow.sim_config().unwrap().horizon_time();
    let t_base = base.sim_config().unwrap().horizon_time();
    assert!((t_slow / t_base - 10.0).abs() < 1e-12);
    assert!((t_slow * slow.time_scale - t_base * base.time_scale).abs() < 1e-9);
    assert_eq!(slow.init, InitSpec::Dirac { p: 0.5 });
}

#[test]
fn missing_block_is_a_config_error() {
    let mut cfg = tiny(Mode::Fpe);
    cfg.fpe = None;
    let err = cfg.validate().unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(ExperimentConfig::parse("mode = \"abm\"").is_err());
}

#[test]
fn golden_tiny_run() {
    let dir = tempfile::tempdir().unwrap();
    run(&tiny(Mode::Abm), Some(dir.path())).unwrap();
    let got = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/tiny_abm_snapshots.csv");
    if std::env::var_os("BLESS").is_some() {
        fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(golden).unwrap());
    let header: Vec<&str> = got.lines().take(2).collect();
    assert!(header[0].starts_with("# config_hash: "));
    assert_eq!(header[1], "t,bin_center,density");
}

#[test]
fn identical_runs_are_byte_identical() {
    for mode in [Mode::Abm, Mode::Meanfield, Mode::Stationary] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run(&tiny(mode), Some(a.path())).unwrap();
        run(&tiny(mode), Some(b.path())).unwrap();
        let read = |d: &Path| fs::read(d.join("snapshots.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{mode:?}");
        let meta: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join("meta.json")).unwrap()).unwrap();
        assert_eq!(meta["config_hash"].as_str().unwrap(), tiny(mode).hash());
    }
}

#[test]
fn compare_mode_writes_aligned_table() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(&tiny(Mode::Compare), Some(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(
        text.lines().nth(1).unwrap(),
        "t,w1_abm_fpe,w1_fpe_meanfield,mean_abm,mean_fpe,var_abm,var_fpe"
    );
    assert_eq!(text.lines().count(), 2 + s.compare.len());
    // t = E / N
    assert_eq!(s.compare.last().unwrap().t, 10.0);
    assert_eq!(s.compare[0].w1_fpe_meanfield, 0.0);
    for sub in ["abm", "fpe", "meanfield"] {
        assert!(dir.path().join(sub).join("snapshots.csv").exists());
    }
}

#[test]
fn compare_refuses_mismatched_settings() {
    let cfg = tiny(Mode::Compare);
    let a = Series {
        settings: Settings::of(&cfg),
        snapshots: vec![],
    };
    let mut other = Settings::of(&cfg);
    other.payoff.b = 4.0;
    let b = Series {
        settings: other,
        snapshots: vec![],
    };
    let err = compare_series(&a, &b, &a).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let mut grid = Settings::of(&cfg);
    grid.grid = Grid::new(20).unwrap();
    let c = Series {
        settings: grid,
        snapshots: vec![],
    };
    assert!(compare_series(&a, &a, &c).is_err());
}

#[test]
fn verify_mode_passes() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(&tiny(Mode::Verify), Some(dir.path())).unwrap();
    assert!(s.checks.len() >= 8);
    assert!(s.checks.iter().all(|c| c.passed), "{:?}", s.checks);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("blocker");
    fs::write(&file, "x").unwrap();
    let err = run(&tiny(Mode::Meanfield), Some(&file.join("sub"))).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}
