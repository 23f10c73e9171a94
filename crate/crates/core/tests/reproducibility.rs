//! Seeding, common random numbers and thread-count independence.

use braess_core::metagame::{sweep_deviant, sweep_heterogeneous_alpha, sweep_homogeneous};
use braess_core::rng::child_seed;
use braess_core::{
    run_batch, AgentParams, BaseConfig, CycleOptions, GameSpec, InitMode, MetaGameSpec,
    MetaParameter, MonitoringFeedback, SimConfig,
};

fn base() -> BaseConfig {
    BaseConfig {
        spec: GameSpec::new(20).unwrap(),
        horizon: 400,
        init: InitMode::Random,
        master_seed: 77,
        feedback: MonitoringFeedback::RouteCost,
        params: AgentParams::new(0.3, 0.0, 0.05).unwrap(),
    }
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn batch_is_independent_of_thread_count() {
    let cfg = SimConfig::homogeneous(
        GameSpec::new(30).unwrap(),
        500,
        AgentParams::new(0.5, 0.1, 0.02).unwrap(),
        InitMode::Random,
        5,
    );
    let one = in_pool(1, || run_batch(&cfg, 6, |t| t.system_cost.clone()).unwrap());
    let four = in_pool(4, || run_batch(&cfg, 6, |t| t.system_cost.clone()).unwrap());
    assert_eq!(one, four);
    for (k, row) in one.iter().enumerate() {
        assert_eq!(row.rep, k);
        assert_eq!(row.seed, child_seed(5, k as u64));
    }
}

#[test]
fn sweeps_share_seeds_across_cells() {
    let spec = MetaGameSpec {
        parameter: MetaParameter::Alpha,
        population_grid: vec![0.1, 0.6],
        deviant_grid: vec![0.1, 0.6],
        reps: 3,
    };
    let grid = in_pool(3, || sweep_deviant(&spec, &base()).unwrap());
    assert_eq!(grid.samples.len(), 12);
    for s in &grid.samples {
        assert_eq!(s.seed, child_seed(77, s.rep as u64));
    }
    assert_eq!(grid, in_pool(1, || sweep_deviant(&spec, &base()).unwrap()));

    let points = [
        AgentParams::new(0.2, 0.0, 0.05).unwrap(),
        AgentParams::new(0.8, 0.0, 0.05).unwrap(),
    ];
    let rows = sweep_homogeneous(&points, &base(), 2, &CycleOptions::default()).unwrap();
    assert_eq!(rows[0].seed, rows[2].seed);
    assert_eq!(rows[1].seed, rows[3].seed);
    assert_ne!(rows[0].seed, rows[1].seed);
}

#[test]
fn zero_width_heterogeneity_is_the_homogeneous_population() {
    let hetero = sweep_heterogeneous_alpha(&[0.0], &[0.1, 0.5], 2, &base()).unwrap();
    let spec = MetaGameSpec {
        parameter: MetaParameter::Alpha,
        population_grid: vec![0.5],
        deviant_grid: vec![0.1, 0.5],
        reps: 2,
    };
    let homo = sweep_deviant(&spec, &base()).unwrap();
    for (h, o) in hetero.samples.iter().zip(&homo.samples) {
        assert_eq!(h.advantage, o.advantage);
        assert_eq!(h.mean_cost, o.mean_cost);
    }
}
