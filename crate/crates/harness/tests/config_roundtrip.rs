//! Config files on disk and the emit/parse round trip.

use braess_core::{InitMode, MetaParameter, MonitoringFeedback};
use braess_harness::config::GameSection;
use braess_harness::config::{
    MetricsSection, OutputSection, ParamValue, ParamsSection, PlotKind, Polarity, RunSection,
    SweepKind, SweepSection,
};
use braess_harness::{parse_config, parse_str, ConfigError, ExperimentConfig};
use proptest::prelude::*;

fn increasing(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(0u32..=100, 1..=max_len)
        .prop_map(|s| s.into_iter().map(|k| k as f64 / 100.0).collect())
}

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        2usize..200,
        1usize..100_000,
        1usize..50,
        any::<u64>(),
        any::<bool>(),
        any::<bool>(),
        0.5f64..=1.0,
        0.0f64..=0.5,
        0.0f64..=1.0,
        proptest::option::of((increasing(4), increasing(4))),
        (0.0f64..0.9, any::<bool>(), any::<bool>()),
    )
        .prop_map(
            |(
                n,
                horizon,
                reps,
                seed,
                nash,
                taken,
                alpha,
                beta,
                epsilon,
                grids,
                (burn_in, log_period, negated),
            )| {
                let sweep = grids.map(|(population, deviant)| SweepSection {
                    kind: SweepKind::Deviant,
                    parameter: Some(MetaParameter::Epsilon),
                    population,
                    deviant,
                    half_widths: Vec::new(),
                    tolerance: 0.005,
                    stderr_gate: 2.0,
                });
                ExperimentConfig {
                    game: GameSection { n },
                    run: RunSection {
                        horizon,
                        reps,
                        master_seed: seed,
                        init: if nash {
                            InitMode::NashEq
                        } else {
                            InitMode::Random
                        },
                        monitoring: if taken {
                            MonitoringFeedback::TakenCost
                        } else {
                            MonitoringFeedback::RouteCost
                        },
                    },
                    params: ParamsSection {
                        alpha: Some(ParamValue::Scalar(alpha)),
                        beta: ParamValue::Scalar(beta),
                        epsilon: ParamValue::Scalar(epsilon),
                    },
                    sweep,
                    metrics: MetricsSection {
                        burn_in,
                        validity_band: 0.25,
                    },
                    output: OutputSection {
                        dir: "results".into(),
                        plots: vec![PlotKind::Timeseries, PlotKind::Heatmap],
                        log_period,
                        advantage_polarity: if negated {
                            Polarity::Negated
                        } else {
                            Polarity::Raw
                        },
                    },
                }
            },
        )
}

proptest! {
    #[test]
    fn emit_then_parse_is_identity(cfg in config()) {
        prop_assert!(cfg.validate().is_ok());
        prop_assert_eq!(parse_str(&cfg.to_toml()).unwrap(), cfg);
    }
}

#[test]
fn reads_files_and_reports_locations() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.toml");
    std::fs::write(&ok, "[params]\nalpha = 0.7\n").unwrap();
    let cfg = parse_config(&ok).unwrap();
    assert_eq!(
        (cfg.game.n, cfg.run.horizon, cfg.run.reps),
        (100, 100_000, 40)
    );

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[game]\nn = 100\n\n[run]\nT = \"many\"\n").unwrap();
    match parse_config(&bad) {
        Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 5),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        parse_config(&dir.path().join("nope.toml")),
        Err(ConfigError::Read { .. })
    ));
}

#[test]
fn horizon_key_has_a_long_alias() {
    let cfg = parse_str("[run]\nhorizon = 250\n[params]\nalpha = 0.5\n").unwrap();
    assert_eq!(cfg.run.horizon, 250);
}
