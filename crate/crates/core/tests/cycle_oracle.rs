//! Cycle statistics against a direct transcription of their definitions.

use braess_core::cycles::{analyze, count_cycles, edgeworthiness, period, CycleOptions};
use proptest::prelude::*;

struct Expected {
    m: usize,
    l: Option<f64>,
    f: f64,
}

fn brute_force(c: &[f64]) -> Expected {
    let t = c.len();
    let mean = c.iter().sum::<f64>() / t as f64;
    let d: Vec<f64> = c.windows(2).map(|w| w[1] - w[0]).collect();
    let dm = d.iter().sum::<f64>() / d.len() as f64;
    let sigma = (d.iter().map(|x| (x - dm).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    let mut m = 0;
    for i in 0..t - 1 {
        if c[i] > mean && c[i + 1] < mean && (c[i + 1] - c[i]).abs() > 3.0 * sigma {
            m += 1;
        }
    }
    Expected {
        m,
        l: (m > 0).then(|| t as f64 / m as f64),
        f: d.iter().filter(|&&x| x >= 0.0).count() as f64 / (t - 1) as f64,
    }
}

/// Slow climbs broken by sudden drops, the shape the filter is built for.
fn crash_series() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(
        (0.0f64..0.01, prop::bool::weighted(0.04), 0.1f64..0.5),
        2..1000,
    )
    .prop_map(|steps| {
        let mut x = 1.5;
        steps
            .into_iter()
            .map(|(rise, crash, drop)| {
                x += if crash { -drop } else { rise };
                x
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn matches_brute_force_on_noise(c in prop::collection::vec(1.0f64..2.0, 2..1000)) {
        let e = brute_force(&c);
        prop_assert_eq!(count_cycles(&c), e.m);
        prop_assert_eq!(period(&c), e.l);
        prop_assert_eq!(edgeworthiness(&c).unwrap(), e.f);
    }

    #[test]
    fn matches_brute_force_on_crashes(c in crash_series()) {
        let e = brute_force(&c);
        prop_assert_eq!(count_cycles(&c), e.m);
        prop_assert_eq!(period(&c), e.l);
        prop_assert_eq!(edgeworthiness(&c).unwrap(), e.f);
        let r = analyze(&c, &CycleOptions::default()).unwrap();
        prop_assert_eq!(r.crossings, e.m);
        prop_assert_eq!(r.period, e.l);
    }
}

#[test]
fn sawtooth_with_ten_teeth() {
    let saw: Vec<f64> = (0..1000)
        .map(|t| 1.5 + 0.005 * ((t + 99) % 100) as f64)
        .collect();
    let e = brute_force(&saw);
    assert_eq!(e.m, 10);
    assert_eq!(count_cycles(&saw), 10);
    assert_eq!(period(&saw), Some(100.0));
    assert_eq!(edgeworthiness(&saw).unwrap(), 989.0 / 999.0);
}
