//! Reference implementations written straight from the definitions, with no
//! shared code paths with `braess-core`. The acceptance suite compares the
//! production code against these.

/// Cycle statistics of a cost series.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    /// Filtered downward mean crossings.
    pub m: usize,
    /// `T / M`, absent without crossings.
    pub l: Option<f64>,
    /// Share of non-negative one-step changes.
    pub f: f64,
}

/// Brute-force cycle statistics. Needs at least two samples.
pub fn cycle_stats(c: &[f64]) -> CycleStats {
    assert!(c.len() >= 2, "need at least two samples");
    let t = c.len();
    let mean = c.iter().sum::<f64>() / t as f64;
    let deltas: Vec<f64> = (0..t - 1).map(|i| c[i + 1] - c[i]).collect();
    let dm = deltas.iter().sum::<f64>() / deltas.len() as f64;
    let sigma =
        (deltas.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>() / deltas.len() as f64).sqrt();
    let mut m = 0;
    for i in 0..t - 1 {
        if c[i] > mean && c[i + 1] < mean && (c[i + 1] - c[i]).abs() > 3.0 * sigma {
            m += 1;
        }
    }
    let up = deltas.iter().filter(|&&d| d >= 0.0).count();
    CycleStats {
        m,
        l: if m == 0 {
            None
        } else {
            Some(t as f64 / m as f64)
        },
        f: up as f64 / (t - 1) as f64,
    }
}

/// Closed form of `q <- q + alpha (c - q)` applied over `costs` from `q0`:
/// `(1 - alpha)^T q0 + sum_k alpha (1 - alpha)^(T - 1 - k) c_k`.
pub fn ema_closed_form(q0: f64, alpha: f64, costs: &[f64]) -> f64 {
    let keep = 1.0 - alpha;
    let t = costs.len();
    let mut q = keep.powi(t as i32) * q0;
    for (k, &c) in costs.iter().enumerate() {
        q += alpha * keep.powi((t - 1 - k) as i32) * c;
    }
    q
}

/// Route costs `[up, down, cross]` for flows in an `n`-player game, in
/// exact rational form as `(numerator, n)`.
pub fn route_cost_numerators(up: u64, down: u64, cross: u64) -> [u64; 3] {
    let n = up + down + cross;
    [n + up + cross, n + down + cross, up + 2 * cross + down]
}

/// Median; the mean of the two middle values for even lengths.
pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}
