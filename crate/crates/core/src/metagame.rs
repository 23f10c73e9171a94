//! Parameter-picking meta-games.
//!
//! Designers each pick one learner parameter; their payoff is the learner's
//! time-averaged cost in the repeated game. A symmetric profile is tested by
//! letting agent 0 deviate while the other `n - 1` agents keep the population
//! value, and measuring the deviant's advantage
//! `D_0 = <C_0> - <C>` (negative means the deviation pays).
//!
//! Every cell of a sweep reuses the same child seed per repetition, so agent
//! streams are shared across deviant values (common random numbers).

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cycles::{analyze, CycleOptions, CycleReport, MetricsError};
use crate::learner::{AgentParams, ParamError};
use crate::rng::{child_seed, population_rng};
use crate::sim::{run_simulation, BaseConfig, SimError, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetaGameError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{role} value {value}: {source}")]
    Param {
        role: &'static str,
        value: f64,
        #[source]
        source: ParamError,
    },
    #[error("{0} grid is empty")]
    EmptyGrid(&'static str),
    #[error("half-width {0} outside [0, 0.5]")]
    HalfWidth(f64),
    #[error("half-width {width} can draw alpha below the fixed beta {beta}")]
    HalfWidthBeta { width: f64, beta: f64 },
    #[error("at least one repetition is required")]
    NoRepetitions,
    #[error("population value {0} has no matching deviant value in the grid")]
    MissingDiagonal(f64),
}

/// The parameter a meta-game is played over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaParameter {
    Alpha,
    Beta,
    Epsilon,
}

impl MetaParameter {
    pub fn name(self) -> &'static str {
        match self {
            MetaParameter::Alpha => "alpha",
            MetaParameter::Beta => "beta",
            MetaParameter::Epsilon => "epsilon",
        }
    }

    /// `base` with this parameter replaced by `value`.
    pub fn apply(self, base: AgentParams, value: f64) -> Result<AgentParams, ParamError> {
        match self {
            MetaParameter::Alpha => base.with_alpha(value),
            MetaParameter::Beta => base.with_beta(value),
            MetaParameter::Epsilon => base.with_epsilon(value),
        }
    }

    pub fn get(self, p: &AgentParams) -> f64 {
        match self {
            MetaParameter::Alpha => p.alpha(),
            MetaParameter::Beta => p.beta(),
            MetaParameter::Epsilon => p.epsilon(),
        }
    }
}

/// Grid definition of a single-deviant meta-game. The fixed parameters come
/// from the [`BaseConfig`] it is run against.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaGameSpec {
    pub parameter: MetaParameter,
    pub population_grid: Vec<f64>,
    pub deviant_grid: Vec<f64>,
    pub reps: usize,
}

/// One repetition of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvantageSample {
    pub population_value: f64,
    pub deviant_value: f64,
    pub rep: usize,
    pub seed: u64,
    pub advantage: f64,
    pub mean_cost: f64,
}

/// Repetition summary of one (population, deviant) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdvantageCell {
    pub population_value: f64,
    pub deviant_value: f64,
    pub d_mean: f64,
    /// Standard error of `d_mean`; NaN with a single repetition.
    pub d_stderr: f64,
    pub c_mean: f64,
    pub reps: usize,
}

/// Cells in grid order (population-major) plus the raw samples behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageGrid {
    pub parameter: MetaParameter,
    pub cells: Vec<AdvantageCell>,
    pub samples: Vec<AdvantageSample>,
}

impl AdvantageGrid {
    pub fn cell(&self, population_value: f64, deviant_value: f64) -> Option<&AdvantageCell> {
        self.cells
            .iter()
            .find(|c| c.population_value == population_value && c.deviant_value == deviant_value)
    }
}

/// `<C_j> - <C>` for agent `j`.
pub fn advantage(traj: &Trajectory, j: usize) -> Result<f64, SimError> {
    Ok(traj.agent_time_averaged_cost(j)? - traj.time_averaged_cost())
}

fn check_grid(name: &'static str, grid: &[f64]) -> Result<(), MetaGameError> {
    if grid.is_empty() {
        return Err(MetaGameError::EmptyGrid(name));
    }
    Ok(())
}

fn summarize(
    population_value: f64,
    deviant_value: f64,
    samples: &[AdvantageSample],
) -> AdvantageCell {
    let k = samples.len() as f64;
    let d_mean = samples.iter().map(|s| s.advantage).sum::<f64>() / k;
    let c_mean = samples.iter().map(|s| s.mean_cost).sum::<f64>() / k;
    let d_stderr = if samples.len() > 1 {
        let var = samples
            .iter()
            .map(|s| (s.advantage - d_mean).powi(2))
            .sum::<f64>()
            / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::NAN
    };
    AdvantageCell {
        population_value,
        deviant_value,
        d_mean,
        d_stderr,
        c_mean,
        reps: samples.len(),
    }
}

/// Runs every `(column, deviant, rep)` job; `population` builds the agent
/// parameters for agents `1..n` from the column value and the run seed.
fn run_deviant_grid<P>(
    parameter: MetaParameter,
    columns: &[f64],
    deviant_grid: &[f64],
    reps: usize,
    base: &BaseConfig,
    population: P,
) -> Result<AdvantageGrid, MetaGameError>
where
    P: Fn(f64, u64) -> Result<Vec<AgentParams>, MetaGameError> + Sync,
{
    let deviants = deviant_grid
        .iter()
        .map(|&v| {
            parameter
                .apply(base.params, v)
                .map_err(|source| MetaGameError::Param {
                    role: "deviant",
                    value: v,
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(f64, usize, usize)> = columns
        .iter()
        .flat_map(|&c| (0..deviants.len()).flat_map(move |d| (0..reps).map(move |r| (c, d, r))))
        .collect();

    let samples = jobs
        .into_par_iter()
        .map(|(column, d, rep)| {
            let seed = child_seed(base.master_seed, rep as u64);
            let mut params = population(column, seed)?;
            params[0] = deviants[d];
            let traj = run_simulation(&base.config(params, seed))?;
            Ok(AdvantageSample {
                population_value: column,
                deviant_value: deviant_grid[d],
                rep,
                seed,
                advantage: advantage(&traj, 0)?,
                mean_cost: traj.time_averaged_cost(),
            })
        })
        .collect::<Result<Vec<_>, MetaGameError>>()?;

    let cells = samples
        .chunks(reps)
        .map(|chunk| summarize(chunk[0].population_value, chunk[0].deviant_value, chunk))
        .collect();
    Ok(AdvantageGrid {
        parameter,
        cells,
        samples,
    })
}

/// Single-deviant best-response grid over a homogeneous population.
pub fn sweep_deviant(
    spec: &MetaGameSpec,
    base: &BaseConfig,
) -> Result<AdvantageGrid, MetaGameError> {
    check_grid("population", &spec.population_grid)?;
    check_grid("deviant", &spec.deviant_grid)?;
    if spec.reps == 0 {
        return Err(MetaGameError::NoRepetitions);
    }
    let n = base.spec.players();
    // Validate population values up front so errors name the right role.
    for &v in &spec.population_grid {
        spec.parameter
            .apply(base.params, v)
            .map_err(|source| MetaGameError::Param {
                role: "population",
                value: v,
                source,
            })?;
    }
    let parameter = spec.parameter;
    let fixed = base.params;
    run_deviant_grid(
        parameter,
        &spec.population_grid,
        &spec.deviant_grid,
        spec.reps,
        base,
        move |value, _seed| {
            let p = parameter
                .apply(fixed, value)
                .map_err(|source| MetaGameError::Param {
                    role: "population",
                    value,
                    source,
                })?;
            Ok(vec![p; n])
        },
    )
}

/// Mean of the heterogeneous population's learning rates.
pub const HETEROGENEOUS_ALPHA_MEAN: f64 = 0.5;

/// Deviant alpha against a population whose alphas are drawn per repetition
/// from `Uniform(0.5 - w, 0.5 + w)`. Cells are keyed by `w` in
/// `population_value`.
pub fn sweep_heterogeneous_alpha(
    half_widths: &[f64],
    deviant_grid: &[f64],
    reps: usize,
    base: &BaseConfig,
) -> Result<AdvantageGrid, MetaGameError> {
    check_grid("half-width", half_widths)?;
    check_grid("deviant", deviant_grid)?;
    if reps == 0 {
        return Err(MetaGameError::NoRepetitions);
    }
    for &w in half_widths {
        if !(0.0..=0.5).contains(&w) {
            return Err(MetaGameError::HalfWidth(w));
        }
        if HETEROGENEOUS_ALPHA_MEAN - w < base.params.beta() {
            return Err(MetaGameError::HalfWidthBeta {
                width: w,
                beta: base.params.beta(),
            });
        }
    }
    let n = base.spec.players();
    let fixed = base.params;
    run_deviant_grid(
        MetaParameter::Alpha,
        half_widths,
        deviant_grid,
        reps,
        base,
        move |w, seed| {
            let mut rng = population_rng(seed);
            let mut params = Vec::with_capacity(n);
            params.push(fixed);
            for _ in 1..n {
                let u: f64 = rng.gen();
                let alpha = HETEROGENEOUS_ALPHA_MEAN - w + 2.0 * w * u;
                params.push(
                    fixed
                        .with_alpha(alpha)
                        .map_err(|source| MetaGameError::Param {
                            role: "population",
                            value: alpha,
                            source,
                        })?,
                );
            }
            Ok(params)
        },
    )
}

/// One row of a homogeneous sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub params: AgentParams,
    pub rep: usize,
    pub seed: u64,
    pub report: CycleReport,
}

/// Every `(alpha, beta, epsilon)` combination with `beta <= alpha`.
pub fn homogeneous_grid(
    alphas: &[f64],
    betas: &[f64],
    epsilons: &[f64],
) -> Result<Vec<AgentParams>, ParamError> {
    let mut out = Vec::new();
    for &a in alphas {
        for &b in betas {
            if b > a {
                continue;
            }
            for &e in epsilons {
                out.push(AgentParams::new(a, b, e)?);
            }
        }
    }
    Ok(out)
}

/// Runs `reps` repetitions at each point with all agents sharing the point's
/// parameters. Repetition `k` uses the same child seed at every point.
pub fn sweep_homogeneous(
    points: &[AgentParams],
    base: &BaseConfig,
    reps: usize,
    opts: &CycleOptions,
) -> Result<Vec<SweepRow>, MetaGameError> {
    if points.is_empty() {
        return Err(MetaGameError::EmptyGrid("parameter"));
    }
    if reps == 0 {
        return Err(MetaGameError::NoRepetitions);
    }
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..reps).map(move |r| (p, r)))
        .collect();
    jobs.into_par_iter()
        .map(|(p, rep)| {
            let seed = child_seed(base.master_seed, rep as u64);
            let cfg = base.config(vec![points[p]; base.spec.players()], seed);
            let traj = run_simulation(&cfg)?;
            Ok(SweepRow {
                params: points[p],
                rep,
                seed,
                report: analyze(&traj.system_cost, opts)?,
            })
        })
        .collect()
}

/// Best deviation found for one population value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestResponse {
    pub population_value: f64,
    pub best_deviant: f64,
    pub d_mean: f64,
    pub d_stderr: f64,
    /// The deviation beats the tolerance and is separated from zero.
    pub profitable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCertificate {
    pub tolerance: f64,
    pub stderr_gate: f64,
    pub columns: Vec<BestResponse>,
}

impl NashCertificate {
    /// True when every population value on the grid admits a profitable
    /// deviation.
    pub fn no_symmetric_equilibrium(&self) -> bool {
        self.columns.iter().all(|c| c.profitable)
    }

    /// Population values where no deviation on the grid pays.
    pub fn equilibria(&self) -> Vec<f64> {
        self.columns
            .iter()
            .filter(|c| !c.profitable)
            .map(|c| c.population_value)
            .collect()
    }
}

/// Default tolerance, in cost units, below which a deviation does not count.
pub const DEFAULT_EQUILIBRIUM_TOLERANCE: f64 = 0.005;
/// Default number of standard errors separating a profitable deviation from 0.
pub const DEFAULT_STDERR_GATE: f64 = 2.0;

/// Checks each symmetric profile of the grid for profitable deviations.
///
/// A deviation is profitable when `d_mean < -tolerance` and
/// `d_mean + gate * d_stderr < 0`.
pub fn nash_certificate(
    cells: &[AdvantageCell],
    tolerance: f64,
    stderr_gate: f64,
) -> Result<NashCertificate, MetaGameError> {
    let mut populations: Vec<f64> = Vec::new();
    for c in cells {
        if !populations.contains(&c.population_value) {
            populations.push(c.population_value);
        }
    }
    let mut columns = Vec::with_capacity(populations.len());
    for pop in populations {
        let column: Vec<&AdvantageCell> =
            cells.iter().filter(|c| c.population_value == pop).collect();
        if !column.iter().any(|c| c.deviant_value == pop) {
            return Err(MetaGameError::MissingDiagonal(pop));
        }
        let best = column
            .iter()
            .filter(|c| c.deviant_value != pop)
            .min_by(|a, b| a.d_mean.total_cmp(&b.d_mean))
            .copied()
            // A column with only the diagonal cell has nothing to deviate to.
            .unwrap_or_else(|| column[0]);
        let profitable = best.deviant_value != pop
            && best.d_mean < -tolerance
            && best.d_mean + stderr_gate * best.d_stderr < 0.0;
        columns.push(BestResponse {
            population_value: pop,
            best_deviant: best.deviant_value,
            d_mean: best.d_mean,
            d_stderr: best.d_stderr,
            profitable,
        });
    }
    Ok(NashCertificate {
        tolerance,
        stderr_gate,
        columns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameSpec;
    use crate::learner::InitMode;
    use crate::sim::SimConfig;

    fn base(n: usize, horizon: usize, params: AgentParams) -> BaseConfig {
        BaseConfig {
            spec: GameSpec::new(n).unwrap(),
            horizon,
            init: InitMode::Random,
            master_seed: 11,
            feedback: Default::default(),
            params,
        }
    }

    #[test]
    fn nash_lock_in_has_zero_advantage() {
        let cfg = SimConfig::homogeneous(
            GameSpec::new(50).unwrap(),
            200,
            AgentParams::new(0.5, 0.0, 0.0).unwrap(),
            InitMode::NashEq,
            1,
        );
        let traj = run_simulation(&cfg).unwrap();
        for j in 0..50 {
            assert_eq!(advantage(&traj, j).unwrap(), 0.0);
        }
        assert!(advantage(&traj, 50).is_err());
    }

    #[test]
    fn advantages_sum_to_zero() {
        let cfg = SimConfig::homogeneous(
            GameSpec::new(40).unwrap(),
            2000,
            AgentParams::new(0.6, 0.1, 0.05).unwrap(),
            InitMode::Random,
            9,
        );
        let traj = run_simulation(&cfg).unwrap();
        let total: f64 = (0..40).map(|j| advantage(&traj, j).unwrap()).sum();
        assert!(total.abs() < 1e-9, "{total}");
    }

    #[test]
    fn deviant_grid_layout_and_crn() {
        let spec = MetaGameSpec {
            parameter: MetaParameter::Alpha,
            population_grid: vec![0.1, 0.6],
            deviant_grid: vec![0.01, 0.1, 0.6],
            reps: 3,
        };
        let b = base(10, 300, AgentParams::bandit(0.5, 0.05).unwrap());
        let grid = sweep_deviant(&spec, &b).unwrap();
        assert_eq!(grid.cells.len(), 6);
        assert_eq!(grid.samples.len(), 18);
        assert_eq!(grid.cells[1].population_value, 0.1);
        assert_eq!(grid.cells[1].deviant_value, 0.1);
        // Same seed per rep across all cells.
        for s in &grid.samples {
            assert_eq!(s.seed, child_seed(11, s.rep as u64));
        }
        assert_eq!(grid, sweep_deviant(&spec, &b).unwrap());
    }

    #[test]
    fn beta_deviants_must_respect_alpha() {
        let spec = MetaGameSpec {
            parameter: MetaParameter::Beta,
            population_grid: vec![0.0, 0.2],
            deviant_grid: vec![0.0, 0.5],
            reps: 1,
        };
        let b = base(10, 50, AgentParams::bandit(0.3, 0.01).unwrap());
        let err = sweep_deviant(&spec, &b).unwrap_err();
        assert!(matches!(err, MetaGameError::Param { role: "deviant", value, .. } if value == 0.5));

        let spec = MetaGameSpec {
            deviant_grid: vec![0.0],
            population_grid: vec![0.4],
            ..spec
        };
        assert!(matches!(
            sweep_deviant(&spec, &b).unwrap_err(),
            MetaGameError::Param {
                role: "population",
                ..
            }
        ));
    }

    #[test]
    fn zero_width_population_matches_homogeneous() {
        let b = base(12, 400, AgentParams::bandit(0.5, 0.05).unwrap());
        let hetero = sweep_heterogeneous_alpha(&[0.0], &[0.05, 0.9], 2, &b).unwrap();
        let homo = sweep_deviant(
            &MetaGameSpec {
                parameter: MetaParameter::Alpha,
                population_grid: vec![0.5],
                deviant_grid: vec![0.05, 0.9],
                reps: 2,
            },
            &b,
        )
        .unwrap();
        for (h, o) in hetero.samples.iter().zip(&homo.samples) {
            assert_eq!(h.advantage, o.advantage);
            assert_eq!(h.mean_cost, o.mean_cost);
        }
        assert!(matches!(
            sweep_heterogeneous_alpha(&[0.6], &[0.1], 1, &b),
            Err(MetaGameError::HalfWidth(_))
        ));
    }

    #[test]
    fn full_width_population_spans_unit_interval() {
        let mut rng = population_rng(child_seed(3, 0));
        let draws: Vec<f64> = (0..5000)
            .map(|_| HETEROGENEOUS_ALPHA_MEAN - 0.5 + rng.gen::<f64>())
            .collect();
        assert!(draws.iter().all(|a| (0.0..1.0).contains(a)));
        assert!(draws.iter().any(|&a| a < 0.01) && draws.iter().any(|&a| a > 0.99));
    }

    fn cell(pop: f64, dev: f64, d: f64, se: f64) -> AdvantageCell {
        AdvantageCell {
            population_value: pop,
            deviant_value: dev,
            d_mean: d,
            d_stderr: se,
            c_mean: 1.8,
            reps: 20,
        }
    }

    #[test]
    fn certificate_on_flat_payoffs_reports_equilibria() {
        let cells: Vec<AdvantageCell> = [0.1, 0.5]
            .iter()
            .flat_map(|&p| [0.1, 0.5].map(|d| cell(p, d, 0.0, 0.001)))
            .collect();
        let cert =
            nash_certificate(&cells, DEFAULT_EQUILIBRIUM_TOLERANCE, DEFAULT_STDERR_GATE).unwrap();
        assert!(!cert.no_symmetric_equilibrium());
        assert_eq!(cert.equilibria(), vec![0.1, 0.5]);
    }

    #[test]
    fn certificate_finds_profitable_deviations() {
        let cells = vec![
            cell(0.1, 0.1, 0.0, 0.001),
            cell(0.1, 0.5, -0.02, 0.002),
            cell(0.5, 0.1, -0.03, 0.004),
            cell(0.5, 0.5, 0.001, 0.001),
        ];
        let cert =
            nash_certificate(&cells, DEFAULT_EQUILIBRIUM_TOLERANCE, DEFAULT_STDERR_GATE).unwrap();
        assert!(cert.no_symmetric_equilibrium());
        assert_eq!(cert.columns[0].best_deviant, 0.5);
        assert_eq!(cert.columns[1].best_deviant, 0.1);

        // Large stderr: not separated from zero.
        let noisy = vec![cell(0.1, 0.1, 0.0, 0.0), cell(0.1, 0.5, -0.02, 0.02)];
        let cert =
            nash_certificate(&noisy, DEFAULT_EQUILIBRIUM_TOLERANCE, DEFAULT_STDERR_GATE).unwrap();
        assert!(!cert.columns[0].profitable);

        let missing = vec![cell(0.1, 0.5, -0.02, 0.002)];
        assert_eq!(
            nash_certificate(&missing, 0.005, 2.0),
            Err(MetaGameError::MissingDiagonal(0.1))
        );
    }

    #[test]
    fn homogeneous_grid_skips_beta_above_alpha() {
        let pts = homogeneous_grid(&[0.1, 0.5], &[0.0, 0.3], &[0.01]).unwrap();
        assert_eq!(pts.len(), 3);
        assert!(pts.iter().all(|p| p.beta() <= p.alpha()));
    }

    #[test]
    fn homogeneous_sweep_single_point() {
        let b = base(10, 200, AgentParams::bandit(0.5, 0.05).unwrap());
        let rows = sweep_homogeneous(&[b.params], &b, 1, &CycleOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].report.horizon, 200);
    }
}
