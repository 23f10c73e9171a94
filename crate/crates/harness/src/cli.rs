//! The `braess` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use braess_core::cycles::pearson;
use braess_core::metagame::{
    nash_certificate, sweep_deviant, sweep_heterogeneous_alpha, sweep_homogeneous, MetaGameError,
};
use braess_core::rng::child_seed;
use braess_core::sim::SimError;
use braess_core::{analyze, run_simulation, MetaParameter};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{parse_config, ConfigError, ExperimentConfig, PlotKind, SweepKind};
use crate::output::{self, CorrelationEntry, OutputError, Table};
use crate::plot::{render_plots, PlotOptions};

#[derive(Debug, Parser)]
#[command(
    name = "braess",
    version,
    about = "Q-learning populations on the Braess network"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(short, long, value_name = "PATH")]
    config: PathBuf,
    /// Master seed, overriding `[run].master_seed`.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "BRAESS_JOBS", value_name = "K")]
    jobs: Option<usize>,
    /// Output directory, overriding `[output].dir`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One run: trajectory.csv, report.csv and timeseries.svg.
    Simulate(Common),
    /// Homogeneous parameter sweep: batch.csv, metrics.csv and sweep.svg.
    Sweep(Common),
    /// Single-deviant meta-game: advantage.csv, best_response.csv and heatmap.svg.
    Metagame(Common),
    /// Cycle metrics of an existing trajectory.csv.
    Metrics {
        /// Trajectory file written by `simulate`.
        trajectory: PathBuf,
        /// Leading fraction of rounds to drop.
        #[arg(long, default_value_t = 0.0)]
        burn_in: f64,
        /// Validity band of the crossing reference.
        #[arg(long, default_value_t = braess_core::cycles::DEFAULT_VALIDITY_BAND)]
        validity_band: f64,
        /// Write report.csv here instead of printing it.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Correlations between parameters and cycle metrics over a sweep.
    Correlate {
        #[command(flatten)]
        common: Option<Common>,
        /// Use an existing batch.csv instead of running the sweep.
        #[arg(long, value_name = "PATH", conflicts_with = "config")]
        batch: Option<PathBuf>,
        /// Output directory when reading `--batch`.
        #[arg(long = "batch-out", value_name = "DIR", requires = "batch")]
        batch_out: Option<PathBuf>,
    },
    /// Re-render plots from the CSVs in a directory.
    Plot {
        dir: PathBuf,
        #[arg(short, long, value_name = "PATH")]
        config: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    MetaGame(#[from] MetaGameError),
    #[error(transparent)]
    Metrics(#[from] braess_core::cycles::MetricsError),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("{0}")]
    Usage(String),
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

struct Context {
    cfg: ExperimentConfig,
    out: PathBuf,
    jobs: Option<usize>,
}

impl Context {
    fn load(common: &Common) -> Result<Self, CliError> {
        let mut cfg = parse_config(&common.config)?;
        if let Some(seed) = common.seed {
            cfg.run.master_seed = seed;
        }
        let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
        if common.jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(Context {
            cfg,
            out,
            jobs: common.jobs,
        })
    }

    fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> Result<R, CliError> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(k) = self.jobs {
            builder = builder.num_threads(k);
        }
        Ok(builder.build()?.install(f))
    }

    fn plot_options(&self) -> PlotOptions {
        PlotOptions {
            polarity: self.cfg.output.advantage_polarity,
            log_period: self.cfg.output.log_period,
        }
    }

    fn render(&self, kind: PlotKind) -> Result<(), CliError> {
        if self.cfg.output.plots.contains(&kind) {
            for path in render_plots(&self.out, &[kind], &self.plot_options())? {
                println!("wrote {}", path.display());
            }
        }
        Ok(())
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        CliError::Output(OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate(common) => simulate(&Context::load(&common)?),
        Command::Sweep(common) => sweep(&Context::load(&common)?).map(|_| ()),
        Command::Metagame(common) => metagame(&Context::load(&common)?),
        Command::Metrics {
            trajectory,
            burn_in,
            validity_band,
            out,
        } => metrics(&trajectory, burn_in, validity_band, out.as_deref()),
        Command::Correlate {
            common,
            batch,
            batch_out,
        } => match (common, batch) {
            (_, Some(batch)) => {
                let dir = batch_out
                    .unwrap_or_else(|| batch.parent().map(Path::to_path_buf).unwrap_or_default());
                correlate_file(
                    &batch,
                    &dir,
                    &[PlotKind::Correlation],
                    &PlotOptions::default(),
                )
            }
            (Some(common), None) => {
                let ctx = Context::load(&common)?;
                let batch = sweep(&ctx)?;
                correlate_file(&batch, &ctx.out, &ctx.cfg.output.plots, &ctx.plot_options())
            }
            (None, None) => Err(CliError::Usage(
                "correlate needs -c/--config or --batch".into(),
            )),
        },
        Command::Plot { dir, config } => {
            let (kinds, opts) = match config {
                Some(path) => {
                    let cfg = parse_config(&path)?;
                    let opts = PlotOptions {
                        polarity: cfg.output.advantage_polarity,
                        log_period: cfg.output.log_period,
                    };
                    (cfg.output.plots, opts)
                }
                None => (
                    vec![
                        PlotKind::Timeseries,
                        PlotKind::Sweep,
                        PlotKind::Heatmap,
                        PlotKind::Correlation,
                    ],
                    PlotOptions::default(),
                ),
            };
            for path in render_plots(&dir, &kinds, &opts)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn simulate(ctx: &Context) -> Result<(), CliError> {
    let seed = child_seed(ctx.cfg.run.master_seed, 0);
    let sim = ctx.cfg.sim_config(seed)?;
    let traj = ctx.install(|| run_simulation(&sim))??;
    let report = analyze(&traj.system_cost, &ctx.cfg.cycle_options())?;
    ensure_dir(&ctx.out)?;
    output::write_trajectory(&ctx.path(output::TRAJECTORY_FILE), &traj)?;
    output::write_report(&ctx.path(output::REPORT_FILE), &report)?;
    ctx.render(PlotKind::Timeseries)?;
    println!(
        "seed {seed}: mean C {}, M {}, L {}, F {}",
        output::fmt_num(report.mean_cost),
        report.crossings,
        report
            .period
            .map(output::fmt_num)
            .unwrap_or_else(|| "-".into()),
        output::fmt_num(report.edgeworthiness)
    );
    Ok(())
}

/// Runs the homogeneous sweep and returns the batch.csv path.
fn sweep(ctx: &Context) -> Result<PathBuf, CliError> {
    if let Some(s) = &ctx.cfg.sweep {
        if s.kind != SweepKind::Homogeneous {
            return Err(CliError::Usage(format!(
                "[sweep].kind = {:?} is a meta-game; use the metagame command",
                s.kind
            )));
        }
    }
    let points = ctx.cfg.homogeneous_points()?;
    let base = ctx.cfg.base_config(points[0]);
    let opts = ctx.cfg.cycle_options();
    let rows = ctx.install(|| sweep_homogeneous(&points, &base, ctx.cfg.run.reps, &opts))??;
    ensure_dir(&ctx.out)?;
    let batch = ctx.path(output::BATCH_FILE);
    output::write_batch(&batch, &rows)?;
    output::write_metrics(&ctx.path(output::METRICS_FILE), &rows)?;
    ctx.render(PlotKind::Sweep)?;
    println!(
        "{} points x {} reps written to {}",
        points.len(),
        ctx.cfg.run.reps,
        batch.display()
    );
    Ok(batch)
}

fn metagame(ctx: &Context) -> Result<(), CliError> {
    let sweep = ctx
        .cfg
        .sweep
        .as_ref()
        .ok_or(ConfigError::Missing("[sweep]"))?;
    let (grid, certify) = match sweep.kind {
        SweepKind::Deviant => {
            let (spec, base) = ctx.cfg.metagame_spec()?;
            (ctx.install(|| sweep_deviant(&spec, &base))??, true)
        }
        SweepKind::HeterogeneousAlpha => {
            let base = ctx
                .cfg
                .base_config(ctx.cfg.fixed_params(MetaParameter::Alpha)?);
            let grid = ctx.install(|| {
                sweep_heterogeneous_alpha(
                    &sweep.half_widths,
                    &sweep.deviant,
                    ctx.cfg.run.reps,
                    &base,
                )
            })??;
            (grid, false)
        }
        SweepKind::Homogeneous => {
            return Err(CliError::Usage(
                "[sweep].kind = \"homogeneous\" is not a meta-game; use the sweep command".into(),
            ))
        }
    };
    ensure_dir(&ctx.out)?;
    output::write_advantage(
        &ctx.path(output::ADVANTAGE_FILE),
        grid.parameter,
        &grid.samples,
    )?;
    if certify {
        let cert = nash_certificate(&grid.cells, sweep.tolerance, sweep.stderr_gate)?;
        output::write_best_response(&ctx.path(output::BEST_RESPONSE_FILE), grid.parameter, &cert)?;
        for c in &cert.columns {
            println!(
                "population {} = {}: best deviation {} (D = {} +- {}){}",
                grid.parameter.name(),
                output::fmt_num(c.population_value),
                output::fmt_num(c.best_deviant),
                output::fmt_num(c.d_mean),
                output::fmt_num(c.d_stderr),
                if c.profitable { ", profitable" } else { "" }
            );
        }
        if cert.no_symmetric_equilibrium() {
            println!("no symmetric equilibrium on this grid");
        }
    }
    ctx.render(PlotKind::Heatmap)
}

fn metrics(
    trajectory: &Path,
    burn_in: f64,
    validity_band: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let table = output::read_trajectory(trajectory)?;
    let opts = braess_core::CycleOptions {
        burn_in,
        validity_band,
    };
    if !(0.0..1.0).contains(&burn_in) {
        return Err(CliError::Usage("--burn-in must be in [0, 1)".into()));
    }
    let report = analyze(&table.system_cost, &opts)?;
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            let path = dir.join(output::REPORT_FILE);
            output::write_report(&path, &report)?;
            println!("wrote {}", path.display());
        }
        None => {
            println!("{}", output::REPORT_HEADER.join(","));
            println!(
                "{},{},{},{},{},{},{},{}",
                report.horizon,
                report.crossings,
                report.period.map(output::fmt_num).unwrap_or_default(),
                output::fmt_num(report.edgeworthiness),
                output::fmt_num(report.sigma_delta),
                output::fmt_num(report.sigma_cost),
                output::fmt_num(report.mean_cost),
                report.suspect
            );
        }
    }
    Ok(())
}

/// Variables of batch.csv entering the correlation matrix.
pub const CORRELATION_VARS: [&str; 7] = ["alpha", "beta", "epsilon", "L", "F", "mean_C", "sigma_C"];

/// Pairwise Pearson correlations over the batch rows. Rows with an absent
/// value are dropped pair by pair; constant columns give NaN.
pub fn correlation_matrix(batch: &Path) -> Result<Vec<CorrelationEntry>, OutputError> {
    let table = Table::read(batch, &output::BATCH_HEADER)?;
    table.require_rows()?;
    let columns: Vec<Vec<Option<f64>>> = CORRELATION_VARS
        .iter()
        .map(|&name| table.optional_floats(name))
        .collect::<Result<_, _>>()?;
    let mut entries = Vec::new();
    for (i, x) in CORRELATION_VARS.iter().enumerate() {
        for (j, y) in CORRELATION_VARS.iter().enumerate() {
            let (xs, ys): (Vec<f64>, Vec<f64>) = columns[i]
                .iter()
                .zip(&columns[j])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            entries.push(CorrelationEntry {
                var_x: x.to_string(),
                var_y: y.to_string(),
                r: pearson(&xs, &ys).unwrap_or(f64::NAN),
                n_samples: xs.len(),
            });
        }
    }
    Ok(entries)
}

fn correlate_file(
    batch: &Path,
    dir: &Path,
    kinds: &[PlotKind],
    opts: &PlotOptions,
) -> Result<(), CliError> {
    let entries = correlation_matrix(batch)?;
    ensure_dir(dir)?;
    let path = dir.join(output::CORRELATION_FILE);
    output::write_correlation(&path, &entries)?;
    println!("wrote {}", path.display());
    if kinds.contains(&PlotKind::Correlation) {
        for p in render_plots(dir, &[PlotKind::Correlation], opts)? {
            println!("wrote {}", p.display());
        }
    }
    Ok(())
}
