//! Experiment harness around `braess-core`: TOML configs, CSV tables, SVG
//! plots and the `braess` command line.

pub mod cli;
pub mod config;
pub mod output;
pub mod plot;

pub use cli::{correlation_matrix, run_cli, CliError};
pub use config::{parse_config, parse_str, ConfigError, ExperimentConfig};
pub use plot::{render_plots, PlotOptions};
