//! CSV tables written and read by the harness.
//!
//! Numbers use nine significant digits with a dot decimal separator. An
//! absent period is an empty field.

use std::fs::File;
use std::path::{Path, PathBuf};

use braess_core::metagame::{AdvantageSample, NashCertificate, SweepRow};
use braess_core::{CycleReport, MetaParameter, Trajectory};
use thiserror::Error;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const BATCH_FILE: &str = "batch.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ADVANTAGE_FILE: &str = "advantage.csv";
pub const BEST_RESPONSE_FILE: &str = "best_response.csv";
pub const CORRELATION_FILE: &str = "correlation.csv";

pub const TRAJECTORY_HEADER: [&str; 5] = ["t", "f_up", "f_down", "f_cross", "C_t"];
pub const REPORT_HEADER: [&str; 8] = [
    "T",
    "M",
    "L",
    "F",
    "sigma_delta",
    "sigma_C",
    "mean_C",
    "suspect",
];
pub const BATCH_HEADER: [&str; 10] = [
    "seed", "alpha", "beta", "epsilon", "mean_C", "L", "F", "sigma_C", "M", "valid",
];
pub const METRICS_HEADER: [&str; 13] = [
    "rep",
    "seed",
    "alpha",
    "beta",
    "epsilon",
    "T",
    "M",
    "L",
    "F",
    "sigma_delta",
    "sigma_C",
    "mean_C",
    "suspect",
];
pub const ADVANTAGE_HEADER: [&str; 7] = [
    "param",
    "pop_value",
    "dev_value",
    "rep",
    "seed",
    "D_j",
    "C_mean",
];
pub const BEST_RESPONSE_HEADER: [&str; 6] = [
    "param",
    "pop_value",
    "best_dev_value",
    "D_mean",
    "D_stderr",
    "profitable",
];
pub const CORRELATION_HEADER: [&str; 4] = ["var_x", "var_y", "pearson_r", "n_samples"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected columns [{expected}], found [{found}]")]
    SchemaMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}, line {line}: bad value {value:?} in column {column}")]
    BadValue {
        path: PathBuf,
        line: u64,
        column: &'static str,
        value: String,
    },
    #[error("{path}: no data rows")]
    NoRows { path: PathBuf },
}

/// Formats like C's `%.9g`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    const PRECISION: i32 = 9;
    let sci = format!("{:.*e}", (PRECISION - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..PRECISION).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (PRECISION - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<File>, OutputError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| OutputError::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    w.write_record(header).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(w)
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path, header)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), OutputError> {
    let rows = traj
        .counts
        .iter()
        .zip(&traj.system_cost)
        .enumerate()
        .map(|(t, (f, c))| {
            vec![
                t.to_string(),
                f.up.to_string(),
                f.down.to_string(),
                f.cross.to_string(),
                fmt_num(*c),
            ]
        });
    write_rows(path, &TRAJECTORY_HEADER, rows)
}

fn report_fields(r: &CycleReport) -> Vec<String> {
    vec![
        r.horizon.to_string(),
        r.crossings.to_string(),
        fmt_opt(r.period),
        fmt_num(r.edgeworthiness),
        fmt_num(r.sigma_delta),
        fmt_num(r.sigma_cost),
        fmt_num(r.mean_cost),
        r.suspect.to_string(),
    ]
}

pub fn write_report(path: &Path, report: &CycleReport) -> Result<(), OutputError> {
    write_rows(path, &REPORT_HEADER, [report_fields(report)])
}

/// `valid` is the negation of the report's `suspect` flag.
pub fn write_batch(path: &Path, rows: &[SweepRow]) -> Result<(), OutputError> {
    let rows = rows.iter().map(|row| {
        let r = &row.report;
        vec![
            row.seed.to_string(),
            fmt_num(row.params.alpha()),
            fmt_num(row.params.beta()),
            fmt_num(row.params.epsilon()),
            fmt_num(r.mean_cost),
            fmt_opt(r.period),
            fmt_num(r.edgeworthiness),
            fmt_num(r.sigma_cost),
            r.crossings.to_string(),
            (!r.suspect).to_string(),
        ]
    });
    write_rows(path, &BATCH_HEADER, rows)
}

pub fn write_metrics(path: &Path, rows: &[SweepRow]) -> Result<(), OutputError> {
    let rows = rows.iter().map(|row| {
        let mut fields = vec![
            row.rep.to_string(),
            row.seed.to_string(),
            fmt_num(row.params.alpha()),
            fmt_num(row.params.beta()),
            fmt_num(row.params.epsilon()),
        ];
        fields.extend(report_fields(&row.report));
        fields
    });
    write_rows(path, &METRICS_HEADER, rows)
}

pub fn write_advantage(
    path: &Path,
    parameter: MetaParameter,
    samples: &[AdvantageSample],
) -> Result<(), OutputError> {
    let rows = samples.iter().map(|s| {
        vec![
            parameter.name().to_string(),
            fmt_num(s.population_value),
            fmt_num(s.deviant_value),
            s.rep.to_string(),
            s.seed.to_string(),
            fmt_num(s.advantage),
            fmt_num(s.mean_cost),
        ]
    });
    write_rows(path, &ADVANTAGE_HEADER, rows)
}

pub fn write_best_response(
    path: &Path,
    parameter: MetaParameter,
    certificate: &NashCertificate,
) -> Result<(), OutputError> {
    let rows = certificate.columns.iter().map(|c| {
        vec![
            parameter.name().to_string(),
            fmt_num(c.population_value),
            fmt_num(c.best_deviant),
            fmt_num(c.d_mean),
            fmt_num(c.d_stderr),
            c.profitable.to_string(),
        ]
    });
    write_rows(path, &BEST_RESPONSE_HEADER, rows)
}

/// One entry of a correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationEntry {
    pub var_x: String,
    pub var_y: String,
    pub r: f64,
    pub n_samples: usize,
}

pub fn write_correlation(path: &Path, entries: &[CorrelationEntry]) -> Result<(), OutputError> {
    let rows = entries.iter().map(|e| {
        vec![
            e.var_x.clone(),
            e.var_y.clone(),
            fmt_num(e.r),
            e.n_samples.to_string(),
        ]
    });
    write_rows(path, &CORRELATION_HEADER, rows)
}

/// A CSV file read back with its header checked.
pub struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    pub fn read(path: &Path, expected: &[&str]) -> Result<Self, OutputError> {
        let csv_err = |source| OutputError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
        let header: Vec<String> = r
            .headers()
            .map_err(csv_err)?
            .iter()
            .map(str::to_string)
            .collect();
        if header != expected {
            return Err(OutputError::SchemaMismatch {
                path: path.to_path_buf(),
                expected: expected.join(","),
                found: header.join(","),
            });
        }
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn require_rows(&self) -> Result<(), OutputError> {
        if self.rows.is_empty() {
            return Err(OutputError::NoRows {
                path: self.path.clone(),
            });
        }
        Ok(())
    }

    fn index(&self, column: &str) -> usize {
        self.header
            .iter()
            .position(|h| h == column)
            .expect("column checked against schema")
    }

    fn bad(&self, line: u64, column: &'static str, value: &str) -> OutputError {
        OutputError::BadValue {
            path: self.path.clone(),
            line,
            column,
            value: value.to_string(),
        }
    }

    pub fn strings(&self, column: &'static str) -> Vec<String> {
        let i = self.index(column);
        self.rows.iter().map(|(_, r)| r[i].to_string()).collect()
    }

    pub fn floats(&self, column: &'static str) -> Result<Vec<f64>, OutputError> {
        let i = self.index(column);
        self.rows
            .iter()
            .map(|(line, r)| r[i].parse().map_err(|_| self.bad(*line, column, &r[i])))
            .collect()
    }

    /// Empty fields become `None`.
    pub fn optional_floats(&self, column: &'static str) -> Result<Vec<Option<f64>>, OutputError> {
        let i = self.index(column);
        self.rows
            .iter()
            .map(|(line, r)| match &r[i] {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|_| self.bad(*line, column, s)),
            })
            .collect()
    }
}

/// Cost series and flows read from a trajectory file.
pub struct TrajectoryTable {
    pub system_cost: Vec<f64>,
    pub f_up: Vec<f64>,
    pub f_down: Vec<f64>,
    pub f_cross: Vec<f64>,
}

pub fn read_trajectory(path: &Path) -> Result<TrajectoryTable, OutputError> {
    let table = Table::read(path, &TRAJECTORY_HEADER)?;
    table.require_rows()?;
    Ok(TrajectoryTable {
        system_cost: table.floats("C_t")?,
        f_up: table.floats("f_up")?,
        f_down: table.floats("f_down")?,
        f_cross: table.floats("f_cross")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1.5), "1.5");
        assert_eq!(fmt_num(2.0), "2");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(-2.0 / 3.0), "-0.666666667");
        assert_eq!(fmt_num(123456789.0), "123456789");
        assert_eq!(fmt_num(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_num(0.0001), "0.0001");
        assert_eq!(fmt_num(0.00001234), "1.234e-05");
        assert_eq!(fmt_num(99.9999999999), "100");
        assert_eq!(fmt_num(f64::NAN), "NaN");
    }

    #[test]
    fn formatted_numbers_parse_back_within_precision() {
        for &x in &[1.23456789012, 1.0e-7, 4.2e12, -0.015, 1.7364] {
            let y: f64 = fmt_num(x).parse().unwrap();
            assert!((x - y).abs() <= 1e-8 * x.abs(), "{x} -> {y}");
        }
    }
}
