//! Convergence and complexity studies and their CSV encoding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bsde::{extrapolated_solve, sparse_solve, Scheme, SolveConfig, SolveReport};
use crate::cubature::CubatureFormula;
use crate::error::{Error, Result};
use crate::problems::NamedProblem;
use crate::time_grid::TimeGrid;

pub const CSV_VERSION_LINE: &str = "# cubature-bsde v1";
/// Errors below this are treated as floor noise by [`fit_slope`] callers.
pub const ERROR_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub n: usize,
    pub gamma: f64,
    pub scheme: Scheme,
    pub u0_estimate: Option<f64>,
    pub abs_error: Option<f64>,
    pub total_nodes: Option<usize>,
    pub wall_seconds: Option<f64>,
    /// `None` on success, the error message otherwise.
    pub failure: Option<String>,
}

impl StudyRow {
    fn from_report(report: &SolveReport, exact: Option<f64>) -> Self {
        Self {
            n: report.n,
            gamma: report.gamma,
            scheme: report.scheme,
            u0_estimate: Some(report.u0),
            abs_error: exact.map(|e| (report.u0 - e).abs()),
            total_nodes: Some(report.total_nodes),
            wall_seconds: Some(report.wall_seconds),
            failure: None,
        }
    }

    fn failed(n: usize, gamma: f64, scheme: Scheme, error: &Error) -> Self {
        Self {
            n,
            gamma,
            scheme,
            u0_estimate: None,
            abs_error: None,
            total_nodes: None,
            wall_seconds: None,
            failure: Some(error.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n_list: Vec<usize>,
    pub gamma: f64,
    pub extrapolate: bool,
    pub solve: SolveConfig,
}

impl StudyConfig {
    pub fn new(n_list: Vec<usize>) -> Self {
        Self { n_list, gamma: 1.0, extrapolate: false, solve: SolveConfig::default() }
    }
}

/// Which fitted line a summary row carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    /// `ln abs_error` against `ln n`.
    Convergence,
    /// `ln total_nodes` against `ln (1 / abs_error)`.
    Complexity,
}

impl StudyKind {
    pub fn fit_label(self) -> &'static str {
        match self {
            StudyKind::Convergence => "ln_error_vs_ln_n",
            StudyKind::Complexity => "ln_nodes_vs_ln_inv_error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub problem: String,
    pub dim: usize,
    pub rows: Vec<StudyRow>,
}

/// Runs plain (and optionally extrapolated) solves for every `n`, in order.
/// Failed runs are recorded in their row and the study continues.
pub fn run_study(named: &NamedProblem, config: &StudyConfig) -> Result<Study> {
    if config.n_list.is_empty() {
        return Err(Error::InvalidParameter("empty n-list".into()));
    }
    if config.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("n-list must be strictly ascending".into()));
    }
    let problem = &named.problem;
    let formula = CubatureFormula::order3(problem.noise_dim())?;
    let mut rows = Vec::new();
    for &n in &config.n_list {
        let grid = TimeGrid::new(n, problem.horizon, config.gamma)?;
        rows.push(match sparse_solve(problem, &grid, &formula, &config.solve) {
            Ok(report) => StudyRow::from_report(&report, named.exact_u0),
            Err(e) => StudyRow::failed(n, config.gamma, Scheme::Plain, &e),
        });
        if config.extrapolate {
            rows.push(match extrapolated_solve(problem, &grid, &formula, &config.solve) {
                Ok(report) => StudyRow::from_report(&report, named.exact_u0),
                Err(e) => StudyRow::failed(n, config.gamma, Scheme::Extrapolated, &e),
            });
        }
    }
    Ok(Study { problem: named.name.clone(), dim: problem.dim(), rows })
}

/// Ordinary least-squares slope; `None` with fewer than two distinct abscissae.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

impl Study {
    pub fn rows_for(&self, scheme: Scheme) -> impl Iterator<Item = &StudyRow> {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        let mut out = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.scheme) {
                out.push(r.scheme);
            }
        }
        out
    }

    fn usable(&self, scheme: Scheme) -> impl Iterator<Item = (&StudyRow, f64)> {
        self.rows_for(scheme).filter_map(|r| r.abs_error.filter(|&e| e >= ERROR_FLOOR).map(|e| (r, e)))
    }

    pub fn slope(&self, scheme: Scheme, kind: StudyKind) -> Option<f64> {
        let points: Vec<(f64, f64)> = match kind {
            StudyKind::Convergence => self.usable(scheme).map(|(r, e)| ((r.n as f64).ln(), e.ln())).collect(),
            StudyKind::Complexity => self
                .usable(scheme)
                .filter_map(|(r, e)| r.total_nodes.map(|m| (-e.ln(), (m as f64).ln())))
                .collect(),
        };
        fit_slope(&points)
    }

    pub fn error(&self, scheme: Scheme, n: usize) -> Option<f64> {
        self.rows_for(scheme).find(|r| r.n == n).and_then(|r| r.abs_error)
    }

    /// Writes the versioned CSV: one row per run followed by one summary
    /// row per scheme holding the fitted slope of `kind`.
    pub fn write_csv<W: Write>(&self, out: W, kind: StudyKind) -> Result<()> {
        let mut out = out;
        writeln!(out, "{CSV_VERSION_LINE}").map_err(io_error)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        for r in &self.rows {
            w.write_record([
                "run".to_string(),
                self.problem.clone(),
                self.dim.to_string(),
                r.n.to_string(),
                fmt_f64(r.gamma),
                r.scheme.as_str().to_string(),
                opt(r.u0_estimate.map(fmt_f64)),
                opt(r.abs_error.map(fmt_f64)),
                opt(r.total_nodes.map(|m| m.to_string())),
                opt(r.wall_seconds.map(fmt_f64)),
                String::new(),
                String::new(),
                r.failure.clone().unwrap_or_default(),
            ])
            .map_err(csv_error)?;
        }
        let gamma = self.rows.first().map_or(1.0, |r| r.gamma);
        for scheme in self.schemes() {
            w.write_record([
                "summary".to_string(),
                self.problem.clone(),
                self.dim.to_string(),
                String::new(),
                fmt_f64(gamma),
                scheme.as_str().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                kind.fit_label().to_string(),
                opt(self.slope(scheme, kind).map(fmt_f64)),
                String::new(),
            ])
            .map_err(csv_error)?;
        }
        w.flush().map_err(io_error)
    }
}

pub const CSV_HEADER: [&str; 13] = [
    "kind",
    "problem",
    "dim",
    "n",
    "gamma",
    "scheme",
    "u0_estimate",
    "abs_error",
    "total_nodes",
    "wall_seconds",
    "fit",
    "slope",
    "failure",
];

/// Per-layer diagnostics: size, sparse order and hull of every `D_i`.
pub fn write_layers_csv<W: Write>(report: &SolveReport, out: W) -> Result<()> {
    let mut out = out;
    writeln!(out, "{CSV_VERSION_LINE}").map_err(io_error)?;
    let mut w = csv::Writer::from_writer(out);
    let d = report.layers.first().map_or(0, |l| l.lower.len());
    let mut header: Vec<String> =
        ["layer", "time", "step", "nodes", "order", "capped"].iter().map(|s| s.to_string()).collect();
    for k in 0..d {
        header.push(format!("lower_{k}"));
        header.push(format!("upper_{k}"));
    }
    w.write_record(&header).map_err(csv_error)?;
    for l in &report.layers {
        let mut rec = vec![
            l.index.to_string(),
            fmt_f64(l.time),
            fmt_f64(l.step),
            l.nodes.to_string(),
            l.order.to_string(),
            l.capped.to_string(),
        ];
        for k in 0..d {
            rec.push(fmt_f64(l.lower[k]));
            rec.push(fmt_f64(l.upper[k]));
        }
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush().map_err(io_error)
}

// Shortest representation that round-trips.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn opt(s: Option<String>) -> String {
    s.unwrap_or_default()
}

fn io_error(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
