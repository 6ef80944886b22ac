use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cubature_bsde::bsde::{configure_threads, extrapolated_solve, sparse_solve, DEFAULT_P_MAX};
use cubature_bsde::cubature::validate_moments;
use cubature_bsde::problems::{self, NamedProblem};
use cubature_bsde::study::{run_study, write_layers_csv, StudyConfig, StudyKind};
use cubature_bsde::{CubatureFormula, SolveConfig, TimeGrid};
use serde_json::json;

#[derive(Parser)]
#[command(name = "cubature-bsde", version, about = "Cubature and sparse-grid solver for Markovian BSDEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the moment conditions of the order-3 cubature formula.
    ValidateCubature {
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve once and print the report as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Write per-layer diagnostics (sizes, orders, hulls) as CSV.
        #[arg(long)]
        layers_out: Option<PathBuf>,
    },
    /// Error against step count for plain and, optionally, extrapolated runs.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        n_list: Vec<usize>,
    },
    /// Node count and time against error, always with both schemes.
    Complexity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        n_list: Vec<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value = "logistic")]
    problem: String,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// Richardson-Romberg extrapolation with the midpoint-refined grid.
    #[arg(long)]
    extrapolate: bool,
    #[arg(long, default_value_t = DEFAULT_P_MAX)]
    p_max: usize,
    /// Exponent of the sparse-order rule; defaults to the problem's regime.
    #[arg(long)]
    m_star: Option<f64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Accepted for interface stability; nothing here is random.
    #[arg(long)]
    seedless: bool,
}

impl Common {
    fn setup(&self) -> cubature_bsde::Result<(NamedProblem, SolveConfig)> {
        if let Some(t) = self.threads {
            configure_threads(t)?;
        }
        let named = problems::by_name(&self.problem, self.dim, self.horizon)?;
        let m_star = self.m_star.unwrap_or_else(|| named.regime.m_star(3, self.dim, self.gamma));
        let config = SolveConfig { m_star, p_max: self.p_max, ..SolveConfig::default() };
        Ok((named, config))
    }
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match cli.command {
        Command::ValidateCubature { dim, out } => {
            let formula = CubatureFormula::order3(dim)?;
            let report = validate_moments(&formula)?;
            let mut w = output(&out)?;
            serde_json::to_writer_pretty(&mut w, &json!({ "formula": formula, "report": report }))?;
            writeln!(w)?;
            w.flush()?;
            if report.pass {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("moment defect {:e} exceeds tolerance", report.max_defect);
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Solve { common, n, layers_out } => {
            let (named, config) = common.setup()?;
            let formula = CubatureFormula::order3(named.problem.noise_dim())?;
            let grid = TimeGrid::new(n, named.problem.horizon, common.gamma)?;
            let report = if common.extrapolate {
                extrapolated_solve(&named.problem, &grid, &formula, &config)?
            } else {
                sparse_solve(&named.problem, &grid, &formula, &config)?
            };
            for warning in &report.warnings {
                eprintln!("warning: {warning}");
            }
            if let Some(path) = layers_out {
                let file = BufWriter::new(File::create(path)?);
                match report.parts.first() {
                    Some(coarse) => write_layers_csv(coarse, file)?,
                    None => write_layers_csv(&report, file)?,
                }
            }
            let abs_error = named.exact_u0.map(|e| (report.u0 - e).abs());
            let mut w = output(&common.out)?;
            serde_json::to_writer_pretty(
                &mut w,
                &json!({ "problem": named, "abs_error": abs_error, "report": report }),
            )?;
            writeln!(w)?;
            w.flush()?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Convergence { common, n_list } => study(common, n_list, StudyKind::Convergence),
        Command::Complexity { common, n_list } => study(common, n_list, StudyKind::Complexity),
    }
}

fn study(common: Common, n_list: Vec<usize>, kind: StudyKind) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let (named, solve) = common.setup()?;
    let config = StudyConfig {
        n_list,
        gamma: common.gamma,
        extrapolate: common.extrapolate || kind == StudyKind::Complexity,
        solve,
    };
    let study = run_study(&named, &config)?;
    for row in study.rows.iter().filter(|r| r.failure.is_some()) {
        eprintln!("n={} {}: {}", row.n, row.scheme.as_str(), row.failure.as_deref().unwrap_or_default());
    }
    let w = output(&common.out)?;
    study.write_csv(w, kind)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
