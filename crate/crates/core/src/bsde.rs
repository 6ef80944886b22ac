//! Backward solvers.
//!
//! [`tree_solve`] runs the one-step scheme over the full cubature tree and
//! serves as the reference. [`sparse_solve`] projects every intermediate
//! layer onto a sparse grid spanning the hull of the previous layer's
//! children, which keeps the node count polynomial in the step count.
//! [`extrapolated_solve`] combines a run on `n` steps with a run on the
//! midpoint-refined grid to cancel the leading `1/n` error term.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cubature::{CubatureFormula, ScaledFormula};
use crate::error::{Error, Result};
use crate::forward::{ChildSet, Model, Problem, DEFAULT_SUBSTEPS};
use crate::sparse_grid::{Hypercube, SparseGrid, SparseInterpolant};
use crate::time_grid::TimeGrid;

pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITERATIONS: usize = 50;
pub const DEFAULT_P_MAX: usize = 14;
pub const DEFAULT_TREE_BUDGET: f64 = 2e7;

/// Regularity class of the terminal condition; selects the sparse-order exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Smooth coefficients and terminal condition.
    Smooth,
    /// Lipschitz terminal condition, used with a decreasing-step grid.
    Lipschitz,
}

impl Regime {
    /// Exponent `m*` in the sparse-order rule for a cubature formula of order `m`.
    pub fn m_star(self, m: usize, d: usize, gamma: f64) -> f64 {
        let smooth = (m as f64 + 1.0) / 2.0;
        match self {
            Regime::Smooth => smooth,
            Regime::Lipschitz => (d as f64 + (m as f64 - 1.0 - gamma) / (2.0 * gamma)).max(smooth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub m_star: f64,
    pub p_max: usize,
    /// Integrator sub-steps per linear path segment.
    pub substeps: usize,
    pub fixed_point_tolerance: f64,
    pub fixed_point_max_iterations: usize,
    /// Maximum number of leaves [`tree_solve`] may visit.
    pub tree_budget: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            m_star: 2.0,
            p_max: DEFAULT_P_MAX,
            substeps: DEFAULT_SUBSTEPS,
            fixed_point_tolerance: FIXED_POINT_TOLERANCE,
            fixed_point_max_iterations: FIXED_POINT_MAX_ITERATIONS,
            tree_budget: DEFAULT_TREE_BUDGET,
        }
    }
}

/// Outcome of one implicit backward step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    pub iterations: usize,
}

/// Solves `y = e_part + h f(t, x, y, z)` by successive substitution from `y⁰ = e_part`.
#[allow(clippy::too_many_arguments)]
pub fn implicit_step(
    model: &dyn Model,
    e_part: f64,
    z: &[f64],
    x: &[f64],
    t: f64,
    h: f64,
    tolerance: f64,
    max_iterations: usize,
) -> Result<FixedPoint> {
    let mut y = e_part;
    let mut residual = f64::INFINITY;
    for iteration in 1..=max_iterations {
        let next = e_part + h * model.generator(t, x, y, z);
        residual = (next - y).abs();
        y = next;
        if residual <= tolerance {
            return Ok(FixedPoint { value: y, iterations: iteration });
        }
        if !y.is_finite() {
            break;
        }
    }
    Err(Error::FixedPointDivergence { iterations: max_iterations, residual })
}

/// Smallest `a >= d` with `2a - (d-1) log2(a-d+1) > -m* log2 h`, capped at `p_max`.
/// The flag reports whether the cap was hit.
pub fn sparse_order(h: f64, d: usize, m_star: f64, p_max: usize) -> (usize, bool) {
    let threshold = -m_star * h.log2();
    for a in d..=p_max {
        let lhs = 2.0 * a as f64 - (d as f64 - 1.0) * ((a - d + 1) as f64).log2();
        if lhs > threshold {
            return (a, false);
        }
    }
    (p_max, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Plain,
    Extrapolated,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Plain => "plain",
            Scheme::Extrapolated => "extrapolated",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FixedPointStats {
    pub solves: u64,
    pub total_iterations: u64,
    pub max_iterations: usize,
}

impl FixedPointStats {
    fn record(&mut self, iterations: usize) {
        self.solves += 1;
        self.total_iterations += iterations as u64;
        self.max_iterations = self.max_iterations.max(iterations);
    }

    fn merge(&mut self, other: &FixedPointStats) {
        self.solves += other.solves;
        self.total_iterations += other.total_iterations;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDiagnostics {
    pub index: usize,
    pub time: f64,
    pub step: f64,
    pub nodes: usize,
    pub order: usize,
    pub capped: bool,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub scheme: Scheme,
    pub u0: f64,
    pub v0: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    pub horizon: f64,
    pub p_max: usize,
    pub m_star: f64,
    /// `1 + Σ_{i>=1} |D_i|`, the first layer being the initial point.
    pub total_nodes: usize,
    pub layers: Vec<LayerDiagnostics>,
    pub fixed_point: FixedPointStats,
    pub warnings: Vec<String>,
    pub wall_seconds: f64,
    /// The plain runs that were combined, for extrapolated reports.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<SolveReport>,
}

impl SolveReport {
    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.nodes).collect()
    }
}

/// Result of the full-tree reference solver.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSolution {
    pub u0: f64,
    pub v0: Vec<f64>,
    pub leaves: f64,
}

fn check_lipschitz_guard(model: &dyn Model, grid: &TimeGrid, warnings: &mut Vec<String>) -> Result<()> {
    let h = grid.steps().iter().copied().fold(0.0, f64::max);
    match model.generator_lipschitz_y() {
        Some(l) if h * l >= 1.0 => Err(Error::InvalidParameter(format!(
            "largest step {h} times generator Lipschitz bound {l} is not below 1"
        ))),
        Some(_) => Ok(()),
        None => {
            warnings.push("generator Lipschitz bound in y not declared; fixed-point contraction unchecked".into());
            Ok(())
        }
    }
}

fn check_compatible(problem: &Problem, formula: &CubatureFormula) -> Result<()> {
    if formula.dimension != problem.noise_dim() {
        return Err(Error::InvalidParameter(format!(
            "cubature dimension {} does not match Brownian dimension {}",
            formula.dimension,
            problem.noise_dim()
        )));
    }
    Ok(())
}

/// Backward recursion over every path of the cubature tree.
pub fn tree_solve(
    problem: &Problem,
    grid: &TimeGrid,
    formula: &CubatureFormula,
    config: &SolveConfig,
) -> Result<TreeSolution> {
    check_compatible(problem, formula)?;
    check_lipschitz_guard(&*problem.model, grid, &mut Vec::new())?;
    let leaves = (formula.size() as f64).powi(grid.len() as i32);
    if leaves > config.tree_budget {
        return Err(Error::TreeBudgetExceeded { required: leaves, budget: config.tree_budget });
    }
    let scaled: Vec<ScaledFormula> = grid.steps().iter().map(|&h| formula.scale(h)).collect();
    let solver = TreeSolver { problem, grid, scaled: &scaled, config };
    let (u0, v0) = solver.node(0, &problem.x0)?;
    Ok(TreeSolution { u0, v0, leaves })
}

struct TreeSolver<'a> {
    problem: &'a Problem,
    grid: &'a TimeGrid,
    scaled: &'a [ScaledFormula],
    config: &'a SolveConfig,
}

impl TreeSolver<'_> {
    fn node(&self, i: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let model = &*self.problem.model;
        let r = self.problem.noise_dim();
        if i == self.grid.len() {
            return Ok((model.terminal(x), vec![0.0; r]));
        }
        let (t, h) = (self.grid.time(i), self.grid.step(i));
        let kids = self.problem.children_scaled(t, i, x, &self.scaled[i], self.config.substeps)?;
        let mut e_part = 0.0;
        let mut z = vec![0.0; r];
        for ((state, w), inc) in kids.states.iter().zip(&kids.weights).zip(&kids.increments) {
            let (u_next, _) = self.node(i + 1, state)?;
            e_part += w * u_next;
            for (zk, dk) in z.iter_mut().zip(inc) {
                *zk += w * u_next * dk / h;
            }
        }
        let fp = implicit_step(
            model,
            e_part,
            &z,
            x,
            t,
            h,
            self.config.fixed_point_tolerance,
            self.config.fixed_point_max_iterations,
        )?;
        Ok((fp.value, z))
    }
}

/// Nodes of one intermediate time and their one-step children.
#[derive(Debug, Clone)]
pub struct LayerPlan {
    pub index: usize,
    pub grid: Arc<SparseGrid>,
    pub order: usize,
    pub capped: bool,
    pub children: Vec<ChildSet>,
}

impl LayerPlan {
    pub fn cube(&self) -> &Hypercube {
        self.grid.cube()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Forward sweep: layer 0 is `{x0}`; layer `i` is the order-`p_i` sparse
/// grid on the hull of all children of layer `i - 1`.
pub fn build_layers(
    problem: &Problem,
    grid: &TimeGrid,
    formula: &CubatureFormula,
    config: &SolveConfig,
) -> Result<Vec<LayerPlan>> {
    check_compatible(problem, formula)?;
    let d = problem.dim();
    if config.p_max < d {
        return Err(Error::InvalidParameter(format!("p_max {} is below the dimension {d}", config.p_max)));
    }
    let n = grid.len();
    let mut layers: Vec<LayerPlan> = Vec::with_capacity(n);
    let mut cube = Hypercube::new(problem.x0.clone(), problem.x0.clone())?;
    for i in 0..n {
        let (order, capped) = sparse_order(grid.step(i), d, config.m_star, config.p_max);
        let sparse = Arc::new(SparseGrid::new(cube, order));
        let points = sparse.points();
        let scaled = formula.scale(grid.step(i));
        let t = grid.time(i);
        let children: Vec<ChildSet> = par_map(points.len(), |k| {
            problem.children_scaled(t, i, &points[k], &scaled, config.substeps).map_err(|e| e.at_node(i, k))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        if i + 1 < n {
            cube = Hypercube::minimal(children.iter().flat_map(|c| c.states.iter().map(Vec::as_slice)))?;
        } else {
            cube = Hypercube::new(problem.x0.clone(), problem.x0.clone())?;
        }
        layers.push(LayerPlan { index: i, grid: sparse, order, capped, children });
    }
    Ok(layers)
}

/// Sparse-grid projected backward scheme on `grid`.
pub fn sparse_solve(
    problem: &Problem,
    grid: &TimeGrid,
    formula: &CubatureFormula,
    config: &SolveConfig,
) -> Result<SolveReport> {
    let clock = Stopwatch::start();
    let model = &*problem.model;
    let mut warnings = Vec::new();
    check_lipschitz_guard(model, grid, &mut warnings)?;
    let layers = build_layers(problem, grid, formula, config)?;
    let n = grid.len();
    let r = problem.noise_dim();
    let outputs = 1 + r;
    let mut stats = FixedPointStats::default();
    // Conditional-expectation parts of (u, v) on the layer after the current one.
    let mut next: Option<SparseInterpolant> = None;
    for layer in layers.iter().rev() {
        let i = layer.index;
        let h = grid.step(i);
        let rows: Vec<(Vec<f64>, FixedPointStats)> = par_map(layer.len(), |k| {
            evaluate_node(problem, grid, config, &layer.children[k], next.as_ref(), i, h, outputs)
                .map_err(|e| e.at_node(i, k))
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let mut values = Vec::with_capacity(layer.len() * outputs);
        for (row, s) in rows {
            values.extend(row);
            stats.merge(&s);
        }
        next = Some(SparseInterpolant::from_values(Arc::clone(&layer.grid), values, outputs));
    }
    let first = next.expect("at least one layer");
    let mut parts = vec![0.0; outputs];
    first.eval_into(&problem.x0, &mut parts)?;
    let fp = implicit_step(
        model,
        parts[0],
        &parts[1..],
        &problem.x0,
        grid.time(0),
        grid.step(0),
        config.fixed_point_tolerance,
        config.fixed_point_max_iterations,
    )?;
    stats.record(fp.iterations);

    let diagnostics: Vec<LayerDiagnostics> = layers
        .iter()
        .map(|l| LayerDiagnostics {
            index: l.index,
            time: grid.time(l.index),
            step: grid.step(l.index),
            nodes: l.len(),
            order: l.order,
            capped: l.capped,
            lower: l.cube().lower.clone(),
            upper: l.cube().upper.clone(),
        })
        .collect();
    for l in diagnostics.iter().filter(|l| l.capped && l.index > 0) {
        warnings.push(format!("layer {}: sparse order capped at {} (step {:e})", l.index, l.order, l.step));
    }
    Ok(SolveReport {
        scheme: Scheme::Plain,
        u0: fp.value,
        v0: parts[1..].to_vec(),
        n,
        gamma: grid.gamma,
        horizon: grid.horizon,
        p_max: config.p_max,
        m_star: config.m_star,
        total_nodes: diagnostics.iter().map(|l| l.nodes).sum(),
        layers: diagnostics,
        fixed_point: stats,
        warnings,
        wall_seconds: clock.elapsed(),
        parts: Vec::new(),
    })
}

// Weighted sums (E[u_{i+1}], E[u_{i+1} Δω / h]) at one node of layer i.
#[allow(clippy::too_many_arguments)]
fn evaluate_node(
    problem: &Problem,
    grid: &TimeGrid,
    config: &SolveConfig,
    kids: &ChildSet,
    next: Option<&SparseInterpolant>,
    i: usize,
    h: f64,
    outputs: usize,
) -> Result<(Vec<f64>, FixedPointStats)> {
    let model = &*problem.model;
    let mut row = vec![0.0; outputs];
    let mut stats = FixedPointStats::default();
    let mut parts = vec![0.0; outputs];
    for ((state, w), inc) in kids.states.iter().zip(&kids.weights).zip(&kids.increments) {
        let u_next = match next {
            // No projection at the terminal time.
            None => model.terminal(state),
            Some(interp) => {
                interp.eval_into(state, &mut parts)?;
                let fp = implicit_step(
                    model,
                    parts[0],
                    &parts[1..],
                    state,
                    grid.time(i + 1),
                    grid.step(i + 1),
                    config.fixed_point_tolerance,
                    config.fixed_point_max_iterations,
                )?;
                stats.record(fp.iterations);
                fp.value
            }
        };
        row[0] += w * u_next;
        for (o, dk) in row[1..].iter_mut().zip(inc) {
            *o += w * u_next * dk / h;
        }
    }
    Ok((row, stats))
}

/// `2 û(refined 2n) - û(n)` with node counts of both runs added.
pub fn extrapolated_solve(
    problem: &Problem,
    grid: &TimeGrid,
    formula: &CubatureFormula,
    config: &SolveConfig,
) -> Result<SolveReport> {
    let coarse = sparse_solve(problem, grid, formula, config)?;
    let fine = sparse_solve(problem, &grid.refine_midpoints(), formula, config)?;
    Ok(combine_extrapolated(coarse, fine))
}

pub(crate) fn combine_extrapolated(coarse: SolveReport, fine: SolveReport) -> SolveReport {
    let mut fixed_point = coarse.fixed_point.clone();
    fixed_point.merge(&fine.fixed_point);
    let mut warnings = coarse.warnings.clone();
    warnings.extend(fine.warnings.iter().cloned());
    warnings.dedup();
    SolveReport {
        scheme: Scheme::Extrapolated,
        u0: 2.0 * fine.u0 - coarse.u0,
        v0: fine.v0.iter().zip(&coarse.v0).map(|(f, c)| 2.0 * f - c).collect(),
        n: coarse.n,
        gamma: coarse.gamma,
        horizon: coarse.horizon,
        p_max: coarse.p_max,
        m_star: coarse.m_star,
        total_nodes: coarse.total_nodes + fine.total_nodes,
        layers: Vec::new(),
        fixed_point,
        warnings,
        wall_seconds: coarse.wall_seconds + fine.wall_seconds,
        parts: vec![coarse, fine],
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Sets the worker count of the global thread pool. Has no effect without
/// the `parallel` feature.
pub fn configure_threads(threads: usize) -> Result<()> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidParameter(e.to_string()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}

struct Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(target_arch = "wasm32")]
        {
            0.0
        }
    }
}
