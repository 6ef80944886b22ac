//! Browser bindings: time-grid preview, a two-dimensional sparse-grid
//! explorer and small benchmark solves. Results cross the boundary as JSON.

use std::sync::Arc;

use cubature_bsde::bsde::{extrapolated_solve, sparse_solve};
use cubature_bsde::{problems, CubatureFormula, Hypercube, SolveConfig, SparseGrid, TimeGrid};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Time points of the grid `T(1 - (1 - i/n)^gamma)`.
#[wasm_bindgen]
pub fn time_grid(n: usize, horizon: f64, gamma: f64) -> Result<Vec<f64>, JsError> {
    Ok(TimeGrid::new(n, horizon, gamma).map_err(js)?.times().to_vec())
}

fn source(name: &str) -> Result<fn(&[f64]) -> f64, JsError> {
    Ok(match name {
        "sin" => |x| (std::f64::consts::PI * x[0]).sin() * (std::f64::consts::PI * x[1]).sin(),
        "gauss" => |x| (-8.0 * ((x[0] - 0.4).powi(2) + (x[1] - 0.6).powi(2))).exp(),
        "kink" => |x| (x[0] + x[1] - 0.9).abs(),
        other => return Err(JsError::new(&format!("unknown source '{other}'"))),
    })
}

/// Interpolates a test function on the unit square at the given order.
/// Returns `{nodes: [[x, y], ...], max_error, values: [...]}` where `values`
/// samples the interpolant on a `resolution`² raster, row by row.
#[wasm_bindgen]
pub fn sparse_explore(order: usize, function: &str, resolution: usize) -> Result<String, JsError> {
    if order > 12 {
        return Err(JsError::new("order above 12 is too large for the page"));
    }
    let f = source(function)?;
    let cube = Hypercube::new(vec![0.0, 0.0], vec![1.0, 1.0]).map_err(js)?;
    let grid = Arc::new(SparseGrid::new(cube, order));
    let interp = grid.hierarchize(f);
    let res = resolution.clamp(2, 400);
    let mut values = Vec::with_capacity(res * res);
    let mut max_error = 0.0f64;
    for j in 0..res {
        for i in 0..res {
            let x = [i as f64 / (res - 1) as f64, 1.0 - j as f64 / (res - 1) as f64];
            let y = interp.eval(&x).map_err(js)?;
            max_error = max_error.max((y - f(&x)).abs());
            values.push(y);
        }
    }
    Ok(json!({ "nodes": grid.points(), "max_error": max_error, "values": values }).to_string())
}

/// Solves a registered problem and returns the report with the exact value.
#[wasm_bindgen]
pub fn solve(problem: &str, dim: usize, n: usize, gamma: f64, extrapolate: bool) -> Result<String, JsError> {
    if dim > 3 || n > 64 {
        return Err(JsError::new("keep dim <= 3 and n <= 64 in the browser"));
    }
    let named = problems::by_name(problem, dim, 1.0).map_err(js)?;
    let formula = CubatureFormula::order3(dim).map_err(js)?;
    let grid = TimeGrid::new(n, 1.0, gamma).map_err(js)?;
    let config = SolveConfig { m_star: named.regime.m_star(3, dim, gamma), ..SolveConfig::default() };
    let report = if extrapolate {
        extrapolated_solve(&named.problem, &grid, &formula, &config)
    } else {
        sparse_solve(&named.problem, &grid, &formula, &config)
    }
    .map_err(js)?;
    let coarse = report.parts.first().unwrap_or(&report);
    Ok(json!({
        "u0": report.u0,
        "exact": named.exact_u0,
        "abs_error": named.exact_u0.map(|e| (report.u0 - e).abs()),
        "total_nodes": report.total_nodes,
        "m_star": config.m_star,
        "layers": coarse.layers,
        "warnings": report.warnings,
    })
    .to_string())
}
