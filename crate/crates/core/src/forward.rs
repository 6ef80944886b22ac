//! Forward dynamics and the cubature flow.
//!
//! Along a cubature path the SDE becomes the ODE
//! `dX = b̄(t, X) dt + σ(t, X) dω`, where `b̄` is the Stratonovich drift.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::cubature::{CubatureFormula, Path, ScaledFormula};
use crate::error::{Error, Result};
use crate::time_grid::TimeGrid;

/// Coefficients of a Markovian forward-backward system
///
/// ```text
/// X_t = x0 + ∫ b(s, X_s) ds + ∫ σ(s, X_s) dW_s
/// Y_t = g(X_T) + ∫_t^T f(s, X_s, Y_s, Z_s) ds - ∫_t^T Z_s dW_s
/// ```
///
/// The drift is given in Itô form. Matrices are row-major `d × r`.
pub trait Model: Send + Sync {
    fn state_dim(&self) -> usize;

    fn noise_dim(&self) -> usize;

    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);

    /// Writes `∂σ_{i,j}/∂x_k` at `out[(k * d + i) * r + j]` and returns `true`,
    /// or returns `false` to fall back on central differences.
    fn diffusion_jacobian(&self, _t: f64, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Set when `σ` does not depend on `x`; skips the drift correction.
    fn constant_diffusion(&self) -> bool {
        false
    }

    fn generator(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64;

    fn terminal(&self, x: &[f64]) -> f64;

    /// Declared Lipschitz constant of the generator in `y`, if known.
    fn generator_lipschitz_y(&self) -> Option<f64> {
        None
    }

    /// Closed-form `u(t, x)` when available.
    fn exact_solution(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// A model together with its initial state and horizon.
#[derive(Clone)]
pub struct Problem {
    pub model: Arc<dyn Model>,
    pub x0: Vec<f64>,
    pub horizon: f64,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("d", &self.model.state_dim())
            .field("r", &self.model.noise_dim())
            .field("x0", &self.x0)
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// Sub-steps of the fourth-order integrator per linear path segment.
pub const DEFAULT_SUBSTEPS: usize = 4;

impl Problem {
    pub fn new(model: Arc<dyn Model>, x0: Vec<f64>, horizon: f64) -> Result<Self> {
        if x0.len() != model.state_dim() {
            return Err(Error::InvalidParameter(format!(
                "initial state has length {}, model dimension is {}",
                x0.len(),
                model.state_dim()
            )));
        }
        Ok(Self { model, x0, horizon })
    }

    pub fn dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn noise_dim(&self) -> usize {
        self.model.noise_dim()
    }

    /// `b̄_i = b_i - ½ Σ_j Σ_k σ_{k,j} ∂_{x_k} σ_{i,j}`.
    pub fn stratonovich_drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let model = &*self.model;
        model.drift(t, x, out);
        if model.constant_diffusion() {
            return;
        }
        let (d, r) = (model.state_dim(), model.noise_dim());
        let mut sigma = vec![0.0; d * r];
        model.diffusion(t, x, &mut sigma);
        let mut jac = vec![0.0; d * d * r];
        if !model.diffusion_jacobian(t, x, &mut jac) {
            finite_difference_jacobian(model, t, x, &mut jac);
        }
        for i in 0..d {
            let mut correction = 0.0;
            for j in 0..r {
                for k in 0..d {
                    correction += sigma[k * r + j] * jac[(k * d + i) * r + j];
                }
            }
            out[i] -= 0.5 * correction;
        }
    }

    /// Solves the path-driven ODE from `x` at `t0` along `path`
    /// (already scaled to the step length).
    pub fn ode_step(&self, t0: f64, x: &[f64], path: &Path, substeps: usize) -> Option<Vec<f64>> {
        let (d, r) = (self.dim(), self.noise_dim());
        let substeps = substeps.max(1);
        let mut state = x.to_vec();
        let mut ws = Workspace::new(d, r);
        for k in 0..path.segments() {
            let (dt, dw) = path.segment_increment(k);
            let seg_start = t0 + path.times[k];
            let ds = 1.0 / substeps as f64;
            for s in 0..substeps {
                let tau = s as f64 * ds;
                self.rk4(&mut ws, &mut state, seg_start, dt, &dw, tau, ds);
            }
        }
        state.iter().all(|v| v.is_finite()).then_some(state)
    }

    // One classical RK4 step in the segment parameter τ ∈ [0, 1], for the
    // vector field F(τ, X) = b̄(t(τ), X) dt + σ(t(τ), X) dw.
    #[allow(clippy::too_many_arguments)]
    fn rk4(&self, ws: &mut Workspace, state: &mut [f64], seg_start: f64, dt: f64, dw: &[f64], tau: f64, ds: f64) {
        let d = state.len();
        let Workspace { k1, k2, k3, k4, tmp, drift, sigma } = ws;
        let mut field = |tau: f64, x: &[f64], out: &mut [f64]| {
            let t = seg_start + tau * dt;
            self.stratonovich_drift(t, x, drift);
            self.model.diffusion(t, x, sigma);
            let r = dw.len();
            for i in 0..d {
                let mut v = drift[i] * dt;
                for j in 0..r {
                    v += sigma[i * r + j] * dw[j];
                }
                out[i] = v;
            }
        };
        field(tau, state, k1);
        for i in 0..d {
            tmp[i] = state[i] + 0.5 * ds * k1[i];
        }
        field(tau + 0.5 * ds, tmp, k2);
        for i in 0..d {
            tmp[i] = state[i] + 0.5 * ds * k2[i];
        }
        field(tau + 0.5 * ds, tmp, k3);
        for i in 0..d {
            tmp[i] = state[i] + ds * k3[i];
        }
        field(tau + ds, tmp, k4);
        for i in 0..d {
            state[i] += ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// One-step successors of `x` at grid step `i` under the cubature measure.
    pub fn children(&self, grid: &TimeGrid, i: usize, x: &[f64], formula: &CubatureFormula) -> Result<ChildSet> {
        let scaled = formula.scale(grid.step(i));
        self.children_scaled(grid.time(i), i, x, &scaled, DEFAULT_SUBSTEPS)
    }

    pub(crate) fn children_scaled(
        &self,
        t: f64,
        step_index: usize,
        x: &[f64],
        scaled: &ScaledFormula,
        substeps: usize,
    ) -> Result<ChildSet> {
        let kappa = scaled.paths.len();
        let mut states = Vec::with_capacity(kappa);
        let mut increments = Vec::with_capacity(kappa);
        for (j, path) in scaled.paths.iter().enumerate() {
            let child = self
                .ode_step(t, x, path, substeps)
                .ok_or_else(|| Error::IntegrationFailure { step: step_index, path: j, start: x.to_vec() })?;
            states.push(child);
            increments.push(scaled.increment(j).to_vec());
        }
        Ok(ChildSet { states, weights: scaled.weights.clone(), increments })
    }

    /// `E^Q[g(X̂_T)]` over the cubature tree, propagated one step at a time.
    ///
    /// Children that land within [`MERGE_TOLERANCE`] of each other are merged,
    /// so recombining trees (e.g. `X = W`) stay polynomial in the step count.
    pub fn forward_expectation(&self, grid: &TimeGrid, formula: &CubatureFormula) -> Result<f64> {
        let mut cloud: Vec<(Vec<f64>, f64)> = vec![(self.x0.clone(), 1.0)];
        for i in 0..grid.len() {
            let scaled = formula.scale(grid.step(i));
            let mut next: BTreeMap<Vec<i64>, (Vec<f64>, f64)> = BTreeMap::new();
            for (x, w) in &cloud {
                let kids = self.children_scaled(grid.time(i), i, x, &scaled, DEFAULT_SUBSTEPS)?;
                for (state, kw) in kids.states.into_iter().zip(kids.weights) {
                    let key = state.iter().map(|v| (v / MERGE_TOLERANCE).round() as i64).collect();
                    next.entry(key).or_insert_with(|| (state, 0.0)).1 += w * kw;
                }
            }
            cloud = next.into_values().collect();
        }
        Ok(cloud.iter().map(|(x, w)| w * self.model.terminal(x)).sum())
    }
}

/// States closer than this (per coordinate) count as the same tree node.
pub const MERGE_TOLERANCE: f64 = 1e-10;

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
    drift: Vec<f64>,
    sigma: Vec<f64>,
}

impl Workspace {
    fn new(d: usize, r: usize) -> Self {
        Self {
            k1: vec![0.0; d],
            k2: vec![0.0; d],
            k3: vec![0.0; d],
            k4: vec![0.0; d],
            tmp: vec![0.0; d],
            drift: vec![0.0; d],
            sigma: vec![0.0; d * r],
        }
    }
}

fn finite_difference_jacobian(model: &dyn Model, t: f64, x: &[f64], out: &mut [f64]) {
    let (d, r) = (model.state_dim(), model.noise_dim());
    let eps = f64::EPSILON.cbrt();
    let mut shifted = x.to_vec();
    let mut plus = vec![0.0; d * r];
    let mut minus = vec![0.0; d * r];
    for k in 0..d {
        let step = eps * (1.0 + x[k].abs());
        shifted[k] = x[k] + step;
        model.diffusion(t, &shifted, &mut plus);
        shifted[k] = x[k] - step;
        model.diffusion(t, &shifted, &mut minus);
        shifted[k] = x[k];
        for ij in 0..d * r {
            out[k * d * r + ij] = (plus[ij] - minus[ij]) / (2.0 * step);
        }
    }
}

/// Successors of one state over one step: child states, weights and the
/// Brownian increments that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ChildSet {
    pub states: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub increments: Vec<Vec<f64>>,
}

impl ChildSet {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `Σ_j θ_j Δω_j`.
    pub fn mean_increment(&self) -> Vec<f64> {
        let r = self.increments.first().map_or(0, Vec::len);
        let mut out = vec![0.0; r];
        for (inc, w) in self.increments.iter().zip(&self.weights) {
            for (o, v) in out.iter_mut().zip(inc) {
                *o += w * v;
            }
        }
        out
    }
}
