//! Built-in test problems, all driven by a standard Brownian motion
//! (`X = x0 + W`, `d = r`).

use std::f64::consts::PI;
use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::hermite::GaussHermite;
use serde::Serialize;

use crate::bsde::Regime;
use crate::error::{Error, Result};
use crate::forward::{Model, Problem};

type Terminal = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Generator = Box<dyn Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync>;
type Solution = Box<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

/// Brownian forward process with pluggable backward data.
pub struct BrownianModel {
    dim: usize,
    terminal: Terminal,
    generator: Option<Generator>,
    lipschitz_y: Option<f64>,
    solution: Option<Solution>,
}

impl BrownianModel {
    pub fn new(dim: usize, terminal: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { dim, terminal: Box::new(terminal), generator: None, lipschitz_y: Some(0.0), solution: None }
    }

    pub fn with_generator(
        mut self,
        generator: impl Fn(f64, &[f64], f64, &[f64]) -> f64 + Send + Sync + 'static,
        lipschitz_y: Option<f64>,
    ) -> Self {
        self.generator = Some(Box::new(generator));
        self.lipschitz_y = lipschitz_y;
        self
    }

    pub fn with_solution(mut self, solution: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.solution = Some(Box::new(solution));
        self
    }
}

impl Model for BrownianModel {
    fn state_dim(&self) -> usize {
        self.dim
    }

    fn noise_dim(&self) -> usize {
        self.dim
    }

    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..self.dim {
            out[i * self.dim + i] = 1.0;
        }
    }

    fn constant_diffusion(&self) -> bool {
        true
    }

    fn generator(&self, t: f64, x: &[f64], y: f64, z: &[f64]) -> f64 {
        self.generator.as_ref().map_or(0.0, |f| f(t, x, y, z))
    }

    fn terminal(&self, x: &[f64]) -> f64 {
        (self.terminal)(x)
    }

    fn generator_lipschitz_y(&self) -> Option<f64> {
        self.lipschitz_y
    }

    fn exact_solution(&self, t: f64, x: &[f64]) -> Option<f64> {
        self.solution.as_ref().map(|u| u(t, x))
    }
}

#[derive(Clone, Serialize)]
pub struct NamedProblem {
    pub name: String,
    #[serde(skip)]
    pub problem: Problem,
    pub exact_u0: Option<f64>,
    pub regime: Regime,
    pub notes: String,
}

impl fmt::Debug for NamedProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NamedProblem")
            .field("name", &self.name)
            .field("problem", &self.problem)
            .field("exact_u0", &self.exact_u0)
            .field("regime", &self.regime)
            .finish()
    }
}

fn brownian(
    name: &str,
    model: BrownianModel,
    horizon: f64,
    exact_u0: Option<f64>,
    regime: Regime,
    notes: &str,
) -> NamedProblem {
    let d = model.dim;
    let problem = Problem::new(Arc::new(model), vec![0.0; d], horizon).expect("consistent dimensions");
    NamedProblem { name: name.to_string(), problem, exact_u0, regime, notes: notes.to_string() }
}

/// Semilinear benchmark with generator `f(y, z) = (y - (2+d)/(2d)) Σ z_l`
/// and terminal condition `g(x) = k/(1+k)`, `k = exp(1 + Σ x_l)`, on `[0, 1]`.
///
/// `u(t, x) = k(t, x) / (1 + k(t, x))` with `k(t, x) = exp(t + Σ x_l)` solves
/// the PDE `∂_t u + ½Δu + f(u, ∇u) = 0`, so `u(0, 0) = 1/2`. Since
/// `|∂_l u| <= 1/4`, the generator is `d/4`-Lipschitz in `y` along the solution.
pub fn logistic_benchmark(d: usize) -> NamedProblem {
    logistic_benchmark_on(d, 1.0)
}

/// [`logistic_benchmark`] with the same `g` on `[0, T]`; `u(0, 0) = logistic(1 - T)`.
pub fn logistic_benchmark_on(d: usize, horizon: f64) -> NamedProblem {
    let shift = (2.0 + d as f64) / (2.0 * d as f64);
    let lag = 1.0 - horizon;
    let model = BrownianModel::new(d, |x: &[f64]| logistic(1.0 + x.iter().sum::<f64>()))
        .with_generator(move |_t, _x, y, z: &[f64]| (y - shift) * z.iter().sum::<f64>(), Some(0.25 * d as f64))
        .with_solution(move |t, x: &[f64]| logistic(t + lag + x.iter().sum::<f64>()));
    brownian("logistic", model, horizon, Some(logistic(lag)), Regime::Smooth, "semilinear, closed-form solution k/(1+k)")
}

fn logistic(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Zero generator, Gaussian bump `g(x) = exp(-|x|²/2)`.
pub fn linear_smooth(d: usize) -> NamedProblem {
    linear_smooth_on(d, 1.0)
}

pub fn linear_smooth_on(d: usize, horizon: f64) -> NamedProblem {
    let g = |x: &[f64]| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp();
    let exact = (1.0 + horizon).powf(-0.5 * d as f64);
    let model = BrownianModel::new(d, g)
        .with_solution(move |t, x: &[f64]| {
            let s = 1.0 + horizon - t;
            s.powf(-0.5 * d as f64) * (-0.5 * x.iter().map(|v| v * v).sum::<f64>() / s).exp()
        });
    brownian("linear-smooth", model, horizon, Some(exact), Regime::Smooth, "f = 0, Gaussian bump terminal")
}

/// Zero generator, constant terminal condition.
pub fn constant(d: usize, value: f64) -> NamedProblem {
    constant_on(d, value, 1.0)
}

pub fn constant_on(d: usize, value: f64, horizon: f64) -> NamedProblem {
    brownian("constant", BrownianModel::new(d, move |_| value), horizon, Some(value), Regime::Smooth, "u = g = const")
}

/// Zero generator, Lipschitz payoff `g(x) = |x_1|`; `u(0, 0) = sqrt(2T/π)`.
pub fn lipschitz_call(d: usize) -> NamedProblem {
    lipschitz_call_on(d, 1.0)
}

pub fn lipschitz_call_on(d: usize, horizon: f64) -> NamedProblem {
    brownian(
        "lipschitz-call",
        BrownianModel::new(d, |x: &[f64]| x[0].abs()),
        horizon,
        Some((2.0 * horizon / PI).sqrt()),
        Regime::Lipschitz,
        "f = 0, non-smooth terminal; use a decreasing-step grid",
    )
}

/// Names accepted by [`by_name`].
pub const PROBLEM_NAMES: [&str; 4] = ["logistic", "linear-smooth", "constant", "lipschitz-call"];

pub fn by_name(name: &str, d: usize, horizon: f64) -> Result<NamedProblem> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
    }
    match name {
        "logistic" => Ok(logistic_benchmark_on(d, horizon)),
        "linear-smooth" => Ok(linear_smooth_on(d, horizon)),
        "constant" => Ok(constant_on(d, 1.0, horizon)),
        "lipschitz-call" => Ok(lipschitz_call_on(d, horizon)),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

/// `E[g(x0 + sqrt(T) ξ)]`, `ξ ~ N(0, I_d)`, by tensor Gauss-Hermite with
/// `nodes` points per axis.
pub fn gaussian_expectation(d: usize, horizon: f64, x0: &[f64], g: impl Fn(&[f64]) -> f64, nodes: usize) -> f64 {
    let rule = GaussHermite::new(NonZeroUsize::new(nodes).expect("positive node count"));
    let pairs: Vec<(f64, f64)> = rule.iter().map(|(x, w)| ((2.0 * horizon).sqrt() * x, w / PI.sqrt())).collect();
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            point[k] = x0[k] + pairs[idx[k]].0;
            w *= pairs[idx[k]].1;
        }
        total += w * g(&point);
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < nodes {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_data() {
        for d in 1..=3 {
            let b = logistic_benchmark(d);
            assert_eq!(b.exact_u0, Some(0.5));
            let m = &b.problem.model;
            let g0 = m.terminal(&vec![0.0; d]);
            assert!((g0 - 0.731_058_578_630_004_9).abs() < 1e-15);
            assert_eq!(m.generator(0.0, &vec![0.0; d], 3.7, &vec![0.0; d]), 0.0);
            assert_eq!(m.exact_solution(0.0, &vec![0.0; d]), Some(0.5));
        }
    }

    // Finite-difference residual of ∂_t u + ½Δu + f(u, ∇u) at a few points.
    #[test]
    fn benchmark_solution_satisfies_pde() {
        let d = 2;
        let b = logistic_benchmark(d);
        let m = &b.problem.model;
        let u = |t: f64, x: &[f64]| m.exact_solution(t, x).unwrap();
        let e = 1e-4;
        for (t, x) in [(0.0, [0.0, 0.0]), (0.4, [0.3, -1.2]), (0.9, [-0.5, 0.8])] {
            let ut = (u(t + e, &x) - u(t - e, &x)) / (2.0 * e);
            let mut lap = 0.0;
            let mut grad = [0.0; 2];
            for k in 0..d {
                let mut xp = x;
                let mut xm = x;
                xp[k] += e;
                xm[k] -= e;
                lap += (u(t, &xp) - 2.0 * u(t, &x) + u(t, &xm)) / (e * e);
                grad[k] = (u(t, &xp) - u(t, &xm)) / (2.0 * e);
            }
            let residual = ut + 0.5 * lap + m.generator(t, &x, u(t, &x), &grad);
            assert!(residual.abs() < 1e-6, "residual {residual}");
        }
    }

    #[test]
    fn gauss_hermite_oracle() {
        let g = |x: &[f64]| (-0.5 * x.iter().map(|v| v * v).sum::<f64>()).exp();
        for d in 1..=3 {
            for horizon in [0.5, 1.0, 2.0] {
                let p = linear_smooth_on(d, horizon);
                let q = gaussian_expectation(d, horizon, &vec![0.0; d], g, 48);
                assert!((p.exact_u0.unwrap() - q).abs() < 1e-13, "d={d} T={horizon}");
            }
        }
        assert!((linear_smooth(1).exact_u0.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((gaussian_expectation(1, 1.0, &[0.0], |_| 1.0, 64) - 1.0).abs() < 1e-14);
        assert!((gaussian_expectation(2, 2.0, &[1.0, 0.0], |x| x[0] * x[0] + x[1], 16) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn registry() {
        for name in PROBLEM_NAMES {
            let p = by_name(name, 2, 1.0).unwrap();
            assert_eq!(p.name, name);
            assert_eq!(p.problem.dim(), 2);
        }
        assert!(matches!(by_name("nope", 1, 1.0), Err(Error::UnknownProblem(_))));
        assert!(by_name("logistic", 0, 1.0).is_err());
        assert!(by_name("logistic", 1, 0.0).is_err());
        let p = by_name("logistic", 1, 0.5).unwrap();
        assert_eq!(p.exact_u0, p.problem.model.exact_solution(0.0, &[0.0]));
    }
}
