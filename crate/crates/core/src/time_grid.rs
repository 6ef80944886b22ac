use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretisation `t_i = T [1 - (1 - i/n)^γ]` of `[0, T]`.
///
/// `γ = 1` is the uniform grid; larger `γ` concentrates steps near `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub gamma: f64,
    times: Vec<f64>,
    steps: Vec<f64>,
}

impl TimeGrid {
    pub fn new(n: usize, horizon: f64, gamma: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("step count must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if !(gamma >= 1.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("gamma must be at least 1, got {gamma}")));
        }
        let nf = n as f64;
        let mut times: Vec<f64> =
            (0..n).map(|i| horizon * (1.0 - (1.0 - i as f64 / nf).powf(gamma))).collect();
        times.push(horizon);
        Ok(Self::from_times(times, horizon, gamma))
    }

    pub fn uniform(n: usize, horizon: f64) -> Result<Self> {
        Self::new(n, horizon, 1.0)
    }

    fn from_times(times: Vec<f64>, horizon: f64, gamma: f64) -> Self {
        let steps = times.windows(2).map(|w| w[1] - w[0]).collect();
        Self { horizon, gamma, times, steps }
    }

    /// Inserts the midpoint of every step, doubling the step count.
    pub fn refine_midpoints(&self) -> Self {
        let mut times = Vec::with_capacity(2 * self.times.len() - 1);
        for w in self.times.windows(2) {
            times.push(w[0]);
            times.push(0.5 * (w[0] + w[1]));
        }
        times.push(self.horizon);
        Self::from_times(times, self.horizon, self.gamma)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn step(&self, i: usize) -> f64 {
        self.steps[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_grid() {
        let g = TimeGrid::new(4, 1.0, 1.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(g.steps(), &[0.25; 4]);
    }

    #[test]
    fn decreasing_grid() {
        let g = TimeGrid::new(2, 1.0, 2.0).unwrap();
        assert_eq!(g.times(), &[0.0, 0.75, 1.0]);
        let r = g.refine_midpoints();
        assert_eq!(r.times(), &[0.0, 0.375, 0.75, 0.875, 1.0]);
    }

    #[test]
    fn refined_uniform() {
        let g = TimeGrid::uniform(2, 1.0).unwrap();
        assert_eq!(g.refine_midpoints().times(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TimeGrid::new(4, 1.0, 0.5).is_err());
        assert!(TimeGrid::new(0, 1.0, 1.0).is_err());
        assert!(TimeGrid::new(4, -1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn grid_invariants(n in 1usize..200, horizon in 0.1f64..5.0, gamma in 1.0f64..6.0) {
            let g = TimeGrid::new(n, horizon, gamma).unwrap();
            prop_assert_eq!(g.times()[0], 0.0);
            prop_assert_eq!(*g.times().last().unwrap(), horizon);
            prop_assert_eq!(g.len(), n);
            let total: f64 = g.steps().iter().sum();
            prop_assert!((total - horizon).abs() < 1e-12 * horizon.max(1.0));
            let nf = n as f64;
            for (k, &h) in g.steps().iter().enumerate() {
                prop_assert!(h > 0.0);
                let scale = horizon * gamma / nf;
                let lower = scale * (1.0 - (k as f64 + 1.0) / nf).powf(gamma - 1.0);
                let upper = scale * (1.0 - k as f64 / nf).powf(gamma - 1.0);
                prop_assert!(h >= lower - 1e-12 && h <= upper + 1e-12, "k={} h={} [{}, {}]", k, h, lower, upper);
                let expected = horizon * (1.0 - (1.0 - k as f64 / nf).powf(gamma));
                prop_assert!((g.time(k) - expected).abs() < 1e-14 * horizon.max(1.0));
            }
            let r = g.refine_midpoints();
            prop_assert_eq!(r.len(), 2 * n);
            for (i, &t) in g.times().iter().enumerate() {
                prop_assert_eq!(r.time(2 * i), t);
            }
            prop_assert!(r.times().windows(2).all(|w| w[1] > w[0]));
        }
    }
}
