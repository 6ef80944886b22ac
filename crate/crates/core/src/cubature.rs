//! Cubature formulas on Wiener space.
//!
//! A formula is a finite family of weighted piecewise-linear paths on `[0, 1]`
//! whose iterated Stratonovich integrals match those of Brownian motion in
//! expectation up to a given degree. Letter `0` of a [`MultiIndex`] integrates
//! against time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiindex::{enumerate_degree_set, MultiIndex};

/// Highest degree accepted by [`iterated_integral`].
pub const MAX_INTEGRAL_DEGREE: usize = 6;
/// Highest degree tabulated by [`brownian_stratonovich_moment`].
pub const MAX_MOMENT_DEGREE: usize = 4;
/// Moment defects below this count as matched.
pub const MOMENT_TOLERANCE: f64 = 1e-12;

/// Continuous piecewise-linear path starting at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    /// Breakpoint times, strictly increasing, first entry `0`.
    pub times: Vec<f64>,
    /// Positions at each breakpoint; the first is the zero vector.
    pub points: Vec<Vec<f64>>,
}

impl Path {
    /// Straight segment from the origin to `end` over `[0, duration]`.
    pub fn segment(end: Vec<f64>, duration: f64) -> Self {
        let origin = vec![0.0; end.len()];
        Self { times: vec![0.0, duration], points: vec![origin, end] }
    }

    pub fn dimension(&self) -> usize {
        self.points[0].len()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().expect("path has breakpoints")
    }

    pub fn endpoint(&self) -> &[f64] {
        self.points.last().expect("path has breakpoints")
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    /// Time length and spatial increment of segment `k`.
    pub fn segment_increment(&self, k: usize) -> (f64, Vec<f64>) {
        let dt = self.times[k + 1] - self.times[k];
        let dx = self.points[k + 1].iter().zip(&self.points[k]).map(|(b, a)| b - a).collect();
        (dt, dx)
    }

    /// Brownian rescaling: positions by `sqrt(h)`, time by `h`.
    pub fn scaled(&self, h: f64) -> Self {
        let s = h.sqrt();
        Self {
            times: self.times.iter().map(|t| t * h).collect(),
            points: self.points.iter().map(|p| p.iter().map(|x| x * s).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubatureFormula {
    pub order: usize,
    pub dimension: usize,
    pub weights: Vec<f64>,
    pub paths: Vec<Path>,
}

impl CubatureFormula {
    /// Symmetric degree-3 formula: `2r` straight paths to `±sqrt(r) e_k`,
    /// each with weight `1/(2r)`.
    pub fn order3(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("Brownian dimension must be at least 1".into()));
        }
        let magnitude = (r as f64).sqrt();
        let mut paths = Vec::with_capacity(2 * r);
        for j in 1..=2 * r {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let mut end = vec![0.0; r];
            end[j.div_ceil(2) - 1] = sign * magnitude;
            paths.push(Path::segment(end, 1.0));
        }
        Ok(Self { order: 3, dimension: r, weights: vec![1.0 / (2 * r) as f64; 2 * r], paths })
    }

    pub fn size(&self) -> usize {
        self.paths.len()
    }

    /// Paths and weights for a step of length `h`.
    pub fn scale(&self, h: f64) -> ScaledFormula {
        ScaledFormula {
            step: h,
            weights: self.weights.clone(),
            paths: self.paths.iter().map(|p| p.scaled(h)).collect(),
        }
    }

    /// Every path has its negation in the family with the same weight.
    pub fn is_symmetric(&self) -> bool {
        self.paths.iter().zip(&self.weights).all(|(p, w)| {
            self.paths.iter().zip(&self.weights).any(|(q, v)| {
                (w - v).abs() <= 1e-15
                    && p.times == q.times
                    && p.points.iter().zip(&q.points).all(|(a, b)| a.iter().zip(b).all(|(x, y)| *x == -*y))
            })
        })
    }

    /// Expectation of `I^β_{0,1}` under the formula.
    pub fn moment(&self, index: &MultiIndex) -> Result<f64> {
        let mut acc = 0.0;
        for (p, w) in self.paths.iter().zip(&self.weights) {
            acc += w * iterated_integral(p, index)?;
        }
        Ok(acc)
    }
}

/// A formula rescaled to a step of length `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledFormula {
    pub step: f64,
    pub weights: Vec<f64>,
    pub paths: Vec<Path>,
}

impl ScaledFormula {
    /// Brownian increment carried by path `j` over the step.
    pub fn increment(&self, j: usize) -> &[f64] {
        self.paths[j].endpoint()
    }
}

/// `I^β` of a piecewise-linear path over its whole time span.
///
/// Evaluated exactly with Chen's relation: on one linear segment with
/// increments `Δ` the iterated integral of a word `w` is `Π Δ_{w_q} / |w|!`.
pub fn iterated_integral(path: &Path, index: &MultiIndex) -> Result<f64> {
    let degree = index.degree();
    if degree > MAX_INTEGRAL_DEGREE {
        return Err(Error::DegreeTooHigh { index: index.to_string(), degree, max: MAX_INTEGRAL_DEGREE });
    }
    if usize::from(index.max_letter()) > path.dimension() {
        return Err(Error::InvalidParameter(format!(
            "letter {} exceeds path dimension {}",
            index.max_letter(),
            path.dimension()
        )));
    }
    let word = index.entries();
    let len = word.len();
    // prefix[k] = I^{word[..k]} over the portion already traversed.
    let mut prefix = vec![0.0; len + 1];
    prefix[0] = 1.0;
    let mut deltas = vec![0.0; len];
    for k in 0..path.segments() {
        let (dt, dx) = path.segment_increment(k);
        for (q, &letter) in word.iter().enumerate() {
            deltas[q] = if letter == 0 { dt } else { dx[usize::from(letter) - 1] };
        }
        for end in (1..=len).rev() {
            // Σ_a prefix[a] * Π_{q=a..end} Δ_q / (end-a)!
            let mut acc = prefix[end];
            let mut segment_part = 1.0;
            for start in (0..end).rev() {
                segment_part *= deltas[start] / (end - start) as f64;
                acc += prefix[start] * segment_part;
            }
            prefix[end] = acc;
        }
    }
    Ok(prefix[len])
}

/// `E[J^β_{0,1}]` for Brownian motion with the time letter `0`.
///
/// The expected Stratonovich signature of `(t, W_t)` at time one is
/// `exp(e_0 + ½ Σ_i e_i ⊗ e_i)`, so a word has nonzero expectation iff it
/// splits into blocks `(0)` and `(i, i)`; the value is `2^{-pairs} / blocks!`.
pub fn brownian_stratonovich_moment(index: &MultiIndex) -> Result<f64> {
    let degree = index.degree();
    if degree > MAX_MOMENT_DEGREE {
        return Err(Error::DegreeTooHigh { index: index.to_string(), degree, max: MAX_MOMENT_DEGREE });
    }
    let word = index.entries();
    let mut blocks = 0usize;
    let mut pairs = 0i32;
    let mut q = 0;
    while q < word.len() {
        if word[q] == 0 {
            q += 1;
        } else if q + 1 < word.len() && word[q + 1] == word[q] {
            pairs += 1;
            q += 2;
        } else {
            return Ok(0.0);
        }
        blocks += 1;
    }
    let factorial: f64 = (1..=blocks).map(|k| k as f64).product();
    Ok(0.5f64.powi(pairs) / factorial)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEntry {
    pub index: MultiIndex,
    pub degree: usize,
    pub cubature: f64,
    pub brownian: f64,
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub order: usize,
    pub dimension: usize,
    /// Words of degree `<= order`.
    pub matched: Vec<MomentEntry>,
    /// Words of degree `order + 1`; their defects drive the one-step error constant.
    pub next_degree: Vec<MomentEntry>,
    pub max_defect: f64,
    /// Sum of `|defect|` over `next_degree`.
    pub error_constant: f64,
    /// Every odd-degree cubature moment is exactly zero.
    pub odd_moments_vanish: bool,
    pub pass: bool,
}

pub fn validate_moments(formula: &CubatureFormula) -> Result<MomentReport> {
    let r = u16::try_from(formula.dimension)
        .map_err(|_| Error::InvalidParameter("dimension too large".into()))?;
    let mut matched = Vec::new();
    let mut next_degree = Vec::new();
    for index in enumerate_degree_set(formula.order + 1, r) {
        let cubature = formula.moment(&index)?;
        let brownian = brownian_stratonovich_moment(&index)?;
        let entry = MomentEntry { degree: index.degree(), index, cubature, brownian, defect: cubature - brownian };
        if entry.degree <= formula.order {
            matched.push(entry);
        } else {
            next_degree.push(entry);
        }
    }
    let max_defect = matched.iter().map(|e| e.defect.abs()).fold(0.0, f64::max);
    let error_constant = next_degree.iter().map(|e| e.defect.abs()).sum();
    let odd_moments_vanish =
        matched.iter().chain(&next_degree).filter(|e| e.degree % 2 == 1).all(|e| e.cubature == 0.0);
    Ok(MomentReport {
        order: formula.order,
        dimension: formula.dimension,
        pass: max_defect < MOMENT_TOLERANCE,
        matched,
        next_degree,
        max_defect,
        error_constant,
        odd_moments_vanish,
    })
}
