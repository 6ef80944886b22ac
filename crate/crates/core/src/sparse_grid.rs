//! Hierarchical piecewise-linear sparse grids with boundary nodes.
//!
//! A node is a pair `(l, j)` of level and position vectors. Along one axis
//! of `[a, b]`, level `0` holds the two boundary nodes `j ∈ {0, 1}` and level
//! `l > 0` holds the odd positions `j < 2^l`, at `a + j (b - a) 2^{-l}`.
//! The grid of order `p` keeps every node with `Σ l_i <= p`.
//!
//! Nodes with the same level vector form a dense block; blocks are ordered
//! by `(Σ l, l)` and positions inside a block lexicographically, which fixes
//! the node order used everywhere in this module.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative distance outside the cube within which queries are clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypercube {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Hypercube {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidParameter("hypercube bounds must have the same positive length".into()));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !a.is_finite() || !b.is_finite() || a > b) {
            return Err(Error::InvalidParameter(format!("invalid hypercube bounds {lower:?} / {upper:?}")));
        }
        Ok(Self { lower, upper })
    }

    /// Smallest axis-aligned box containing every point.
    pub fn minimal<'a, I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter.next().ok_or(Error::EmptyPointSet)?;
        let mut lower = first.to_vec();
        let mut upper = first.to_vec();
        for p in iter {
            for (i, &v) in p.iter().enumerate() {
                lower[i] = lower[i].min(v);
                upper[i] = upper[i].max(v);
            }
        }
        Self::new(lower, upper)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn is_collapsed(&self, i: usize) -> bool {
        self.upper[i] == self.lower[i]
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| (0..d).map(|i| if mask >> i & 1 == 1 { self.upper[i] } else { self.lower[i] }).collect())
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }

    fn tolerance(&self, i: usize) -> f64 {
        CLAMP_TOLERANCE * self.width(i) + 4.0 * f64::EPSILON * (self.lower[i].abs() + self.upper[i].abs())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LevelIndex {
    pub levels: Vec<u8>,
    pub positions: Vec<u32>,
}

impl LevelIndex {
    pub fn level_sum(&self) -> usize {
        self.levels.iter().map(|&l| usize::from(l)).sum()
    }

    /// Membership rule for a grid of order `p`.
    pub fn is_valid(&self, p: usize) -> bool {
        self.level_sum() <= p
            && self.levels.iter().zip(&self.positions).all(|(&l, &j)| {
                if l == 0 {
                    j <= 1
                } else {
                    j % 2 == 1 && u64::from(j) < 1u64 << l
                }
            })
    }
}

// Nodes sharing one level vector.
#[derive(Debug, Clone)]
struct Block {
    levels: Vec<u8>,
    offset: usize,
    counts: Vec<usize>,
    strides: Vec<usize>,
    // Free axes at level 0; each contributes two basis terms at a query point.
    zero_axes: Vec<usize>,
}

impl Block {
    fn len(&self) -> usize {
        self.counts.iter().product()
    }
}

/// Node layout of a sparse grid of order `p` on a hypercube.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    cube: Hypercube,
    order: usize,
    blocks: Vec<Block>,
    block_of: HashMap<Vec<u8>, usize>,
    len: usize,
}

fn positions_at_level(level: u8, collapsed: bool) -> usize {
    match (level, collapsed) {
        (0, true) => 1,
        (0, false) => 2,
        (l, _) => 1usize << (l - 1),
    }
}

fn position_of(level: u8, local: usize) -> u32 {
    if level == 0 {
        local as u32
    } else {
        2 * local as u32 + 1
    }
}

fn local_of(level: u8, position: u32) -> usize {
    if level == 0 {
        position as usize
    } else {
        (position as usize - 1) / 2
    }
}

impl SparseGrid {
    /// Collapsed dimensions (`a_i = b_i`) only carry the level-0 node `j = 0`.
    pub fn new(cube: Hypercube, order: usize) -> Self {
        let d = cube.dim();
        let free: Vec<bool> = (0..d).map(|i| !cube.is_collapsed(i)).collect();
        let mut level_vectors = Vec::new();
        let mut current = vec![0u8; d];
        collect_levels(&free, order, 0, &mut current, &mut level_vectors);
        level_vectors.sort_by(|a, b| {
            let sa: usize = a.iter().map(|&l| usize::from(l)).sum();
            let sb: usize = b.iter().map(|&l| usize::from(l)).sum();
            (sa, a).cmp(&(sb, b))
        });
        let mut blocks = Vec::with_capacity(level_vectors.len());
        let mut block_of = HashMap::with_capacity(level_vectors.len());
        let mut offset = 0;
        for levels in level_vectors {
            let counts: Vec<usize> =
                levels.iter().enumerate().map(|(i, &l)| positions_at_level(l, !free[i])).collect();
            let mut strides = vec![1; d];
            for i in (0..d.saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * counts[i + 1];
            }
            let zero_axes = (0..d).filter(|&i| levels[i] == 0 && free[i]).collect();
            let block = Block { levels: levels.clone(), offset, counts, strides, zero_axes };
            offset += block.len();
            block_of.insert(levels, blocks.len());
            blocks.push(block);
        }
        Self { cube, order, blocks, block_of, len: offset }
    }

    pub fn cube(&self) -> &Hypercube {
        &self.cube
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.cube.dim()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn level_index(&self, node: usize) -> LevelIndex {
        let b = self.block_containing(node);
        let block = &self.blocks[b];
        let mut rem = node - block.offset;
        let mut positions = Vec::with_capacity(self.dim());
        for i in 0..self.dim() {
            let local = rem / block.strides[i];
            rem %= block.strides[i];
            positions.push(position_of(block.levels[i], local));
        }
        LevelIndex { levels: block.levels.clone(), positions }
    }

    fn block_containing(&self, node: usize) -> usize {
        self.blocks.partition_point(|b| b.offset <= node) - 1
    }

    /// Node number of `(l, j)`, if it belongs to the grid.
    pub fn index_of(&self, index: &LevelIndex) -> Option<usize> {
        let block = &self.blocks[*self.block_of.get(&index.levels)?];
        let mut at = block.offset;
        for i in 0..self.dim() {
            let local = local_of(index.levels[i], index.positions[i]);
            if local >= block.counts[i] || (index.levels[i] > 0 && index.positions[i].is_multiple_of(2)) {
                return None;
            }
            at += local * block.strides[i];
        }
        Some(at)
    }

    pub fn coordinate(&self, index: &LevelIndex) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let a = self.cube.lower[i];
                let w = self.cube.width(i);
                if index.positions[i] == 0 {
                    a
                } else if (index.positions[i] as u64) == 1u64 << index.levels[i] {
                    self.cube.upper[i]
                } else {
                    a + w * f64::from(index.positions[i]) / (1u64 << index.levels[i]) as f64
                }
            })
            .collect()
    }

    /// All nodes in layout order.
    pub fn nodes(&self) -> Vec<(LevelIndex, Vec<f64>)> {
        (0..self.len)
            .map(|k| {
                let idx = self.level_index(k);
                let x = self.coordinate(&idx);
                (idx, x)
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len).map(|k| self.coordinate(&self.level_index(k))).collect()
    }

    // Hierarchical neighbour of `index` one step left or right along `dim`,
    // reduced to its canonical (coarsest) level.
    fn neighbour(&self, index: &LevelIndex, dim: usize, right: bool) -> usize {
        let mut levels = index.levels.clone();
        let mut positions = index.positions.clone();
        let mut l = levels[dim];
        let mut j = if right { positions[dim] + 1 } else { positions[dim] - 1 };
        while l > 0 && j % 2 == 0 {
            j /= 2;
            l -= 1;
        }
        levels[dim] = l;
        positions[dim] = j;
        self.index_of(&LevelIndex { levels, positions }).expect("sparse grid index set is downward closed")
    }

    /// Turns nodal values (row-major, `outputs` per node) into hierarchical
    /// surpluses, one axis at a time.
    pub fn hierarchize_values(&self, values: &mut [f64], outputs: usize) {
        assert_eq!(values.len(), self.len * outputs);
        for dim in 0..self.dim() {
            // Finest levels first so neighbours still hold values along `dim`.
            let mut order: Vec<usize> = (0..self.blocks.len()).filter(|&b| self.blocks[b].levels[dim] > 0).collect();
            order.sort_by_key(|&b| std::cmp::Reverse(self.blocks[b].levels[dim]));
            for b in order {
                let block = &self.blocks[b];
                for node in block.offset..block.offset + block.len() {
                    let idx = self.level_index(node);
                    let left = self.neighbour(&idx, dim, false);
                    let right = self.neighbour(&idx, dim, true);
                    for o in 0..outputs {
                        let avg = 0.5 * (values[left * outputs + o] + values[right * outputs + o]);
                        values[node * outputs + o] -= avg;
                    }
                }
            }
        }
    }

    /// Builds an interpolant from a function sampled at every node.
    pub fn hierarchize<F>(self: &Arc<Self>, source: F) -> SparseInterpolant
    where
        F: Fn(&[f64]) -> f64,
    {
        let values: Vec<f64> = self.points().iter().map(|x| source(x)).collect();
        SparseInterpolant::from_values(Arc::clone(self), values, 1)
    }

    fn normalised(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::InvalidParameter(format!("point has dimension {}, grid has {d}", x.len())));
        }
        let mut u = vec![0.0; d];
        for i in 0..d {
            let (a, b) = (self.cube.lower[i], self.cube.upper[i]);
            let tol = self.cube.tolerance(i);
            let v = x[i];
            if !v.is_finite() || v < a - tol || v > b + tol {
                let distance = if v < a { a - v } else { v - b };
                return Err(Error::OutsideCube { point: x.to_vec(), dim: i, distance });
            }
            u[i] = if b > a { ((v - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
        }
        Ok(u)
    }

    /// Accumulates `Σ c_k φ_k(x)` for multi-output coefficients into `out`.
    pub fn evaluate(&self, coefficients: &[f64], outputs: usize, x: &[f64], out: &mut [f64]) -> Result<()> {
        let u = self.normalised(x)?;
        out[..outputs].fill(0.0);
        let d = self.dim();
        let p = self.order;
        // Per axis and level: up to two (local index, weight) pairs.
        let mut basis = vec![[(0usize, 0.0f64); 2]; d * (p + 1)];
        for i in 0..d {
            if self.cube.is_collapsed(i) {
                basis[i * (p + 1)] = [(0, 1.0), (0, 0.0)];
                continue;
            }
            basis[i * (p + 1)] = [(0, 1.0 - u[i]), (1, u[i])];
            for l in 1..=p {
                let cells = 1usize << (l - 1);
                let scaled = u[i] * (1usize << l) as f64;
                let cell = ((u[i] * cells as f64) as usize).min(cells - 1);
                let j = 2 * cell + 1;
                let w = (1.0 - (scaled - j as f64).abs()).max(0.0);
                basis[i * (p + 1) + l] = [(cell, w), (0, 0.0)];
            }
        }
        for block in &self.blocks {
            let zero_axes = &block.zero_axes;
            let mut base_at = block.offset;
            let mut base_w = 1.0;
            for i in 0..d {
                if block.levels[i] > 0 || self.cube.is_collapsed(i) {
                    let (local, w) = basis[i * (p + 1) + usize::from(block.levels[i])][0];
                    base_at += local * block.strides[i];
                    base_w *= w;
                }
            }
            if base_w == 0.0 {
                continue;
            }
            for mask in 0..1usize << zero_axes.len() {
                let mut at = base_at;
                let mut w = base_w;
                for (bit, &i) in zero_axes.iter().enumerate() {
                    let (local, wi) = basis[i * (p + 1)][mask >> bit & 1];
                    at += local * block.strides[i];
                    w *= wi;
                }
                if w != 0.0 {
                    let row = &coefficients[at * outputs..(at + 1) * outputs];
                    for (o, c) in out.iter_mut().zip(row) {
                        *o += w * c;
                    }
                }
            }
        }
        Ok(())
    }
}

fn collect_levels(free: &[bool], budget: usize, axis: usize, current: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if axis == free.len() {
        out.push(current.clone());
        return;
    }
    let max = if free[axis] { budget } else { 0 };
    for l in 0..=max {
        current[axis] = l as u8;
        collect_levels(free, budget - l, axis + 1, current, out);
    }
    current[axis] = 0;
}

/// Hierarchical surpluses over a [`SparseGrid`], possibly several outputs per node.
#[derive(Debug, Clone)]
pub struct SparseInterpolant {
    grid: Arc<SparseGrid>,
    outputs: usize,
    coefficients: Vec<f64>,
}

impl SparseInterpolant {
    /// Hierarchizes nodal values laid out row-major (`outputs` per node).
    pub fn from_values(grid: Arc<SparseGrid>, mut values: Vec<f64>, outputs: usize) -> Self {
        grid.hierarchize_values(&mut values, outputs);
        Self { grid, outputs, coefficients: values }
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn cube(&self) -> &Hypercube {
        self.grid.cube()
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Surplus `θ_{l,j}` of the first output.
    pub fn coefficient(&self, index: &LevelIndex) -> Option<f64> {
        self.grid.index_of(index).map(|k| self.coefficients[k * self.outputs])
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Value of the first output at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let mut out = vec![0.0; self.outputs];
        self.grid.evaluate(&self.coefficients, self.outputs, x, &mut out)?;
        Ok(out[0])
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.grid.evaluate(&self.coefficients, self.outputs, x, out)
    }

    pub fn to_dump(&self) -> InterpolantDump {
        let coefficients = (0..self.grid.len())
            .map(|k| {
                let LevelIndex { levels, positions } = self.grid.level_index(k);
                CoefficientEntry {
                    levels,
                    positions,
                    values: self.coefficients[k * self.outputs..(k + 1) * self.outputs].to_vec(),
                }
            })
            .collect();
        InterpolantDump { cube: self.cube().clone(), order: self.order(), outputs: self.outputs, coefficients }
    }
}

/// Serialisable view of an interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolantDump {
    pub cube: Hypercube,
    pub order: usize,
    pub outputs: usize,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub levels: Vec<u8>,
    pub positions: Vec<u32>,
    pub values: Vec<f64>,
}

fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc
}

/// Nodes with every level positive and `Σ l <= p`.
pub fn count_interior_nodes(p: usize, d: usize) -> u128 {
    if p < d {
        return 0;
    }
    (0..=(p - d) as u64).map(|k| binomial(k + d as u64 - 1, d as u64 - 1) << k).sum()
}

/// Closed-form size of the order-`p` grid in `d` dimensions (no collapsed axes).
pub fn count_nodes(p: usize, d: usize) -> u128 {
    assert!(d >= 1, "dimension must be positive");
    let mut total: u128 = 1 << d;
    for zeros in d.saturating_sub(p)..d {
        total += binomial(d as u64, zeros as u64) * (1u128 << zeros) * count_interior_nodes(p, d - zeros);
    }
    total
}

/// Surplus of `source` at `index`, straight from the dimension recursion
/// `θ_{l,j} = θ_{l-,j-}(ψ(·, x_j)) - ½ θ_{l-,j-}(ψ(·, x_{j-1})) - ½ θ_{l-,j-}(ψ(·, x_{j+1}))`
/// on the last axis. Exponential in `d`; for cross-checking [`SparseGrid::hierarchize_values`].
pub fn recursive_surplus<F>(cube: &Hypercube, index: &LevelIndex, source: &F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let mut point = vec![0.0; cube.dim()];
    surplus_rec(cube, index, source, cube.dim(), &mut point)
}

fn surplus_rec<F>(cube: &Hypercube, index: &LevelIndex, source: &F, r: usize, point: &mut [f64]) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    if r == 0 {
        return source(point);
    }
    let k = r - 1;
    let (l, j) = (index.levels[k], index.positions[k]);
    let at = |j: u32| cube.lower[k] + cube.width(k) * f64::from(j) / (1u64 << l) as f64;
    let eval = |j: u32, point: &mut [f64]| {
        point[k] = at(j);
        surplus_rec(cube, index, source, k, point)
    };
    if l == 0 {
        eval(j, point)
    } else {
        eval(j, point) - 0.5 * eval(j - 1, point) - 0.5 * eval(j + 1, point)
    }
}
