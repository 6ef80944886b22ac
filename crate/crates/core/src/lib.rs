//! Solver for Markovian backward stochastic differential equations built on
//! cubature on Wiener space, with sparse-grid projection of the backward
//! layers and Richardson-Romberg extrapolation in the step count.

pub mod bsde;
pub mod cubature;
pub mod error;
pub mod forward;
pub mod multiindex;
pub mod problems;
pub mod sparse_grid;
pub mod study;
pub mod time_grid;

pub use bsde::{SolveConfig, SolveReport};
pub use cubature::{CubatureFormula, MomentReport};
pub use error::{Error, Result};
pub use forward::{ChildSet, Model, Problem};
pub use multiindex::MultiIndex;
pub use problems::NamedProblem;
pub use sparse_grid::{Hypercube, LevelIndex, SparseGrid, SparseInterpolant};
pub use time_grid::TimeGrid;
