use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("multi-index {index} has degree {degree}, above the supported maximum {max}")]
    DegreeTooHigh { index: String, degree: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("query point {point:?} lies outside the hypercube (dimension {dim}, distance {distance:e})")]
    OutsideCube { point: Vec<f64>, dim: usize, distance: f64 },

    #[error("ODE integration produced a non-finite state at step {step}, path {path}, start {start:?}")]
    IntegrationFailure { step: usize, path: usize, start: Vec<f64> },

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    FixedPointDivergence { iterations: usize, residual: f64 },

    #[error("cubature tree would have {required} leaves, budget is {budget}")]
    TreeBudgetExceeded { required: f64, budget: f64 },

    #[error("layer {layer}, node {node}: {source}")]
    AtNode {
        layer: usize,
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown problem '{0}'")]
    UnknownProblem(String),

    #[error("output error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn at_node(self, layer: usize, node: usize) -> Self {
        Error::AtNode { layer, node, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
