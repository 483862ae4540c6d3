use thiserror::Error;

/// Errors raised by the solvers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid state in cell {cell}: {reason}")]
    InvalidState { cell: usize, reason: String },
    #[error("degenerate density {rho:e} in cell {cell} (floor {floor:e})")]
    DegenerateDensity { cell: usize, rho: f64, floor: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("kernel for {n_per_dim} velocity points per dimension exceeds capacity (max {max})")]
    Capacity { n_per_dim: usize, max: usize },
    #[error("numeric breakdown in collision operator at cell {cell}")]
    NumericBreakdown { cell: usize },
    #[error("naive collision oracle refuses {n_per_dim} points per dimension (max {max})")]
    OracleSize { n_per_dim: usize, max: usize },
    #[error("time step {dt:e} violates stability bound {dt_max:e}")]
    Stability { dt: f64, dt_max: f64 },
    #[error("fluid vacuum or negative pressure in cell {cell}")]
    FluidVacuum { cell: usize },
    #[error("{regime} solver failed at cell {cell}: {source}")]
    Regime {
        regime: &'static str,
        cell: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
