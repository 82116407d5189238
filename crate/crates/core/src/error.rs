use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A tabulated quantity was requested outside the tabulated range.
    #[error("range error: {0}")]
    Range(String),
    /// The requested computation is not supported for this input.
    #[error("capability error: {0}")]
    Capability(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("kernel error: {0}")]
    Kernel(String),
    #[error("rank error: requested {requested} modes but only {resolvable} are numerically resolvable")]
    Rank { requested: usize, resolvable: usize },
    #[error("eigen degeneracy: mode {mode} could not be matched between grids (overlap {overlap:.3}); reduce the mode count")]
    Degeneracy { mode: usize, overlap: f64 },
    #[error("precondition failed for mode {mode}: eigenvalue error {eta} is not below eigenvalue {lambda}")]
    EigenvalueError { mode: usize, eta: f64, lambda: f64 },
    #[error("route error: {0}")]
    Route(String),
}
