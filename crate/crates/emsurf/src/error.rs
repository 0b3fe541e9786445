use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh parse error at line {line}: {msg}")]
    MeshParse { line: usize, msg: String },
    #[error("mesh validation error: {0}")]
    MeshInvalid(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("basis matching error: {0}")]
    Matching(String),
    #[error("assembly error: {0}")]
    Assembly(String),
    #[error("boundary-condition classification error: {0}")]
    BoundaryCondition(String),
    #[error("macromodel reduction error: {0}")]
    Reduction(String),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("operator error: {0}")]
    Operator(String),
    #[error("factorization error: {0}")]
    Factorization(String),
    #[error("solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },
    #[error("excitation error: {0}")]
    Excitation(String),
    #[error("post-processing error: {0}")]
    Post(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cache error: {0}")]
    Cache(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
