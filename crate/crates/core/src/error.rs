use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid member template: {0}")]
    InvalidTemplate(String),

    #[error("invalid topology: {0}")]
    Topology(String),

    #[error("cable `{cable}` is degenerate: length {length:e} m is below 1e-12 m")]
    DegenerateCable { cable: String, length: f64 },

    #[error("newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular newton jacobian (reciprocal condition estimate {rcond:e})")]
    SingularJacobian { rcond: f64 },

    #[error("configuration is not a static equilibrium (residual {residual:e})")]
    NotInEquilibrium { residual: f64 },

    #[error("inverse statics is inconsistent: least-squares residual {residual:e}")]
    Inconsistent { residual: f64 },

    #[error("rest-length system is underdetermined: solution set has dimension {dimension}; fix more rest lengths")]
    Underdetermined { dimension: usize },

    #[error("cables would be slack at the requested configuration: {0:?}")]
    SlackCables(Vec<String>),

    #[error("mass matrix is not positive definite")]
    IndefiniteMass,

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
