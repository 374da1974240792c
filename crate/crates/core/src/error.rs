use thiserror::Error;

/// Errors raised by the discretisation, assembly and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("mesh file: {0}")]
    MeshFile(String),

    #[error("physics: {0}")]
    Physics(String),

    #[error("singular transport operator for direction {direction:?} at energy {energy} keV")]
    SingularOperator { direction: [f64; 3], energy: f64 },

    #[error("group {requested} cannot be solved before group {expected}")]
    GroupOrder { requested: usize, expected: usize },

    #[error("missing flux data: {0}")]
    MissingFlux(String),

    #[error("adaptive quadrature did not reach tolerance {tolerance:e} (estimate {estimate:e})")]
    OracleNonConvergence { tolerance: f64, estimate: f64 },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
