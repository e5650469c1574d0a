use thiserror::Error;

/// Errors raised by the numerical kernels and the model code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum WicaError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid dataset: {0}")]
    InvalidData(String),

    #[error("degenerate weights: total weight is {total}")]
    DegenerateWeights { total: f64 },

    #[error("degenerate column {column} of {input}: zero variance")]
    DegenerateColumn { input: &'static str, column: usize },

    #[error("weight collapse at weighting point {point:?}: residual mass {residual_mass:e}")]
    WeightCollapse { point: Vec<f64>, residual_mass: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at step {step}: {reason}")]
    TrainingDiverged { step: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl WicaError {
    /// True for failures of the numerics (as opposed to bad input or IO).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            WicaError::DegenerateWeights { .. }
                | WicaError::DegenerateColumn { .. }
                | WicaError::WeightCollapse { .. }
                | WicaError::Numerical(_)
                | WicaError::TrainingDiverged { .. }
        )
    }
}

impl From<std::io::Error> for WicaError {
    fn from(e: std::io::Error) -> Self {
        WicaError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, WicaError>;
