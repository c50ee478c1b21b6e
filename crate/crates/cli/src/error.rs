use thiserror::Error;

/// Runner-level failures, partitioned by exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("validation: {0}")]
    Validation(String),

    #[error("trajectory tainted at t = {t}: top-two Fock population {population:.3e} exceeded {threshold:.1e}")]
    Tainted { t: f64, population: f64, threshold: f64 },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit code: 1 validation, 2 tainted trajectory, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 1,
            RunError::Tainted { .. } => 2,
            RunError::Io(_) => 3,
        }
    }
}

impl From<spinosc_core::Error> for RunError {
    fn from(e: spinosc_core::Error) -> Self {
        match e {
            spinosc_core::Error::TaintedRange { t, population, threshold } => {
                RunError::Tainted { t, population, threshold }
            }
            other => RunError::Validation(other.to_string()),
        }
    }
}
