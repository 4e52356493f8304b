use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("degenerate parametrization at t = {t} (|x'| = {speed:e})")]
    DegenerateParametrization { t: f64, speed: f64 },

    #[error("bump family calibration failed: {0}")]
    FamilyCalibration(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("logarithmic singularity: Hankel function evaluated at z = 0")]
    LogSingularity,

    #[error("pole: {0}")]
    Pole(String),

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("missing eigenvalue: {0}")]
    MissingEigenvalue(String),

    #[error("multiplicity mismatch for {label}: expected {expected}, found {found}")]
    MultiplicityMismatch {
        label: String,
        expected: usize,
        found: usize,
    },

    #[error("insufficient grid: {0}")]
    InsufficientGrid(String),

    #[error("eigenvalue tracking ambiguous: {0}")]
    Tracking(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("under-resolved mesh: {0}")]
    Resolution(String),

    #[error("linear system numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::EigenSolver(_)
                | Error::MissingEigenvalue(_)
                | Error::Singular { .. }
                | Error::Resolution(_)
                | Error::FamilyCalibration(_)
                | Error::Tracking(_)
                | Error::MultiplicityMismatch { .. }
        )
    }
}
