use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unphysical input: {0}")]
    UnphysicalInput(String),

    #[error("mode index {index} out of range for {n_modes} modes")]
    IndexOutOfRange { index: usize, n_modes: usize },

    #[error("a two-mode element needs distinct modes, got {0} twice")]
    SameMode(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("no photons: correlation denominator {denominator:e} is below threshold")]
    NoPhotons { denominator: f64 },

    #[error("negative photon correlation {value:e} beyond rounding tolerance")]
    NegativeCorrelation { value: f64 },

    #[error("moment extraction failed: {0}")]
    MomentExtraction(String),

    #[error("fringe fit is degenerate: {0}")]
    FitDegenerate(String),

    #[error("missing measurement setting {0}")]
    MissingSetting(String),

    #[error("record too short: {found} samples, need at least {required}")]
    ShortRecord { found: usize, required: usize },

    #[error("empty shot-noise calibration block in chop period {0}")]
    EmptyCalibration(usize),

    #[error("degenerate fit data: {0}")]
    DegenerateData(String),

    #[error("bootstrap rejected {rejected} of {requested} replicates (budget {budget})")]
    BootstrapRejections {
        rejected: usize,
        requested: usize,
        budget: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("record format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
