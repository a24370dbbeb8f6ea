use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("photon-number cutoff must be at least 1, got {0}")]
    InvalidCutoff(usize),

    #[error("shape mismatch: expected {expected}x{expected}, found {rows}x{cols}")]
    ShapeMismatch { expected: usize, rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("{name} = {value} is outside its valid range")]
    OutOfRange { name: &'static str, value: f64 },

    #[error("cutoff too small: {leakage:e} of the population lies beyond n_max (limit {limit:e})")]
    CutoffTooSmall { leakage: f64, limit: f64 },

    #[error("squeezing pair is inconsistent with a lossy pure squeezed state: {0}")]
    InconsistentSqueezing(String),

    #[error("heralding probability {probability:e} is below the floor {floor:e}")]
    DegenerateHerald { probability: f64, floor: f64 },

    #[error("idler truncation discards {leakage:e} of the state (limit {limit:e})")]
    IdlerLeakage { leakage: f64, limit: f64 },

    #[error("state has zero trace and cannot be normalized")]
    ZeroTrace,

    #[error("Wigner grid does not cover the state: integral {integral}")]
    GridTooSmall { integral: f64 },

    #[error("grids have different axes")]
    AxisMismatch,

    #[error("zero witness variance")]
    ZeroVariance,

    #[error("only {0} shot-noise frames; at least 100 are required for calibration")]
    CalibrationQuality(usize),

    #[error("dataset has not been shot-noise calibrated")]
    NotCalibrated,

    #[error("tomography needs at least 2 distinct phases, dataset has {0}")]
    InsufficientPhases(usize),

    #[error("invalid measurement plan: {0}")]
    InvalidPlan(&'static str),

    #[error("frame refers to phase index {index} but only {phases} phases are declared")]
    UnknownPhase { index: usize, phases: usize },

    #[error("bootstrap needs at least 2 resamples, got {0}")]
    BootstrapResamples(usize),

    #[error("invalid MLE configuration: {0}")]
    InvalidMleConfig(&'static str),
}
