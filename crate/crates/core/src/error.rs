//! Structured errors carrying the measured defect that triggered them.

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong across the algebra, geometry, expansion,
/// and filter layers. Variants carry the observed quantities so callers can
/// log or rank failures without re-deriving them.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("operator dimensions disagree: {left}x{left} vs {right}x{right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("dimension {dim} exceeds the supported maximum {max}")]
    UnsupportedDimension { dim: usize, max: usize },

    #[error("operator is not self-adjoint (relative defect {defect:.3e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("state trace {trace:.6e} is not usable as a normalizer")]
    NonPositiveTrace { trace: f64 },

    #[error("state trace deviates from one by {defect:.3e}")]
    TraceNotOne { defect: f64 },

    #[error("state eigenvalue {eigenvalue:.6e} lies below the positivity floor {floor:.1e}")]
    PositivityViolation { eigenvalue: f64, floor: f64 },

    #[error("multi-index is empty")]
    EmptyIndex,

    #[error("multi-index entry {value} is outside {{0,1}}")]
    InvalidIndexEntry { value: u8 },

    #[error("order {order} exceeds the supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },

    #[error("time {t:.12e} is not on the sample grid (t0 {t0:.6e}, dt {dt:.6e})")]
    TimeOffGrid { t: f64, t0: f64, dt: f64 },

    #[error("integrand holds {got} samples but the path grid has {expected} points")]
    ProcessGridMismatch { expected: usize, got: usize },

    #[error("differentiator for multi-index {alpha} is outside the implemented range")]
    UnsupportedOrder { alpha: String },

    #[error("horizon {delta:.6e} is outside the admissible range (0, 1)")]
    HorizonOutOfRange { delta: f64 },

    #[error("chart generators {i} and {j} do not commute (defect {defect:.3e})")]
    NonCommutingGenerators { i: usize, j: usize, defect: f64 },

    #[error("chart generator {index} differs from the spectral projector (defect {defect:.3e})")]
    GeneratorProjectorMismatch { index: usize, defect: f64 },

    #[error(
        "information matrix is numerically singular \
         (min eigenvalue {min_eig:.3e}, max eigenvalue {max_eig:.3e})"
    )]
    SingularMetric { min_eig: f64, max_eig: f64 },

    #[error("coordinate magnitude {value:.3e} exceeds the overflow guard {limit}")]
    OverflowGuard { value: f64, limit: f64 },

    #[error("spectral decomposition defect {defect:.3e} exceeds tolerance")]
    SpectralDefect { defect: f64 },

    #[error("value is not finite: {what}")]
    NonFinite { what: &'static str },

    #[error("integration failed at t = {time:.6}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps an error with the integration time at which it surfaced.
    pub fn at_time(self, time: f64) -> Error {
        Error::AtTime {
            time,
            source: Box::new(self),
        }
    }
}
