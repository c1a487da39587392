use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain configuration: {0}")]
    InvalidChain(String),
    #[error("hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("label out of range: {0}")]
    LabelOutOfRange(String),
    #[error("invalid geometry: {0}")]
    Geometry(String),
    #[error("flux requested on a geometry without a closed loop: {0}")]
    OpenGeometryFlux(String),
    #[error("cycle uses missing edge {from} -> {to}")]
    MissingEdge { from: usize, to: usize },
    #[error("invalid hopping term: {0}")]
    InvalidTerm(String),
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("requested rate needs amplitude {required:.4e} rad/s above cap {cap:.4e} rad/s (term n={n})")]
    AmplitudeCap { n: usize, required: f64, cap: f64 },
    #[error("no commensurate period with m <= {bound}; nearest miss T={nearest_period:.6e} s (m={m}) leaves residual {residual:.3e} cycles")]
    Incommensurate { bound: u64, nearest_period: f64, m: u64, residual: f64 },
    #[error("tone sharing: {0}")]
    ToneSharing(String),
    #[error("schedule margins flagged: {0}")]
    MarginFlagged(String),
    #[error("step size underflow at t={t:.6e} s (h={h:.3e}): {reason}")]
    StepUnderflow { t: f64, h: f64, reason: String },
    #[error("phonon leakage {leakage:.3e} exceeds threshold {threshold:.1e} at cutoff {cutoff}")]
    Leakage { leakage: f64, threshold: f64, cutoff: usize },
    #[error("mismatch: {0}")]
    Mismatch(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::StepUnderflow { .. } | Error::Leakage { .. } | Error::Incommensurate { .. } | Error::Fit(_)
        )
    }
}
