use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum QhdError {
    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("{what} out of range: {detail}")]
    Range { what: &'static str, detail: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("density below the vacuum floor {floor:e} at {count} nodes")]
    VacuumUnsupported { floor: f64, count: usize },

    #[error("density not positive: min sqrt_rho = {min:e} < {floor:e}")]
    NotPositive { min: f64, floor: f64 },

    #[error(
        "quantization violated at vortex {index}: circulation is {measured:.4} windings, expected {expected}"
    )]
    QuantizationViolation {
        index: usize,
        measured: f64,
        expected: i32,
    },

    #[error("data not liftable: {0}")]
    NonLiftable(String),

    #[error("total winding {0} must vanish on a periodic grid")]
    WindingSum(i64),

    #[error("invalid vortex set: {0}")]
    InvalidVortexSet(String),

    #[error("loop around ({cx:.3}, {cy:.3}) with radius {radius:.3} passes through vacuum")]
    LoopThroughVacuum { cx: f64, cy: f64, radius: f64 },

    #[error("non-finite state at t = {t}; last good time {last_good}")]
    BlowUp { t: f64, last_good: f64 },

    #[error(
        "fixed-point correction failed to reduce the residual ({before:e} -> {after:e}) at t = {t}; try dt <= {advice:e}"
    )]
    NonConvergence {
        t: f64,
        before: f64,
        after: f64,
        advice: f64,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("grid has {nodes} nodes, above the direct-sum limit {limit}; use the fractional-norm route")]
    SizeLimit { nodes: usize, limit: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config error: {0}")]
    Schema(String),

    #[error("output directory {0} already holds a run; pass --force to overwrite")]
    OutputExists(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("{context}: {source}")]
    Ladder {
        context: String,
        #[source]
        source: Box<QhdError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl QhdError {
    /// True for errors caused by bad user input rather than by a computation.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            QhdError::Config { .. } | QhdError::Schema(_) | QhdError::OutputExists(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, QhdError>;
