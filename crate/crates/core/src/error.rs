use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{what} = {value} is out of range [{min}, {max}]")]
    Range {
        what: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("index {index} out of range (len {len})")]
    Index { index: usize, len: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("singular system: zero pivot at row {row}")]
    Singular { row: usize },

    #[error("cannot normalize a zero vector")]
    ZeroVector,

    #[error("interpolation residual {residual:e} exceeds {tolerance:e}")]
    Conditioning { residual: f64, tolerance: f64 },

    #[error("least-squares fit of degree {degree} on {points} points is rank deficient")]
    RankDeficient { degree: usize, points: usize },

    #[error("coefficient magnitude overflow in Z-string expansion")]
    Overflow,

    #[error("compiled diagonal deviates from target by {deviation:e}")]
    Verification { deviation: f64 },

    #[error("post-selection probability {probability:e} is below {threshold:e}")]
    PostSelection { probability: f64, threshold: f64 },

    #[error("qubit budget exceeded: {required} qubits requested, limit {limit}")]
    QubitBudget { required: usize, limit: usize },

    #[error("denominator expectation {value:e} too small: block mass is negligible")]
    DivisionUnderflow { value: f64 },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input or
    /// configuration).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Singular { .. }
            | Error::ZeroVector
            | Error::Conditioning { .. }
            | Error::RankDeficient { .. }
            | Error::Overflow
            | Error::Verification { .. }
            | Error::PostSelection { .. }
            | Error::DivisionUnderflow { .. } => true,
            Error::Context { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Attach a context string to the error of a `Result`.
pub trait ResultExt<T> {
    fn context(self, context: impl Into<String>) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn context(self, context: impl Into<String>) -> Result<T> {
        self.map_err(|e| e.context(context))
    }
}
