use thiserror::Error;

/// Errors raised by the numerical layers and the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point set")]
    EmptySet,

    #[error("polynomial has degree 0, no roots to find")]
    ConstantPolynomial,

    #[error("root finder did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("map is constant after reduction")]
    ConstantMap,

    #[error("map is the identity, every point is fixed")]
    IdentityMap,

    #[error("0/0 at evaluation, numerator and denominator share a root")]
    Unreduced,

    #[error("{what} cap exceeded: {requested} > {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("chain has no components")]
    EmptyChain,

    #[error("key condition d1 > d0 fails (d1 = {d1}, d0 = {d0})")]
    KeyCondition { d1: u64, d0: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degree {degree} lies in the semigroup generated by {earlier:?}")]
    RepresentableDegree { degree: u32, earlier: Vec<u32> },

    #[error("sample point at or near infinity; recoordinate first")]
    SampleAtInfinity,

    #[error("generator {index} has a pole within tolerance of the sample")]
    PoleOnSample { index: usize },

    #[error(
        "no point with clearance >= {clearance} from the sample; the Julia set may fill the sphere"
    )]
    CaseASuspected { clearance: f64 },

    #[error("sup of |g'| on the sample is {0}, must exceed 1")]
    DegenerateM(f64),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 config, 3 caps, 4 numerics.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Json(_) | Error::InvalidArgument(_) => 2,
            Error::RepresentableDegree { .. } | Error::EmptyChain | Error::ConstantMap => 2,
            Error::CapExceeded { .. } => 3,
            Error::Io(_) | Error::Csv(_) => 1,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
