use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("theta must exceed -alpha (alpha = {alpha}), got {theta}")]
    Theta { alpha: f64, theta: f64 },
    #[error("invalid argument `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },
    #[error("invalid partition state: {0}")]
    State(String),
    #[error("truncation level {requested} leaves tail mass {tail_mass:e} above tolerance {tolerance:e}")]
    Truncation {
        requested: usize,
        tail_mass: f64,
        tolerance: f64,
    },
    #[error("tail mass tolerance {tolerance:e} needs more than {cap} frequencies for alpha = {alpha}")]
    TruncationCap {
        alpha: f64,
        tolerance: f64,
        cap: usize,
    },
    #[error("frequency {index} is not strictly positive")]
    ZeroFrequency { index: usize },
    #[error("no arrival time falls inside the window [0, {window}]")]
    EmptyWindow { window: f64 },
    #[error("grid point {0} lies outside [0, 1]")]
    GridPoint(f64),
    #[error("query time {time} exceeds the simulated horizon {horizon}")]
    Horizon { time: f64, horizon: f64 },
    #[error("covariance factorization failed: jitter reached {jitter:e} at pivot {pivot}")]
    Factorization { pivot: usize, jitter: f64 },
    #[error("kernel identity violated at ({s}, {t}): deviation {deviation:e}")]
    Identity { s: f64, t: f64, deviation: f64 },
    #[error("sample is too small: {0}")]
    Sample(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}
