use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("point (x = {x}, v = {v}) lies outside the tabulated grid")]
    OutOfRange { x: f64, v: f64 },

    #[error("negative density {value} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("Newton solve stalled after {iterations} iterations (residual {residual:e}){}",
        slice.map(|s| alloc::format!(" on time slice {s}")).unwrap_or_default())]
    SolverDivergence {
        iterations: usize,
        residual: f64,
        slice: Option<usize>,
    },

    #[error("stability ratio is undefined for identical potentials")]
    DegenerateRatio,

    #[error("time {t} precedes the start of the field history ({t0})")]
    TimeOutOfRange { t: f64, t0: f64 },

    #[error("non-finite state while integrating a characteristic at t = {t}")]
    Integration { t: f64 },

    #[error("field history has no time slices")]
    EmptyHistory,

    #[error("datum is not in the admissible class: {0}")]
    InvalidDatum(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
