use thiserror::Error;

/// Errors raised by the simulator, the optimizers and the command-line layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("density matrix trace {trace} is not 1")]
    NotUnitTrace { trace: f64 },

    #[error("parameter `{name}` = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("all probability abandoned for input {input} (success probability {g:e})")]
    Degenerate { input: &'static str, g: f64 },

    #[error("grid has {size} points, above the cap of {cap}")]
    GridTooLarge { size: u128, cap: u128 },

    #[error("invalid grid axis `{axis}`: {reason}")]
    InvalidGrid { axis: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn out_of_range(name: &'static str, value: f64, range: &'static str) -> Self {
        Error::OutOfRange { name, value, range }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
