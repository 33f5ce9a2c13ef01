use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("feedback taps {taps:?} are not primitive for degree {degree}: period {period}, expected {expected}")]
    NonPrimitive {
        degree: u32,
        taps: Vec<u32>,
        period: usize,
        expected: usize,
    },

    #[error("aliasing: IF {if_frequency_hz:.4e} Hz + chip bandwidth {bandwidth_hz:.4e} Hz exceeds Nyquist {nyquist_hz:.4e} Hz")]
    Aliasing {
        if_frequency_hz: f64,
        bandwidth_hz: f64,
        nyquist_hz: f64,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown scenario {0:?} (expected clear, rain or snow)")]
    UnknownScenario(String),

    #[error("{what} {value} outside supported range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("no frame found (peak normalized correlation {score:.3} below threshold {threshold:.3})")]
    NoFrameFound { score: f64, threshold: f64 },

    #[error("carrier loop unlocked: phase error variance {variance:.3} rad^2 above {limit:.3}")]
    Unlocked { variance: f64, limit: f64 },

    #[error("frequency grids differ ({0} vs {1} bins)")]
    GridMismatch(usize, usize),

    #[error("degenerate sample quantiles: {0}")]
    DegenerateQuantiles(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
