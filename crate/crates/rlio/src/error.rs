use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("zero-norm vector passed to {0}")]
    ZeroNorm(&'static str),

    #[error("IMU buffer not stationary: accel variance {variance:.6} exceeds {threshold:.6}")]
    NotStationary { variance: f64, threshold: f64 },

    #[error("IMU buffer spans {got:.3} s, need at least {need:.3} s")]
    BufferTooShort { got: f64, need: f64 },

    #[error("no IMU samples in sweep interval [{start:.6}, {end:.6})")]
    NoImuSamples { start: f64, end: f64 },

    #[error("degenerate radar geometry: {0}")]
    DegenerateGeometry(&'static str),

    #[error("empty preintegration interval")]
    EmptyInterval,

    #[error("empty gravity log")]
    EmptyLog,

    #[error("trajectory association produced {0} pairs, need at least 3")]
    TooFewPairs(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// dataset problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            _ => 1,
        }
    }
}
