use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular geometry: atoms {i} and {j} coincide")]
    SingularGeometry { i: usize, j: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("step size too large: 2*pi*rate*dt = {phase:.4} exceeds {limit} (rate {rate:.4} MHz, dt {dt} us)")]
    StepSize {
        phase: f64,
        limit: f64,
        rate: f64,
        dt: f64,
    },

    #[error("integrator failure at t = {time:.6} us: {detail}")]
    Integrator { time: f64, detail: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("realization with seed {seed} failed: {source}")]
    Realization {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Configuration-class errors: bad inputs rather than failed numerics.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::StepSize { .. } | Error::Data(_) => true,
            Error::Realization { source, .. } => source.is_config(),
            _ => false,
        }
    }

    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Realization { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
