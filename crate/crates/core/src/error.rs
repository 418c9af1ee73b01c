use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("subcritical kernel required (a < b), got a = {a}, b = {b}")]
    Supercritical { a: f64, b: f64 },

    #[error("coincident times {0} and {1}: reduce to the lower-order density via 1{{t_i = t_j}} k_l = delta * k_(l-1)")]
    DiagonalReduction(f64, f64),

    #[error("unsupported order {0}")]
    Capability(usize),

    #[error("target power not reached by n = {n_max}")]
    Saturated {
        n_max: usize,
        probes: Vec<(usize, f64)>,
    },

    #[error("singular design: {0}")]
    Singular(String),

    #[error("input: {0}")]
    Input(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
