use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("random grid: no draw with width ratio <= {max_ratio} after {attempts} attempts")]
    ResamplingExhausted { max_ratio: f64, attempts: usize },

    #[error("unknown kernel name `{0}`")]
    UnknownKernel(String),

    #[error("invalid interval [{a}, {b}] for parent size {y}")]
    InvalidInterval { a: f64, b: f64, y: f64 },

    #[error("quadrature did not converge on [{a}, {b}] (estimate {estimate}, error {error_estimate})")]
    Quadrature {
        a: f64,
        b: f64,
        estimate: f64,
        error_estimate: f64,
    },

    #[error("table entry (i={i}, j={j}, k={k:?}): {source}")]
    Table {
        i: usize,
        j: usize,
        k: Option<usize>,
        #[source]
        source: Box<Error>,
    },

    #[error("shape mismatch: expected {expected} entries, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("negative state at t = {t}: entry {index} = {value} (clip threshold {threshold})")]
    Negativity {
        t: f64,
        index: usize,
        value: f64,
        threshold: f64,
    },

    #[error("non-finite state at t = {t}, entry {index}")]
    NonFinite { t: f64, index: usize },

    #[error("reference `{id}` is not defined at t = {t}: {reason}")]
    ReferenceRange { id: String, t: f64, reason: String },

    #[error("reference unavailable: {0}")]
    ReferenceUnavailable(String),
}
