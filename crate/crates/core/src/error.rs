use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("cannot combine a state vector with a density matrix")]
    MixedKinds,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("integrator step size underflow at t = {t} ps")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {max_steps} steps before reaching t = {t_end} ps (stopped at t = {t} ps)")]
    TooManySteps {
        max_steps: usize,
        t: f64,
        t_end: f64,
    },

    #[error("negative discriminant {discriminant} in detuning correction (phi = {phi}, epsilon = {epsilon} meV, sigma = {sigma} meV)")]
    NegativeDiscriminant {
        discriminant: f64,
        phi: f64,
        epsilon: f64,
        sigma: f64,
    },

    #[error("{what} = {requested} exceeds the supported maximum of {max}")]
    CapExceeded {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    #[error("measurement outcome {outcome} has zero probability")]
    ZeroProbabilityOutcome { outcome: &'static str },

    #[error("operation requires {expected} encoding")]
    WrongEncoding { expected: &'static str },

    #[error("no gate channel configured for rotation angle {phi}")]
    MissingChannel { phi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
