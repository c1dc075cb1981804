use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: &'static str, reason: String },

    #[error("point outside function domain: x={x} not in [{a}, {b}]")]
    OutsideDomain { x: f64, a: f64, b: f64 },

    #[error("q-derivative undefined at zero")]
    DerivativeAtZero,

    #[error("inverse-q step leaves domain: x/q={x} > {b}")]
    InverseStepLeavesDomain { x: f64, b: f64 },

    #[error("invalid q-integration bounds [{a}, {b}]")]
    InvalidBounds { a: f64, b: f64 },

    #[error("E_q product overflows at x={x}; use log_big_e_q")]
    ProductOverflow { x: f64 },

    #[error("argument too large for fixed precision: z={z}")]
    ArgumentTooLarge { z: f64 },

    #[error("mode cap exceeds representable spectrum: found {found} of {requested} eigenvalues")]
    ModeCapExceeded { found: usize, requested: usize },

    #[error("bisection failed to converge in bracket [{lo}, {hi}]")]
    BisectionFailed { lo: f64, hi: f64 },

    #[error("mode index {k} out of range 1..={len}")]
    IndexOutOfRange { k: usize, len: usize },

    #[error("source shape violates the mean bound at t={t}: |int f d_qx|^-1 = {inverse_mean} > M1 = {m1}")]
    HypothesisViolated { t: f64, inverse_mean: f64, m1: f64 },

    #[error("degenerate diagonal in Volterra solve at t={t} (pivot {pivot})")]
    DegenerateDiagonal { t: f64, pivot: f64 },

    #[error("Picard iteration diverging; check T*sup|K| (sup-diff {diff} after {iterations} iterations)")]
    PicardDiverging { iterations: usize, diff: f64 },

    #[error("mode {k} unrecoverable at this precision (log10 amplification {log10_amplification:.2} > {budget}); lower K_reg")]
    ModeUnrecoverable {
        k: usize,
        log10_amplification: f64,
        budget: f64,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for this failure: 2 for validation and hypothesis
    /// failures, 1 for numeric and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::HypothesisViolated { .. }
            | Error::Config(_)
            | Error::InvalidBounds { .. } => 2,
            _ => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
