use thiserror::Error;

/// Broad failure class, used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: out-of-range parameter, malformed schedule, unknown name.
    Config,
    /// The requested physics does not exist (unstable detuning, degenerate map).
    Physics,
    /// The numerics could not deliver a trustworthy answer.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown target mode index {index} (system has {count} target modes)")]
    UnknownTarget { index: usize, count: usize },

    #[error("unknown engine `{0}`")]
    UnknownEngine(String),

    #[error(
        "unstable at detuning {delta}: g = {g} exceeds sqrt(|delta| * omega_b) / 2 = {limit}"
    )]
    Instability { delta: f64, g: f64, limit: f64 },

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integration failure at t = {time}: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error(
        "truncation leakage {leakage:.3e} in mode {mode} exceeds {threshold:.1e} at t = {time}; increase the cutoff"
    )]
    Truncation {
        mode: usize,
        leakage: f64,
        threshold: f64,
        time: f64,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::UnknownTarget { .. }
            | Error::UnknownEngine(_)
            | Error::DimensionMismatch { .. } => ErrorKind::Config,
            Error::Instability { .. } | Error::Degenerate(_) => ErrorKind::Physics,
            Error::IntegrationFailure { .. } | Error::Truncation { .. } => ErrorKind::Numerical,
            Error::Context { source, .. } => source.kind(),
        }
    }

    /// Innermost error, with any context wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
