use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: Fock factors need at least two levels")]
    InvalidDimension(usize),
    #[error("invalid Hilbert space: {0}")]
    InvalidSpace(String),
    #[error("unknown tensor factor `{0}`")]
    UnknownFactor(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("operands live on different Hilbert spaces")]
    SpaceMismatch,
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("eigenmode orientation alpha = {0} lies outside [0, 1]")]
    InvalidOrientation(f64),
    #[error("matrix is not unitary (max deviation {0:.3e})")]
    NonUnitary(f64),

    #[error("unknown transition {ground} -> {excited}")]
    UnknownTransition { ground: String, excited: String },
    #[error("unknown atomic level `{0}`")]
    UnknownLevel(String),
    #[error("invalid level scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),
    #[error("bare Hamiltonian must be diagonal")]
    NonDiagonal,
    #[error("the Hamiltonian is time dependent: {0}")]
    TimeDependent(String),
    #[error("step size underflow at t = {t:.6e} s (h = {h:.3e} s)")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("tolerance not met after {steps} steps at t = {t:.6e} s")]
    ToleranceNotMet { t: f64, steps: usize },

    #[error("no resolvable oscillation: {0}")]
    InsufficientOscillations(String),
    #[error("port fractions are undefined: {0}")]
    UndefinedFraction(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("fit did not converge after {iterations} iterations")]
    FitNonConvergence { iterations: usize },
    #[error("degenerate scan data: {0}")]
    DegenerateData(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scan file contains no data rows")]
    EmptyScan,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("scenario `{scenario}`: {source}")]
    InScenario {
        scenario: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_scenario(self, scenario: &str) -> Self {
        match self {
            Error::InScenario { .. } => self,
            other => Error::InScenario {
                scenario: scenario.to_string(),
                source: Box::new(other),
            },
        }
    }

    /// Errors caused by user input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        if let Error::InScenario { source, .. } = self {
            return source.is_config_error();
        }
        matches!(
            self,
            Error::Config { .. }
                | Error::InvalidConfig(_)
                | Error::InvalidOrientation(_)
                | Error::UnknownLevel(_)
                | Error::InvalidScheme(_)
                | Error::Parse { .. }
                | Error::EmptyScan
        )
    }
}
