use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("graph is not strongly connected")]
    NotStronglyConnected,

    #[error("singular structure: {0}")]
    SingularStructure(String),

    #[error("detailed balance violated for node pairs {}", format_pairs(.0))]
    DetailedBalanceViolation(Vec<(usize, usize)>),

    #[error("argument {value} outside domain {domain} of {what}")]
    DomainViolation {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("coupling/energy ratio degenerates at ({a}, {b}); h is locally flat")]
    NonFiniteRatio { a: f64, b: f64 },

    #[error("metric has entry ({i}, {j}) outside the incidence edge set")]
    SparsityMismatch { i: usize, j: usize },

    #[error("operation requires the quadratic energy, got {0}")]
    WrongEnergyKind(String),

    #[error("state left the admissible domain at t = {t}: {source}")]
    StepDomainViolation {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("custom energy rejected: {0}")]
    InconsistentEnergy(String),

    #[error("scenario schema error: {0}")]
    Schema(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Precondition failures on the model (as opposed to malformed input or
    /// failed verdicts).
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::NotStronglyConnected
                | Error::DetailedBalanceViolation(_)
                | Error::SingularStructure(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

fn format_pairs(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(i, j)| format!("({}, {})", i + 1, j + 1))
        .collect::<Vec<_>>()
        .join(", ")
}
