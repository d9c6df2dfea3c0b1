use abqsim_core::Error as CoreError;
use thiserror::Error;

/// CLI failure with a machine-readable category; one exit code per category.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    Parse(String),

    #[error("config validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("experiment produced no usable signal: {0}")]
    Experiment(String),

    #[error("domain topology error: {0}")]
    Topology(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn category(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "parse",
            CliError::Validation(_) => "validation",
            CliError::Dimension(_) => "dimension",
            CliError::Numerical(_) => "numerical",
            CliError::Experiment(_) => "experiment",
            CliError::Topology(_) => "topology",
            CliError::Io(_) => "io",
        }
    }

    /// Documented exit-code table (see README).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Dimension(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Experiment(_) => 6,
            CliError::Topology(_) => 7,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::InvalidParameter { .. } => CliError::Validation(msg),
            CoreError::GridMismatch(_) => CliError::Dimension(msg),
            CoreError::DegenerateState
            | CoreError::SolverStalled { .. }
            | CoreError::NotAWinding { .. } => CliError::Numerical(msg),
            CoreError::InsufficientTransmission { .. } | CoreError::NoFringe { .. } => {
                CliError::Experiment(msg)
            }
            CoreError::Singularity { .. } | CoreError::DisconnectedDomain { .. } => {
                CliError::Topology(msg)
            }
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
