use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A state with zero norm cannot be normalized.
    #[error("degenerate state: norm is zero")]
    DegenerateState,

    /// A parameter violates a documented invariant.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    /// A circulation is not close to any integer multiple of 2*pi*hbar, so it
    /// cannot come from a single-valued phase convention.
    #[error(
        "not a winding: circulation {circulation} is {residual} rad away from the nearest \
         integer holonomy"
    )]
    NotAWinding { circulation: f64, residual: f64 },

    /// The singular point of an ideal solenoid lies on an unmasked lattice point.
    #[error("solenoid singularity at ({x}, {y}) touches the unmasked region")]
    Singularity { x: f64, y: f64 },

    /// The unmasked region of a lattice is not connected.
    #[error("disconnected unmasked region: {unreached} interior points unreachable")]
    DisconnectedDomain { unreached: usize },

    /// The iterative linear solver failed to reach tolerance.
    #[error("integration stalled at step {step}: residual {residual:.3e} after {iterations} iterations")]
    SolverStalled {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    /// Too little of the packet crossed the screen to read a fringe pattern.
    #[error("insufficient transmission: only {transmitted:.3e} of the norm is beyond the screen")]
    InsufficientTransmission { transmitted: f64 },

    /// The screen profile carries no usable fringe contrast.
    #[error("no fringe: visibility {visibility:.3e} below threshold")]
    NoFringe { visibility: f64 },
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
