//! Numerical laboratory for charged quantum particles in prescribed
//! electromagnetic backgrounds.
//!
//! The crate covers two model systems and the machinery connecting them:
//!
//! - a particle on a flux-threaded ring (`ring`): exact and discretized
//!   spectra, including the flux-dependent level shift;
//! - a particle on a masked 2D lattice (`lattice`, `dynamics`): Peierls-phase
//!   Hamiltonians, norm-preserving Crank-Nicolson propagation, and
//!   interference experiments around a shielded solenoid (`experiments`);
//! - phase-convention changes and their classification (`gauge`): applying
//!   position-diagonal unitaries to states and potentials, winding numbers,
//!   and the flat-connection test that separates removable phase conventions
//!   from physical fields.
//!
//! Conventions used throughout: link phases are `(q/hbar c) * integral A.dl`,
//! the forward hopping factor is `exp(+i theta)`, and a joint transformation
//! multiplies states by `exp(+i Lambda)` while shifting each link phase by
//! `-(Lambda(end) - Lambda(start))`. Applied jointly these leave every
//! observable unchanged to machine precision, which the test suite exercises
//! heavily.

pub mod constants;
pub mod dynamics;
pub mod experiments;
mod fft;
pub mod format;
pub mod gauge;
pub mod grid;
pub mod lattice;
pub mod ring;
pub mod state;

mod error;

pub use error::{Error, Result};
pub use num_complex::Complex64;
