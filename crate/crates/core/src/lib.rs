//! Numerical toolkit for SU(n) coherent states in complex stereographic
//! coordinates.
//!
//! The crate builds the generator algebra of su(n) in the fundamental
//! representation, constructs coherent states from group or stereographic
//! parameters, integrates the classical (variational) equations of motion
//! they induce, and cross-checks everything against exact dense-matrix
//! quantum evolution. A mean-field chain layer extends the single-site
//! dynamics to coupled lattices with dipole and quadrupole exchange.

pub mod algebra;
pub mod coherent;
pub mod dynamics;
pub mod error;
pub mod hamiltonian;
pub mod lattice;
pub mod linalg;
pub mod mc;
pub mod ode;
pub mod output;
pub mod propagator;
pub mod rep;

pub use algebra::{CasimirReport, GeneratorSet};
pub use coherent::{CoherentParams, CoherentState, Measure};
pub use dynamics::{EomMode, Trajectory};
pub use error::Error;
pub use hamiltonian::HamiltonianSpec;
pub use lattice::{ChainModel, ChainState, ChainTrajectory};
pub use linalg::{CMatrix, CVector};
pub use propagator::PropagatorReport;
pub use rep::RepresentationSpec;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
