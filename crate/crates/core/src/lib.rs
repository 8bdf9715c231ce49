//! Exact Gaussian dynamics of two defect oscillators coupled to one edge of
//! a finite harmonic chain.
//!
//! The chain acts as a structured thermal reservoir for the center-of-mass
//! motion of the defect pair while the relative motion stays decoupled;
//! at low temperatures the interplay of the two produces steady-state
//! entanglement between the defects. Everything is Gaussian, so states are
//! covariance matrices, time evolution is one symplectic map built by
//! spectral synthesis, and entanglement is the logarithmic negativity of the
//! 4x4 defect block.
//!
//! Module map:
//! - [`model`]: dimensionless parameters and the potential/Hamiltonian matrices
//! - [`states`]: squeezed defect states, thermal chain, squeeze-frame maps
//! - [`spectral`]: normal modes, spectral density, friction kernel, isolated
//!   frequencies, revival time
//! - [`dynamics`]: symplectic propagator, covariance evolution, the fast
//!   mode-space engine, plateau measurement
//! - [`entanglement`]: logarithmic negativity, steady-state closed forms,
//!   SD/SDR/NSD classification

pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod linalg;
pub mod model;
pub mod spectral;
pub mod states;

pub use error::{Error, Result};
pub use model::{ModelParams, PhysicalParams};
pub use states::{CovarianceMatrix, InitialState, SqueezeParams};

/// Re-export of the dense linear algebra backend (matrix type used in the
/// public API).
pub use faer;
