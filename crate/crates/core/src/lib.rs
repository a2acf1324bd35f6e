//! Statevector toolkit for warm-started iterative variational compression of
//! time evolution, and for checking its trainability guarantees numerically.
//!
//! The crate is organized bottom-up:
//!
//! - [`pauli`]: Pauli strings and sums, fast action on amplitudes, spectral norm.
//! - [`state`]: statevectors, exact real and imaginary time evolution, Bell pairs.
//! - [`circuit`]: rotation/fixed-gate ansatze (hardware-efficient, Hamiltonian variational).
//! - [`loss`]: fidelity-type losses and their exact derivatives (gradient, Hessian, QFI).
//! - [`bounds`]: closed-form variance, convexity and adiabatic bounds.
//! - [`landscape`]: hypercube Monte Carlo, sweeps, power-law fits, cuts and PCA planes.
//! - [`optimize`]: quasi-Newton minimization, adiabatic tracking, jump detection,
//!   and the full compression driver.
//! - [`table`]: numeric CSV tables with a provenance line.
//!
//! Monte Carlo and shift-rule evaluations run on rayon when the `parallel`
//! feature is enabled; see [`par`].

pub mod bounds;
pub mod circuit;
pub mod dense;
pub mod error;
pub mod landscape;
pub mod loss;
pub mod optimize;
pub mod par;
pub mod pauli;
pub mod seed;
pub mod state;
pub mod table;

pub use error::{Error, Result};
pub use par::Execution;
pub use pauli::{Axis, PauliString, PauliSum, SpectralMode, C64};
pub use state::{bell_pair_state, fidelity, StateVector};
