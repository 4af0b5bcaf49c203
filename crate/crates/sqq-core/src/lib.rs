//! Symplectic integrators for gravitational dynamics built from discrete
//! generating functions.
//!
//! The crate implements the SQQ family of integrators: the action of one step
//! is approximated by interpolating coordinates and momenta with polynomial
//! cardinal bases, the stationarity conditions of that discrete action form a
//! nonlinear system per step, and the end-of-step momentum follows from the
//! generating-function relation. On top of the fixed-step scheme sit
//!
//! * a projection of precomputed reference-interval basis values onto
//!   arbitrary step intervals ([`basis`]), which removes the per-step
//!   Vandermonde solve,
//! * a bounded step-size control function and the time-transformed
//!   Hamiltonian `K = sigma * (H - H0)` ([`sigma`]) for adaptive physical
//!   steps at fixed transformed steps, and
//! * a warm-started quasi-Newton solver with Broyden inverse-Jacobian
//!   updates ([`solver`]).
//!
//! [`driver`] composes these into the named integrator variants (SQQ, SQQ-P,
//! SQQ-PN, SQQ-PQ, SQQ-PTN, SQQ-PTQ) and runs multi-step trajectories;
//! [`problems`] provides the Kepler, three-body, and outer-Solar-System
//! setups with their diagnostics.
//!
//! The crate is `no_std`-compatible (`default-features = false,
//! features = ["libm"]`); it only needs `alloc`.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("sqq-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod basis;
pub mod diagnostics;
pub mod driver;
pub mod error;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod problems;
pub mod sigma;
pub mod solver;
pub mod step;

pub use error::{Error, Result};
pub use model::{HamiltonianModel, PhaseState};
