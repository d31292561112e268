//! Numerical laboratory for quantum hydrodynamics.
//!
//! Hydrodynamic data `(sqrt_rho, Lambda)` are lifted to wave functions,
//! evolved under the defocusing power-law NLS
//! `i psi_t = -1/2 lap psi + |psi|^{2(gamma-1)} psi`, mapped back by polar
//! factorization, and checked against the conservation laws, functional
//! identities and dispersive estimates of the hydrodynamic system.

pub mod error;
pub mod fields;
pub mod functionals;
pub mod estimates;
pub mod evolve;
pub mod lifting;
pub mod polar;
pub mod runner;

pub use error::{QhdError, Result};
