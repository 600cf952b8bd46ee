//! Numerical laboratory connecting Fisher-information position uncertainty,
//! Hamilton-Jacobi ensembles and the free Schrödinger equation.
//!
//! * [`fields`]: periodic grids, quadrature, finite differences.
//! * [`estimation`]: Fisher information, Cramér–Rao bounds, estimator benchmarks.
//! * [`classical`]: classical ensembles and their evolution.
//! * [`quantum`]: Fisher-augmented Hamiltonian and Madelung evolution.
//! * [`oracle`]: direct wavefunction solver used for cross-validation.
//! * [`microscope`]: the gamma-ray microscope estimate.
//! * [`cli`]: configuration, experiment runner and output writers.

pub mod classical;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod fields;
pub mod microscope;
pub mod oracle;
pub mod quantum;

pub use error::{Error, Result};
