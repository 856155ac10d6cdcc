//! Spin squeezing in coupled collective-spin systems under DC and AC driving.
//!
//! A collective exchange coupling `sum_mu g_mu S_mu J_mu` between two spin
//! ensembles is turned into an effective one-axis twist on `S` by detuned DC
//! fields, and into a two-axis twist by an additional AC field. This crate
//! builds those Hamiltonians in the symmetric Dicke basis, propagates joint
//! states, measures the Kitagawa–Ueda squeezing parameter, and runs the sweeps
//! used to study scaling and robustness.

pub mod error;
pub mod exec;
pub mod hamiltonians;
pub mod harness;
pub mod krylov;
pub mod observables;
pub mod propagator;
pub mod special;
pub mod spin;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
