//! Quantum dynamics on curved thin layers with inhomogeneous confinement.
//!
//! A particle squeezed onto a surface by a confining potential `s(q)^2 V_c(q_3)`
//! moves under the effective surface Hamiltonian
//!
//! ```text
//! H_eff = -(1/sqrt g) d_a sqrt g g^ab d_b + V_g + (s - 1) E_0,   V_g = -(M^2 - K)
//! ```
//!
//! in natural units (hbar = 1, 2m = 1, lengths in `a`, energies in `e0 = hbar^2/(2 m a^2)`).
//! The crate covers the pieces needed to work with it:
//!
//! - [`geometry`]: parametrized surfaces, metric, Weingarten map, curvatures, `V_g`.
//! - [`confinement`]: morphology profiles `s(q)`, the transverse well and `E_0`.
//! - [`operator`]: the coupled-channel discretization on a cylinder and a
//!   real-space discretization on general charts.
//! - [`transport`]: recursive Green's function scattering, Landauer conductance,
//!   angular-momentum polarization and scattering-state densities.
//! - [`config`]: the run configuration shared with the command-line driver.
//! - [`selftest`]: the oracle battery behind `thinlayer selftest`.

pub mod config;
pub mod confinement;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod operator;
pub mod selftest;
pub mod transport;

pub use error::{Error, Result};
pub use num_complex::Complex64;
