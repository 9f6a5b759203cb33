//! Open-system scattering on the coupled-channel operator.
//!
//! The retarded Green's function corners come from a recursive slice sweep
//! ([`surface_greens`]), the Fisher-Lee relations turn them into a
//! flux-normalized [`SMatrix`], and [`energy_sweep`] collects Landauer
//! conductances and angular-momentum polarization over an energy grid.
//! [`scattering_density`] reconstructs `|psi(theta, z)|^2` for one incident mode.

mod density;
pub mod reference;
mod rgf;
pub(crate) mod smatrix;
mod sweep;

pub use density::{scattering_amplitudes, scattering_density, DensityMap, Injection};
pub use rgf::{surface_greens, SurfaceGreens};
pub use smatrix::{rgf_smatrix, SMatrix};
pub use sweep::{
    analytic_thresholds, energy_sweep, ConductanceCurve, ConductancePoint, DetectedThreshold, EnergyGrid, Plateau,
    SweepFailure,
};
