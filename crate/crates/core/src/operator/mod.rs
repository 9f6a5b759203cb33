//! Discretizations of the effective Hamiltonian.
//!
//! On the cylinder the wavefunction is expanded in angular modes `e^{i l theta}`
//! and `z` is discretized by second-order finite differences, giving a
//! block-tridiagonal operator ([`CoupledChannelOperator`]) for the transport
//! solver. On a general chart [`assemble_2d`] builds a sparse real-space
//! operator for closed-system spectra.

mod coupled;
mod leads;
mod surface;

pub use coupled::{
    assemble_closed_segment, assemble_coupled_channel, fourier_couplings, ChannelBasis, ClosedSegment,
    CoupledChannelOperator, GridParams, Window, ZGrid, DEFAULT_BUFFER, DEFAULT_LENGTH_PITCHES,
    DEFAULT_TAPER_PITCHES, DEFAULT_UNIFORM_LENGTH, MAX_K_DZ, MIN_POINTS_PER_PITCH,
};
pub use leads::{lead_modes, LeadMode, LeadModeSet, THRESHOLD_TOLERANCE};
pub use surface::{assemble_2d, AxisBoundary, SurfaceGrid, SurfaceOperator};
