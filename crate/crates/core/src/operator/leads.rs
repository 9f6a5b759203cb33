use num_complex::Complex64;

use super::coupled::{ChannelBasis, CoupledChannelOperator};

/// Energies closer than this to a channel threshold are flagged.
pub const THRESHOLD_TOLERANCE: f64 = 1e-9;

/// One channel of a clean lattice lead.
///
/// With `t = 1/dz^2` and `x = 1 - (E - offset) dz^2 / 2`, propagating modes have
/// `lambda = e^{i k dz}`, `cos(k dz) = x`; evanescent modes take the decaying root
/// of `lambda + 1/lambda = 2x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LeadMode {
    pub l: i32,
    /// Band bottom `l^2/r^2 (+ V_g)`.
    pub offset: f64,
    pub open: bool,
    /// Lattice wavenumber `acos(x)/dz` for open modes, 0 otherwise.
    pub k: f64,
    /// Decay rate `-ln|lambda|/dz` for evanescent modes, 0 otherwise.
    pub decay: f64,
    /// Lattice group velocity `(2/dz) sin(k dz)` for open modes, 0 otherwise.
    pub velocity: f64,
    /// Propagation factor per slice.
    pub lambda: Complex64,
    /// Within [`THRESHOLD_TOLERANCE`] of the band bottom.
    pub near_threshold: bool,
}

impl LeadMode {
    /// Retarded self-energy of the semi-infinite lead, `-t lambda`.
    pub fn self_energy(&self, dz: f64) -> Complex64 {
        -self.lambda / (dz * dz)
    }

    /// Broadening `Gamma = i (Sigma - Sigma^*) = 2 t sin(k dz) = v / dz`.
    pub fn broadening(&self, dz: f64) -> f64 {
        if self.open {
            self.velocity / dz
        } else {
            0.0
        }
    }

    /// Continuum wavenumber `sqrt(E - offset)` for comparison with the lattice value.
    pub fn continuum_k(&self, energy: f64) -> f64 {
        (energy - self.offset).max(0.0).sqrt()
    }
}

/// Lead modes of every channel at one solver energy.
#[derive(Clone, Debug, PartialEq)]
pub struct LeadModeSet {
    pub energy: f64,
    pub dz: f64,
    pub modes: Vec<LeadMode>,
}

impl LeadModeSet {
    pub fn for_operator(op: &CoupledChannelOperator, energy: f64) -> Self {
        Self::from_offsets(energy, op.basis(), &op.lead_offsets(), op.dz())
    }

    fn from_offsets(energy: f64, basis: &ChannelBasis, offsets: &[f64], dz: f64) -> Self {
        let modes = basis
            .modes()
            .zip(offsets)
            .map(|(l, &offset)| lead_mode(l, offset, energy, dz))
            .collect();
        Self { energy, dz, modes }
    }

    pub fn open_modes(&self) -> impl Iterator<Item = (usize, &LeadMode)> {
        self.modes.iter().enumerate().filter(|(_, m)| m.open)
    }

    pub fn open_count(&self) -> usize {
        self.modes.iter().filter(|m| m.open).count()
    }

    pub fn near_threshold(&self) -> bool {
        self.modes.iter().any(|m| m.near_threshold)
    }

    pub fn self_energies(&self) -> Vec<Complex64> {
        self.modes.iter().map(|m| m.self_energy(self.dz)).collect()
    }

    pub fn get(&self, l: i32) -> Option<&LeadMode> {
        self.modes.iter().find(|m| m.l == l)
    }
}

fn lead_mode(l: i32, offset: f64, energy: f64, dz: f64) -> LeadMode {
    let x = 1.0 - 0.5 * (energy - offset) * dz * dz;
    let near_threshold = (energy - offset).abs() < THRESHOLD_TOLERANCE;
    let mut mode = LeadMode {
        l,
        offset,
        open: false,
        k: 0.0,
        decay: 0.0,
        velocity: 0.0,
        lambda: Complex64::new(0.0, 0.0),
        near_threshold,
    };
    if energy > offset && x.abs() < 1.0 {
        let s = (1.0 - x * x).sqrt();
        mode.open = true;
        mode.lambda = Complex64::new(x, s);
        mode.k = x.acos() / dz;
        mode.velocity = 2.0 * s / dz;
    } else {
        let root = (x * x - 1.0).max(0.0).sqrt();
        let lambda = if x >= 1.0 { x - root } else { x + root };
        mode.lambda = Complex64::new(lambda, 0.0);
        mode.decay = -lambda.abs().ln() / dz;
    }
    mode
}

/// Lead modes at solver energy `energy` for channel offsets `l^2/r^2 (+ V_g)`.
pub fn lead_modes(energy: f64, basis: &ChannelBasis, include_vg: bool, geometric_potential: f64, dz: f64) -> LeadModeSet {
    let shift = if include_vg { geometric_potential } else { 0.0 };
    let offsets: Vec<f64> = basis.modes().map(|l| basis.centrifugal(l) + shift).collect();
    LeadModeSet::from_offsets(energy, basis, &offsets, dz)
}
