use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::confinement::{transverse_ground_energy, ConfinementProfile, TransverseWell};
use crate::error::{Error, Result};
use crate::geometry::{DomainBox, SurfaceChart};
use crate::linalg::{lowest_eigenpairs, BlockTridiagonal, EigenOptions};

/// Largest `k dz` accepted by the resolution check.
pub const MAX_K_DZ: f64 = 0.2;
/// Minimum number of `z` points per helix pitch.
pub const MIN_POINTS_PER_PITCH: f64 = 20.0;
/// Default scattering-region length in helix pitches.
pub const DEFAULT_LENGTH_PITCHES: f64 = 8.0;
/// Default scattering-region length [a] when the profile has no pitch.
pub const DEFAULT_UNIFORM_LENGTH: f64 = 10.0;
/// Default taper length in helix pitches.
pub const DEFAULT_TAPER_PITCHES: f64 = 2.0;
/// Default clean-lead length kept on each side of the window [a].
pub const DEFAULT_BUFFER: f64 = 2.0;
/// Automatic `dz` as a fraction of the largest admissible step.
const AUTO_DZ_FRACTION: f64 = 0.3;

/// Angular modes `l = -L_max ..= L_max` on a cylinder of radius `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelBasis {
    l_max: u32,
    radius: f64,
}

impl ChannelBasis {
    pub fn new(l_max: u32, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::validation("radius", format!("must be positive, got {radius}")));
        }
        if l_max > 64 {
            return Err(Error::validation("l_max", format!("{l_max} channels per sign is beyond any sensible cutoff")));
        }
        Ok(Self { l_max, radius })
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        2 * self.l_max as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn modes(&self) -> impl Iterator<Item = i32> + Clone {
        let m = self.l_max as i32;
        -m..=m
    }

    pub fn mode(&self, index: usize) -> i32 {
        index as i32 - self.l_max as i32
    }

    pub fn index(&self, l: i32) -> Option<usize> {
        (l.unsigned_abs() <= self.l_max).then(|| (l + self.l_max as i32) as usize)
    }

    /// Angular kinetic energy `l^2 / r^2`.
    pub fn centrifugal(&self, l: i32) -> f64 {
        (l * l) as f64 / (self.radius * self.radius)
    }
}

/// Samples `(s - 1) E_0` around the circumference and turns it into mode couplings.
struct CouplingSampler<'a> {
    profile: &'a ConfinementProfile,
    basis: ChannelBasis,
    e0: f64,
    samples: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl<'a> CouplingSampler<'a> {
    fn new(profile: &'a ConfinementProfile, e0: f64, basis: ChannelBasis, samples: Option<usize>) -> Result<Self> {
        let harmonic = profile.max_harmonic();
        let span = 2 * basis.l_max as usize;
        let samples = samples.unwrap_or_else(|| (8 * harmonic).max(span + harmonic + 1).max(16).next_power_of_two());
        if samples < 2 * harmonic + 1 {
            return Err(Error::Resolution {
                reason: format!("{samples} theta samples cannot represent harmonic {harmonic}; need at least {}", 2 * harmonic + 1),
            });
        }
        if samples <= span + harmonic {
            return Err(Error::Resolution {
                reason: format!(
                    "{samples} theta samples alias harmonic {harmonic} into couplings |l - l'| <= {span}; need more than {}",
                    span + harmonic
                ),
            });
        }
        let fft = FftPlanner::new().plan_fft_forward(samples);
        Ok(Self {
            profile,
            basis,
            e0,
            samples,
            fft,
        })
    }

    fn at(&self, z: f64) -> DMatrix<Complex64> {
        let c = self.basis.len();
        if self.profile.is_homogeneous() {
            return DMatrix::zeros(c, c);
        }
        let n = self.samples;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|j| {
                let theta = 2.0 * PI * j as f64 / n as f64;
                Complex64::new(self.profile.deviation([theta, z]) * self.e0, 0.0)
            })
            .collect();
        self.fft.process(&mut buf);
        let coefficient = |d: usize| buf[d % n] / n as f64;
        let mut v = DMatrix::zeros(c, c);
        for i in 0..c {
            v[(i, i)] = Complex64::new(coefficient(0).re, 0.0);
            for j in 0..i {
                let entry = coefficient(i - j);
                v[(i, j)] = entry;
                v[(j, i)] = entry.conj();
            }
        }
        v
    }
}

/// Matrix elements `V_{l,l'}(z) = (1/2pi) int e^{-i l theta} (s - 1) E_0 e^{i l' theta} dtheta`.
///
/// Computed by FFT on `theta_samples` points (default: a power of two large
/// enough that no retained coupling is aliased).
pub fn fourier_couplings(
    profile: &ConfinementProfile,
    well: &TransverseWell,
    basis: &ChannelBasis,
    z: f64,
    theta_samples: Option<usize>,
) -> Result<DMatrix<Complex64>> {
    let e0 = transverse_ground_energy(well)?;
    Ok(CouplingSampler::new(profile, e0, *basis, theta_samples)?.at(z))
}

/// Scattering window `[0, length]` with optional `sin^2` ramps of length `taper` at both ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub length: f64,
    pub taper: f64,
}

impl Window {
    pub fn weight(&self, z: f64) -> f64 {
        if z < 0.0 || z > self.length {
            return 0.0;
        }
        let edge = z.min(self.length - z);
        if edge >= self.taper {
            1.0
        } else {
            (0.5 * PI * edge / self.taper).sin().powi(2)
        }
    }
}

/// Cell-centered grid `z_n = -buffer + (n + 1/2) dz` covering `[-buffer, length + buffer]`.
///
/// The window edges fall on cell faces and the grid is symmetric under `z -> length - z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZGrid {
    pub dz: f64,
    pub slices: usize,
    pub buffer: f64,
    pub window: Window,
}

impl ZGrid {
    pub fn z(&self, n: usize) -> f64 {
        -self.buffer + (n as f64 + 0.5) * self.dz
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.slices).map(|n| self.z(n)).collect()
    }
}

/// Discretization choices for [`assemble_coupled_channel`]. `None` selects the default.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridParams {
    /// Requested step; rounded down so that the window holds a whole number of cells.
    pub dz: Option<f64>,
    /// Window length; default 8 helix pitches, or 10 a without a helix.
    pub length: Option<f64>,
    /// Taper length; default 2 helix pitches, 0 without a helix.
    pub taper: Option<f64>,
    pub buffer: Option<f64>,
    pub theta_samples: Option<usize>,
    /// Add `V_g` to every channel. Energies passed to the solver are then
    /// shifted by `V_g` so that thresholds stay at `l^2 / r^2`.
    pub include_vg: bool,
    /// Largest threshold-relative energy the grid must resolve.
    pub max_energy: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            dz: None,
            length: None,
            taper: None,
            buffer: None,
            theta_samples: None,
            include_vg: true,
            max_energy: 4.5,
        }
    }
}

/// The coupled-channel Hamiltonian on a cylinder: onsite blocks `H_n` and a
/// uniform hopping `-1/dz^2` times the identity between neighbouring slices.
#[derive(Clone, Debug)]
pub struct CoupledChannelOperator {
    basis: ChannelBasis,
    grid: ZGrid,
    onsite: Vec<DMatrix<Complex64>>,
    geometric_potential: f64,
    include_vg: bool,
    e0: f64,
    harmonic: usize,
}

impl CoupledChannelOperator {
    pub fn basis(&self) -> &ChannelBasis {
        &self.basis
    }

    pub fn grid(&self) -> &ZGrid {
        &self.grid
    }

    pub fn dz(&self) -> f64 {
        self.grid.dz
    }

    pub fn slices(&self) -> usize {
        self.onsite.len()
    }

    pub fn channels(&self) -> usize {
        self.basis.len()
    }

    pub fn onsite(&self, n: usize) -> &DMatrix<Complex64> {
        &self.onsite[n]
    }

    pub fn onsite_blocks(&self) -> &[DMatrix<Complex64>] {
        &self.onsite
    }

    /// Off-diagonal block coefficient, `-1/dz^2`.
    pub fn hopping(&self) -> f64 {
        -1.0 / (self.grid.dz * self.grid.dz)
    }

    /// `V_g` of the cylinder, whether or not it is included.
    pub fn geometric_potential(&self) -> f64 {
        self.geometric_potential
    }

    pub fn include_vg(&self) -> bool {
        self.include_vg
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }

    /// Largest angular harmonic of the confinement profile.
    pub fn harmonic(&self) -> usize {
        self.harmonic
    }

    /// Constant added to threshold-relative energies before solving.
    pub fn energy_offset(&self) -> f64 {
        if self.include_vg {
            self.geometric_potential
        } else {
            0.0
        }
    }

    pub fn solver_energy(&self, relative: f64) -> f64 {
        relative + self.energy_offset()
    }

    /// Channel band bottoms `l^2/r^2 (+ V_g)` in the clean leads.
    pub fn lead_offsets(&self) -> Vec<f64> {
        self.basis
            .modes()
            .map(|l| self.basis.centrifugal(l) + self.energy_offset())
            .collect()
    }

    /// Replaces the onsite blocks, e.g. to study a hand-built potential. Blocks
    /// at both ends must stay clean for the leads to attach.
    pub fn with_onsite(mut self, onsite: Vec<DMatrix<Complex64>>) -> Result<Self> {
        let c = self.channels();
        if onsite.is_empty() || onsite.iter().any(|b| b.nrows() != c || b.ncols() != c) {
            return Err(Error::validation("onsite", format!("need at least one {c}x{c} block")));
        }
        self.grid.slices = onsite.len();
        self.onsite = onsite;
        Ok(self)
    }

    /// `max |H - H^dagger|` over all blocks.
    pub fn hermiticity_residual(&self) -> f64 {
        self.onsite
            .iter()
            .map(|b| (b - b.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    /// Largest `|l - l'|` with a nonzero coupling anywhere on the grid.
    pub fn coupling_bandwidth(&self) -> usize {
        let c = self.channels();
        let mut width = 0;
        for b in &self.onsite {
            for i in 0..c {
                for j in 0..c {
                    if i != j && b[(i, j)].norm() > 1e-14 {
                        width = width.max(i.abs_diff(j));
                    }
                }
            }
        }
        width
    }

    /// The full Hamiltonian as a dense matrix (small systems only).
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.block_tridiagonal(None).to_dense()
    }

    /// `H` or, with `Some(E)`, `E - H` in block-tridiagonal form.
    pub fn block_tridiagonal(&self, energy: Option<f64>) -> BlockTridiagonal {
        let t = self.hopping();
        let c = self.channels();
        let (sign, shift) = match energy {
            Some(e) => (-1.0, Some(e)),
            None => (1.0, None),
        };
        let diag = self
            .onsite
            .iter()
            .map(|h| {
                let mut d = h * Complex64::new(sign, 0.0);
                if let Some(e) = shift {
                    for i in 0..c {
                        d[(i, i)] += e;
                    }
                }
                d
            })
            .collect();
        let off = vec![Complex64::new(sign * t, 0.0); self.slices().saturating_sub(1)];
        BlockTridiagonal {
            diag,
            upper: off.clone(),
            lower: off,
        }
    }
}

fn cylinder_vg(radius: f64) -> Result<f64> {
    SurfaceChart::cylinder(radius)?.geometric_potential([0.0, 0.0])
}

fn diagonal_block(basis: &ChannelBasis, kinetic: f64, offset: f64) -> DMatrix<Complex64> {
    let c = basis.len();
    DMatrix::from_fn(c, c, |i, j| {
        if i == j {
            Complex64::new(kinetic + basis.centrifugal(basis.mode(i)) + offset, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn check_profile(profile: &ConfinementProfile, length: f64) -> Result<()> {
    if profile.is_homogeneous() {
        return Ok(());
    }
    let domain = DomainBox::new([0.0, 0.0], [2.0 * PI, length.max(1e-6)], [true, false])?;
    profile.validate(&domain, 48)
}

/// Assembles the coupled-channel operator on the cell-centered transport grid.
pub fn assemble_coupled_channel(
    profile: &ConfinementProfile,
    well: &TransverseWell,
    basis: &ChannelBasis,
    params: &GridParams,
) -> Result<CoupledChannelOperator> {
    let e0 = transverse_ground_energy(well)?;
    let pitch = profile.helix().and_then(|h| h.pitch());
    let length = params
        .length
        .unwrap_or_else(|| pitch.map_or(DEFAULT_UNIFORM_LENGTH, |p| DEFAULT_LENGTH_PITCHES * p));
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::validation("length", format!("must be positive, got {length}")));
    }
    let taper = params
        .taper
        .unwrap_or_else(|| pitch.map_or(0.0, |p| DEFAULT_TAPER_PITCHES * p));
    if !(taper.is_finite() && taper >= 0.0 && 2.0 * taper <= length * (1.0 + 1e-12)) {
        return Err(Error::validation(
            "taper",
            format!("must lie in [0, length/2] = [0, {}], got {taper}", length / 2.0),
        ));
    }
    if !(params.max_energy.is_finite()) {
        return Err(Error::validation("max_energy", "must be finite"));
    }
    check_profile(profile, length)?;

    let k_max = (params.max_energy.max(0.0) + profile.epsilon() * e0).sqrt().max(1e-12);
    let mut limit = MAX_K_DZ / k_max;
    let mut limit_reason = format!("k_max dz <= {MAX_K_DZ} with k_max = {k_max:.4}");
    if let Some(p) = pitch {
        if p / MIN_POINTS_PER_PITCH < limit {
            limit = p / MIN_POINTS_PER_PITCH;
            limit_reason = format!("{MIN_POINTS_PER_PITCH} points per pitch {p:.4}");
        }
    }
    let target = match params.dz {
        Some(dz) if !(dz.is_finite() && dz > 0.0) => {
            return Err(Error::validation("dz", format!("must be positive, got {dz}")))
        }
        Some(dz) if dz > limit * (1.0 + 1e-9) => {
            return Err(Error::Resolution {
                reason: format!("dz = {dz} is too coarse ({limit_reason}); use dz <= {limit:.6}"),
            })
        }
        Some(dz) => dz,
        None => AUTO_DZ_FRACTION * limit,
    };
    let cells = (length / target - 1e-9).ceil().max(1.0) as usize;
    let dz = length / cells as f64;
    let buffer = params.buffer.unwrap_or(DEFAULT_BUFFER);
    if !(buffer.is_finite() && buffer >= 0.0) {
        return Err(Error::validation("buffer", format!("must be non-negative, got {buffer}")));
    }
    let buffer_cells = ((buffer / dz).round() as usize).max(1);
    let grid = ZGrid {
        dz,
        slices: cells + 2 * buffer_cells,
        buffer: buffer_cells as f64 * dz,
        window: Window { length, taper },
    };

    let vg = cylinder_vg(basis.radius())?;
    let offset = if params.include_vg { vg } else { 0.0 };
    let sampler = CouplingSampler::new(profile, e0, *basis, params.theta_samples)?;
    let clean = diagonal_block(basis, 2.0 / (dz * dz), offset);
    let onsite = (0..grid.slices)
        .map(|n| {
            let z = grid.z(n);
            let w = grid.window.weight(z);
            if w == 0.0 || profile.is_homogeneous() {
                clean.clone()
            } else {
                &clean + sampler.at(z) * Complex64::new(w, 0.0)
            }
        })
        .collect();
    log::debug!(
        "coupled-channel operator: {} slices x {} channels, dz = {dz:.5}, window {length:.4} (taper {taper:.4})",
        grid.slices,
        basis.len()
    );
    Ok(CoupledChannelOperator {
        basis: *basis,
        grid,
        onsite,
        geometric_potential: vg,
        include_vg: params.include_vg,
        e0,
        harmonic: profile.max_harmonic(),
    })
}

/// A closed cylinder segment `[0, length]` with Dirichlet ends, on the vertex
/// grid `z_n = n dz`, `n = 1 .. intervals - 1`. The potential is on everywhere.
#[derive(Clone, Debug)]
pub struct ClosedSegment {
    pub hamiltonian: BlockTridiagonal,
    pub z: Vec<f64>,
    pub dz: f64,
    lower_bound: f64,
}

impl ClosedSegment {
    /// Lowest `count` eigenvalues, ascending.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        let shift = self.lower_bound;
        let mut shifted = self.hamiltonian.clone();
        for d in &mut shifted.diag {
            for i in 0..d.nrows() {
                d[(i, i)] -= shift;
            }
        }
        let factors = shifted.factor()?;
        let h = &self.hamiltonian;
        let (values, _) = lowest_eigenpairs::<Complex64, _, _>(
            h.dim(),
            count,
            |x| h.apply(x),
            |x| factors.solve(x),
            EigenOptions::default(),
        )?;
        Ok(values)
    }
}

pub fn assemble_closed_segment(
    profile: &ConfinementProfile,
    well: &TransverseWell,
    basis: &ChannelBasis,
    length: f64,
    intervals: usize,
    include_vg: bool,
) -> Result<ClosedSegment> {
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::validation("length", format!("must be positive, got {length}")));
    }
    if intervals < 2 {
        return Err(Error::validation("intervals", "need at least 2 intervals"));
    }
    check_profile(profile, length)?;
    let e0 = transverse_ground_energy(well)?;
    let dz = length / intervals as f64;
    let vg = cylinder_vg(basis.radius())?;
    let offset = if include_vg { vg } else { 0.0 };
    let sampler = CouplingSampler::new(profile, e0, *basis, None)?;
    let clean = diagonal_block(basis, 2.0 / (dz * dz), offset);
    let z: Vec<f64> = (1..intervals).map(|n| n as f64 * dz).collect();
    let diag = z.iter().map(|&z| &clean + sampler.at(z)).collect();
    let t = Complex64::new(-1.0 / (dz * dz), 0.0);
    let bonds = intervals - 2;
    Ok(ClosedSegment {
        hamiltonian: BlockTridiagonal {
            diag,
            upper: vec![t; bonds],
            lower: vec![t; bonds],
        },
        z,
        dz,
        lower_bound: offset - profile.epsilon() * e0 - 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confinement::{helical_profile, HelicalSpec};
    use approx::assert_relative_eq;

    fn helix(kappa: f64) -> ConfinementProfile {
        helical_profile(&HelicalSpec {
            epsilon: 0.1,
            omega: 8.0,
            kappa,
            radius: 1.0,
            ditch_count: Some(2),
            round_harmonic: false,
        })
        .unwrap()
    }

    #[test]
    fn basis_layout() {
        let b = ChannelBasis::new(3, 1.0).unwrap();
        assert_eq!(b.len(), 7);
        assert_eq!(b.modes().collect::<Vec<_>>(), vec![-3, -2, -1, 0, 1, 2, 3]);
        assert_eq!(b.index(-3), Some(0));
        assert_eq!(b.index(4), None);
        assert_eq!(b.mode(4), 1);
    }

    #[test]
    fn helical_couplings_closed_form() {
        let basis = ChannelBasis::new(4, 1.0).unwrap();
        let well = TransverseWell::GroundEnergy(70.0);
        let z = 0.37;
        let v = fourier_couplings(&helix(1.0), &well, &basis, z, None).unwrap();
        let q = 8.0;
        for i in 0..basis.len() {
            assert_relative_eq!(v[(i, i)].re, -3.5, epsilon = 1e-12);
            for j in 0..basis.len() {
                let d = basis.mode(i) - basis.mode(j);
                let expected = match d {
                    0 => Complex64::new(-3.5, 0.0),
                    2 => Complex64::from_polar(1.75, -q * z) * -1.0,
                    -2 => Complex64::from_polar(1.75, q * z) * -1.0,
                    _ => Complex64::new(0.0, 0.0),
                };
                assert!((v[(i, j)] - expected).norm() < 1e-12, "({i},{j}) {} vs {expected}", v[(i, j)]);
            }
        }
    }

    #[test]
    fn aliasing_is_rejected() {
        let basis = ChannelBasis::new(6, 1.0).unwrap();
        let well = TransverseWell::default();
        assert!(matches!(
            fourier_couplings(&helix(1.0), &well, &basis, 0.0, Some(4)),
            Err(Error::Resolution { .. })
        ));
        assert!(matches!(
            fourier_couplings(&helix(1.0), &well, &basis, 0.0, Some(14)),
            Err(Error::Resolution { .. })
        ));
        assert!(fourier_couplings(&helix(1.0), &well, &basis, 0.0, Some(15)).is_ok());
    }

    #[test]
    fn grid_places_window_on_faces() {
        let basis = ChannelBasis::new(6, 1.0).unwrap();
        let op = assemble_coupled_channel(&helix(0.5), &TransverseWell::default(), &basis, &GridParams::default()).unwrap();
        let g = op.grid();
        let cells = g.window.length / g.dz;
        assert!((cells - cells.round()).abs() < 1e-9);
        let b = g.buffer / g.dz;
        assert!((b - b.round()).abs() < 1e-9);
        let pitch = 2.0 * PI / 4.0;
        assert_relative_eq!(g.window.length, 8.0 * pitch, max_relative = 1e-12);
        assert!(g.dz <= pitch / MIN_POINTS_PER_PITCH);
        // mirror symmetry of the sampled window
        for n in 0..g.slices {
            let a = g.window.weight(g.z(n));
            let m = g.window.weight(g.window.length - g.z(n));
            assert!((a - m).abs() < 1e-12);
        }
        assert!(op.hermiticity_residual() < 1e-13);
        assert_eq!(op.coupling_bandwidth(), 2);
    }

    #[test]
    fn coarse_step_is_a_resolution_error() {
        let basis = ChannelBasis::new(2, 1.0).unwrap();
        let params = GridParams {
            dz: Some(0.2),
            ..GridParams::default()
        };
        let err = assemble_coupled_channel(&helix(1.0), &TransverseWell::default(), &basis, &params).unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }));
        assert!(err.to_string().contains("dz <="));
    }

    #[test]
    fn taper_weights() {
        let w = Window { length: 4.0, taper: 1.0 };
        assert_eq!(w.weight(-0.1), 0.0);
        assert_relative_eq!(w.weight(0.5), 0.5, epsilon = 1e-15);
        assert_eq!(w.weight(2.0), 1.0);
        assert_relative_eq!(w.weight(3.5), 0.5, epsilon = 1e-15);
        let abrupt = Window { length: 4.0, taper: 0.0 };
        assert_eq!(abrupt.weight(0.0), 1.0);
    }

    #[test]
    fn free_closed_segment_spectrum() {
        // Homogeneous, l_max = 0: particle in a box shifted by V_g.
        let basis = ChannelBasis::new(0, 1.0).unwrap();
        let seg = assemble_closed_segment(&ConfinementProfile::homogeneous(), &TransverseWell::default(), &basis, 2.0, 200, true).unwrap();
        let vals = seg.eigenvalues(3).unwrap();
        for (k, v) in vals.iter().enumerate() {
            let n = (k + 1) as f64;
            let exact = 4.0 / (seg.dz * seg.dz) * (n * PI / 400.0).sin().powi(2) - 0.25;
            assert_relative_eq!(*v, exact, max_relative = 1e-9);
        }
    }
}
