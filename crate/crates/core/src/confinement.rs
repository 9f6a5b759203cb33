//! Confinement morphology `s(q)`, the transverse well and the effective potential.
//!
//! The confining potential is `s(q)^2 V_c(q_3)` with `s` a dimensionless,
//! continuous function close to one. For a harmonic well the transverse ground
//! state energy is `E_0 = hbar omega / 2` and the surface Hamiltonian picks up
//! the inhomogeneity potential `(s - 1) E_0` on top of `V_g`. The expansion
//! behind it only holds while `|s - 1|` stays of order `epsilon`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainBox, SurfaceChart, SurfacePoint};

/// Largest deviation scale accepted for the helical profile.
pub const MAX_EPSILON: f64 = 0.5;

/// Tolerance on `Omega r` being an integer.
pub const HARMONIC_TOLERANCE: f64 = 1e-6;

pub type ProfileFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Homogeneous,
    Helical,
    Custom,
}

/// Parameters of the single-corrugation helical profile
/// `s(theta, z) = 1 - epsilon [ cos(m theta - q z) / 2 + 1/2 ]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Helix {
    pub epsilon: f64,
    /// Angular harmonic `m`: number of ditches around the circumference.
    pub harmonic: u32,
    /// Longitudinal wavenumber `q = Omega kappa`.
    pub wavenumber: f64,
    pub radius: f64,
}

impl Helix {
    /// Distance along `z` between successive turns of one ditch, `2 pi / |q|`.
    pub fn pitch(&self) -> Option<f64> {
        (self.wavenumber != 0.0).then(|| 2.0 * PI / self.wavenumber.abs())
    }
}

#[derive(Clone)]
enum Morphology {
    Uniform,
    Helical(Helix),
    Custom { f: ProfileFn, max_harmonic: usize },
}

/// The morphology function `s(q1, q2)` together with its deviation scale `epsilon`.
#[derive(Clone)]
pub struct ConfinementProfile {
    morphology: Morphology,
    epsilon: f64,
}

impl fmt::Debug for ConfinementProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("ConfinementProfile");
        d.field("kind", &self.kind()).field("epsilon", &self.epsilon);
        if let Morphology::Helical(h) = &self.morphology {
            d.field("helix", h);
        }
        d.finish()
    }
}

/// Inputs for [`helical_profile`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HelicalSpec {
    pub epsilon: f64,
    /// Strip-width parameter `Omega` [1/a].
    pub omega: f64,
    /// Tilt parameter `kappa`.
    pub kappa: f64,
    pub radius: f64,
    /// Number of ditches around the circumference. When absent the harmonic is
    /// `Omega r`, which must then be an integer.
    pub ditch_count: Option<u32>,
    /// Round a non-integer `Omega r` instead of rejecting it.
    pub round_harmonic: bool,
}

/// Builds the helical ditch profile. `epsilon = 0` yields the homogeneous profile.
pub fn helical_profile(spec: &HelicalSpec) -> Result<ConfinementProfile> {
    let HelicalSpec {
        epsilon,
        omega,
        kappa,
        radius,
        ditch_count,
        round_harmonic,
    } = *spec;
    if !(epsilon.is_finite() && (0.0..=MAX_EPSILON).contains(&epsilon)) {
        return Err(Error::validation(
            "epsilon",
            format!("must lie in [0, {MAX_EPSILON}], got {epsilon}"),
        ));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::validation("radius", format!("must be positive, got {radius}")));
    }
    if !(omega.is_finite() && omega > 0.0) {
        return Err(Error::validation("omega", format!("must be positive, got {omega}")));
    }
    if !kappa.is_finite() {
        return Err(Error::validation("kappa", "must be finite"));
    }
    let harmonic = match ditch_count {
        Some(n @ (1 | 2)) => n,
        Some(n) => {
            return Err(Error::validation(
                "ditch_count",
                format!("must be 1 or 2, got {n}"),
            ))
        }
        None => {
            let value = omega * radius;
            let rounded = value.round();
            if (value - rounded).abs() > HARMONIC_TOLERANCE && !round_harmonic {
                return Err(Error::Periodicity { value });
            }
            if rounded < 1.0 {
                return Err(Error::validation(
                    "omega",
                    format!("Omega r = {value} rounds to zero ditches"),
                ));
            }
            rounded as u32
        }
    };
    if epsilon == 0.0 {
        return Ok(ConfinementProfile::homogeneous());
    }
    Ok(ConfinementProfile {
        morphology: Morphology::Helical(Helix {
            epsilon,
            harmonic,
            wavenumber: omega * kappa,
            radius,
        }),
        epsilon,
    })
}

impl ConfinementProfile {
    pub fn homogeneous() -> Self {
        Self {
            morphology: Morphology::Uniform,
            epsilon: 0.0,
        }
    }

    /// A user-defined profile. `max_harmonic` bounds the angular Fourier content
    /// (in the first coordinate) and sizes the sampling used for couplings.
    pub fn custom(epsilon: f64, max_harmonic: usize, f: ProfileFn) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::validation("epsilon", format!("must be nonnegative, got {epsilon}")));
        }
        Ok(Self {
            morphology: Morphology::Custom { f, max_harmonic },
            epsilon,
        })
    }

    pub fn kind(&self) -> ProfileKind {
        match self.morphology {
            Morphology::Uniform => ProfileKind::Homogeneous,
            Morphology::Helical(_) => ProfileKind::Helical,
            Morphology::Custom { .. } => ProfileKind::Custom,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn helix(&self) -> Option<&Helix> {
        match &self.morphology {
            Morphology::Helical(h) => Some(h),
            _ => None,
        }
    }

    /// Highest angular harmonic present in `s` (zero for the homogeneous profile).
    pub fn max_harmonic(&self) -> usize {
        match &self.morphology {
            Morphology::Uniform => 0,
            Morphology::Helical(h) => h.harmonic as usize,
            Morphology::Custom { max_harmonic, .. } => *max_harmonic,
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        matches!(self.morphology, Morphology::Uniform)
    }

    /// `s(q1, q2)`; on the cylinder `q = (theta, z)`.
    pub fn value(&self, q: SurfacePoint) -> f64 {
        match &self.morphology {
            Morphology::Uniform => 1.0,
            Morphology::Helical(h) => {
                let phase = h.harmonic as f64 * q[0] - h.wavenumber * q[1];
                1.0 - h.epsilon * (0.5 * phase.cos() + 0.5)
            }
            Morphology::Custom { f, .. } => f(q[0], q[1]),
        }
    }

    /// `s - 1`, evaluated without cancellation for the built-in profiles.
    pub fn deviation(&self, q: SurfacePoint) -> f64 {
        match &self.morphology {
            Morphology::Uniform => 0.0,
            Morphology::Helical(h) => {
                let phase = h.harmonic as f64 * q[0] - h.wavenumber * q[1];
                -h.epsilon * (0.5 * phase.cos() + 0.5)
            }
            Morphology::Custom { f, .. } => f(q[0], q[1]) - 1.0,
        }
    }

    /// Checks positivity, the `|s - 1| <= epsilon` bound, periodicity and
    /// continuity on a `samples x samples` grid over `domain`.
    pub fn validate(&self, domain: &DomainBox, samples: usize) -> Result<()> {
        let samples = samples.max(8);
        let bound = self.epsilon * (1.0 + 1e-12) + 1e-15;
        let at = |i: usize, j: usize, n: usize| {
            [
                domain.lower[0] + domain.extent(0) * i as f64 / n as f64,
                domain.lower[1] + domain.extent(1) * j as f64 / n as f64,
            ]
        };
        for i in 0..=samples {
            for j in 0..=samples {
                let q = at(i, j, samples);
                let s = self.value(q);
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::validation(
                        "profile",
                        format!("s = {s} at ({}, {}) must be positive", q[0], q[1]),
                    ));
                }
                if (s - 1.0).abs() > bound {
                    return Err(Error::validation(
                        "profile",
                        format!(
                            "|s - 1| = {} exceeds epsilon = {} at ({}, {})",
                            (s - 1.0).abs(),
                            self.epsilon,
                            q[0],
                            q[1]
                        ),
                    ));
                }
            }
        }
        for axis in 0..2 {
            if !domain.periodic[axis] {
                continue;
            }
            let other = 1 - axis;
            for j in 0..=samples {
                let mut lo = [0.0; 2];
                lo[axis] = domain.lower[axis];
                lo[other] = domain.lower[other] + domain.extent(other) * j as f64 / samples as f64;
                let mut hi = lo;
                hi[axis] += domain.extent(axis);
                let gap = (self.value(lo) - self.value(hi)).abs();
                if gap > 1e-10 {
                    return Err(Error::validation(
                        "profile",
                        format!("s is not periodic along axis {axis}: mismatch {gap:e}"),
                    ));
                }
            }
        }
        // A continuous function has a grid-independent slope estimate; a jump
        // makes the estimate grow linearly with resolution.
        let coarse = self.lipschitz_estimate(domain, samples);
        let fine = self.lipschitz_estimate(domain, 4 * samples);
        if fine > 2.0 * coarse + 1e-12 {
            return Err(Error::validation(
                "profile",
                format!("s looks discontinuous: slope estimate grows from {coarse:.3e} to {fine:.3e} under refinement"),
            ));
        }
        Ok(())
    }

    fn lipschitz_estimate(&self, domain: &DomainBox, n: usize) -> f64 {
        let h = [domain.extent(0) / n as f64, domain.extent(1) / n as f64];
        let mut slope: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let q = [domain.lower[0] + i as f64 * h[0], domain.lower[1] + j as f64 * h[1]];
                let s = self.value(q);
                slope = slope
                    .max((self.value([q[0] + h[0], q[1]]) - s).abs() / h[0])
                    .max((self.value([q[0], q[1] + h[1]]) - s).abs() / h[1]);
            }
        }
        slope
    }
}

/// The harmonic transverse well, specified either by `hbar omega` or directly by `E_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransverseWell {
    /// `hbar omega` in `e0`.
    Frequency(f64),
    /// `E_0` in `e0`.
    GroundEnergy(f64),
}

impl Default for TransverseWell {
    fn default() -> Self {
        TransverseWell::GroundEnergy(70.0)
    }
}

/// Ground-state energy of the transverse oscillator, `E_0 = hbar omega / 2`.
pub fn transverse_ground_energy(well: &TransverseWell) -> Result<f64> {
    let (field, value, e0) = match *well {
        TransverseWell::Frequency(w) => ("hbar_omega", w, 0.5 * w),
        TransverseWell::GroundEnergy(e) => ("e0", e, e),
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::validation(field, format!("must be positive, got {value}")));
    }
    Ok(e0)
}

/// Warning text when `E_0` does not dominate the tangential energy window.
pub fn dominance_warning(e0: f64, max_tangential_energy: f64) -> Option<String> {
    (e0 < 10.0 * max_tangential_energy).then(|| {
        format!(
            "E0 = {e0} e0 is less than 10x the largest tangential energy {max_tangential_energy} e0; \
             the transverse ground state may not be separated"
        )
    })
}

/// `V_g(q) + (s(q) - 1) E_0` in `e0`.
pub fn effective_potential(
    profile: &ConfinementProfile,
    well: &TransverseWell,
    chart: &SurfaceChart,
    q: SurfacePoint,
) -> Result<f64> {
    let e0 = transverse_ground_energy(well)?;
    let vg = chart.geometric_potential(q)?;
    Ok(vg + profile.deviation(q) * e0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper_spec() -> HelicalSpec {
        HelicalSpec {
            epsilon: 0.1,
            omega: 8.0,
            kappa: 1.0,
            radius: 1.0,
            ditch_count: Some(2),
            round_harmonic: false,
        }
    }

    #[test]
    fn ditch_and_ridge_values() {
        let p = helical_profile(&paper_spec()).unwrap();
        assert_eq!(p.kind(), ProfileKind::Helical);
        // phase m theta - q z = 0 is a ditch center, = pi a ridge
        assert_relative_eq!(p.value([0.0, 0.0]), 0.9, max_relative = 1e-15);
        assert_relative_eq!(p.value([PI / 2.0, 0.0]), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn zero_epsilon_is_homogeneous() {
        let p = helical_profile(&HelicalSpec { epsilon: 0.0, ..paper_spec() }).unwrap();
        assert_eq!(p.kind(), ProfileKind::Homogeneous);
        assert_eq!(p.value([1.0, 2.0]), 1.0);
    }

    #[test]
    fn harmonic_from_omega_requires_integer() {
        let spec = HelicalSpec {
            ditch_count: None,
            ..paper_spec()
        };
        assert_eq!(helical_profile(&spec).unwrap().helix().unwrap().harmonic, 8);
        let off = HelicalSpec { omega: 8.3, ..spec };
        assert!(matches!(helical_profile(&off), Err(Error::Periodicity { .. })));
        let rounded = HelicalSpec {
            round_harmonic: true,
            ..off
        };
        assert_eq!(helical_profile(&rounded).unwrap().helix().unwrap().harmonic, 8);
    }

    #[test]
    fn parameter_validation() {
        assert!(helical_profile(&HelicalSpec { epsilon: 0.6, ..paper_spec() }).is_err());
        assert!(helical_profile(&HelicalSpec { epsilon: -0.1, ..paper_spec() }).is_err());
        assert!(helical_profile(&HelicalSpec { ditch_count: Some(3), ..paper_spec() }).is_err());
        assert!(helical_profile(&HelicalSpec { radius: 0.0, ..paper_spec() }).is_err());
    }

    #[test]
    fn ground_energy() {
        assert_eq!(transverse_ground_energy(&TransverseWell::Frequency(140.0)).unwrap(), 70.0);
        assert_eq!(transverse_ground_energy(&TransverseWell::GroundEnergy(70.0)).unwrap(), 70.0);
        assert_eq!(transverse_ground_energy(&TransverseWell::Frequency(2.0)).unwrap(), 1.0);
        assert!(transverse_ground_energy(&TransverseWell::Frequency(0.0)).is_err());
        assert!(transverse_ground_energy(&TransverseWell::GroundEnergy(-1.0)).is_err());
        assert!(dominance_warning(70.0, 4.5).is_none());
        assert!(dominance_warning(20.0, 4.5).is_some());
    }

    #[test]
    fn effective_potential_at_ditch_center() {
        let chart = SurfaceChart::cylinder(1.0).unwrap();
        let well = TransverseWell::GroundEnergy(70.0);
        let p = helical_profile(&paper_spec()).unwrap();
        let v = effective_potential(&p, &well, &chart, [0.0, 0.0]).unwrap();
        assert_relative_eq!(v, -7.25, max_relative = 1e-13);
        let flat = ConfinementProfile::homogeneous();
        let v = effective_potential(&flat, &well, &chart, [0.0, 0.0]).unwrap();
        assert_relative_eq!(v, -0.25, max_relative = 1e-15);
    }

    #[test]
    fn helical_profile_validates_on_cylinder() {
        let p = helical_profile(&paper_spec()).unwrap();
        let domain = DomainBox::new([0.0, 0.0], [2.0 * PI, 5.0], [true, false]).unwrap();
        p.validate(&domain, 64).unwrap();
    }

    #[test]
    fn validation_catches_bad_custom_profiles() {
        let domain = DomainBox::new([0.0, 0.0], [2.0 * PI, 5.0], [true, false]).unwrap();
        let too_deep = ConfinementProfile::custom(0.1, 1, Arc::new(|t, _| 1.0 - 0.3 * t.cos())).unwrap();
        assert!(too_deep.validate(&domain, 32).is_err());
        let aperiodic = ConfinementProfile::custom(0.1, 1, Arc::new(|t, _| 1.0 - 0.01 * t)).unwrap();
        assert!(aperiodic.validate(&domain, 32).is_err());
        let jump = ConfinementProfile::custom(0.1, 1, Arc::new(|_, z| if z < 2.5 { 1.0 } else { 0.95 })).unwrap();
        assert!(jump.validate(&domain, 32).is_err());
        let negative = ConfinementProfile::custom(2.0, 1, Arc::new(|t, _| 1.0 - 1.5 * t.cos().abs())).unwrap();
        assert!(negative.validate(&domain, 32).is_err());
    }
}
