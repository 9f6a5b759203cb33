//! Run configuration shared by the library entry points and the command-line driver.
//!
//! All lengths are in `a` and all energies in `e0`. Every section has defaults,
//! so an empty document is a valid configuration describing the helical-ditch
//! cylinder (`epsilon = 0.1`, `Omega = 8`, `kappa = 1`, two ditches, `E_0 = 70`,
//! `r = 1`).

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::confinement::{helical_profile, ConfinementProfile, HelicalSpec, TransverseWell};
use crate::error::{Error, Result};
use crate::geometry::{DomainBox, SurfaceChart};
use crate::operator::{assemble_coupled_channel, AxisBoundary, ChannelBasis, CoupledChannelOperator, GridParams, SurfaceGrid};
use crate::transport::{EnergyGrid, Injection};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chart: ChartSpec,
    pub profile: ProfileSpec,
    pub numerics: NumericsSpec,
    pub sweep: SweepSpec,
    pub density: DensitySpec,
    pub output: OutputSpec,
}

/// Surface and its coordinate domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChartSpec {
    /// `(theta, z)` with `z` in `[0, length]`.
    Cylinder { radius: f64, length: f64 },
    Plane { width: f64, height: f64 },
    /// `(polar, azimuth)`.
    Sphere { radius: f64 },
    Torus { major: f64, minor: f64 },
    /// `(u, v)` with `u` in `[-half_length, half_length]`.
    Catenoid { waist: f64, half_length: f64 },
}

impl Default for ChartSpec {
    fn default() -> Self {
        ChartSpec::Cylinder {
            radius: 1.0,
            length: 10.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileChoice {
    Homogeneous,
    Helical,
}

/// Confinement morphology and transverse well.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSpec {
    pub kind: ProfileChoice,
    pub epsilon: f64,
    /// `Omega` [1/a].
    pub omega: f64,
    pub kappa: f64,
    /// Ditches per circumference; 0 takes `Omega r`.
    pub ditch_count: u32,
    /// Round a non-integer `Omega r` instead of rejecting it.
    pub round_harmonic: bool,
    /// Transverse ground-state energy `E_0` [e0].
    pub e0: f64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        Self {
            kind: ProfileChoice::Helical,
            epsilon: 0.1,
            omega: 8.0,
            kappa: 1.0,
            ditch_count: 2,
            round_harmonic: false,
            e0: 70.0,
        }
    }
}

/// Discretization. Absent fields select the automatic choices of the operator module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsSpec {
    /// Angular-momentum cutoff; default `m_d + 4`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_max: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dz: Option<f64>,
    /// Scattering window length `L_z`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Length of each `sin^2` ramp at the window edges; 0 switches abruptly.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub taper: Option<f64>,
    /// Uniform lead stretch on either side of the window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer: Option<f64>,
    /// Samples used for the theta Fourier transform of `s`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_samples: Option<usize>,
    pub include_vg: bool,
    /// Chart grid for `curvature` and `spectrum`, nodes per axis.
    pub grid: [usize; 2],
    /// Boundary per chart axis for `spectrum`; default periodic on periodic axes, zero-flux at
    /// the sphere's poles, Dirichlet otherwise.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<[AxisBoundary; 2]>,
    /// Number of eigenvalues reported by `spectrum`.
    pub eigenvalues: usize,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self {
            l_max: None,
            dz: None,
            length: None,
            taper: None,
            buffer: None,
            theta_samples: None,
            include_vg: true,
            grid: [64, 64],
            boundary: None,
            eigenvalues: 10,
        }
    }
}

/// Threshold-relative energy grid for `sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub e_min: f64,
    pub e_max: f64,
    pub points: usize,
    /// Outgoing pair `l` used for `P_Lz`; 0 sums over every `l > 0`.
    pub pair: u32,
    /// Repeat the sweep with `L_max + m_d` and report the largest change in `sigma`.
    pub check_cutoff: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            e_min: 0.1,
            e_max: 4.5,
            points: 200,
            pair: 1,
            check_cutoff: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensitySpec {
    /// Threshold-relative energy [e0].
    pub energy: f64,
    pub mode: i32,
    pub injection: Injection,
    pub theta_samples: usize,
}

impl Default for DensitySpec {
    fn default() -> Self {
        Self {
            energy: 2.2,
            mode: 1,
            injection: Injection::Left,
            theta_samples: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File-name prefix for every output.
    pub prefix: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            prefix: "thinlayer".into(),
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be a positive number, got {v}")))
    }
}

fn positive_opt(field: &'static str, v: Option<f64>) -> Result<()> {
    v.map_or(Ok(()), |v| positive(field, v))
}

impl ChartSpec {
    pub fn build(&self) -> Result<SurfaceChart> {
        match *self {
            ChartSpec::Cylinder { radius, length } => {
                positive("chart.length", length)?;
                Ok(SurfaceChart::cylinder(radius)?.with_domain(DomainBox::new(
                    [0.0, 0.0],
                    [2.0 * PI, length],
                    [true, false],
                )?))
            }
            ChartSpec::Plane { width, height } => {
                positive("chart.width", width)?;
                positive("chart.height", height)?;
                SurfaceChart::plane(width, height)
            }
            ChartSpec::Sphere { radius } => SurfaceChart::sphere(radius),
            ChartSpec::Torus { major, minor } => SurfaceChart::torus(major, minor),
            ChartSpec::Catenoid { waist, half_length } => {
                positive("chart.half_length", half_length)?;
                Ok(SurfaceChart::catenoid(waist)?.with_domain(DomainBox::new(
                    [-half_length, 0.0],
                    [half_length, 2.0 * PI],
                    [false, true],
                )?))
            }
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            ChartSpec::Cylinder { radius, .. } | ChartSpec::Sphere { radius } => Some(radius),
            _ => None,
        }
    }
}

impl RunConfig {
    /// Checks every field before any computation runs.
    pub fn validate(&self) -> Result<()> {
        self.chart.build()?;
        self.profile()?;
        self.well();
        positive("profile.e0", self.profile.e0)?;
        let n = &self.numerics;
        positive_opt("numerics.dz", n.dz)?;
        positive_opt("numerics.length", n.length)?;
        positive_opt("numerics.buffer", n.buffer)?;
        if let Some(t) = n.taper {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::validation("numerics.taper", format!("must be non-negative, got {t}")));
            }
        }
        if n.grid.iter().any(|&g| g < 3) {
            return Err(Error::validation("numerics.grid", format!("need at least 3 nodes per axis, got {:?}", n.grid)));
        }
        if n.eigenvalues == 0 || n.eigenvalues > n.grid[0] * n.grid[1] {
            return Err(Error::validation(
                "numerics.eigenvalues",
                format!("must lie in [1, {}], got {}", n.grid[0] * n.grid[1], n.eigenvalues),
            ));
        }
        self.energy_grid()?;
        let d = &self.density;
        if !d.energy.is_finite() {
            return Err(Error::validation("density.energy", "must be finite"));
        }
        if d.theta_samples < 4 {
            return Err(Error::validation("density.theta_samples", format!("need at least 4, got {}", d.theta_samples)));
        }
        if self.output.prefix.is_empty() || self.output.prefix.contains(['/', '\\']) {
            return Err(Error::validation("output.prefix", "must be a non-empty file-name fragment"));
        }
        Ok(())
    }

    /// Cylinder radius used by the transport operator.
    pub fn cylinder_radius(&self) -> Result<f64> {
        match self.chart {
            ChartSpec::Cylinder { radius, .. } => Ok(radius),
            _ => Err(Error::UnsupportedDomain {
                reason: "transport runs need a cylinder chart".into(),
            }),
        }
    }

    pub fn profile(&self) -> Result<ConfinementProfile> {
        let p = &self.profile;
        match p.kind {
            ProfileChoice::Homogeneous => Ok(ConfinementProfile::homogeneous()),
            ProfileChoice::Helical => helical_profile(&HelicalSpec {
                epsilon: p.epsilon,
                omega: p.omega,
                kappa: p.kappa,
                radius: self.chart.radius().unwrap_or(1.0),
                ditch_count: (p.ditch_count > 0).then_some(p.ditch_count),
                round_harmonic: p.round_harmonic,
            }),
        }
    }

    pub fn well(&self) -> TransverseWell {
        TransverseWell::GroundEnergy(self.profile.e0)
    }

    /// `L_max`, defaulting to the helix harmonic plus 4.
    pub fn l_max(&self) -> Result<u32> {
        if let Some(l) = self.numerics.l_max {
            return Ok(l);
        }
        let m = self.profile()?.helix().map_or(0, |h| h.harmonic);
        Ok(m + 4)
    }

    pub fn grid_params(&self) -> GridParams {
        let n = &self.numerics;
        GridParams {
            dz: n.dz,
            length: n.length,
            taper: n.taper,
            buffer: n.buffer,
            theta_samples: n.theta_samples,
            include_vg: n.include_vg,
            max_energy: self.sweep.e_max.max(self.density.energy).max(0.0),
        }
    }

    pub fn operator(&self) -> Result<CoupledChannelOperator> {
        let basis = ChannelBasis::new(self.l_max()?, self.cylinder_radius()?)?;
        assemble_coupled_channel(&self.profile()?, &self.well(), &basis, &self.grid_params())
    }

    pub fn energy_grid(&self) -> Result<EnergyGrid> {
        EnergyGrid::new(self.sweep.e_min, self.sweep.e_max, self.sweep.points)
    }

    /// Outgoing pair for `P_Lz`.
    pub fn pair(&self) -> Option<u32> {
        (self.sweep.pair > 0).then_some(self.sweep.pair)
    }

    pub fn surface_grid(&self) -> SurfaceGrid {
        let n = &self.numerics;
        // the sphere's polar axis ends in coordinate singularities, not walls
        let boundary = match (n.boundary, &self.chart) {
            (None, ChartSpec::Sphere { .. }) => Some([AxisBoundary::ZeroFlux, AxisBoundary::Periodic]),
            (b, _) => b,
        };
        SurfaceGrid {
            nodes: n.grid,
            boundary,
            include_vg: n.include_vg,
        }
    }

    /// Profile for a real-space spectrum. The helical profile is written in
    /// cylinder coordinates and is rejected on other charts.
    pub fn surface_profile(&self) -> Result<ConfinementProfile> {
        let profile = self.profile()?;
        if !profile.is_homogeneous() && !matches!(self.chart, ChartSpec::Cylinder { .. }) {
            return Err(Error::validation(
                "profile.kind",
                "the helical profile is defined on the cylinder only; use kind = \"homogeneous\"",
            ));
        }
        Ok(profile)
    }

    pub fn output_path(&self, suffix: &str) -> PathBuf {
        self.output.dir.join(format!("{}_{suffix}", self.output.prefix))
    }
}
