//! Oracle battery behind `thinlayer selftest`.
//!
//! Each check compares one computed number with an independent reference.
//! [`Faults`] lets tests inject deliberate errors to confirm that the battery
//! notices them.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::confinement::{helical_profile, ConfinementProfile, HelicalSpec, TransverseWell};
use crate::error::Result;
use crate::geometry::{EvalMode, SurfaceChart};
use crate::operator::{assemble_coupled_channel, ChannelBasis, GridParams};
use crate::transport::reference::{dense_smatrix, lattice_barrier_transmission};
use crate::transport::rgf_smatrix;
use crate::transport::smatrix::smatrix_with_scale;

/// Deliberate errors for exercising the battery itself.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Faults {
    /// Report `+(M^2 - K)` instead of `-(M^2 - K)`.
    pub flip_vg_sign: bool,
    /// Multiplies the lead broadening used in the Fisher-Lee relations.
    pub velocity_scale: f64,
}

impl Default for Faults {
    fn default() -> Self {
        Self {
            flip_vg_sign: false,
            velocity_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub checks: Vec<Check>,
}

impl SelfTestReport {
    fn check(&mut self, suite: &'static str, name: String, observed: f64, expected: f64, tolerance: f64) {
        let passed = (observed - expected).abs() <= tolerance;
        self.checks.push(Check {
            suite,
            name,
            observed,
            expected,
            tolerance,
            passed,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// Whether every check of `suite` passed.
    pub fn suite_passed(&self, suite: &str) -> bool {
        self.checks.iter().filter(|c| c.suite == suite).all(|c| c.passed)
    }
}

/// Runs every suite.
pub fn run(faults: &Faults) -> Result<SelfTestReport> {
    let mut report = SelfTestReport::default();
    curvature(&mut report, faults)?;
    barrier(&mut report)?;
    dense_equivalence(&mut report)?;
    unitarity(&mut report, faults)?;
    Ok(report)
}

fn curvature(report: &mut SelfTestReport, faults: &Faults) -> Result<()> {
    let sign = if faults.flip_vg_sign { -1.0 } else { 1.0 };
    let vg = |chart: &SurfaceChart, q: [f64; 2]| -> Result<f64> { Ok(sign * chart.geometric_potential(q)?) };
    let points = [[0.3, 0.7], [1.1, 2.9], [2.5, 4.0]];

    for r in [0.5, 1.0, 2.0] {
        let chart = SurfaceChart::cylinder(r)?;
        for q in points {
            report.check("curvature", format!("cylinder r={r} V_g at {q:?}"), vg(&chart, q)?, -0.25 / (r * r), 1e-12);
        }
    }
    let sphere = SurfaceChart::sphere(1.5)?;
    for q in [[0.4, 1.0], [1.2, 3.0], [2.7, 5.5]] {
        report.check("curvature", format!("sphere V_g at {q:?}"), vg(&sphere, q)?, 0.0, 1e-12);
    }
    let (major, minor) = (3.0, 1.0);
    let torus = SurfaceChart::torus(major, minor)?;
    let torus_fd = torus.clone().with_mode(EvalMode::FiniteDifference { step: None })?;
    for q in points {
        let k1 = 1.0 / minor;
        let k2 = q[1].cos() / (major + minor * q[1].cos());
        let exact = -(0.5 * (k1 - k2)).powi(2);
        report.check("curvature", format!("torus V_g at {q:?}"), vg(&torus, q)?, exact, 1e-12);
        report.check(
            "curvature",
            format!("torus finite-difference V_g at {q:?}"),
            vg(&torus_fd, q)?,
            exact,
            1e-6 * exact.abs().max(1.0),
        );
    }
    let waist = 1.2;
    let catenoid = SurfaceChart::catenoid(waist)?;
    for q in [[-1.0, 0.5], [0.0, 2.0], [1.7, 4.0]] {
        let exact = -1.0 / (waist * waist * (q[0] / waist).cosh().powi(4));
        report.check("curvature", format!("catenoid V_g at {q:?}"), vg(&catenoid, q)?, exact, 1e-12);
    }
    Ok(())
}

fn barrier(report: &mut SelfTestReport) -> Result<()> {
    let (height, e0, length, dz) = (3.0, 70.0, 1.5, 0.01);
    let eps = height / e0;
    let profile = ConfinementProfile::custom(eps, 0, Arc::new(move |_, _| 1.0 + eps))?;
    let params = GridParams {
        dz: Some(dz),
        length: Some(length),
        taper: Some(0.0),
        buffer: Some(0.5),
        max_energy: 6.0,
        ..GridParams::default()
    };
    let op = assemble_coupled_channel(&profile, &TransverseWell::GroundEnergy(e0), &ChannelBasis::new(0, 1.0)?, &params)?;
    let sites = (length / op.dz()).round() as usize;
    for e in [0.5, 2.0, 2.95, 3.3, 5.0] {
        let t = rgf_smatrix(&op, e)?.conductance();
        report.check(
            "barrier",
            format!("square barrier T at E={e}"),
            t,
            lattice_barrier_transmission(e, height, sites, op.dz()),
            1e-6,
        );
    }
    Ok(())
}

fn helix(epsilon: f64, omega: f64, kappa: f64, ditches: u32) -> Result<ConfinementProfile> {
    helical_profile(&HelicalSpec {
        epsilon,
        omega,
        kappa,
        radius: 1.0,
        ditch_count: Some(ditches),
        round_harmonic: false,
    })
}

fn dense_equivalence(report: &mut SelfTestReport) -> Result<()> {
    let params = GridParams {
        dz: Some(0.015),
        length: Some(0.45),
        taper: Some(0.0),
        buffer: Some(0.15),
        ..GridParams::default()
    };
    for (eps, kappa, ditches) in [(0.2, 1.0, 2), (0.1, -0.5, 1)] {
        let op = assemble_coupled_channel(
            &helix(eps, 8.0, kappa, ditches)?,
            &TransverseWell::GroundEnergy(70.0),
            &ChannelBasis::new(2, 1.0)?,
            &params,
        )?;
        for e in [0.6, 1.7, 4.2] {
            let a = rgf_smatrix(&op, e)?;
            let b = dense_smatrix(&op, e)?;
            let diff = (&a.full() - &b.full()).iter().map(|v| v.norm()).fold(0.0, f64::max);
            report.check(
                "dense",
                format!("RGF vs dense S, eps={eps} kappa={kappa} E={e}"),
                diff,
                0.0,
                1e-10,
            );
        }
    }
    Ok(())
}

fn unitarity(report: &mut SelfTestReport, faults: &Faults) -> Result<()> {
    let mut rng = StdRng::seed_from_u64(7);
    let params = GridParams {
        length: Some(2.0),
        taper: Some(0.4),
        buffer: Some(0.5),
        ..GridParams::default()
    };
    for i in 0..8 {
        let eps = rng.random_range(0.02..0.2);
        let kappa = rng.random_range(-2.0..2.0);
        let ditches = rng.random_range(1..=2);
        let energy = rng.random_range(0.1..4.4);
        let op = assemble_coupled_channel(
            &helix(eps, 8.0, kappa, ditches)?,
            &TransverseWell::GroundEnergy(70.0),
            &ChannelBasis::new(3, 1.0)?,
            &params,
        )?;
        let s = smatrix_with_scale(&op, energy, faults.velocity_scale)?;
        let label = format!("sample {i}: eps={eps:.3} kappa={kappa:.3} m={ditches} E={energy:.3}");
        report.check("unitarity", format!("S^dag S - 1, {label}"), s.unitarity_residual(), 0.0, 1e-8);
        report.check("unitarity", format!("flux balance, {label}"), s.flux_residual(), 0.0, 1e-8);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_run_passes() {
        let report = run(&Faults::default()).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }

    #[test]
    fn flipped_vg_fails_curvature_only() {
        let report = run(&Faults {
            flip_vg_sign: true,
            ..Faults::default()
        })
        .unwrap();
        assert!(!report.suite_passed("curvature"));
        assert!(report.suite_passed("unitarity"));
    }

    #[test]
    fn scaled_velocity_fails_unitarity() {
        let report = run(&Faults {
            velocity_scale: 1.01,
            ..Faults::default()
        })
        .unwrap();
        assert!(!report.suite_passed("unitarity"));
        assert!(report.suite_passed("curvature"));
    }
}
