use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{CoupledChannelOperator, LeadModeSet};

/// Side from which the incident wave arrives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Injection {
    Left,
    Right,
}

/// `|psi(theta, z)|^2` on a uniform `theta` grid times the operator's `z` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMap {
    pub energy: f64,
    pub mode: i32,
    pub injection: Injection,
    pub theta: Vec<f64>,
    pub z: Vec<f64>,
    /// Row-major: `values[iz * theta.len() + itheta]`.
    pub values: Vec<f64>,
    /// Window `[0, length]` of the scattering region.
    pub window: (f64, f64),
}

impl DensityMap {
    pub fn at(&self, iz: usize, itheta: usize) -> f64 {
        self.values[iz * self.theta.len() + itheta]
    }

    /// `int |psi|^2 dtheta` at slice `iz`.
    pub fn row_integral(&self, iz: usize) -> f64 {
        let n = self.theta.len();
        self.values[iz * n..(iz + 1) * n].iter().sum::<f64>() * 2.0 * PI / n as f64
    }

    fn rows_in(&self, z_lo: f64, z_hi: f64) -> impl Iterator<Item = usize> + '_ {
        (0..self.z.len()).filter(move |&i| self.z[i] >= z_lo && self.z[i] <= z_hi)
    }

    /// Mean density over the slices with `z_lo <= z <= z_hi`.
    pub fn mean_over(&self, z_lo: f64, z_hi: f64) -> f64 {
        let n = self.theta.len();
        let (sum, count) = self
            .rows_in(z_lo, z_hi)
            .flat_map(|iz| self.values[iz * n..(iz + 1) * n].iter())
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    /// Pearson correlation between the density and `indicator(theta, z)` over `z_lo <= z <= z_hi`.
    pub fn correlation(&self, indicator: impl Fn(f64, f64) -> f64, z_lo: f64, z_hi: f64) -> f64 {
        let n = self.theta.len();
        let pairs: Vec<(f64, f64)> = self
            .rows_in(z_lo, z_hi)
            .flat_map(|iz| (0..n).map(move |it| (iz, it)))
            .map(|(iz, it)| (self.values[iz * n + it], indicator(self.theta[it], self.z[iz])))
            .collect();
        let m = pairs.len() as f64;
        if m == 0.0 {
            return 0.0;
        }
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x / m, b + y / m));
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in &pairs {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        if sxx == 0.0 || syy == 0.0 {
            0.0
        } else {
            sxy / (sxx * syy).sqrt()
        }
    }
}

/// Channel amplitudes `psi_{n,l}` of the scattering state for a unit-amplitude
/// wave incident in channel `l`. Returns a `slices x channels` matrix.
pub fn scattering_amplitudes(
    op: &CoupledChannelOperator,
    energy: f64,
    l: i32,
    injection: Injection,
) -> Result<DMatrix<Complex64>> {
    let basis = op.basis();
    let channel = basis.index(l).ok_or_else(|| {
        Error::validation("mode", format!("l = {l} is outside the basis |l| <= {}", basis.l_max()))
    })?;
    let solver = op.solver_energy(energy);
    let leads = LeadModeSet::for_operator(op, solver);
    let mode = leads.modes[channel];
    if !mode.open {
        return Err(Error::ClosedChannel {
            mode: l,
            energy,
            threshold: mode.offset - op.energy_offset(),
        });
    }
    let sigma = leads.self_energies();
    let mut system = op.block_tridiagonal(Some(solver));
    let last = system.diag.len() - 1;
    for (i, s) in sigma.iter().enumerate() {
        system.diag[0][(i, i)] -= s;
        system.diag[last][(i, i)] -= s;
    }
    let c = op.channels();
    let n = op.slices();
    let mut rhs = DMatrix::zeros(n * c, 1);
    let slice = match injection {
        Injection::Left => 0,
        Injection::Right => last,
    };
    rhs[(slice * c + channel, 0)] = Complex64::new(0.0, mode.broadening(leads.dz));
    let psi = system.factor()?.solve(&rhs);
    Ok(DMatrix::from_fn(n, c, |i, j| psi[(i * c + j, 0)]))
}

/// `|psi(theta, z)|^2` with `psi = sum_l psi_{n,l} e^{i l theta} / sqrt(2 pi)`, so that
/// a unit-amplitude plane wave has density `1 / (2 pi)`.
pub fn scattering_density(
    op: &CoupledChannelOperator,
    energy: f64,
    l: i32,
    injection: Injection,
    theta_samples: usize,
) -> Result<DensityMap> {
    let c = op.channels();
    if theta_samples < c {
        return Err(Error::Resolution {
            reason: format!("{theta_samples} theta samples cannot resolve {c} angular modes"),
        });
    }
    let amplitudes = scattering_amplitudes(op, energy, l, injection)?;
    let basis = op.basis();
    let theta: Vec<f64> = (0..theta_samples).map(|j| 2.0 * PI * j as f64 / theta_samples as f64).collect();
    let phases = DMatrix::from_fn(c, theta_samples, |k, j| {
        Complex64::from_polar(1.0 / (2.0 * PI).sqrt(), basis.mode(k) as f64 * theta[j])
    });
    let field = &amplitudes * phases;
    let values = field.transpose().iter().map(|v| v.norm_sqr()).collect();
    let grid = op.grid();
    Ok(DensityMap {
        energy,
        mode: l,
        injection,
        theta,
        z: grid.points(),
        values,
        window: (0.0, grid.window.length),
    })
}
