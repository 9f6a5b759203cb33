//! Independent reference computations used to check the recursive solver.

use num_complex::Complex64;

use super::rgf::SurfaceGreens;
use super::smatrix::SMatrix;
use crate::error::{Error, Result};
use crate::operator::{CoupledChannelOperator, LeadModeSet};

/// Scattering matrix from a full dense inversion of `E - H - Sigma`.
/// Cost grows as `(N C)^3`; meant for small systems only.
pub fn dense_smatrix(op: &CoupledChannelOperator, energy: f64) -> Result<SMatrix> {
    let solver = op.solver_energy(energy);
    let leads = LeadModeSet::for_operator(op, solver);
    let c = op.channels();
    let n = op.slices();
    let mut m = op.block_tridiagonal(Some(solver)).to_dense();
    let last = (n - 1) * c;
    for (i, s) in leads.self_energies().iter().enumerate() {
        m[(i, i)] -= s;
        m[(last + i, last + i)] -= s;
    }
    let g = m
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("dense E - H - Sigma is singular".into()))?;
    let greens = SurfaceGreens {
        g00: g.view((0, 0), (c, c)).clone_owned(),
        g0n: g.view((0, last), (c, c)).clone_owned(),
        gn0: g.view((last, 0), (c, c)).clone_owned(),
        gnn: g.view((last, last), (c, c)).clone_owned(),
    };
    Ok(SMatrix::from_greens(&greens, &leads, energy, 1.0))
}

/// Self-energy `t^2 g_s` of a semi-infinite chain (onsite `offset + 2t`,
/// hopping `-t`, `t = 1/dz^2`) from Sancho-Rubio decimation at `energy + i eta`.
pub fn decimation_self_energy(offset: f64, dz: f64, energy: f64, eta: f64) -> Result<Complex64> {
    let t = 1.0 / (dz * dz);
    let z = Complex64::new(energy, eta);
    let mut eps_s = Complex64::new(offset + 2.0 * t, 0.0);
    let mut eps = eps_s;
    let mut alpha = Complex64::new(-t, 0.0);
    let mut beta = alpha;
    for _ in 0..200 {
        let g = 1.0 / (z - eps);
        let agb = alpha * g * beta;
        eps_s += agb;
        eps += agb + beta * g * alpha;
        alpha = alpha * g * alpha;
        beta = beta * g * beta;
        if alpha.norm() < 1e-15 * t && beta.norm() < 1e-15 * t {
            return Ok(t * t / (z - eps_s));
        }
    }
    Err(Error::Numerical("decimation did not converge".into()))
}

/// Transmission of the lattice chain through `sites` slices raised by `height`.
///
/// With `cos k = 1 - E dz^2/2` outside and `cos q = 1 - (E - height) dz^2/2`
/// inside, `T = 1 / (1 + (cos k - cos q)^2 U_{M-1}(cos q)^2 / sin^2 k)` where
/// `U` is the Chebyshev polynomial of the second kind (`sin(M q)/sin q`).
/// `energy` is measured from the band bottom of the clean chain.
pub fn lattice_barrier_transmission(energy: f64, height: f64, sites: usize, dz: f64) -> f64 {
    let ck = 1.0 - 0.5 * energy * dz * dz;
    let cq = 1.0 - 0.5 * (energy - height) * dz * dz;
    let (mut u_prev, mut u) = (0.0, 1.0);
    for _ in 1..sites {
        let next = 2.0 * cq * u - u_prev;
        u_prev = u;
        u = next;
    }
    let sk2 = 1.0 - ck * ck;
    1.0 / (1.0 + (ck - cq).powi(2) * u * u / sk2)
}
