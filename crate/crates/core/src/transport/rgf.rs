use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::CoupledChannelOperator;

/// Corner blocks of the retarded Green's function `(E - H - Sigma_L - Sigma_R)^{-1}`
/// between the first slice (0) and the last slice (N-1).
#[derive(Clone, Debug)]
pub struct SurfaceGreens {
    pub g00: DMatrix<Complex64>,
    pub g0n: DMatrix<Complex64>,
    pub gn0: DMatrix<Complex64>,
    pub gnn: DMatrix<Complex64>,
}

fn invert(m: DMatrix<Complex64>, slice: usize) -> Result<DMatrix<Complex64>> {
    m.lu()
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("singular Dyson block at slice {slice}")))
}

fn subtract_diag(m: &mut DMatrix<Complex64>, sigma: &[Complex64]) {
    for (i, s) in sigma.iter().enumerate() {
        m[(i, i)] -= s;
    }
}

/// Recursive Green's function: one sweep from each end, each carrying the
/// corner column along so only `N` block inversions per sweep are needed.
pub fn surface_greens(
    op: &CoupledChannelOperator,
    energy: f64,
    sigma_left: &[Complex64],
    sigma_right: &[Complex64],
) -> Result<SurfaceGreens> {
    let n = op.slices();
    let c = op.channels();
    let tau = Complex64::new(-op.hopping(), 0.0);
    let tau2 = tau * tau;
    let block = |i: usize| -> DMatrix<Complex64> {
        let mut a = -op.onsite(i);
        for k in 0..c {
            a[(k, k)] += energy;
        }
        a
    };

    let mut a = block(0);
    subtract_diag(&mut a, sigma_left);
    if n == 1 {
        subtract_diag(&mut a, sigma_right);
        let g = invert(a, 0)?;
        return Ok(SurfaceGreens {
            g00: g.clone(),
            g0n: g.clone(),
            gn0: g.clone(),
            gnn: g,
        });
    }
    let mut g = invert(a, 0)?;
    let mut col = g.clone();
    for i in 1..n {
        let mut a = block(i) - &g * tau2;
        if i == n - 1 {
            subtract_diag(&mut a, sigma_right);
        }
        g = invert(a, i)?;
        col = (&g * col) * (-tau);
    }
    let (gnn, gn0) = (g, col);

    let mut a = block(n - 1);
    subtract_diag(&mut a, sigma_right);
    let mut g = invert(a, n - 1)?;
    let mut col = g.clone();
    for i in (0..n - 1).rev() {
        let mut a = block(i) - &g * tau2;
        if i == 0 {
            subtract_diag(&mut a, sigma_left);
        }
        g = invert(a, i)?;
        col = (&g * col) * (-tau);
    }
    Ok(SurfaceGreens {
        g00: g,
        g0n: col,
        gn0,
        gnn,
    })
}
