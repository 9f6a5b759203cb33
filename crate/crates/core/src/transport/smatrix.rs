use nalgebra::DMatrix;
use num_complex::Complex64;

use super::rgf::{surface_greens, SurfaceGreens};
use crate::error::{Error, Result};
use crate::operator::{CoupledChannelOperator, LeadModeSet};

/// Flux-normalized scattering matrix over the open channels.
///
/// Blocks are stored as `[outgoing, incident]`: `t[(i, j)]` is the amplitude
/// for a wave incident from the left in `modes[j]` to leave on the right in
/// `modes[i]`. `t_prime` and `r_prime` describe injection from the right.
/// Mode-resolved conductances follow the convention `sigma_{l', l}` = incident
/// `l'` scattered into outgoing `l`, i.e. `|t[(l, l')]|^2`.
#[derive(Clone, Debug)]
pub struct SMatrix {
    /// Threshold-relative energy.
    pub energy: f64,
    /// Energy passed to the lattice solver.
    pub solver_energy: f64,
    pub modes: Vec<i32>,
    pub velocities: Vec<f64>,
    pub t: DMatrix<Complex64>,
    pub r: DMatrix<Complex64>,
    pub t_prime: DMatrix<Complex64>,
    pub r_prime: DMatrix<Complex64>,
    pub near_threshold: bool,
}

impl SMatrix {
    /// Fisher-Lee relations `t = i sqrt(Gamma) G_{N0} sqrt(Gamma)`,
    /// `r = -1 + i sqrt(Gamma) G_00 sqrt(Gamma)`.
    ///
    /// `broadening_scale` multiplies every `Gamma_l`; anything other than 1 breaks
    /// the flux normalization (used to exercise the self-test).
    pub fn from_greens(greens: &SurfaceGreens, leads: &LeadModeSet, energy: f64, broadening_scale: f64) -> Self {
        let open: Vec<usize> = leads.open_modes().map(|(i, _)| i).collect();
        let root: Vec<f64> = open
            .iter()
            .map(|&i| (broadening_scale * leads.modes[i].broadening(leads.dz)).sqrt())
            .collect();
        let n = open.len();
        let i_unit = Complex64::new(0.0, 1.0);
        let project = |g: &DMatrix<Complex64>, reflect: bool| {
            DMatrix::from_fn(n, n, |a, b| {
                let v = i_unit * root[a] * g[(open[a], open[b])] * root[b];
                if reflect && a == b {
                    v - 1.0
                } else {
                    v
                }
            })
        };
        Self {
            energy,
            solver_energy: leads.energy,
            modes: open.iter().map(|&i| leads.modes[i].l).collect(),
            velocities: open.iter().map(|&i| leads.modes[i].velocity).collect(),
            t: project(&greens.gn0, false),
            r: project(&greens.g00, true),
            t_prime: project(&greens.g0n, false),
            r_prime: project(&greens.gnn, true),
            near_threshold: leads.near_threshold(),
        }
    }

    fn closed(energy: f64, leads: &LeadModeSet) -> Self {
        let empty = DMatrix::zeros(0, 0);
        Self {
            energy,
            solver_energy: leads.energy,
            modes: Vec::new(),
            velocities: Vec::new(),
            t: empty.clone(),
            r: empty.clone(),
            t_prime: empty.clone(),
            r_prime: empty,
            near_threshold: leads.near_threshold(),
        }
    }

    pub fn open_count(&self) -> usize {
        self.modes.len()
    }

    fn position(&self, l: i32) -> Option<usize> {
        self.modes.iter().position(|&m| m == l)
    }

    /// `S = [[r, t'], [t, r']]`.
    pub fn full(&self) -> DMatrix<Complex64> {
        let n = self.open_count();
        let mut s = DMatrix::zeros(2 * n, 2 * n);
        s.view_mut((0, 0), (n, n)).copy_from(&self.r);
        s.view_mut((0, n), (n, n)).copy_from(&self.t_prime);
        s.view_mut((n, 0), (n, n)).copy_from(&self.t);
        s.view_mut((n, n), (n, n)).copy_from(&self.r_prime);
        s
    }

    /// `max |S^dagger S - 1|`.
    pub fn unitarity_residual(&self) -> f64 {
        let s = self.full();
        let p = s.adjoint() * &s - DMatrix::identity(s.nrows(), s.ncols());
        p.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation of `sum_out (|t|^2 + |r|^2)` from 1 over incident modes on either side.
    pub fn flux_residual(&self) -> f64 {
        let n = self.open_count();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            let left: f64 = (0..n).map(|i| self.t[(i, j)].norm_sqr() + self.r[(i, j)].norm_sqr()).sum();
            let right: f64 = (0..n).map(|i| self.t_prime[(i, j)].norm_sqr() + self.r_prime[(i, j)].norm_sqr()).sum();
            worst = worst.max((left - 1.0).abs()).max((right - 1.0).abs());
        }
        worst
    }

    /// Landauer conductance `sigma / sigma_0 = sum |t|^2` for injection from the left.
    pub fn conductance(&self) -> f64 {
        self.t.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Conductance for injection from the right.
    pub fn conductance_reverse(&self) -> f64 {
        self.t_prime.iter().map(|v| v.norm_sqr()).sum()
    }

    /// `sigma_{l', l}`: incident `l'` (left lead) into outgoing `l` (right lead). Zero if either is closed.
    pub fn mode_conductance(&self, incident: i32, outgoing: i32) -> f64 {
        match (self.position(incident), self.position(outgoing)) {
            (Some(j), Some(i)) => self.t[(i, j)].norm_sqr(),
            _ => 0.0,
        }
    }

    /// Same as [`mode_conductance`](Self::mode_conductance) for injection from the right.
    pub fn mode_conductance_reverse(&self, incident: i32, outgoing: i32) -> f64 {
        match (self.position(incident), self.position(outgoing)) {
            (Some(j), Some(i)) => self.t_prime[(i, j)].norm_sqr(),
            _ => 0.0,
        }
    }

    /// `sigma_{., l} = sum_{l'} sigma_{l', l}`: everything transmitted into `l`.
    pub fn outgoing(&self, l: i32) -> f64 {
        self.modes.iter().map(|&lp| self.mode_conductance(lp, l)).sum()
    }

    pub fn outgoing_reverse(&self, l: i32) -> f64 {
        self.modes.iter().map(|&lp| self.mode_conductance_reverse(lp, l)).sum()
    }

    /// `P_Lz = sum_{l'} (sigma_{l', l} - sigma_{l', -l}) / sigma` for the outgoing
    /// pair `pair` (`l = pair > 0`), or summed over all `l > 0` pairs when `None`.
    pub fn polarization(&self, pair: Option<u32>) -> Result<f64> {
        polarization_from(self.conductance(), pair, &self.modes, |l| self.outgoing(l))
    }

    /// Polarization of the current transmitted for injection from the right.
    pub fn polarization_reverse(&self, pair: Option<u32>) -> Result<f64> {
        polarization_from(self.conductance_reverse(), pair, &self.modes, |l| self.outgoing_reverse(l))
    }
}

fn polarization_from(sigma: f64, pair: Option<u32>, modes: &[i32], outgoing: impl Fn(i32) -> f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::UndefinedPolarization);
    }
    let imbalance: f64 = match pair {
        Some(0) => return Err(Error::validation("pair", "the polarization pair index must be positive")),
        Some(l) => outgoing(l as i32) - outgoing(-(l as i32)),
        None => modes.iter().filter(|&&l| l > 0).map(|&l| outgoing(l) - outgoing(-l)).sum(),
    };
    Ok(imbalance / sigma)
}

/// Scattering matrix of `op` at threshold-relative energy `energy`.
pub fn rgf_smatrix(op: &CoupledChannelOperator, energy: f64) -> Result<SMatrix> {
    smatrix_with_scale(op, energy, 1.0)
}

pub(crate) fn smatrix_with_scale(op: &CoupledChannelOperator, energy: f64, broadening_scale: f64) -> Result<SMatrix> {
    if !energy.is_finite() {
        return Err(Error::validation("energy", "must be finite"));
    }
    let solver = op.solver_energy(energy);
    let leads = LeadModeSet::for_operator(op, solver);
    if leads.near_threshold() {
        log::warn!("energy {energy} lies within 1e-9 of a channel threshold");
    }
    if leads.open_count() == 0 {
        return Ok(SMatrix::closed(energy, &leads));
    }
    let sigma = leads.self_energies();
    let greens = surface_greens(op, solver, &sigma, &sigma)?;
    Ok(SMatrix::from_greens(&greens, &leads, energy, broadening_scale))
}
