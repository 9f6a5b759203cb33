use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smatrix::{rgf_smatrix, SMatrix};
use crate::error::{Error, Result};
use crate::operator::CoupledChannelOperator;

/// Energy grid `E_i = min + (i + 1/2)(max - min)/points`, threshold-relative.
///
/// The half-step offset keeps the grid away from thresholds at round numbers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl EnergyGrid {
    pub fn new(min: f64, max: f64, points: usize) -> Result<Self> {
        let grid = Self { min, max, points };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::validation("energy", "range bounds must be finite"));
        }
        if self.max <= self.min {
            return Err(Error::validation(
                "energy",
                format!("empty range [{}, {}]; need max > min", self.min, self.max),
            ));
        }
        if self.points == 0 {
            return Err(Error::validation("points", "need at least one energy point"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.max - self.min) / self.points as f64
    }

    pub fn energies(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| self.min + (i as f64 + 0.5) * h).collect()
    }
}

/// Results at one energy of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductancePoint {
    /// Position in the energy grid.
    pub index: usize,
    pub energy: f64,
    pub solver_energy: f64,
    pub open_channels: usize,
    pub conductance: f64,
    pub conductance_reverse: f64,
    pub modes: Vec<i32>,
    /// `sigma_{l', l}` as `(incident, outgoing, value)` over open channels.
    pub table: Vec<(i32, i32, f64)>,
    pub polarization: Option<f64>,
    pub polarization_reverse: Option<f64>,
    pub unitarity: f64,
    pub flux: f64,
    pub near_threshold: bool,
}

impl ConductancePoint {
    pub fn from_smatrix(index: usize, s: &SMatrix, pair: Option<u32>) -> Self {
        let table = s
            .modes
            .iter()
            .flat_map(|&inc| s.modes.iter().map(move |&out| (inc, out)))
            .map(|(inc, out)| (inc, out, s.mode_conductance(inc, out)))
            .collect();
        Self {
            index,
            energy: s.energy,
            solver_energy: s.solver_energy,
            open_channels: s.open_count(),
            conductance: s.conductance(),
            conductance_reverse: s.conductance_reverse(),
            modes: s.modes.clone(),
            table,
            polarization: s.polarization(pair).ok(),
            polarization_reverse: s.polarization_reverse(pair).ok(),
            unitarity: s.unitarity_residual(),
            flux: s.flux_residual(),
            near_threshold: s.near_threshold,
        }
    }

    /// `sigma_{incident, outgoing}`, zero when either channel is closed.
    pub fn sigma(&self, incident: i32, outgoing: i32) -> f64 {
        self.table
            .iter()
            .find(|(i, o, _)| *i == incident && *o == outgoing)
            .map_or(0.0, |t| t.2)
    }

    /// `sigma_{., l}`: total transmitted into outgoing channel `l`.
    pub fn outgoing(&self, l: i32) -> f64 {
        self.table.iter().filter(|(_, o, _)| *o == l).map(|t| t.2).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub index: usize,
    pub energy: f64,
    pub message: String,
}

/// A run of consecutive points with `|sigma - level| < tolerance`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub level: u32,
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

/// Energy at which the open-channel count changes between neighbouring points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectedThreshold {
    pub energy: f64,
    pub channels_below: usize,
    pub channels_above: usize,
}

/// Conductance, mode-resolved conductance and polarization over an energy grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceCurve {
    pub grid: EnergyGrid,
    pub pair: Option<u32>,
    pub points: Vec<ConductancePoint>,
    pub failures: Vec<SweepFailure>,
}

impl ConductanceCurve {
    pub fn energies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.energy).collect()
    }

    pub fn conductances(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.conductance).collect()
    }

    /// Modes open at any point of the sweep, ascending.
    pub fn modes(&self) -> Vec<i32> {
        let mut modes: Vec<i32> = self.points.iter().flat_map(|p| p.modes.iter().copied()).collect();
        modes.sort_unstable();
        modes.dedup();
        modes
    }

    pub fn max_unitarity_residual(&self) -> f64 {
        self.points.iter().map(|p| p.unitarity).fold(0.0, f64::max)
    }

    /// Maximal runs of grid-consecutive points satisfying `keep`, as index ranges into `points`.
    pub fn runs(&self, keep: impl Fn(&ConductancePoint) -> bool) -> Vec<std::ops::Range<usize>> {
        let mut runs = Vec::new();
        let mut start: Option<usize> = None;
        for (k, p) in self.points.iter().enumerate() {
            let continues = start.is_some() && k > 0 && self.points[k - 1].index + 1 == p.index;
            if keep(p) {
                if !continues {
                    if let Some(s) = start {
                        runs.push(s..k);
                    }
                    start = Some(k);
                }
            } else if let Some(s) = start.take() {
                runs.push(s..k);
            }
        }
        if let Some(s) = start {
            runs.push(s..self.points.len());
        }
        runs
    }

    /// Intervals where `sigma` stays within `tolerance` of an integer for at least `min_points` points.
    pub fn plateaus(&self, tolerance: f64, min_points: usize) -> Vec<Plateau> {
        let mut out = Vec::new();
        let level = |p: &ConductancePoint| {
            let n = p.conductance.round();
            ((p.conductance - n).abs() < tolerance).then_some(n as u32)
        };
        for run in self.runs(|p| level(p).is_some()) {
            let mut k = run.start;
            while k < run.end {
                let n = level(&self.points[k]);
                let mut e = k + 1;
                while e < run.end && level(&self.points[e]) == n {
                    e += 1;
                }
                if e - k >= min_points {
                    out.push(Plateau {
                        level: n.unwrap(),
                        start: self.points[k].energy,
                        end: self.points[e - 1].energy,
                        points: e - k,
                    });
                }
                k = e;
            }
        }
        out
    }

    /// Midpoints between neighbouring points whose open-channel counts differ.
    pub fn detected_thresholds(&self) -> Vec<DetectedThreshold> {
        self.points
            .windows(2)
            .filter(|w| w[0].open_channels != w[1].open_channels)
            .map(|w| DetectedThreshold {
                energy: 0.5 * (w[0].energy + w[1].energy),
                channels_below: w[0].open_channels,
                channels_above: w[1].open_channels,
            })
            .collect()
    }

    /// Widest run of points satisfying `keep` whose energy span is at least `min_width`.
    pub fn widest_window(&self, keep: impl Fn(&ConductancePoint) -> bool, min_width: f64) -> Option<(f64, f64)> {
        self.runs(keep)
            .into_iter()
            .map(|r| (self.points[r.start].energy, self.points[r.end - 1].energy))
            .filter(|(a, b)| b - a >= min_width)
            .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
    }

    /// Largest pointwise `|sigma_a - sigma_b|` over energies present in both curves.
    pub fn max_deviation(&self, other: &ConductanceCurve) -> f64 {
        self.points
            .iter()
            .filter_map(|p| other.points.iter().find(|q| q.index == p.index).map(|q| (p, q)))
            .map(|(p, q)| (p.conductance - q.conductance).abs())
            .fold(0.0, f64::max)
    }
}

/// Analytic threshold-relative channel thresholds `l^2 / r^2` (`l >= 0`) inside `[min, max]`.
pub fn analytic_thresholds(radius: f64, l_max: u32, min: f64, max: f64) -> Vec<(u32, f64)> {
    (0..=l_max)
        .map(|l| (l, (l * l) as f64 / (radius * radius)))
        .filter(|(_, e)| *e >= min && *e <= max)
        .collect()
}

/// Runs [`rgf_smatrix`] over the grid in parallel. Per-point failures are
/// recorded and the sweep continues; result order follows the grid.
pub fn energy_sweep(op: &CoupledChannelOperator, grid: &EnergyGrid, pair: Option<u32>) -> Result<ConductanceCurve> {
    grid.validate()?;
    let results: Vec<(usize, f64, Result<SMatrix>)> = grid
        .energies()
        .into_par_iter()
        .enumerate()
        .map(|(i, e)| (i, e, rgf_smatrix(op, e)))
        .collect();
    let mut points = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (index, energy, result) in results {
        match result {
            Ok(s) => points.push(ConductancePoint::from_smatrix(index, &s, pair)),
            Err(e) => failures.push(SweepFailure {
                index,
                energy,
                message: e.to_string(),
            }),
        }
    }
    Ok(ConductanceCurve {
        grid: *grid,
        pair,
        points,
        failures,
    })
}
