use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::confinement::{transverse_ground_energy, ConfinementProfile, TransverseWell};
use crate::error::{Error, Result};
use crate::geometry::{SurfaceChart, SurfacePoint};
use crate::linalg::{dense_eigenvalues, lowest_eigenpairs, BandedCholesky, EigenOptions, SparseMatrix};

/// Largest doubly periodic grid handled by the dense fallback.
const DENSE_LIMIT: usize = 2500;

/// Boundary treatment of one chart axis.
///
/// `Dirichlet` places nodes strictly inside the interval with `psi = 0` on the
/// ends. `ZeroFlux` uses cell-centered nodes and drops the boundary faces, which
/// is the right condition at coordinate singularities where `sqrt g` vanishes
/// (the poles of a sphere).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisBoundary {
    Periodic,
    Dirichlet,
    ZeroFlux,
}

/// Node counts and boundary conditions for [`assemble_2d`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceGrid {
    pub nodes: [usize; 2],
    /// Per-axis boundaries; default periodic on periodic axes, Dirichlet otherwise.
    pub boundary: Option<[AxisBoundary; 2]>,
    pub include_vg: bool,
}

impl SurfaceGrid {
    pub fn new(n1: usize, n2: usize) -> Self {
        Self {
            nodes: [n1, n2],
            boundary: None,
            include_vg: true,
        }
    }

    pub fn with_boundary(mut self, boundary: [AxisBoundary; 2]) -> Self {
        self.boundary = Some(boundary);
        self
    }
}

/// Symmetrized real-space Hamiltonian `W^{-1/2} K W^{-1/2} + V` on a chart,
/// where `K` is the flux-form stencil of `-d_a sqrt g g^ab d_b` and `W = sqrt g`.
#[derive(Clone, Debug)]
pub struct SurfaceOperator {
    matrix: SparseMatrix,
    nodes: [usize; 2],
    fast_axis: usize,
    coordinates: [Vec<f64>; 2],
    boundary: [AxisBoundary; 2],
    potential: Vec<f64>,
    nine_point: bool,
}

impl SurfaceOperator {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn nodes(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn coordinates(&self, axis: usize) -> &[f64] {
        &self.coordinates[axis]
    }

    pub fn boundary(&self) -> [AxisBoundary; 2] {
        self.boundary
    }

    /// Whether the metric has off-diagonal terms, requiring the 9-point stencil.
    pub fn is_nine_point(&self) -> bool {
        self.nine_point
    }

    /// Row index of the node `(i1, i2)`.
    pub fn index(&self, i: [usize; 2]) -> usize {
        let fast = self.fast_axis;
        i[fast] + self.nodes[fast] * i[1 - fast]
    }

    /// `V_g + (s - 1) E_0` at each row.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// Lowest `count` eigenvalues, ascending.
    pub fn eigenvalues(&self, count: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        if count == 0 || count > n {
            return Err(Error::validation("count", format!("need 1 <= count <= {n}, got {count}")));
        }
        if self.boundary.iter().all(|b| *b == AxisBoundary::Periodic) {
            if n > DENSE_LIMIT {
                return Err(Error::UnsupportedDomain {
                    reason: format!(
                        "doubly periodic grids have no narrow band; {n} nodes exceed the dense limit {DENSE_LIMIT}"
                    ),
                });
            }
            let mut all = dense_eigenvalues(self.matrix.to_dense());
            all.truncate(count);
            return Ok(all);
        }
        let shift = self.potential.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;
        let factor = BandedCholesky::factor(&self.matrix, shift)?;
        let (values, _) = lowest_eigenpairs::<f64, _, _>(
            n,
            count,
            |x| self.matrix.matmul(x),
            |x| factor.solve(x),
            EigenOptions {
                tolerance: 1e-10,
                ..EigenOptions::default()
            },
        )?;
        Ok(values)
    }
}

struct Axis {
    n: usize,
    h: f64,
    lower: f64,
    offset: f64,
    boundary: AxisBoundary,
}

impl Axis {
    fn new(lower: f64, extent: f64, n: usize, boundary: AxisBoundary) -> Self {
        let (h, offset) = match boundary {
            AxisBoundary::Periodic => (extent / n as f64, 0.0),
            AxisBoundary::Dirichlet => (extent / (n + 1) as f64, 1.0),
            AxisBoundary::ZeroFlux => (extent / n as f64, 0.5),
        };
        Self {
            n,
            h,
            lower,
            offset,
            boundary,
        }
    }

    fn coordinate(&self, i: usize) -> f64 {
        self.lower + (i as f64 + self.offset) * self.h
    }

    /// Coordinate of the face between `i` and `i + step`, computed from the
    /// lower node so that both sides of a face see the same number.
    fn face(&self, i: usize, step: isize) -> f64 {
        let mut k = i as isize + step.min(0);
        if self.boundary == AxisBoundary::Periodic {
            k = k.rem_euclid(self.n as isize);
        }
        self.lower + (k as f64 + self.offset + 0.5) * self.h
    }

    /// Neighbor of `i` in direction `step` (+1 or -1), if it is an unknown.
    fn neighbor(&self, i: usize, step: isize) -> Option<usize> {
        let j = i as isize + step;
        if (0..self.n as isize).contains(&j) {
            Some(j as usize)
        } else if self.boundary == AxisBoundary::Periodic {
            Some(j.rem_euclid(self.n as isize) as usize)
        } else {
            None
        }
    }

    /// Whether the face between `i` and `i + step` carries flux.
    fn has_face(&self, i: usize, step: isize) -> bool {
        self.neighbor(i, step).is_some() || self.boundary == AxisBoundary::Dirichlet
    }
}

struct MetricTerms {
    g: Matrix2<f64>,
    sqrt_g: f64,
    inverse: Matrix2<f64>,
}

fn metric_terms(chart: &SurfaceChart, q: SurfacePoint) -> Result<MetricTerms> {
    let g = chart.metric(q)?;
    let det = g.determinant();
    let inverse = g.try_inverse().ok_or(Error::SingularChart { q1: q[0], q2: q[1], det })?;
    Ok(MetricTerms {
        g,
        sqrt_g: det.sqrt(),
        inverse,
    })
}

/// Assembles the Laplace-Beltrami operator plus `V_g + (s - 1) E_0` on a chart.
pub fn assemble_2d(
    chart: &SurfaceChart,
    profile: &ConfinementProfile,
    well: &TransverseWell,
    grid: &SurfaceGrid,
) -> Result<SurfaceOperator> {
    let e0 = transverse_ground_energy(well)?;
    let domain = chart.domain();
    let boundary = grid.boundary.unwrap_or([
        if domain.periodic[0] { AxisBoundary::Periodic } else { AxisBoundary::Dirichlet },
        if domain.periodic[1] { AxisBoundary::Periodic } else { AxisBoundary::Dirichlet },
    ]);
    for axis in 0..2 {
        if boundary[axis] == AxisBoundary::Periodic && !domain.periodic[axis] {
            return Err(Error::UnsupportedDomain {
                reason: format!("axis {} is not periodic in the chart domain", axis + 1),
            });
        }
        if grid.nodes[axis] < 3 {
            return Err(Error::validation("nodes", format!("need at least 3 nodes per axis, got {:?}", grid.nodes)));
        }
    }
    let axes = [
        Axis::new(domain.lower[0], domain.extent(0), grid.nodes[0], boundary[0]),
        Axis::new(domain.lower[1], domain.extent(1), grid.nodes[1], boundary[1]),
    ];
    let fast_axis = match (boundary[0] == AxisBoundary::Periodic, boundary[1] == AxisBoundary::Periodic) {
        (true, false) => 0,
        (false, true) => 1,
        _ if grid.nodes[0] <= grid.nodes[1] => 0,
        _ => 1,
    };
    let index = |i: [usize; 2]| i[fast_axis] + grid.nodes[fast_axis] * i[1 - fast_axis];
    let point = |i: [usize; 2]| [axes[0].coordinate(i[0]), axes[1].coordinate(i[1])];
    let n = grid.nodes[0] * grid.nodes[1];

    let mut weight = vec![0.0; n];
    let mut cross = vec![0.0; n];
    let mut potential = vec![0.0; n];
    let mut nine_point = false;
    for i0 in 0..grid.nodes[0] {
        for i1 in 0..grid.nodes[1] {
            let i = [i0, i1];
            let q = point(i);
            let m = metric_terms(chart, q)?;
            let p = index(i);
            weight[p] = m.sqrt_g;
            cross[p] = m.sqrt_g * m.inverse[(0, 1)];
            nine_point |= m.g[(0, 1)].abs() > 1e-12 * (m.g[(0, 0)] + m.g[(1, 1)]);
            let vg = if grid.include_vg { chart.geometric_potential(q)? } else { 0.0 };
            potential[p] = vg + profile.deviation(q) * e0;
        }
    }

    let mut triplets = Vec::with_capacity(n * if nine_point { 9 } else { 5 });
    for i0 in 0..grid.nodes[0] {
        for i1 in 0..grid.nodes[1] {
            let i = [i0, i1];
            let p = index(i);
            let q = point(i);
            let mut diag = 0.0;
            for (axis, ax) in axes.iter().enumerate() {
                for step in [1isize, -1] {
                    if !ax.has_face(i[axis], step) {
                        continue;
                    }
                    let mut face = q;
                    face[axis] = ax.face(i[axis], step);
                    let m = metric_terms(chart, face)?;
                    let a = m.sqrt_g * m.inverse[(axis, axis)] / (ax.h * ax.h);
                    diag += a;
                    if let Some(j) = ax.neighbor(i[axis], step) {
                        let mut nb = i;
                        nb[axis] = j;
                        triplets.push((p, index(nb), -a));
                    }
                }
            }
            triplets.push((p, p, diag));
            if nine_point {
                let scale = 4.0 * axes[0].h * axes[1].h;
                for s0 in [1isize, -1] {
                    for s1 in [1isize, -1] {
                        let (Some(j0), Some(j1)) = (axes[0].neighbor(i0, s0), axes[1].neighbor(i1, s1)) else {
                            continue;
                        };
                        let c = cross[index([j0, i1])] + cross[index([i0, j1])];
                        triplets.push((p, index([j0, j1]), -(s0 * s1) as f64 * c / scale));
                    }
                }
            }
        }
    }
    let scaled = triplets
        .into_iter()
        .map(|(r, c, v)| (r, c, v / (weight[r] * weight[c]).sqrt()))
        .chain(potential.iter().enumerate().map(|(p, &v)| (p, p, v)))
        .collect();
    let coordinates = [
        (0..grid.nodes[0]).map(|i| axes[0].coordinate(i)).collect(),
        (0..grid.nodes[1]).map(|i| axes[1].coordinate(i)).collect(),
    ];
    Ok(SurfaceOperator {
        matrix: SparseMatrix::from_triplets(n, scaled),
        nodes: grid.nodes,
        fast_axis,
        coordinates,
        boundary,
        potential,
        nine_point,
    })
}
