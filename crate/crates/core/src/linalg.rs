//! Linear algebra used by the operators and the transport solver.
//!
//! - [`BlockTridiagonal`]: block-tridiagonal matrices with scalar off-diagonal
//!   blocks (`c I`), factored by block Thomas elimination.
//! - [`SparseMatrix`] and [`BandedCholesky`]: real symmetric sparse matrices
//!   from the surface discretization and a banded factorization for them.
//! - [`lowest_eigenpairs`]: shift-invert subspace iteration with Rayleigh-Ritz,
//!   which handles degenerate multiplets.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};

/// Block-tridiagonal matrix whose off-diagonal blocks are multiples of the identity.
///
/// Row block `n` reads `lower[n-1] x_{n-1} + diag[n] x_n + upper[n] x_{n+1}`.
#[derive(Clone, Debug)]
pub struct BlockTridiagonal {
    pub diag: Vec<DMatrix<Complex64>>,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
}

impl BlockTridiagonal {
    pub fn block_size(&self) -> usize {
        self.diag.first().map_or(0, |d| d.nrows())
    }

    pub fn dim(&self) -> usize {
        self.diag.len() * self.block_size()
    }

    pub fn apply(&self, x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let c = self.block_size();
        let n = self.diag.len();
        let mut y = DMatrix::zeros(x.nrows(), x.ncols());
        for b in 0..n {
            let mut rows = y.rows_mut(b * c, c);
            rows += &self.diag[b] * x.rows(b * c, c);
            if b > 0 {
                rows += x.rows((b - 1) * c, c) * self.lower[b - 1];
            }
            if b + 1 < n {
                rows += x.rows((b + 1) * c, c) * self.upper[b];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let c = self.block_size();
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n * c, n * c);
        for b in 0..n {
            m.view_mut((b * c, b * c), (c, c)).copy_from(&self.diag[b]);
            if b + 1 < n {
                for i in 0..c {
                    m[(b * c + i, (b + 1) * c + i)] = self.upper[b];
                    m[((b + 1) * c + i, b * c + i)] = self.lower[b];
                }
            }
        }
        m
    }

    pub fn factor(&self) -> Result<BlockThomas> {
        let n = self.diag.len();
        let mut pivots_inv = Vec::with_capacity(n);
        for b in 0..n {
            let mut d = self.diag[b].clone();
            if b > 0 {
                let prev: &DMatrix<Complex64> = &pivots_inv[b - 1];
                d -= prev * (self.lower[b - 1] * self.upper[b - 1]);
            }
            let inv = d
                .try_inverse()
                .ok_or_else(|| Error::Numerical(format!("singular pivot block {b} in block Thomas elimination")))?;
            pivots_inv.push(inv);
        }
        Ok(BlockThomas {
            pivots_inv,
            upper: self.upper.clone(),
            lower: self.lower.clone(),
        })
    }
}

/// Block LU factors of a [`BlockTridiagonal`] matrix.
#[derive(Clone, Debug)]
pub struct BlockThomas {
    pivots_inv: Vec<DMatrix<Complex64>>,
    upper: Vec<Complex64>,
    lower: Vec<Complex64>,
}

impl BlockThomas {
    pub fn solve(&self, rhs: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.pivots_inv.len();
        let c = self.pivots_inv[0].nrows();
        let mut w = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for b in 0..n {
            let mut r = rhs.rows(b * c, c).clone_owned();
            if b > 0 {
                r -= w.rows((b - 1) * c, c) * self.lower[b - 1];
            }
            w.rows_mut(b * c, c).copy_from(&(&self.pivots_inv[b] * r));
        }
        for b in (0..n.saturating_sub(1)).rev() {
            let correction = &self.pivots_inv[b] * (w.rows((b + 1) * c, c) * self.upper[b]);
            let mut rows = w.rows_mut(b * c, c);
            rows -= correction;
        }
        w
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j)))
            .max()
            .unwrap_or(0)
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matmul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n, x.ncols());
        for k in 0..x.ncols() {
            for i in 0..self.n {
                y[(i, k)] = self.row(i).map(|(j, v)| v * x[(j, k)]).sum();
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Symmetric permutation `P A P^T` with `perm[new] = old`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let triplets = (0..self.n)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (inverse[i], inverse[j], v))
            .collect();
        Self::from_triplets(self.n, triplets)
    }
}

/// Cholesky factor `L L^T` of a symmetric positive definite banded matrix.
#[derive(Clone, Debug)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// `band[i * (bw + 1) + k] = L[i, i - k]`.
    band: Vec<f64>,
}

impl BandedCholesky {
    /// Factors `A - shift I`.
    pub fn factor(a: &SparseMatrix, shift: f64) -> Result<Self> {
        let n = a.dim();
        let bw = a.bandwidth();
        let w = bw + 1;
        let mut band = vec![0.0; n * w];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    band[i * w + (i - j)] += v;
                }
            }
            band[i * w] -= shift;
        }
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let mut sum = band[i * w + (i - j)];
                let klo = lo.max(j.saturating_sub(bw));
                for k in klo..j {
                    sum -= band[i * w + (i - k)] * band[j * w + (j - k)];
                }
                if j == i {
                    if !(sum > 0.0) {
                        return Err(Error::Numerical(format!(
                            "matrix is not positive definite after shift {shift} (pivot {i}: {sum:e})"
                        )));
                    }
                    band[i * w] = sum.sqrt();
                } else {
                    band[i * w + (i - j)] = sum / band[j * w];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut x = rhs.clone();
        for col in 0..x.ncols() {
            for i in 0..n {
                let mut s = x[(i, col)];
                for k in i.saturating_sub(bw)..i {
                    s -= self.band[i * w + (i - k)] * x[(k, col)];
                }
                x[(i, col)] = s / self.band[i * w];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, col)];
                for k in i + 1..n.min(i + bw + 1) {
                    s -= self.band[k * w + (k - i)] * x[(k, col)];
                }
                x[(i, col)] = s / self.band[i * w];
            }
        }
        x
    }
}

#[derive(Clone, Copy, Debug)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_iterations: 800,
            seed: 0x5eed,
        }
    }
}

/// Lowest `count` eigenpairs of a Hermitian operator of dimension `n`.
///
/// `apply` multiplies by the operator, `shifted_solve` applies `(H - sigma)^{-1}`
/// for some `sigma` below the spectrum. Returns ascending eigenvalues and the
/// corresponding orthonormal eigenvectors as columns.
pub fn lowest_eigenpairs<T, A, S>(
    n: usize,
    count: usize,
    apply: A,
    shifted_solve: S,
    opts: EigenOptions,
) -> Result<(Vec<f64>, DMatrix<T>)>
where
    T: ComplexField<RealField = f64> + Copy,
    A: Fn(&DMatrix<T>) -> DMatrix<T>,
    S: Fn(&DMatrix<T>) -> DMatrix<T>,
{
    if count == 0 || count > n {
        return Err(Error::validation("count", format!("need 1 <= count <= {n}, got {count}")));
    }
    let block = (count + (count / 2).max(8)).min(n);
    let mut rng = StdRng::seed_from_u64(opts.seed);
    let mut x = DMatrix::<T>::from_fn(n, block, |_, _| T::from_real(rng.random::<f64>() - 0.5));
    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..opts.max_iterations {
        let y = shifted_solve(&x);
        let q = y.qr().q();
        let projected = q.adjoint() * apply(&q);
        let projected = (&projected + projected.adjoint()) * T::from_real(0.5);
        let (values, vectors) = sorted_eigen(projected);
        x = &q * vectors;
        let current: Vec<f64> = values[..count].to_vec();
        if let Some(prev) = &previous {
            let scale = current.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let change = current
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if change <= opts.tolerance * scale {
                return Ok((current, x.columns(0, count).clone_owned()));
            }
        }
        previous = Some(current);
    }
    Err(Error::Numerical(format!(
        "subspace iteration did not converge in {} iterations",
        opts.max_iterations
    )))
}

/// Eigen-decomposition of a dense Hermitian matrix, ascending.
pub fn sorted_eigen<T>(m: DMatrix<T>) -> (Vec<f64>, DMatrix<T>)
where
    T: ComplexField<RealField = f64> + Copy,
{
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Ascending eigenvalues of a dense Hermitian matrix.
pub fn dense_eigenvalues<T>(m: DMatrix<T>) -> Vec<f64>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect::<Vec<f64>>();
    v.sort_by(f64::total_cmp);
    v
}

#[cfg(test)]
fn max_abs<T: ComplexField<RealField = f64> + Copy>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|v| v.modulus()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample_tridiagonal(blocks: usize, size: usize) -> BlockTridiagonal {
        let diag = (0..blocks)
            .map(|b| {
                DMatrix::from_fn(size, size, |i, j| {
                    if i == j {
                        c(4.0 + b as f64, 0.3)
                    } else {
                        c(0.1 * (i + 2 * j) as f64, -0.05 * b as f64)
                    }
                })
            })
            .collect();
        BlockTridiagonal {
            diag,
            upper: (0..blocks - 1).map(|b| c(-1.0, 0.1 * b as f64)).collect(),
            lower: (0..blocks - 1).map(|b| c(-0.9, -0.2 * b as f64)).collect(),
        }
    }

    #[test]
    fn block_thomas_matches_dense_solve() {
        let m = sample_tridiagonal(7, 3);
        let rhs = DMatrix::from_fn(21, 2, |i, j| c(i as f64 * 0.1, j as f64 - 0.5));
        let x = m.factor().unwrap().solve(&rhs);
        let dense = m.to_dense().lu().solve(&rhs).unwrap();
        assert!(max_abs(&(x - dense)) < 1e-12);
        let y = m.apply(&rhs);
        let yd = m.to_dense() * &rhs;
        assert!(max_abs(&(y - yd)) < 1e-12);
    }

    #[test]
    fn banded_cholesky_solves_laplacian() {
        let n = 50;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, t);
        assert_eq!(a.bandwidth(), 1);
        let chol = BandedCholesky::factor(&a, -0.5).unwrap();
        let rhs = DMatrix::from_fn(n, 1, |i, _| (i as f64).sin());
        let x = chol.solve(&rhs);
        let mut shifted = a.to_dense();
        for i in 0..n {
            shifted[(i, i)] += 0.5;
        }
        assert!(max_abs(&(&shifted * x - rhs)) < 1e-12);
        assert!(BandedCholesky::factor(&a, 10.0).is_err());
    }

    #[test]
    fn subspace_iteration_resolves_degenerate_levels() {
        // Two uncoupled copies of a 1D chain: every level is doubly degenerate.
        let n = 40;
        let mut t = Vec::new();
        for copy in 0..2 {
            let off = copy * n;
            for i in 0..n {
                t.push((off + i, off + i, 2.0));
                if i + 1 < n {
                    t.push((off + i, off + i + 1, -1.0));
                    t.push((off + i + 1, off + i, -1.0));
                }
            }
        }
        let a = SparseMatrix::from_triplets(2 * n, t);
        let chol = BandedCholesky::factor(&a, -0.1).unwrap();
        let (vals, vecs) =
            lowest_eigenpairs::<f64, _, _>(2 * n, 4, |x| a.matmul(x), |x| chol.solve(x), EigenOptions::default())
                .unwrap();
        let exact = |k: usize| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        for (i, v) in vals.iter().enumerate() {
            assert_relative_eq!(*v, exact(i / 2 + 1), max_relative = 1e-9);
        }
        let overlap = vecs.transpose() * &vecs;
        assert!(max_abs(&(overlap - DMatrix::identity(4, 4))) < 1e-9);
    }

    #[test]
    fn sparse_permutation_and_symmetry() {
        let a = SparseMatrix::from_triplets(3, vec![(0, 0, 1.0), (0, 2, 2.0), (2, 0, 2.0), (1, 1, 3.0), (1, 1, 1.0)]);
        assert_eq!(a.get(1, 1), 4.0);
        assert_eq!(a.max_asymmetry(), 0.0);
        assert_eq!(a.bandwidth(), 2);
        let p = a.permuted(&[2, 0, 1]);
        assert_eq!(p.get(0, 1), 2.0);
        assert_eq!(p.bandwidth(), 1);
    }
}
