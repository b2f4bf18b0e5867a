//! Small sparse and structured linear-algebra kernels.
//!
//! Everything dense goes through nalgebra; this module only holds what
//! nalgebra does not provide: compressed-row matrices, symmetric
//! tridiagonal eigenpairs, and an envelope Cholesky factorization for
//! sparse SPD systems.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            debug_assert!(i < nrows && j < ncols);
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr { nrows, ncols, row_ptr, cols, vals }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Csr::from_triplets(m.nrows(), m.ncols(), trip)
    }

    pub fn identity(n: usize) -> Self {
        Csr::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Csr::from_triplets(d.len(), d.len(), d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over the stored entries of row `i` as (col, value).
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map(|(_, v)| v).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// Product for an operator whose rows sum to zero, evaluated as
    /// Σ_j a_ij (x_j − x_i) so that constants map exactly to zero.
    pub fn mul_vec_differences(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).filter(|&(j, _)| j != i).map(|(j, v)| v * (x[j] - x[i])).sum())
            .collect()
    }

    /// diag(d) · self
    pub fn scale_rows(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.vals[k] *= d[i];
            }
        }
        out
    }

    /// self · diag(d)
    pub fn scale_cols(&self, d: &[f64]) -> Csr {
        let mut out = self.clone();
        for k in 0..out.vals.len() {
            out.vals[k] *= d[out.cols[k]];
        }
        out
    }

    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.ncols, other.nrows);
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    trip.push((i, j, a * b));
                }
            }
        }
        Csr::from_triplets(self.nrows, other.ncols, trip)
    }

    /// self + alpha · other
    pub fn add_scaled(&self, other: &Csr, alpha: f64) -> Csr {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut trip = self.triplets();
        trip.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, alpha * v)));
        Csr::from_triplets(self.nrows, self.ncols, trip)
    }

    pub fn add_diag(&self, d: &[f64]) -> Csr {
        self.add_scaled(&Csr::diagonal(d), 1.0)
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            t.extend(self.row(i).map(|(j, v)| (i, j, v)));
        }
        t
    }

    pub fn transpose(&self) -> Csr {
        Csr::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect(),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().iter().map(|&(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }
}

/// Number of eigenvalues of the symmetric tridiagonal matrix (d, e)
/// strictly below `x` (Sturm count via LDLᵀ pivots).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        if q.abs() < tiny {
            q = -tiny;
        }
        q = d[i] - x - e[i - 1] * e[i - 1] / q;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest (0-based) eigenvalue of a symmetric tridiagonal
/// matrix, by bisection to full precision.
pub fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let n = d.len();
    assert!(k < n && e.len() + 1 == n);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    let scale = lo.abs().max(hi.abs()).max(1.0);
    lo -= 1e-12 * scale;
    hi += 1e-12 * scale;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves (T − σI) y = b for tridiagonal T using Gaussian elimination
/// with partial pivoting. Exact zero pivots are nudged, which is what
/// inverse iteration needs.
fn tridiagonal_shifted_solve(d: &[f64], e: &[f64], sigma: f64, b: &[f64]) -> Vec<f64> {
    let n = d.len();
    let scale = d.iter().chain(e.iter()).fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let eps = f64::EPSILON * scale;
    // rows stored as (diag, sup1, sup2) after pivoting
    let mut dd: Vec<f64> = d.iter().map(|v| v - sigma).collect();
    let mut du: Vec<f64> = e.to_vec();
    du.push(0.0);
    let mut dl: Vec<f64> = e.to_vec();
    let mut du2 = vec![0.0; n];
    let mut rhs = b.to_vec();
    let mut mult = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        if dd[i].abs() >= dl[i].abs() {
            if dd[i] == 0.0 {
                dd[i] = eps;
            }
            let m = dl[i] / dd[i];
            mult[i] = m;
            dd[i + 1] -= m * du[i];
            rhs[i + 1] -= m * rhs[i];
            du2[i] = 0.0;
        } else {
            let m = dd[i] / dl[i];
            mult[i] = m;
            dd[i] = dl[i];
            let tmp = du[i];
            du[i] = dd[i + 1];
            dd[i + 1] = tmp - m * dd[i + 1];
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -m * du[i + 1];
            }
            rhs.swap(i, i + 1);
            rhs[i + 1] -= m * rhs[i];
        }
        dl[i] = 0.0;
    }
    if dd[n - 1] == 0.0 {
        dd[n - 1] = eps;
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= du[i] * y[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * y[i + 2];
        }
        y[i] = s / dd[i];
    }
    y
}

/// Lowest `count` eigenpairs of a symmetric tridiagonal matrix. The
/// eigenvectors are Euclidean-unit.
pub fn tridiagonal_eigenpairs(d: &[f64], e: &[f64], count: usize) -> Vec<(f64, Vec<f64>)> {
    let n = d.len();
    let mut out: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
    for k in 0..count.min(n) {
        let lambda = tridiagonal_eigenvalue(d, e, k);
        // deterministic start vector
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7 + k as f64).sin()).collect();
        for _ in 0..3 {
            v = tridiagonal_shifted_solve(d, e, lambda, &v);
            for (_, prev) in out.iter().filter(|(l, _)| (l - lambda).abs() < 1e-8 * lambda.abs().max(1.0)) {
                let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(a, b)| *a -= dot * b);
            }
            let nrm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= nrm);
        }
        out.push((lambda, v));
    }
    out
}

/// Reverse Cuthill–McKee ordering of a symmetric sparsity pattern.
pub fn reverse_cuthill_mckee(a: &Csr) -> Vec<usize> {
    let n = a.nrows();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let start = (0..n).filter(|&i| !visited[i]).min_by_key(|&i| degree[i]).unwrap();
        visited[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nb: Vec<usize> = a.row(v).map(|(j, _)| j).filter(|&j| !visited[j]).collect();
            nb.sort_by_key(|&j| (degree[j], j));
            for j in nb {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factorization of a sparse SPD matrix in envelope (skyline)
/// storage after an RCM reordering.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    perm: Vec<usize>,
    first: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &Csr) -> Result<Self> {
        let n = a.nrows();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old in 0..n {
            let i = inv[old];
            for (oj, _) in a.row(old) {
                let j = inv[oj];
                if j < i {
                    first[i] = first[i].min(j);
                }
            }
        }
        let mut rows: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i - first[i] + 1]).collect();
        for old in 0..n {
            let i = inv[old];
            for (oj, v) in a.row(old) {
                let j = inv[oj];
                if j <= i {
                    rows[i][j - first[i]] += v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = rows[i][j - fi];
                for k in lo..j {
                    s -= rows[i][k - fi] * rows[j][k - fj];
                }
                rows[i][j - fi] = s / rows[j][j - fj];
            }
            let mut s = rows[i][i - fi];
            for k in fi..i {
                s -= rows[i][k - fi] * rows[i][k - fi];
            }
            if s <= 0.0 || !s.is_finite() {
                return Err(Error::Singular(format!("matrix not positive definite at pivot {i}")));
            }
            rows[i][i - fi] = s.sqrt();
        }
        Ok(EnvelopeCholesky { perm, first, rows })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.perm.len();
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let mut s = y[i];
            for k in fi..i {
                s -= self.rows[i][k - fi] * y[k];
            }
            y[i] = s / self.rows[i][i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            y[i] /= self.rows[i][i - fi];
            let yi = y[i];
            for k in fi..i {
                y[k] -= self.rows[i][k - fi] * yi;
            }
        }
        let mut x = vec![0.0; n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mass-weighted inner product.
pub fn mdot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    m.iter().zip(a.iter().zip(b)).map(|(w, (x, y))| w * x * y).sum()
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}
