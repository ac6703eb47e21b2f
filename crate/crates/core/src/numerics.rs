//! Small dense linear-algebra kernel.
//!
//! Everything here is sized for the matrices this crate actually touches:
//! subnet weight matrices (tens of units), inter-area blocks, and full
//! network Jacobians of a few hundred units. Storage is row-major `f64`.

use std::ops::{Index, IndexMut};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymmetry allowed by [`max_eig_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Smallest pivot magnitude accepted by [`solve_linear`].
pub const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::new",
                expected: rows * cols,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "DenseMatrix::new",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flat_map(|row| row.iter().copied()).collect(),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "DenseMatrix::add")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other, "DenseMatrix::sub")?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                context: "DenseMatrix::matmul",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᵀ x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * xr;
            }
        }
        out
    }

    /// `(A + Aᵀ) / 2`.
    pub fn sym_part(&self) -> Result<Self> {
        self.require_square()?;
        Ok(Self::from_fn(self.rows, self.cols, |r, c| {
            0.5 * (self[(r, c)] + self[(c, r)])
        }))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Copy of the `rows x cols` block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |r, c| self[(r0 + r, c0 + c)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Self) {
        for r in 0..block.rows {
            for c in 0..block.cols {
                self[(r0 + r, c0 + c)] = block[(r, c)];
            }
        }
    }

    /// Copy with row and column `k` deleted.
    pub fn remove_row_col(&self, k: usize) -> Self {
        self.remove_rows_cols(k, k)
    }

    /// Copy with row `rk` and column `ck` deleted (either may be `usize::MAX` to keep all).
    pub fn remove_rows_cols(&self, rk: usize, ck: usize) -> Self {
        let rows: Vec<usize> = (0..self.rows).filter(|&r| r != rk).collect();
        let cols: Vec<usize> = (0..self.cols).filter(|&c| c != ck).collect();
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn check_same_shape(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.rows != other.rows {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.rows,
                got: other.rows,
            });
        }
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.cols,
                got: other.cols,
            });
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerIterConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PowerIterConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100_000,
        }
    }
}

/// Perron root of a nonnegative square matrix.
///
/// The matrix is split into strongly connected components of its support
/// graph. Acyclic parts contribute their diagonal entry; each irreducible
/// component runs power iteration from the all-ones vector on `B + cI`,
/// with `c` between the smallest and largest row sum of `B`. The shift makes
/// the iteration primitive (no oscillation on periodic components) and the
/// Collatz-Wielandt bounds `min (Bx)_i/x_i <= rho <= max (Bx)_i/x_i` give a
/// certified stopping rule.
pub fn spectral_radius_nonneg(a: &DenseMatrix, cfg: &PowerIterConfig) -> Result<f64> {
    a.require_square()?;
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {}",
            cfg.tol
        )));
    }
    let n = a.rows();
    for r in 0..n {
        for c in 0..n {
            let v = a[(r, c)];
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
    }
    if a.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }

    let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for r in 0..n {
        for c in 0..n {
            if r != c && a[(r, c)] > 0.0 {
                graph.add_edge(nodes[r], nodes[c], ());
            }
        }
    }

    let mut rho: f64 = 0.0;
    for component in tarjan_scc(&graph) {
        let idx: Vec<usize> = component.iter().map(|n| n.index()).collect();
        let r = if idx.len() == 1 {
            a[(idx[0], idx[0])]
        } else {
            let sub = DenseMatrix::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])]);
            perron_root_irreducible(&sub, cfg)?
        };
        rho = rho.max(r);
    }
    Ok(rho)
}

fn perron_root_irreducible(b: &DenseMatrix, cfg: &PowerIterConfig) -> Result<f64> {
    let n = b.rows();
    let row_sums: Vec<f64> = (0..n).map(|r| b.row(r).iter().sum()).collect();
    let lo_sum = row_sums.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi_sum = row_sums.iter().cloned().fold(0.0, f64::max);
    let shift = 0.5 * (lo_sum + hi_sum);

    let mut x = vec![1.0; n];
    let mut estimate = hi_sum;
    for _ in 0..cfg.max_iter {
        let mut y = b.matvec(&x);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0_f64;
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += shift * xi;
            let ratio = *yi / xi;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
        estimate = 0.5 * (lo + hi) - shift;
        if hi - lo <= cfg.tol {
            return Ok(estimate.max(0.0));
        }
        let scale = y.iter().cloned().fold(0.0, f64::max);
        // x stays strictly positive: B + cI is primitive and c > 0.
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / scale;
        }
    }
    Err(Error::NoConvergence {
        iterations: cfg.max_iter,
        estimate,
    })
}

/// Largest eigenvalue of a symmetric matrix.
///
/// Diagonal inputs return their largest diagonal entry exactly. Otherwise the
/// matrix is reduced to tridiagonal form by Householder reflections and the
/// top eigenvalue is bracketed by Sturm-count bisection to within `tol`.
pub fn max_eig_symmetric(s: &DenseMatrix, tol: f64) -> Result<f64> {
    s.require_square()?;
    if s.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let n = s.rows();
    let mut asym: f64 = 0.0;
    let mut off_diag_zero = true;
    for r in 0..n {
        for c in (r + 1)..n {
            asym = asym.max((s[(r, c)] - s[(c, r)]).abs());
            off_diag_zero &= s[(r, c)] == 0.0 && s[(c, r)] == 0.0;
        }
    }
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric {
            max_asymmetry: asym,
        });
    }
    if off_diag_zero {
        return Ok(s.diag().into_iter().fold(f64::NEG_INFINITY, f64::max));
    }
    let (d, e) = tridiagonalize(s);
    Ok(tridiagonal_max_eig(&d, &e, tol))
}

/// Householder reduction of the symmetrized input. Returns the diagonal and
/// the sub-diagonal of the similar tridiagonal matrix.
fn tridiagonalize(s: &DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    let n = s.rows();
    let mut a = DenseMatrix::from_fn(n, n, |r, c| 0.5 * (s[(r, c)] + s[(c, r)]));
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let norm = (k + 1..n)
            .map(|i| a[(i, k)] * a[(i, k)])
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v = &mut v[..m];
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = a[(k + 1 + j, k)];
        }
        v[0] -= alpha;
        let vnorm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= vnorm);

        // H A H with H = I - 2 v vᵀ on the trailing block.
        let p = &mut p[..m];
        for (i, pi) in p.iter_mut().enumerate() {
            let row = &a.row(k + 1 + i)[k + 1..];
            *pi = row.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        }
        let kk: f64 = v.iter().zip(p.iter()).map(|(x, y)| x * y).sum();
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi -= kk * vi;
        }
        for i in 0..m {
            let (vi, qi) = (v[i], p[i]);
            let row = &mut a.row_mut(k + 1 + i)[k + 1..];
            for j in 0..m {
                row[j] -= 2.0 * (vi * p[j] + qi * v[j]);
            }
        }
        a[(k + 1, k)] = alpha;
        a[(k, k + 1)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = 0.0;
            a[(k, i)] = 0.0;
        }
    }
    let d = (0..n).map(|i| a[(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] / q };
        q = d[i] - x - off;
        if q == 0.0 {
            q = -f64::EPSILON * (d[i].abs() + x.abs() + f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn tridiagonal_max_eig(d: &[f64], e: &[f64], tol: f64) -> f64 {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius =
            if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - radius);
        hi = hi.max(d[i] + radius);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let floor = 4.0 * f64::EPSILON * scale;
    let width = tol.max(floor);
    // Invariant: count(lo) < n <= count(hi).
    lo -= floor;
    hi += floor;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) >= n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Largest singular value, from the top eigenvalue of the smaller Gram
/// matrix (`AᵀA` or `AAᵀ`).
pub fn spectral_norm(a: &DenseMatrix, tol: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    if a.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let gram = if a.cols() <= a.rows() {
        a.transpose().matmul(a)?
    } else {
        a.matmul(&a.transpose())?
    };
    let gram = gram.sym_part()?;
    let lam = max_eig_symmetric(&gram, tol * tol.min(1.0))?;
    Ok(lam.max(0.0).sqrt())
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(a: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    a.require_square()?;
    let n = a.rows();
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            context: "solve_linear",
            expected: n,
            got: b.len(),
        });
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap_or(col);
        let pivot = m[(pivot_row, col)];
        if pivot.abs() <= PIVOT_TOL {
            return Err(Error::Singular { pivot, column: col });
        }
        if pivot_row != col {
            for c in 0..n {
                let tmp = m[(col, c)];
                m[(col, c)] = m[(pivot_row, c)];
                m[(pivot_row, c)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let factor = m[(r, col)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                m[(r, c)] -= factor * m[(col, c)];
            }
            x[r] -= factor * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut acc = x[r];
        for c in r + 1..n {
            acc -= m[(r, c)] * x[c];
        }
        x[r] = acc / m[(r, r)];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> PowerIterConfig {
        PowerIterConfig::default()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(
            spectral_radius_nonneg(&DenseMatrix::zeros(3, 3), &cfg()).unwrap(),
            0.0
        );
        let a = DenseMatrix::from_rows(&[&[0.0, 0.5], &[0.5, 0.0]]);
        assert_abs_diff_eq!(
            spectral_radius_nonneg(&a, &cfg()).unwrap(),
            0.5,
            epsilon = 1e-10
        );
        let a = DenseMatrix::from_rows(&[&[0.0, 2.0], &[0.0, 0.0]]);
        assert_eq!(spectral_radius_nonneg(&a, &cfg()).unwrap(), 0.0);
    }

    #[test]
    fn spectral_radius_periodic_component() {
        // 3-cycle: eigenvalues are the cube roots of 8, all of modulus 2.
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0], &[4.0, 0.0, 0.0]]);
        assert_abs_diff_eq!(
            spectral_radius_nonneg(&a, &cfg()).unwrap(),
            2.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn spectral_radius_errors() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(matches!(
            spectral_radius_nonneg(&a, &cfg()),
            Err(Error::NotSquare { .. })
        ));
        let a = DenseMatrix::from_rows(&[&[0.0, -1.0], &[0.0, 0.0]]);
        assert!(matches!(
            spectral_radius_nonneg(&a, &cfg()),
            Err(Error::NegativeEntry { row: 0, col: 1, .. })
        ));
        let a = DenseMatrix::from_rows(&[&[0.0, 1.0, 0.3], &[1.0, 0.0, 0.2], &[0.4, 0.7, 0.1]]);
        let tight = PowerIterConfig {
            tol: 1e-14,
            max_iter: 1,
        };
        assert!(matches!(
            spectral_radius_nonneg(&a, &tight),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }

    #[test]
    fn max_eig_examples() {
        let d = DenseMatrix::from_diag(&[1.0, 2.0, 3.0]);
        assert_eq!(max_eig_symmetric(&d, 1e-10).unwrap(), 3.0);
        assert_eq!(
            max_eig_symmetric(&DenseMatrix::zeros(4, 4), 1e-10).unwrap(),
            0.0
        );
        let s = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_abs_diff_eq!(max_eig_symmetric(&s, 1e-12).unwrap(), 1.0, epsilon = 1e-10);
        let s = DenseMatrix::from_rows(&[&[0.0, 1.0], &[1.1, 0.0]]);
        assert!(matches!(
            max_eig_symmetric(&s, 1e-10),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn spectral_norm_examples() {
        let d = DenseMatrix::from_diag(&[-3.0, 2.0]);
        assert_abs_diff_eq!(spectral_norm(&d, 1e-10).unwrap(), 3.0, epsilon = 1e-10);
        let q = DenseMatrix::from_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        assert_abs_diff_eq!(spectral_norm(&q, 1e-10).unwrap(), 1.0, epsilon = 1e-10);
        assert_eq!(
            spectral_norm(&DenseMatrix::zeros(2, 5), 1e-10).unwrap(),
            0.0
        );
        assert!(matches!(
            spectral_norm(&DenseMatrix::zeros(0, 0), 1e-10),
            Err(Error::EmptyMatrix)
        ));
        // All-ones start would miss this one's top singular vector.
        let a = DenseMatrix::from_rows(&[&[1.0, -1.0], &[0.0, 0.0]]);
        assert_abs_diff_eq!(
            spectral_norm(&a, 1e-10).unwrap(),
            2f64.sqrt(),
            epsilon = 1e-10
        );
    }

    #[test]
    fn solve_examples() {
        let x = solve_linear(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        let a = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 4.0]]);
        assert_eq!(solve_linear(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
        let a = DenseMatrix::from_rows(&[&[-1.0, 0.5], &[0.5, -1.0]]);
        let x = solve_linear(&a, &[-1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
        let a = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(matches!(
            solve_linear(&a, &[1.0, 1.0]),
            Err(Error::Singular { .. })
        ));
    }

    #[test]
    fn new_rejects_bad_data() {
        assert!(DenseMatrix::new(2, 2, vec![0.0; 3]).is_err());
        assert!(DenseMatrix::new(1, 1, vec![f64::NAN]).is_err());
    }
}
