//! Dense row-major matrices and the handful of factorizations the rest of the
//! crate needs: one-sided Jacobi SVD, pseudo-inverse least squares, and the
//! mean-zero separation functionals `psi_m` / `psi1_m`.

use std::fmt;

use crate::error::{Error, Result};
use crate::lp::{Constraint, LinearProgram, LpStatus};

/// Sweep cap for the Jacobi SVD.
pub const JACOBI_MAX_SWEEPS: usize = 60;
/// Relative off-diagonal tolerance for the Jacobi SVD.
pub const JACOBI_TOL: f64 = 1e-12;
/// Relative threshold below which a singular value counts as zero in
/// [`least_squares`].
pub const RANK_TOL: f64 = 1e-10;
/// Largest row count accepted by [`psi1_m`] (sign-pattern enumeration).
pub const PSI1_MAX_DIM: usize = 12;

/// Row-major real matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
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
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has length {} but expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension(format!(
                "shape mismatch {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Submatrix made of the given rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    /// Submatrix made of the given columns, in the given order.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.rows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum over rows of the row's l1 norm.
    pub fn norm_inf1(&self) -> Result<f64> {
        norm_inf1(self)
    }

    /// Largest absolute entry.
    pub fn norm_inf_inf(&self) -> Result<f64> {
        norm_inf_inf(self)
    }
}

fn require_nonempty(m: &DenseMatrix) -> Result<()> {
    if m.is_empty() {
        Err(Error::Dimension(format!(
            "empty {}x{} matrix",
            m.rows, m.cols
        )))
    } else {
        Ok(())
    }
}

/// `||M||_{inf,1}`: the maximum l1 norm among the rows.
pub fn norm_inf1(m: &DenseMatrix) -> Result<f64> {
    require_nonempty(m)?;
    Ok((0..m.rows)
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max))
}

/// `||M||_{inf,inf}`: the maximum absolute entry.
pub fn norm_inf_inf(m: &DenseMatrix) -> Result<f64> {
    require_nonempty(m)?;
    Ok(m.data.iter().fold(0.0, |acc, v| acc.max(v.abs())))
}

/// Thin singular value decomposition `M = U diag(s) V^T` with `s` descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// One-sided Jacobi on the columns of a tall matrix given column-major.
/// Returns (orthogonalized columns, accumulated right rotations).
fn jacobi_columns(mut cols: Vec<Vec<f64>>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let n = cols.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
                let (lo, hi) = v.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
            }
        }
        if !rotated {
            return Ok((cols, v));
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi SVD did not converge in {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

/// Thin SVD by one-sided Jacobi, orthogonalizing along the smaller dimension.
pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    require_nonempty(m)?;
    if m.rows < m.cols {
        let t = svd(&m.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let (rows, cols) = m.shape();
    let columns: Vec<Vec<f64>> = (0..cols).map(|j| m.col(j)).collect();
    let (g, v) = jacobi_columns(columns)?;

    let norms: Vec<f64> = g
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    // Stable sort keeps the original column order among equal values.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let mut u = DenseMatrix::zeros(rows, cols);
    let mut vm = DenseMatrix::zeros(cols, cols);
    let mut s = Vec::with_capacity(cols);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        if sigma > 0.0 {
            for i in 0..rows {
                u.set(i, k, g[j][i] / sigma);
            }
        }
        for i in 0..cols {
            vm.set(i, k, v[j][i]);
        }
    }
    Ok(Svd { u, s, v: vm })
}

/// Singular values in descending order; length `min(rows, cols)`.
pub fn singular_values(m: &DenseMatrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.s)
}

/// Orthonormal (Helmert) basis of `{a in R^m : a^T 1 = 0}` as an `m x (m-1)`
/// matrix. Column `k` is `(1, .., 1, -(k+1), 0, ..) / sqrt((k+1)(k+2))`.
pub fn helmert_basis(m: usize) -> DenseMatrix {
    let mut q = DenseMatrix::zeros(m, m.saturating_sub(1));
    for k in 0..m.saturating_sub(1) {
        let kk = (k + 1) as f64;
        let norm = (kk * (kk + 1.0)).sqrt();
        for i in 0..=k {
            q.set(i, k, 1.0 / norm);
        }
        q.set(k + 1, k, -kk / norm);
    }
    q
}

fn check_psi_shape(p: &DenseMatrix) -> Result<()> {
    require_nonempty(p)?;
    if p.rows < 2 {
        return Err(Error::Dimension(
            "psi is undefined for a single row (no nonzero mean-zero direction)".into(),
        ));
    }
    if p.cols < p.rows {
        return Err(Error::Dimension(format!(
            "psi needs cols >= rows, got {}x{}",
            p.rows, p.cols
        )));
    }
    Ok(())
}

/// `inf_{a != 0, a^T 1 = 0} ||a^T P||_2 / ||a||_2`, computed as the smallest
/// singular value of `Q^T P` with `Q` the Helmert basis.
pub fn psi_m(p: &DenseMatrix) -> Result<f64> {
    check_psi_shape(p)?;
    let q = helmert_basis(p.rows);
    let projected = q.transpose().matmul(p)?;
    let s = singular_values(&projected)?;
    Ok(*s.last().expect("nonempty"))
}

/// `inf_{a != 0, a^T 1 = 0} ||a^T P||_1 / ||a||_1`.
///
/// On the feasible set normalized to `||a||_1 = 1` the positive and negative
/// parts of `a` each sum to 1/2. Fixing which rows may carry positive weight
/// turns the problem into an LP; the minimum over the `2^(m-1) - 1` sign
/// splits (up to the global sign flip) is exact.
pub fn psi1_m(p: &DenseMatrix) -> Result<f64> {
    check_psi_shape(p)?;
    let m = p.rows;
    if m > PSI1_MAX_DIM {
        return Err(Error::Dimension(format!(
            "psi1_m limited to m <= {PSI1_MAX_DIM}, got {m}"
        )));
    }
    let n = p.cols;
    let mut best = f64::INFINITY;
    // Row m-1 always sits on the negative side; `mask` picks the positive rows.
    for mask in 1u32..(1u32 << (m - 1)) {
        let pos: Vec<usize> = (0..m - 1).filter(|i| mask & (1 << i) != 0).collect();
        let neg: Vec<usize> = (0..m).filter(|i| *i == m - 1 || mask & (1 << i) == 0).collect();
        let weights = pos.len() + neg.len();
        let nvars = weights + n;
        let mut objective = vec![0.0; nvars];
        for c in objective.iter_mut().skip(weights) {
            *c = 1.0;
        }
        let mut lp = LinearProgram::new(objective);
        for c in 0..n {
            let mut upper = Vec::with_capacity(weights + 1);
            let mut lower = Vec::with_capacity(weights + 1);
            for (k, &i) in pos.iter().enumerate() {
                upper.push((k, p.get(i, c)));
                lower.push((k, -p.get(i, c)));
            }
            for (k, &i) in neg.iter().enumerate() {
                upper.push((pos.len() + k, -p.get(i, c)));
                lower.push((pos.len() + k, p.get(i, c)));
            }
            upper.push((weights + c, -1.0));
            lower.push((weights + c, -1.0));
            lp.add(Constraint::sparse_le(upper, 0.0));
            lp.add(Constraint::sparse_le(lower, 0.0));
        }
        lp.add(Constraint::sparse_eq((0..pos.len()).map(|k| (k, 1.0)).collect(), 0.5));
        lp.add(Constraint::sparse_eq(
            (pos.len()..weights).map(|k| (k, 1.0)).collect(),
            0.5,
        ));
        let sol = lp.solve()?;
        if sol.status != LpStatus::Optimal {
            return Err(Error::Numeric(format!(
                "psi1 sign-split LP ended with status {:?}",
                sol.status
            )));
        }
        best = best.min(sol.objective_value.max(0.0));
    }
    Ok(best)
}

/// Least-squares solution `X = A^+ B` for a full-column-rank `A`.
pub fn least_squares(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    require_nonempty(a)?;
    if a.rows != b.rows {
        return Err(Error::Dimension(format!(
            "least squares: A has {} rows but B has {}",
            a.rows, b.rows
        )));
    }
    if a.rows < a.cols {
        return Err(Error::Singular {
            sigma_min: 0.0,
            block: None,
        });
    }
    let dec = svd(a)?;
    let smax = dec.s[0];
    let smin = *dec.s.last().expect("nonempty");
    if smax == 0.0 || smin <= RANK_TOL * smax {
        return Err(Error::Singular {
            sigma_min: smin,
            block: None,
        });
    }
    // X = V diag(1/s) U^T B
    let utb = dec.u.transpose().matmul(b)?;
    let mut scaled = utb;
    for (k, sigma) in dec.s.iter().enumerate() {
        for v in scaled.row_mut(k) {
            *v /= sigma;
        }
    }
    dec.v.matmul(&scaled)
}
