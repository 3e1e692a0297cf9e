//! Small dense real linear algebra: products, least squares on a column
//! subset, and extreme eigenvalues of symmetric matrices.
//!
//! Matrices are stored row-major. Nothing here tries to be fast on large
//! problems; the solver and the RIC enumeration only ever touch matrices of a
//! few thousand entries and Gram blocks of order at most a few dozen.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!(
                "non-finite entry at row {}, column {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(Error::validation(format!(
                "row {i} has {} entries, expected {n_cols}",
                rows[i].len()
            )));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub(crate) fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// `<phi_j, v>` without materializing the column.
    pub fn column_dot(&self, j: usize, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.rows);
        v.iter()
            .enumerate()
            .map(|(i, vi)| self.data[i * self.cols + j] * vi)
            .sum()
    }

    pub fn column_norm_sq(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j).powi(2)).sum()
    }

    /// `A' r`
    pub fn transpose_matvec(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.rows {
            return Err(Error::validation(format!(
                "vector of length {} cannot multiply the transpose of a {}x{} matrix",
                r.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, ri) in r.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * ri;
            }
        }
        Ok(out)
    }

    /// Gram block `A_S' A_S` for the given column subset.
    pub fn gram(&self, subset: &[usize]) -> DenseMatrix {
        let s = subset.len();
        let cols: Vec<Vec<f64>> = subset.iter().map(|&j| self.column(j)).collect();
        let mut data = vec![0.0; s * s];
        for a in 0..s {
            for b in a..s {
                let v = dot(&cols[a], &cols[b]);
                data[a * s + b] = v;
                data[b * s + a] = v;
            }
        }
        DenseMatrix {
            rows: s,
            cols: s,
            data,
        }
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    pub(crate) fn scale_column(&mut self, j: usize, c: f64) {
        for i in 0..self.rows {
            self.data[i * self.cols + j] *= c;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn matvec(a: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != a.cols {
        return Err(Error::validation(format!(
            "vector of length {} cannot multiply a {}x{} matrix",
            x.len(),
            a.rows,
            a.cols
        )));
    }
    Ok((0..a.rows).map(|i| dot(a.row(i), x)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    /// Coefficients in the order of the support passed in.
    pub coeffs: Vec<f64>,
    pub residual: Vec<f64>,
}

/// Relative rank threshold against the largest column norm of `A_S`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Minimizes `||y - A_S c||_2` by Householder QR of the selected columns.
pub fn least_squares_on_support(
    a: &DenseMatrix,
    y: &[f64],
    support: &[usize],
) -> Result<LeastSquares> {
    let m = a.rows;
    if y.len() != m {
        return Err(Error::validation(format!(
            "measurement vector has length {}, matrix has {m} rows",
            y.len()
        )));
    }
    validate_index_set(support, a.cols)?;
    let s = support.len();
    if s == 0 {
        return Ok(LeastSquares {
            coeffs: Vec::new(),
            residual: y.to_vec(),
        });
    }
    if s > m {
        return Err(Error::degenerate(support));
    }

    // column-major working copy of A_S
    let mut q: Vec<Vec<f64>> = support.iter().map(|&j| a.column(j)).collect();
    let max_norm = q.iter().map(|c| norm(c)).fold(0.0, f64::max);
    let tol = RANK_TOLERANCE * max_norm;
    let mut qty = y.to_vec();
    let mut diag = vec![0.0; s];

    for j in 0..s {
        let alpha = norm(&q[j][j..]);
        if alpha <= tol {
            return Err(Error::degenerate(support));
        }
        let r_jj = if q[j][j] > 0.0 { -alpha } else { alpha };
        // v = x - r_jj e_1, stored in place of column j below the diagonal
        let mut v = q[j][j..].to_vec();
        v[0] -= r_jj;
        let v_norm_sq = norm_sq(&v);
        diag[j] = r_jj;
        if v_norm_sq > 0.0 {
            for col in q.iter_mut().skip(j + 1) {
                let f = 2.0 * dot(&v, &col[j..]) / v_norm_sq;
                for (c, vi) in col[j..].iter_mut().zip(&v) {
                    *c -= f * vi;
                }
            }
            let f = 2.0 * dot(&v, &qty[j..]) / v_norm_sq;
            for (c, vi) in qty[j..].iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
    }

    let mut coeffs = vec![0.0; s];
    for j in (0..s).rev() {
        let mut acc = qty[j];
        for (l, c) in coeffs.iter().enumerate().skip(j + 1) {
            acc -= q[l][j] * c;
        }
        coeffs[j] = acc / diag[j];
    }

    let mut residual = y.to_vec();
    for (c, &j) in coeffs.iter().zip(support) {
        for (i, r) in residual.iter_mut().enumerate() {
            *r -= a.get(i, j) * c;
        }
    }
    Ok(LeastSquares { coeffs, residual })
}

pub(crate) fn validate_index_set(set: &[usize], bound: usize) -> Result<()> {
    for (pos, &i) in set.iter().enumerate() {
        if i >= bound {
            return Err(Error::validation(format!(
                "index {i} out of range [0, {bound})"
            )));
        }
        if set[..pos].contains(&i) {
            return Err(Error::validation(format!(
                "index {i} appears more than once"
            )));
        }
    }
    Ok(())
}

/// Smallest and largest eigenvalues of a symmetric matrix, by cyclic Jacobi.
pub fn extreme_eigenvalues(g: &DenseMatrix) -> Result<(f64, f64)> {
    let n = g.rows;
    if g.cols != n {
        return Err(Error::validation(format!(
            "eigenvalues need a square matrix, got {}x{}",
            g.rows, g.cols
        )));
    }
    let scale = g.data.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (g.get(i, j) - g.get(j, i)).abs() > 1e-12 * scale {
                return Err(Error::validation(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let eig = symmetric_eigenvalues(g);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

fn symmetric_eigenvalues(g: &DenseMatrix) -> Vec<f64> {
    let n = g.rows;
    let mut a: Vec<f64> = g.data.clone();
    // symmetrize away sub-tolerance asymmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = v;
            a[j * n + i] = v;
        }
    }
    let total: f64 = a.iter().map(|v| v * v).sum();
    let target = (f64::EPSILON * f64::EPSILON) * total;

    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j].powi(2))
            .sum();
        if off <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}

fn parse_err(path: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        message: message.into(),
    }
}

fn parse_number(path: &str, line_no: usize, field: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        parse_err(
            path,
            format!("line {line_no}: not a number: {:?}", field.trim()),
        )
    })?;
    if !v.is_finite() {
        return Err(parse_err(path, format!("line {line_no}: non-finite value")));
    }
    Ok(v)
}

/// Parses the headerless matrix CSV format: one row per line.
pub fn parse_matrix_csv(text: &str, origin: &str) -> Result<DenseMatrix> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|f| parse_number(origin, idx + 1, f))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(origin, "no rows"));
    }
    DenseMatrix::from_rows(&rows).map_err(|e| parse_err(origin, e.to_string()))
}

/// Parses the vector format: one value per line.
pub fn parse_vector(text: &str, origin: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(idx, l)| parse_number(origin, idx + 1, l))
        .collect()
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix_csv(&text, &path.display().to_string())
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    parse_vector(&text, &path.display().to_string())
}

pub fn vector_to_text(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}
