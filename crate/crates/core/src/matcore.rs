//! Dense real matrix and vector kernel.
//!
//! Everything in this crate works on systems with at most a handful of
//! states, so the routines here are straightforward row-major loops with
//! deterministic iteration order. No blocking, no BLAS.

use std::fmt;
use std::ops::{Deref, Index, IndexMut};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Relative asymmetry above which a matrix handed to the symmetric
/// routines is rejected instead of symmetrized.
pub const ASYMMETRY_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major matrix of finite doubles.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Dense vector of finite doubles.
#[derive(Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::dim(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(nrows, ncols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Single-column matrix.
    pub fn column(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self += s * other`, in place.
    pub fn axpy(&mut self, s: f64, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!("axpy of {:?} into {:?}", other.shape(), self.shape())));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
        Ok(())
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dim(format!(
                "elementwise op on {:?} and {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vector> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "{}x{} matrix times vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok(Vector(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_entry(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    /// `[[a, b], [c, d]]` with compatible block shapes.
    pub fn block2x2(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<Self> {
        if a.rows != b.rows || c.rows != d.rows || a.cols != c.cols || b.cols != d.cols {
            return Err(Error::dim("incompatible block shapes"));
        }
        let mut m = Self::zeros(a.rows + c.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(0, a.cols, b);
        m.set_block(a.rows, 0, c);
        m.set_block(a.rows, a.cols, d);
        Ok(m)
    }

    pub fn block_diag(a: &Matrix, b: &Matrix) -> Self {
        let mut m = Self::zeros(a.rows + b.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(a.rows, a.cols, b);
        m
    }

    /// Largest `|s_ij - s_ji|` relative to the largest entry.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / scale
    }

    /// `(s + sᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        let mut s = self.clone();
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let m = 0.5 * (self[(i, j)] + self[(j, i)]);
                s[(i, j)] = m;
                s[(j, i)] = m;
            }
        }
        s
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{:?}", self.to_rows())
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Matrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

impl Vector {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self(v))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.0)
    }
}

impl Deref for Vector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Vector{:?}", self.0)
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Vector::new(Vec::<f64>::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn mat_mul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::dim(format!(
            "product of {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut c = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..b.cols {
                c[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    Ok(c)
}

/// Solves `a v = b` by Gaussian elimination with partial (row) pivoting.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vector> {
    let n = a.rows;
    if !a.is_square() {
        return Err(Error::dim(format!("solve with non-square {}x{} matrix", a.rows, a.cols)));
    }
    if b.len() != n {
        return Err(Error::dim(format!("right-hand side of length {} for order {n}", b.len())));
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Err(Error::Singular { column: 0, pivot: 0.0 });
    }
    let mut m = a.clone();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let (piv, pmax) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= PIVOT_TOL * scale {
            return Err(Error::Singular { column: col, pivot: pmax });
        }
        if piv != col {
            for j in 0..n {
                m.data.swap(piv * n + j, col * n + j);
            }
            rhs.swap(piv, col);
        }
        let d = m[(col, col)];
        for r in (col + 1)..n {
            let f = m[(r, col)] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= f * m[(col, j)];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let mut v = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|j| m[(i, j)] * v[j]).sum();
        v[i] = (rhs[i] - s) / m[(i, i)];
    }
    Vector::new(v)
}

fn checked_symmetric(s: &Matrix) -> Result<Matrix> {
    if !s.is_square() {
        return Err(Error::dim(format!("expected a square matrix, got {}x{}", s.rows, s.cols)));
    }
    let asym = s.relative_asymmetry();
    if asym > ASYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    Ok(s.symmetrized())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as the columns of the second value.
pub fn sym_eigen(s: &Matrix) -> Result<(Vector, Matrix)> {
    let mut a = checked_symmetric(s)?;
    let n = a.rows;
    let mut v = Matrix::identity(n);
    let scale = a.norm_fro();
    if scale > 0.0 {
        for _ in 0..JACOBI_MAX_SWEEPS {
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off <= 1e-15 * scale {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq.abs() <= f64::MIN_POSITIVE {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let sn = t * c;
                    // A <- Jᵀ A J
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - sn * akq;
                        a[(k, q)] = sn * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - sn * aqk;
                        a[(q, k)] = sn * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - sn * vkq;
                        v[(k, q)] = sn * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[(k, dst)] = v[(k, src)];
        }
    }
    Ok((Vector::new(values)?, vectors))
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(s: &Matrix) -> Result<f64> {
    let (vals, _) = sym_eigen(s)?;
    Ok(vals.last().copied().unwrap_or(0.0))
}

/// Induced 2-norm, `sqrt(λ_max(aᵀa))`.
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.max_abs() == 0.0 {
        return 0.0;
    }
    let ata = mat_mul(&a.transpose(), a).expect("shapes agree by construction");
    // aᵀa is symmetric up to rounding
    let lm = lambda_max(&ata.symmetrized()).expect("square symmetric by construction");
    lm.max(0.0).sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive definite
/// matrix, or `None` if a non-positive pivot shows up.
pub fn cholesky(s: &Matrix) -> Option<Matrix> {
    if !s.is_square() {
        return None;
    }
    let n = s.rows;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = s[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut v = s[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / d;
        }
    }
    Some(l)
}

/// Solves `l lᵀ x = b` given the Cholesky factor `l`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    x
}

/// Inverse of a symmetric positive definite matrix from its Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let n = l.rows;
    let mut inv = Matrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|x| *x = 0.0);
        e[j] = 1.0;
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv.symmetrized()
}

/// True iff `λ_max(s) <= -margin`. Non-square or strongly asymmetric
/// input is never reported as negative definite.
pub fn is_negative_definite(s: &Matrix, margin: f64) -> bool {
    match lambda_max(s) {
        Ok(lm) => lm <= -margin,
        Err(_) => false,
    }
}

/// Numerical rank via Gaussian elimination with full pivoting.
pub fn rank(a: &Matrix, rel_tol: f64) -> usize {
    let mut m = a.clone();
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0;
    }
    let (rows, cols) = m.shape();
    let mut r = 0;
    for col in 0..cols {
        if r == rows {
            break;
        }
        let (piv, pmax) = (r..rows)
            .map(|i| (i, m[(i, col)].abs()))
            .fold((r, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax <= rel_tol * scale {
            continue;
        }
        for j in 0..cols {
            let tmp = m[(piv, j)];
            m[(piv, j)] = m[(r, j)];
            m[(r, j)] = tmp;
        }
        for i in (r + 1)..rows {
            let f = m[(i, col)] / m[(r, col)];
            for j in col..cols {
                m[(i, j)] -= f * m[(r, j)];
            }
        }
        r += 1;
    }
    r
}
