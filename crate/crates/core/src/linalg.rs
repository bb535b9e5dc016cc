//! Small dense symmetric linear algebra.
//!
//! Matrices here are tiny (p is the data dimension, rarely above 10), so
//! everything is stored row-major in a flat `Vec<f64>` and the algorithms
//! are the textbook ones: Householder tridiagonalization followed by
//! implicit QL for the symmetric eigenproblem, plain Cholesky, and
//! Gram-Schmidt completion of a single direction to an orthonormal basis.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SqMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SqMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data; `data.len()` must be a perfect square.
    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry {v}")));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_row_major(dim, data)
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let m = Self::from_rows(cols)?;
        Ok(m.transpose())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diag().iter().sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &SqMatrix) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let p = self.dim;
        let mut out = Self::zeros(p);
        for i in 0..p {
            for k in 0..p {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..p {
                    out.data[i * p + j] += a * other.data[k * p + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "matvec dimension mismatch");
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn tr_matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "matvec dimension mismatch");
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        out
    }

    /// `vᵀ · self · v`
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        dot(v, &self.matvec(v))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    pub fn add(&self, other: &SqMatrix) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &SqMatrix) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn outer(u: &[f64], v: &[f64]) -> Self {
        assert_eq!(u.len(), v.len());
        let p = u.len();
        let mut m = Self::zeros(p);
        for i in 0..p {
            for j in 0..p {
                m[(i, j)] = u[i] * v[j];
            }
        }
        m
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute difference between `self[(i,j)]` and `self[(j,i)]`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Self {
        self.add(&self.transpose()).scale(0.5)
    }

    fn check_symmetric(&self) -> Result<()> {
        let asym = self.asymmetry();
        if asym > 1e-12 * self.frobenius_norm().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }
}

impl std::ops::Index<(usize, usize)> for SqMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SqMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl TryFrom<Vec<Vec<f64>>> for SqMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<SqMatrix> for Vec<Vec<f64>> {
    fn from(m: SqMatrix) -> Self {
        m.to_rows()
    }
}

/// A symmetric positive definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SqMatrix", into = "SqMatrix")]
pub struct SpdMatrix(SqMatrix);

impl SpdMatrix {
    pub fn new(m: SqMatrix) -> Result<Self> {
        m.check_symmetric()?;
        cholesky(&m)?;
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(SqMatrix::identity(dim))
    }

    pub fn into_inner(self) -> SqMatrix {
        self.0
    }

    /// Square roots of the diagonal, i.e. the marginal scales ω.
    pub fn scales(&self) -> Vec<f64> {
        self.0.diag().iter().map(|d| d.sqrt()).collect()
    }

    /// ω⁻¹ Ω ω⁻¹, the correlation-scaled version of the matrix.
    pub fn correlation(&self) -> SqMatrix {
        let w = self.scales();
        let p = self.dim();
        let mut c = SqMatrix::zeros(p);
        for i in 0..p {
            for j in 0..p {
                c[(i, j)] = self.0[(i, j)] / (w[i] * w[j]);
            }
        }
        c
    }
}

impl Deref for SpdMatrix {
    type Target = SqMatrix;
    fn deref(&self) -> &SqMatrix {
        &self.0
    }
}

impl TryFrom<SqMatrix> for SpdMatrix {
    type Error = Error;
    fn try_from(m: SqMatrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<SpdMatrix> for SqMatrix {
    fn from(m: SpdMatrix) -> Self {
        m.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Output of [`sym_eigen`]: `A = vectors · diag(values) · vectorsᵀ`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Orthogonal matrix whose columns are eigenvectors.
    pub vectors: SqMatrix,
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
}

/// Symmetric eigendecomposition via Householder tridiagonalization and
/// implicit QL. Eigenvalues come back ascending, and each eigenvector is
/// signed so that its first nonzero entry is positive.
pub fn sym_eigen(a: &SqMatrix) -> Result<SymEigen> {
    a.check_symmetric()?;
    let n = a.dim();
    if n == 0 {
        return Ok(SymEigen {
            vectors: SqMatrix::zeros(0),
            values: vec![],
        });
    }
    let mut v = a.symmetrized().to_rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = SqMatrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        let mut vec: Vec<f64> = (0..n).map(|r| v[r][src]).collect();
        let first = vec.iter().copied().find(|x| x.abs() > 1e-14).unwrap_or(1.0);
        if first < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        for (r, x) in vec.into_iter().enumerate() {
            vectors[(r, col)] = x;
        }
    }
    Ok(SymEigen { vectors, values })
}

// Householder reduction to tridiagonal form (after the public-domain JAMA routine).
fn tred2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[n - 1][j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

// Implicit QL on the tridiagonal form, accumulating rotations into `v`.
fn tql2(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    let max_iter = 30 * n.max(1);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(Error::NoConvergence(max_iter));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Symmetric positive square root `A^{1/2}`.
pub fn spd_sqrt(a: &SqMatrix) -> Result<SqMatrix> {
    spd_power(a, 0.5)
}

/// Inverse of the symmetric positive square root, `A^{-1/2}`.
pub fn spd_sqrt_inv(a: &SqMatrix) -> Result<SqMatrix> {
    spd_power(a, -0.5)
}

fn spd_power(a: &SqMatrix, power: f64) -> Result<SqMatrix> {
    let eig = sym_eigen(a)?;
    if let Some(&bad) = eig.values.iter().find(|&&l| l <= 0.0) {
        return Err(Error::NotPositiveDefinite(format!("eigenvalue {bad:e}")));
    }
    let p = a.dim();
    let q = &eig.vectors;
    let mut out = SqMatrix::zeros(p);
    for (k, &lam) in eig.values.iter().enumerate() {
        let s = lam.powf(power);
        for i in 0..p {
            let qik = q[(i, k)] * s;
            for j in 0..p {
                out[(i, j)] += qik * q[(j, k)];
            }
        }
    }
    Ok(out.symmetrized())
}

/// Lower-triangular Cholesky factor `L` with `L·Lᵀ = A` and a positive diagonal.
pub fn cholesky(a: &SqMatrix) -> Result<SqMatrix> {
    a.check_symmetric()?;
    let p = a.dim();
    let mut l = SqMatrix::zeros(p);
    for j in 0..p {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NotPositiveDefinite(format!("pivot {j} = {s:e}")));
        }
        let ljj = s.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..p {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// A Cholesky factorization kept around for repeated solves.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: SqMatrix,
}

impl Cholesky {
    pub fn new(a: &SqMatrix) -> Result<Self> {
        Ok(Self { l: cholesky(a)? })
    }

    /// Wraps an existing lower-triangular factor with positive diagonal.
    pub fn from_factor(l: SqMatrix) -> Self {
        Self { l }
    }

    pub fn factor(&self) -> &SqMatrix {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diag().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let p = self.l.dim();
        let mut y = b.to_vec();
        for i in 0..p {
            let mut s = y[i];
            let row = self.l.row(i);
            for k in 0..i {
                s -= row[k] * y[k];
            }
            y[i] = s / row[i];
        }
        y
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.l.dim();
        let mut x = self.solve_lower(b);
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in i + 1..p {
                s -= self.l[(k, i)] * x[k];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `bᵀ A⁻¹ b`
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        let y = self.solve_lower(b);
        dot(&y, &y)
    }

    pub fn inverse(&self) -> SqMatrix {
        let p = self.l.dim();
        let mut cols = Vec::with_capacity(p);
        for j in 0..p {
            let mut e = vec![0.0; p];
            e[j] = 1.0;
            cols.push(self.solve(&e));
        }
        SqMatrix::from_columns(&cols)
            .expect("square by construction")
            .symmetrized()
    }
}

/// Completes `v` to an orthonormal basis by Gram-Schmidt.
///
/// The first column is `v/‖v‖`. The remaining columns come from the
/// canonical vectors `e_j` taken in increasing `j`, skipping the index of
/// the largest-magnitude entry of `v` (ties resolved to the lowest index).
pub fn orthonormal_basis_from(v: &[f64]) -> Result<SqMatrix> {
    let p = v.len();
    let nv = norm(v);
    if !(nv > 0.0) || !nv.is_finite() {
        return Err(Error::InvalidParameter(
            "cannot build a basis from a zero vector".into(),
        ));
    }
    let mut k = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[k].abs() {
            k = i;
        }
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    basis.push(v.iter().map(|x| x / nv).collect());
    for j in (0..p).filter(|&j| j != k) {
        let mut u = vec![0.0; p];
        u[j] = 1.0;
        // Two passes of modified Gram-Schmidt keep orthogonality at machine precision.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &u);
                for (ui, bi) in u.iter_mut().zip(b) {
                    *ui -= c * bi;
                }
            }
        }
        let nu = norm(&u);
        basis.push(u.iter().map(|x| x / nu).collect());
    }
    SqMatrix::from_columns(&basis)
}
