use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SqMatrix;

/// An n×p table of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Sample {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn from_flat(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptySample);
        }
        if data.len() != n * p {
            return Err(Error::DimensionMismatch {
                expected: n * p,
                got: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "row {}, column {}",
                i / p,
                i % p
            )));
        }
        Ok(Self { n, p, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(n * p);
        for r in &rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(n, p, data)
    }

    /// Builds a sample from a row generator; used by the samplers, whose
    /// output is finite by construction except for overflow in extreme tails.
    pub(crate) fn from_fn<F: FnMut(&mut [f64])>(n: usize, p: usize, mut fill: F) -> Result<Self> {
        let mut data = vec![0.0; n * p];
        for row in data.chunks_exact_mut(p) {
            fill(row);
        }
        Self::from_flat(n, p, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.p)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.p];
        for r in self.rows() {
            for (a, b) in m.iter_mut().zip(r) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Covariance with divisor n.
    pub fn covariance(&self) -> SqMatrix {
        let mean = self.mean();
        let p = self.p;
        let mut c = SqMatrix::zeros(p);
        for r in self.rows() {
            for i in 0..p {
                let di = r[i] - mean[i];
                for j in 0..=i {
                    c[(i, j)] += di * (r[j] - mean[j]);
                }
            }
        }
        for i in 0..p {
            for j in 0..=i {
                let v = c[(i, j)] / self.n as f64;
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        c
    }

    /// Rows mapped by `x ↦ A (x - shift)`.
    pub fn affine(&self, a: &SqMatrix, shift: &[f64]) -> Result<Sample> {
        if a.dim() != self.p || shift.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: a.dim().max(shift.len()),
            });
        }
        let mut data = Vec::with_capacity(self.data.len());
        let mut centred = vec![0.0; self.p];
        for src in self.rows() {
            for k in 0..self.p {
                centred[k] = src[k] - shift[k];
            }
            data.extend(a.matvec(&centred));
        }
        Sample::from_flat(self.n, self.p, data)
    }

    pub fn translate(&self, by: &[f64]) -> Result<Sample> {
        if by.len() != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: by.len(),
            });
        }
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.p) {
            for (v, b) in row.iter_mut().zip(by) {
                *v += b;
            }
        }
        Sample::from_flat(self.n, self.p, data)
    }

    /// Projection of every row onto `u`.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        self.rows().map(|r| crate::linalg::dot(r, u)).collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Sample {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Sample::from_rows(rows)
    }
}

impl From<Sample> for Vec<Vec<f64>> {
    fn from(s: Sample) -> Self {
        s.to_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Sample::from_rows(vec![]), Err(Error::EmptySample));
        assert!(Sample::from_rows(vec![vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(matches!(
            Sample::from_rows(vec![vec![1.0, f64::NAN]]),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn moments_and_affine() {
        let s = Sample::from_rows(vec![vec![1.0, 2.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(s.mean(), vec![2.0, 4.0]);
        let c = s.covariance();
        assert_eq!(c.to_rows(), vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        let a = SqMatrix::from_rows(&[vec![0.0, 1.0], vec![2.0, 0.0]]).unwrap();
        let t = s.affine(&a, &[1.0, 2.0]).unwrap();
        assert_eq!(t.to_rows(), vec![vec![0.0, 0.0], vec![4.0, 4.0]]);
    }
}
