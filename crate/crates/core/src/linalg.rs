//! Small dense row-major matrices.
//!
//! The matrices in this crate are covariance and correlation matrices of a
//! handful of assets, so everything here is the textbook O(n^3) algorithm
//! with no blocking.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::de::{Deserialize, Deserializer, Error as _};
use serde::ser::{Serialize, SerializeSeq, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[S]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a row-major buffer.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[S]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Matrix {
            rows,
            cols,
            data: data.to_vec(),
        })
    }

    /// Builds a matrix from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
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
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: rhs.rows,
            });
        }
        Ok(Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * rhs[(k, j)]).sum()
        }))
    }

    pub fn mul_vec(&self, v: &[S]) -> Result<Vec<S>> {
        if self.cols != v.len() {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect())
    }

    /// Largest absolute element-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> S {
        self.data
            .iter()
            .zip(&other.data)
            .fold(S::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn determinant(&self) -> Result<S> {
        self.require_square()?;
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = S::one();
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&p, &q| {
                    a[p * n + k]
                        .abs()
                        .partial_cmp(&a[q * n + k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if a[pivot * n + k] == S::zero() {
                return Ok(S::zero());
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                }
                det = -det;
            }
            let akk = a[k * n + k];
            det = det * akk;
            for i in k + 1..n {
                let factor = a[i * n + k] / akk;
                if factor == S::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let v = a[k * n + j];
                    a[i * n + j] = a[i * n + j] - factor * v;
                }
            }
        }
        Ok(det)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    ///
    /// Returns `None` when a pivot vanishes.
    pub fn inverse(&self) -> Result<Option<Self>> {
        self.require_square()?;
        let n = self.rows;
        let mut a = self.data.clone();
        let mut inv = Self::identity(n).data;
        for k in 0..n {
            let pivot = (k..n)
                .max_by(|&p, &q| {
                    a[p * n + k]
                        .abs()
                        .partial_cmp(&a[q * n + k].abs())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .unwrap_or(k);
            if a[pivot * n + k] == S::zero() {
                return Ok(None);
            }
            if pivot != k {
                for j in 0..n {
                    a.swap(k * n + j, pivot * n + j);
                    inv.swap(k * n + j, pivot * n + j);
                }
            }
            let akk = a[k * n + k];
            for j in 0..n {
                a[k * n + j] = a[k * n + j] / akk;
                inv[k * n + j] = inv[k * n + j] / akk;
            }
            for i in 0..n {
                if i == k {
                    continue;
                }
                let factor = a[i * n + k];
                if factor == S::zero() {
                    continue;
                }
                for j in 0..n {
                    let (ak, ik) = (a[k * n + j], inv[k * n + j]);
                    a[i * n + j] = a[i * n + j] - factor * ak;
                    inv[i * n + j] = inv[i * n + j] - factor * ik;
                }
            }
        }
        Ok(Some(Matrix {
            rows: n,
            cols: n,
            data: inv,
        }))
    }

    /// Lower Cholesky factor `L` with `L L^T = self`, or `None` when the
    /// matrix is not numerically positive definite.
    pub fn cholesky(&self) -> Result<Option<Self>> {
        self.require_square()?;
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if d <= S::zero() || !d.is_finite() {
                return Ok(None);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Some(l))
    }

    /// Solves `self x = b` given that `self` is symmetric positive definite.
    pub fn solve_spd(&self, b: &[S]) -> Result<Option<Vec<S>>> {
        let Some(l) = self.cholesky()? else {
            return Ok(None);
        };
        let n = self.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: b.len(),
            });
        }
        let mut y = vec![S::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - l[(i, k)] * y[k];
            }
            y[i] = s / l[(i, i)];
        }
        let mut x = vec![S::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s = s - l[(k, i)] * x[k];
            }
            x[i] = s / l[(i, i)];
        }
        Ok(Some(x))
    }

    /// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
    /// ascending. Only the upper triangle is read.
    pub fn symmetric_eigenvalues(&self) -> Result<Vec<S>> {
        self.require_square()?;
        let n = self.rows;
        let mut a = Self::from_fn(n, n, |i, j| if i <= j { self[(i, j)] } else { self[(j, i)] });
        let eps = S::epsilon();
        for _sweep in 0..100 {
            let mut off = S::zero();
            let mut diag = S::zero();
            for i in 0..n {
                diag = diag + a[(i, i)] * a[(i, i)];
                for j in i + 1..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= eps * eps * diag || off == S::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == S::zero() {
                        continue;
                    }
                    let two = S::lit(2.0);
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + S::one()).sqrt());
                    let c = S::one() / (t * t + S::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut eig: Vec<S> = (0..n).map(|i| a[(i, i)]).collect();
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        Ok(eig)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl<S: fmt::Debug> fmt::Debug for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut list = f.debug_list();
        for i in 0..self.rows {
            list.entry(&&self.data[i * self.cols..(i + 1) * self.cols]);
        }
        list.finish()
    }
}

// Serialized as a list of rows.
impl<S: Scalar> Serialize for Matrix<S> {
    fn serialize<Ser: Serializer>(&self, serializer: Ser) -> Result<Ser::Ok, Ser::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

impl<'de, S: Scalar> Deserialize<'de> for Matrix<S> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<S>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn determinant_of_known_matrices() {
        assert_eq!(Matrix::<f64>::identity(4).determinant().unwrap(), 1.0);
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        assert!((a.determinant().unwrap() - 3.0).abs() < 1e-15);
        let b = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(b.determinant().unwrap(), -1.0);
        let singular = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert_eq!(singular.determinant().unwrap(), 0.0);
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = m(&[&[4.0, 1.0, 0.5], &[1.0, 3.0, 0.2], &[0.5, 0.2, 2.0]]);
        let inv = a.inverse().unwrap().unwrap();
        let prod = a.matmul(&inv).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-14);
        assert!(m(&[&[1.0, 1.0], &[1.0, 1.0]]).inverse().unwrap().is_none());
    }

    #[test]
    fn cholesky_and_solve() {
        let a = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let x = a.solve_spd(&[2.0, 1.0]).unwrap().unwrap();
        let back = a.mul_vec(&x).unwrap();
        assert!((back[0] - 2.0).abs() < 1e-14 && (back[1] - 1.0).abs() < 1e-14);
        assert!(m(&[&[1.0, 2.0], &[2.0, 1.0]]).cholesky().unwrap().is_none());
    }

    #[test]
    fn jacobi_eigenvalues() {
        let a = m(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let e = a.symmetric_eigenvalues().unwrap();
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let c = m(&[&[1.0, 0.5, 0.5], &[0.5, 1.0, 0.5], &[0.5, 0.5, 1.0]]);
        let e = c.symmetric_eigenvalues().unwrap();
        assert!((e[0] - 0.5).abs() < 1e-14 && (e[1] - 0.5).abs() < 1e-14 && (e[2] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_square_rejected() {
        let a = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(a.determinant(), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn serde_as_rows() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let back: Matrix<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, a);
        assert!(serde_json::from_str::<Matrix<f64>>("[[1.0],[1.0,2.0]]").is_err());
    }
}
