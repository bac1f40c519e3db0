//! Small dense square-matrix kernels: products, Cholesky, LU, and the
//! cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Sizes in this crate never exceed a few dozen rows, so everything is
//! row-major `Vec` storage with straightforward loops.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: r.len(),
                });
            }
        }
        Ok(Self::from_fn(n, |i, j| rows[i][j]))
    }

    /// Takes ownership of `n*n` row-major entries.
    pub fn from_row_major(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Ok(Self { n, data })
    }

    pub fn outer(a: &[T], b: &[T]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        Self::from_fn(a.len(), |i, j| a[i] * b[j])
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.n.max(1)).map(|r| r.to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] = out.data[i * n + j] + a * other.data[k * n + j];
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok((0..self.n)
            .map(|i| (0..self.n).map(|j| self[(i, j)] * v[j]).sum())
            .collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a + b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(self.zip_with(other, |a, b| a - b))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&a| a * s).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &a| if a.abs() > acc { a.abs() } else { acc })
    }

    /// Largest |a_ij - a_ji|.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrized(&self) -> Self {
        let half = T::lit(0.5);
        Self::from_fn(self.n, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    /// Lower Cholesky factor. Any pivot that is not strictly positive is
    /// reported by index.
    pub fn cholesky(&self) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(l)
    }

    /// LU factorisation with partial pivoting; returns (packed LU, permutation, sign).
    fn lu(&self) -> (Self, Vec<usize>, T, bool) {
        let n = self.n;
        let mut a = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let mut singular = false;
        for k in 0..n {
            let mut piv = k;
            let mut best = a[(k, k)].abs();
            for i in (k + 1)..n {
                if a[(i, k)].abs() > best {
                    best = a[(i, k)].abs();
                    piv = i;
                }
            }
            if best == T::zero() {
                singular = true;
                continue;
            }
            if piv != k {
                for j in 0..n {
                    a.data.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                sign = -sign;
            }
            let d = a[(k, k)];
            for i in (k + 1)..n {
                let f = a[(i, k)] / d;
                a[(i, k)] = f;
                for j in (k + 1)..n {
                    a.data[i * n + j] = a.data[i * n + j] - f * a.data[k * n + j];
                }
            }
        }
        (a, perm, sign, singular)
    }

    pub fn determinant(&self) -> T {
        let (lu, _, sign, singular) = self.lu();
        if singular {
            return T::zero();
        }
        (0..self.n).fold(sign, |acc, i| acc * lu[(i, i)])
    }

    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let (lu, perm, _, singular) = self.lu();
        if singular {
            return Err(Error::Singular("LU pivot is zero".into()));
        }
        let mut inv = Self::zeros(n);
        for col in 0..n {
            let mut x: Vec<T> = (0..n)
                .map(|i| if perm[i] == col { T::one() } else { T::zero() })
                .collect();
            for i in 0..n {
                for k in 0..i {
                    x[i] = x[i] - lu[(i, k)] * x[k];
                }
            }
            for i in (0..n).rev() {
                for k in (i + 1)..n {
                    x[i] = x[i] - lu[(i, k)] * x[k];
                }
                x[i] = x[i] / lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, col)] = x[i];
            }
        }
        Ok(inv)
    }

    /// Eigen-decomposition of the symmetric part. Eigenvalues ascend; the
    /// eigenvector for `values[k]` is column `k` of `vectors`.
    pub fn symmetric_eigen(&self) -> SymmetricEigen<T> {
        jacobi_eigen(&self.symmetrized())
    }

    pub fn min_eigenvalue(&self) -> T {
        let e = self.symmetric_eigen();
        e.values.first().copied().unwrap_or_else(T::zero)
    }
}

impl<T> Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.n + j]
    }
}

#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: SquareMatrix<T>,
}

fn jacobi_eigen<T: Real>(sym: &SquareMatrix<T>) -> SymmetricEigen<T> {
    let n = sym.order();
    let mut a = sym.clone();
    let mut v = SquareMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale > T::zero() {
        let target = T::epsilon() * T::epsilon() * scale * scale;
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            if off <= target {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (apq + apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = SquareMatrix::from_fn(n, |r, c| v[(r, order[c])]);
    SymmetricEigen { values, vectors }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SquareMatrix<f64> {
        SquareMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn determinant_and_inverse() {
        let a = m(&[&[4.0, 1.0, 0.5], &[2.0, 3.0, 1.0], &[0.0, 1.0, 5.0]]);
        // cofactor expansion
        let det = 4.0 * (15.0 - 1.0) - 1.0 * (10.0 - 0.0) + 0.5 * (2.0 - 0.0);
        assert!((a.determinant() - det).abs() < 1e-12);
        let prod = a.matmul(&a.inverse().unwrap()).unwrap();
        assert!(prod.sub(&SquareMatrix::identity(3)).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn singular_inverse_fails() {
        let a = m(&[&[1.0, 2.0], &[2.0, 4.0]]);
        assert!(a.inverse().is_err());
        assert_eq!(a.determinant(), 0.0);
    }

    #[test]
    fn cholesky_reports_pivot() {
        let a = m(&[&[1.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, -1.0]]);
        assert_eq!(a.cholesky(), Err(Error::NotPositiveDefinite { pivot: 2 }));
        let b = m(&[&[4.0, 2.0], &[2.0, 3.0]]);
        let l = b.cholesky().unwrap();
        let llt = l.matmul(&l.transpose()).unwrap();
        assert!(llt.sub(&b).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn jacobi_matches_two_by_two_roots() {
        let (a, b, c) = (2.0, -1.5, 0.25);
        let s = m(&[&[a, b], &[b, c]]);
        let tr: f64 = a + c;
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        let e = s.symmetric_eigen();
        assert!((e.values[0] - (tr - disc) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (tr + disc) / 2.0).abs() < 1e-14);
        // A v = lambda v
        for k in 0..2 {
            let col = [e.vectors[(0, k)], e.vectors[(1, k)]];
            let av = s.matvec(&col).unwrap();
            for i in 0..2 {
                assert!((av[i] - e.values[k] * col[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jacobi_reconstructs() {
        let n = 6;
        let a = SquareMatrix::<f64>::from_fn(n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let s = a.add(&a.transpose()).unwrap();
        let e = s.symmetric_eigen();
        let d = SquareMatrix::from_fn(n, |i, j| if i == j { e.values[i] } else { 0.0 });
        let rec = e
            .vectors
            .matmul(&d)
            .unwrap()
            .matmul(&e.vectors.transpose())
            .unwrap();
        assert!(rec.sub(&s).unwrap().max_abs() < 1e-12);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
    }
}
