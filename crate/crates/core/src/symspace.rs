//! The Euclidean space of real symmetric `n x n` matrices with the trace
//! inner product `<u, v> = tr(uv)`.
//!
//! Coordinates are taken in a fixed orthonormal basis: the diagonal units
//! `e_ii` first, then `(e_i e_j^t + e_j e_i^t) / sqrt(2)` for `i < j` in
//! lexicographic order. Lebesgue measure in these coordinates gives mass one
//! to the unit cube of the space, which is the normalisation every density
//! on matrices in this crate is expressed against.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{SquareMatrix, SymmetricEigen};
use crate::scalar::Real;

/// Dimension `n(n+1)/2` of the space of symmetric matrices of order `n`.
#[inline]
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `(i, j)` index pairs in basis order.
pub fn basis_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|i| (i, i)).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

fn check_order(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// A real symmetric matrix. Entries are stored in full and symmetrised on
/// construction, so `get(i, j) == get(j, i)` holds bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    m: SquareMatrix<T>,
}

impl<T: Real> SymMatrix<T> {
    /// Wraps `(a + a^t) / 2`.
    pub fn from_square(a: &SquareMatrix<T>) -> Result<Self> {
        if a.order() == 0 {
            return Err(Error::Invalid("matrix order must be at least 1".into()));
        }
        Ok(Self { m: a.symmetrized() })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        Self::from_square(&SquareMatrix::from_rows(rows)?)
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "matrix order must be at least 1");
        Self {
            m: SquareMatrix::zeros(n),
        }
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "matrix order must be at least 1");
        Self {
            m: SquareMatrix::identity(n),
        }
    }

    pub fn diagonal(d: &[T]) -> Self {
        let n = d.len();
        assert!(n >= 1, "matrix order must be at least 1");
        Self {
            m: SquareMatrix::from_fn(n, |i, j| if i == j { d[i] } else { T::zero() }),
        }
    }

    /// `x x^t`.
    pub fn outer(x: &[T]) -> Self {
        assert!(!x.is_empty(), "vector must be non-empty");
        Self {
            m: SquareMatrix::outer(x, x),
        }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.m.order()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[(i, j)]
    }

    pub fn as_square(&self) -> &SquareMatrix<T> {
        &self.m
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.m.rows()
    }

    pub fn trace(&self) -> T {
        self.m.trace()
    }

    pub fn inner(&self, other: &Self) -> Result<T> {
        inner(self, other)
    }

    /// Frobenius norm, i.e. `sqrt(<u, u>)`.
    pub fn norm(&self) -> T {
        self.m.frobenius_norm()
    }

    pub fn is_zero(&self) -> bool {
        self.m.as_slice().iter().all(|&a| a == T::zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_order(self.order(), other.order())?;
        Ok(Self {
            m: self.m.add(&other.m)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_order(self.order(), other.order())?;
        Ok(Self {
            m: self.m.sub(&other.m)?,
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self { m: self.m.scale(s) }
    }

    /// `x^t u x`.
    pub fn quad_form(&self, x: &[T]) -> Result<T> {
        let ux = self.m.matvec(x)?;
        Ok(x.iter().zip(&ux).map(|(&a, &b)| a * b).sum())
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        self.m.matvec(x)
    }

    /// `u v u`.
    pub fn sandwich(&self, v: &Self) -> Result<Self> {
        check_order(self.order(), v.order())?;
        let uv = self.m.matmul(&v.m)?;
        Self::from_square(&uv.matmul(&self.m)?)
    }

    /// `t v t^t` for an arbitrary square `t`.
    pub fn congruence(&self, t: &SquareMatrix<T>) -> Result<Self> {
        check_order(t.order(), self.order())?;
        let tv = t.matmul(&self.m)?;
        Self::from_square(&tv.matmul(&t.transpose())?)
    }

    /// Lower Cholesky factor; failure is the positive-definiteness test.
    pub fn cholesky(&self) -> Result<SquareMatrix<T>> {
        self.m.cholesky()
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Inverse of a positive definite matrix via its Cholesky factor.
    pub fn inverse(&self) -> Result<Self> {
        let l = self.cholesky()?;
        let n = self.order();
        // forward substitution for L^{-1}
        let mut linv = SquareMatrix::zeros(n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { T::one() } else { T::zero() };
                for k in col..i {
                    s = s - l[(i, k)] * linv[(k, col)];
                }
                linv[(i, col)] = s / l[(i, i)];
            }
        }
        Self::from_square(&linv.transpose().matmul(&linv)?)
    }

    /// Inverse of any non-singular symmetric matrix.
    pub fn inverse_general(&self) -> Result<Self> {
        Self::from_square(&self.m.inverse()?)
    }

    pub fn logdet(&self) -> Result<T> {
        let l = self.cholesky()?;
        Ok((0..self.order()).map(|i| l[(i, i)].ln()).sum::<T>() * T::lit(2.0))
    }

    pub fn determinant(&self) -> T {
        self.m.determinant()
    }

    pub fn eigen(&self) -> SymmetricEigen<T> {
        self.m.symmetric_eigen()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.m.min_eigenvalue()
    }

    pub fn max_eigenvalue(&self) -> T {
        let e = self.eigen();
        *e.values.last().expect("order >= 1")
    }

    /// `V f(D) V^t` for the spectral decomposition `u = V D V^t`.
    pub fn map_eigenvalues(&self, f: impl Fn(T) -> T) -> Self {
        let e = self.eigen();
        let n = self.order();
        let m = SquareMatrix::from_fn(n, |i, j| {
            (0..n)
                .map(|k| e.vectors[(i, k)] * f(e.values[k]) * e.vectors[(j, k)])
                .sum()
        });
        Self { m: m.symmetrized() }
    }

    /// Principal square root of a positive definite matrix.
    pub fn sqrt(&self) -> Result<Self> {
        self.cholesky()?;
        Ok(self.map_eigenvalues(|l| l.sqrt()))
    }

    pub fn cast<U: Real>(&self) -> SymMatrix<U> {
        let n = self.order();
        SymMatrix {
            m: SquareMatrix::from_fn(n, |i, j| U::lit(self.get(i, j).as_f64())),
        }
    }
}

/// Trace inner product `tr(uv)`.
pub fn inner<T: Real>(u: &SymMatrix<T>, v: &SymMatrix<T>) -> Result<T> {
    check_order(u.order(), v.order())?;
    Ok(u.m
        .as_slice()
        .iter()
        .zip(v.m.as_slice())
        .map(|(&a, &b)| a * b)
        .sum())
}

/// Orthonormal coordinates of `u`; off-diagonal entries carry a factor `sqrt(2)`.
pub fn half_vec<T: Real>(u: &SymMatrix<T>) -> Vec<T> {
    let r2 = T::SQRT_2();
    basis_pairs(u.order())
        .into_iter()
        .map(|(i, j)| if i == j { u.get(i, i) } else { u.get(i, j) * r2 })
        .collect()
}

/// Inverse of [`half_vec`].
pub fn half_unvec<T: Real>(n: usize, c: &[T]) -> Result<SymMatrix<T>> {
    check_order(sym_dim(n), c.len())?;
    if n == 0 {
        return Err(Error::Invalid("matrix order must be at least 1".into()));
    }
    let mut m = SquareMatrix::zeros(n);
    let inv_r2 = T::FRAC_1_SQRT_2();
    for (k, (i, j)) in basis_pairs(n).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = c[k];
        } else {
            m[(i, j)] = c[k] * inv_r2;
            m[(j, i)] = c[k] * inv_r2;
        }
    }
    Ok(SymMatrix { m })
}

/// The orthonormal basis of symmetric matrices of order `n`, materialised.
#[derive(Debug, Clone)]
pub struct OrthoBasis<T> {
    n: usize,
    vectors: Vec<SymMatrix<T>>,
}

impl<T: Real> OrthoBasis<T> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "matrix order must be at least 1");
        let m = sym_dim(n);
        let vectors = (0..m)
            .map(|k| {
                let mut c = vec![T::zero(); m];
                c[k] = T::one();
                half_unvec(n, &c).expect("dimension matches")
            })
            .collect();
        Self { n, vectors }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[SymMatrix<T>] {
        &self.vectors
    }

    pub fn half_vec(&self, u: &SymMatrix<T>) -> Result<Vec<T>> {
        check_order(self.n, u.order())?;
        Ok(half_vec(u))
    }

    pub fn half_unvec(&self, c: &[T]) -> Result<SymMatrix<T>> {
        half_unvec(self.n, c)
    }
}

/// An endomorphism of the space of symmetric matrices, as an `m x m` matrix
/// in orthonormal coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator<T> {
    n: usize,
    matrix: SquareMatrix<T>,
}

impl<T: Real> DenseOperator<T> {
    pub fn new(n: usize, matrix: SquareMatrix<T>) -> Result<Self> {
        check_order(sym_dim(n), matrix.order())?;
        Ok(Self { n, matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            matrix: SquareMatrix::identity(sym_dim(n)),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            matrix: SquareMatrix::zeros(sym_dim(n)),
        }
    }

    /// Densifies a linear map by applying it to each basis vector.
    pub fn from_linear_map(n: usize, f: impl Fn(&SymMatrix<T>) -> Result<SymMatrix<T>>) -> Result<Self> {
        let basis = OrthoBasis::new(n);
        let m = basis.dim();
        let mut matrix = SquareMatrix::zeros(m);
        for (col, b) in basis.vectors().iter().enumerate() {
            let img = half_vec(&f(b)?);
            for row in 0..m {
                matrix[(row, col)] = img[row];
            }
        }
        Ok(Self { n, matrix })
    }

    /// `c c^t` for coordinates `c` of `u`, i.e. the dense form of `u (x) u`.
    pub fn tensor_square(u: &SymMatrix<T>) -> Self {
        let c = half_vec(u);
        Self {
            n: u.order(),
            matrix: SquareMatrix::outer(&c, &c),
        }
    }

    /// Dense form of `v -> t v t^t` for an arbitrary square `t`.
    pub fn congruence(t: &SquareMatrix<T>) -> Result<Self> {
        Self::from_linear_map(t.order(), |v| v.congruence(t))
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.matrix.order()
    }

    pub fn matrix(&self) -> &SquareMatrix<T> {
        &self.matrix
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.matrix[(i, j)]
    }

    fn same(&self, other: &Self) -> Result<()> {
        check_order(self.n, other.n)
    }

    pub fn apply(&self, v: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        check_order(self.n, v.order())?;
        half_unvec(self.n, &self.matrix.matvec(&half_vec(v))?)
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.same(other)?;
        Ok(Self {
            n: self.n,
            matrix: self.matrix.matmul(&other.matrix)?,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same(other)?;
        Ok(Self {
            n: self.n,
            matrix: self.matrix.add(&other.matrix)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same(other)?;
        Ok(Self {
            n: self.n,
            matrix: self.matrix.sub(&other.matrix)?,
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            n: self.n,
            matrix: self.matrix.scale(s),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            n: self.n,
            matrix: self.matrix.transpose(),
        }
    }

    pub fn inverse(&self) -> Result<Self> {
        Ok(Self {
            n: self.n,
            matrix: self.matrix.inverse()?,
        })
    }

    pub fn determinant(&self) -> T {
        self.matrix.determinant()
    }

    pub fn min_eigenvalue(&self) -> T {
        self.matrix.min_eigenvalue()
    }

    pub fn asymmetry(&self) -> T {
        self.matrix.asymmetry()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.asymmetry() <= tol
    }

    pub fn frobenius_norm(&self) -> T {
        self.matrix.frobenius_norm()
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.matrix.rows()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RankOneInverse<T> {
    /// `c'` in `(id - c a (x) a)^{-1} = id + c' a (x) a`.
    pub coef: T,
}

/// Inverse of `id - c a (x) a` on a Euclidean space of any dimension.
pub fn rank_one_update_inverse<T: Real>(a: &[T], c: T) -> Result<RankOneInverse<T>> {
    let nrm2: T = a.iter().map(|&x| x * x).sum();
    let denom = T::one() - c * nrm2;
    if denom.abs() < T::TINY {
        return Err(Error::Singular(format!(
            "id - c a(x)a is not invertible when c|a|^2 = 1 (c|a|^2 = {})",
            c * nrm2
        )));
    }
    Ok(RankOneInverse { coef: c / denom })
}

impl<T: Real> RankOneInverse<T> {
    pub fn to_matrix(&self, a: &[T]) -> SquareMatrix<T> {
        let outer = SquareMatrix::outer(a, a).scale(self.coef);
        SquareMatrix::identity(a.len()).add(&outer).expect("same size")
    }
}

/// `det(id - c a (x) a) = 1 - c|a|^2`.
pub fn rank_one_det<T: Real>(a: &[T], c: T) -> T {
    T::one() - c * a.iter().map(|&x| x * x).sum::<T>()
}

// JSON: {"n": int, "rows": [[...], ...]}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    n: usize,
    rows: Vec<Vec<f64>>,
}

/// Relative asymmetry accepted by the matrix reader.
pub const MATRIX_ASYMMETRY_TOL: f64 = 1e-9;

impl<T: Real> Serialize for SymMatrix<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            n: self.order(),
            rows: self
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(|x| x.as_f64()).collect())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for SymMatrix<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        matrix_from_json_rows(raw.n, &raw.rows).map_err(D::Error::custom)
    }
}

fn matrix_from_json_rows<T: Real>(n: usize, rows: &[Vec<f64>]) -> Result<SymMatrix<T>> {
    if n == 0 {
        return Err(Error::Invalid("\"n\" must be at least 1".into()));
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Invalid(format!("\"rows\" must be {n} rows of length {n}")));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("matrix entries must be finite".into()));
    }
    let scale = rows.iter().flatten().fold(0.0f64, |a, &x| a.max(x.abs())).max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (rows[i][j] - rows[j][i]).abs();
            if gap > MATRIX_ASYMMETRY_TOL * scale {
                return Err(Error::Invalid(format!(
                    "matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {gap:e}"
                )));
            }
        }
    }
    let cast: Vec<Vec<T>> = rows.iter().map(|r| r.iter().map(|&x| T::lit(x)).collect()).collect();
    SymMatrix::from_rows(&cast)
}

impl<T: Real> Serialize for DenseOperator<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self
            .rows()
            .into_iter()
            .map(|r| r.into_iter().map(|x| x.as_f64()).collect())
            .collect();
        rows.serialize(s)
    }
}
