//! The two-dimensional operator family `a P(u) + b (u (x) u)` acting on
//! symmetric matrices, where `P(u)(v) = u v u` and `(u (x) u)(v) = u tr(uv)`.
//!
//! Coefficients are stored signed: `b` is the literal coefficient of
//! `u (x) u`. Writing the operator as `a (P(u) - c u (x) u)` gives `c = -b/a`,
//! which is the quantity that controls invertibility (`c != 1/n`) and
//! positive definiteness (`c < 1/n`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symspace::{inner, sym_dim, DenseOperator, SymMatrix};

/// Relative tolerance for detecting the singular element `c = 1/n`.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PqOperator<T> {
    pub u: SymMatrix<T>,
    pub a: T,
    pub b: T,
}

impl<T: Real> PqOperator<T> {
    pub fn new(u: SymMatrix<T>, a: T, b: T) -> Result<Self> {
        if u.is_zero() && (a != T::zero() || b != T::zero()) {
            return Err(Error::Invalid(
                "base point of a non-zero operator must be non-zero".into(),
            ));
        }
        Ok(Self { u, a, b })
    }

    /// `P(u)`.
    pub fn congruence(u: SymMatrix<T>) -> Self {
        Self { u, a: T::one(), b: T::zero() }
    }

    /// `u (x) u`.
    pub fn tensor_square(u: SymMatrix<T>) -> Self {
        Self { u, a: T::zero(), b: T::one() }
    }

    pub fn order(&self) -> usize {
        self.u.order()
    }

    /// `c = -b/a`; infinite when `a = 0`.
    pub fn c(&self) -> T {
        -self.b / self.a
    }

    pub fn apply(&self, v: &SymMatrix<T>) -> Result<SymMatrix<T>> {
        let t = inner(&self.u, v)?;
        let uvu = self.u.sandwich(v)?;
        uvu.scale(self.a).add(&self.u.scale(self.b * t))
    }

    pub fn to_dense(&self) -> DenseOperator<T> {
        let p = DenseOperator::from_linear_map(self.order(), |v| self.u.sandwich(v))
            .expect("orders agree by construction");
        p.scale(self.a)
            .add(&DenseOperator::tensor_square(&self.u).scale(self.b))
            .expect("orders agree by construction")
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            u: self.u.clone(),
            a: self.a * s,
            b: self.b * s,
        }
    }

    /// Sum of two elements over the same base point.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.u != other.u {
            return Err(Error::Invalid(
                "operators live over different base points".into(),
            ));
        }
        Ok(Self {
            u: self.u.clone(),
            a: self.a + other.a,
            b: self.b + other.b,
        })
    }

    /// `(a (P(u) - c u(x)u))^{-1} = (1/a) (P(u^{-1}) + c/(1-nc) u^{-1}(x)u^{-1})`.
    pub fn invert(&self) -> Result<Self> {
        let n = T::from_usize_lossy(self.order());
        if self.a == T::zero() {
            return Err(Error::Singular(
                "pure tensor-square element has no inverse".into(),
            ));
        }
        // 1 - nc = (a + n b) / a
        let num = self.a + n * self.b;
        let scale = self.a.abs().max((n * self.b).abs());
        if num.abs() < T::lit(SINGULAR_TOL) * scale {
            return Err(Error::Singular(format!(
                "c = 1/n (c = {}, n = {})",
                self.c(),
                self.order()
            )));
        }
        let u_inv = self.u.inverse().or_else(|_| self.u.inverse_general())?;
        let c = self.c();
        let one_minus_nc = num / self.a;
        Ok(Self {
            u: u_inv,
            a: T::one() / self.a,
            b: c / (self.a * one_minus_nc),
        })
    }

    /// `a^m (det u)^{n+1} (1 - cn)` with `m = n(n+1)/2`.
    pub fn det(&self) -> T {
        let n = self.order();
        let m = sym_dim(n);
        let det_u = self.u.determinant();
        if self.a == T::zero() {
            return if m == 1 { self.b * det_u * det_u } else { T::zero() };
        }
        let nn = T::from_usize_lossy(n);
        self.a.powi(m as i32) * det_u.powi(n as i32 + 1) * (T::one() + nn * self.b / self.a)
    }

    /// Positive definiteness in closed form.
    pub fn is_posdef(&self) -> bool {
        let n = self.order();
        if n == 1 {
            let u = self.u.get(0, 0);
            return u != T::zero() && self.a + self.b > T::zero();
        }
        if self.a <= T::zero() {
            return false;
        }
        // P(u) is definite iff u is (positive or negative) definite.
        let definite = self.u.is_positive_definite() || self.u.scale(-T::one()).is_positive_definite();
        definite && self.c() < T::one() / T::from_usize_lossy(n)
    }
}
