//! Wishart laws `gamma_{p,sigma}` on positive definite matrices, defined by
//! the Laplace transform `E exp(-tr(sU)) = det(I + sigma s)^{-p}`.
//!
//! In this convention the mean is `p sigma`; the law coincides with the
//! classical Wishart with `2p` degrees of freedom and scale `sigma / 2`.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::lops::PqOperator;
use crate::scalar::Real;
use crate::symspace::SymMatrix;

/// `log Gamma_n(p) = (n(n-1)/4) log(2 pi) + sum_j log Gamma(p - (j-1)/2)`.
///
/// The `2 pi` power matches Lebesgue measure in orthonormal coordinates.
pub fn ln_multivariate_gamma<T: Real>(n: usize, p: T) -> Result<T> {
    let half = T::lit(0.5);
    let nn = T::from_usize_lossy(n);
    if n == 0 {
        return Err(Error::Invalid("matrix order must be at least 1".into()));
    }
    if !(p > (nn - T::one()) * half) {
        return Err(Error::domain("p", p.as_f64(), "p > (n-1)/2"));
    }
    let lead = nn * (nn - T::one()) / T::lit(4.0) * (T::TAU()).ln();
    let body: T = (0..n)
        .map(|j| (p - T::from_usize_lossy(j) * half).ln_gamma())
        .sum();
    Ok(lead + body)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WishartParams<T> {
    p: T,
    sigma: SymMatrix<T>,
}

/// `E[U (x) U]` and `E[P(U)]`.
#[derive(Debug, Clone)]
pub struct SecondMoments<T> {
    pub tensor: PqOperator<T>,
    pub congruence: PqOperator<T>,
}

/// `E[U^{-1}]`, `E[U^{-1} (x) U^{-1}]` and `E[P(U^{-1})]`.
#[derive(Debug, Clone)]
pub struct InverseMoments<T> {
    pub mean: SymMatrix<T>,
    pub tensor: PqOperator<T>,
    pub congruence: PqOperator<T>,
}

impl<T: Real> WishartParams<T> {
    pub fn new(p: T, sigma: SymMatrix<T>) -> Result<Self> {
        let n = T::from_usize_lossy(sigma.order());
        if !(p > (n - T::one()) * T::lit(0.5)) {
            return Err(Error::domain("p", p.as_f64(), "p > (n-1)/2"));
        }
        sigma.cholesky()?;
        Ok(Self { p, sigma })
    }

    pub fn shape(&self) -> T {
        self.p
    }

    pub fn scale(&self) -> &SymMatrix<T> {
        &self.sigma
    }

    pub fn order(&self) -> usize {
        self.sigma.order()
    }

    fn n(&self) -> T {
        T::from_usize_lossy(self.order())
    }

    /// Log density against Lebesgue measure in orthonormal coordinates;
    /// `-inf` outside the positive definite cone.
    pub fn log_density(&self, u: &SymMatrix<T>) -> Result<T> {
        if u.order() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: u.order(),
            });
        }
        let logdet_u = match u.logdet() {
            Ok(v) => v,
            Err(_) => return Ok(T::neg_infinity()),
        };
        let sigma_inv = self.sigma.inverse()?;
        let half = T::lit(0.5);
        Ok(-sigma_inv.inner(u)? + (self.p - (self.n() + T::one()) * half) * logdet_u
            - self.p * self.sigma.logdet()?
            - ln_multivariate_gamma(self.order(), self.p)?)
    }

    /// `det(I + sigma s)^{-p}`.
    pub fn laplace_transform(&self, s: &SymMatrix<T>) -> Result<T> {
        let ss = self.sigma.as_square().matmul(s.as_square())?;
        let m = SquareMatrix::identity(self.order()).add(&ss)?;
        Ok(m.determinant().powf(-self.p))
    }

    pub fn mean(&self) -> SymMatrix<T> {
        self.sigma.scale(self.p)
    }

    /// `E[U (x) U] = p^2 sigma(x)sigma + p P(sigma)` and
    /// `E[P(U)] = (p/2) sigma(x)sigma + (p/2 + p^2) P(sigma)`.
    pub fn second_moments(&self) -> SecondMoments<T> {
        let p = self.p;
        let half = T::lit(0.5);
        SecondMoments {
            tensor: PqOperator {
                u: self.sigma.clone(),
                a: p,
                b: p * p,
            },
            congruence: PqOperator {
                u: self.sigma.clone(),
                a: half * p + p * p,
                b: half * p,
            },
        }
    }

    /// `E[U^{-1}] = sigma^{-1} / (p - (n+1)/2)`, finite for `p > (n+1)/2`.
    pub fn inverse_mean(&self) -> Result<SymMatrix<T>> {
        let a1 = self.p - (self.n() + T::one()) * T::lit(0.5);
        if !(a1 > T::zero()) {
            return Err(Error::domain("p", self.p.as_f64(), "p > (n+1)/2"));
        }
        Ok(self.sigma.inverse()?.scale(T::one() / a1))
    }

    /// First and second inverse moments; the second-order ones need `p > (n+3)/2`.
    pub fn inverse_moments(&self) -> Result<InverseMoments<T>> {
        let mean = self.inverse_mean()?;
        let half = T::lit(0.5);
        let n = self.n();
        let a3 = self.p - (n + T::lit(3.0)) * half;
        if !(a3 > T::zero()) {
            return Err(Error::domain("p", self.p.as_f64(), "p > (n+3)/2"));
        }
        let a1 = self.p - (n + T::one()) * half;
        let a0 = self.p - n * half;
        let a2 = self.p - (n + T::lit(2.0)) * half;
        let denom = a3 * a1 * a0;
        let sinv = self.sigma.inverse()?;
        Ok(InverseMoments {
            mean,
            tensor: PqOperator {
                u: sinv.clone(),
                a: T::one() / denom,
                b: a2 / denom,
            },
            congruence: PqOperator {
                u: sinv,
                a: a1 / denom,
                b: half / denom,
            },
        })
    }
}

impl WishartParams<f64> {
    pub fn sampler(&self) -> WishartSampler {
        WishartSampler::new(self)
    }

    /// One draw; for repeated draws build a [`WishartSampler`] once.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix<f64> {
        self.sampler().sample(rng)
    }
}

/// Bartlett construction: with `sigma / 2 = L L^t`, draw lower-triangular `A`
/// with `A_jj^2 ~ chi^2(2p - j)` (`j` from 0) and standard normal entries
/// below the diagonal, and return `L A A^t L^t`.
#[derive(Debug, Clone)]
pub struct WishartSampler {
    chol_half: SquareMatrix<f64>,
    chi: Vec<ChiSquared<f64>>,
}

impl WishartSampler {
    pub fn new(params: &WishartParams<f64>) -> Self {
        let chol_half = params
            .sigma
            .scale(0.5)
            .cholesky()
            .expect("scale validated positive definite");
        let chi = (0..params.order())
            .map(|j| ChiSquared::new(2.0 * params.p - j as f64).expect("p > (n-1)/2"))
            .collect();
        Self { chol_half, chi }
    }

    pub fn order(&self) -> usize {
        self.chol_half.order()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> SymMatrix<f64> {
        let n = self.order();
        let mut a = SquareMatrix::zeros(n);
        for i in 0..n {
            a[(i, i)] = self.chi[i].sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let b = self.chol_half.matmul(&a).expect("same order");
        SymMatrix::from_square(&b.matmul(&b.transpose()).expect("same order")).expect("order >= 1")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mcverify::{mc_expectation, substream, McConfig};

    #[test]
    fn multivariate_gamma_reduces_to_gamma() {
        for &p in &[0.3, 1.0, 2.5, 7.0] {
            let v: f64 = ln_multivariate_gamma(1, p).unwrap();
            assert!((v - statrs::function::gamma::ln_gamma(p)).abs() < 1e-14);
        }
    }

    #[test]
    fn multivariate_gamma_ratio() {
        // Gamma_3(2.5)/Gamma_3(2) = Gamma(2.5)/Gamma(1) by the product of gammas
        let direct = |p: f64| -> f64 { (0..3).map(|j| statrs::function::gamma::ln_gamma(p - j as f64 / 2.0)).sum() };
        let oracle = (direct(2.5) - direct(2.0)).exp();
        let got = (ln_multivariate_gamma(3, 2.5f64).unwrap() - ln_multivariate_gamma(3, 2.0f64).unwrap()).exp();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got - 1.329340388179137).abs() < 1e-12);
    }

    #[test]
    fn multivariate_gamma_domain() {
        assert!(matches!(ln_multivariate_gamma(3, 1.0f64), Err(Error::Domain { .. })));
        assert!(ln_multivariate_gamma(3, 1.0001f64).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(WishartParams::new(0.5, SymMatrix::<f64>::identity(2)).is_err());
        assert!(WishartParams::new(0.51, SymMatrix::<f64>::identity(2)).is_ok());
        assert!(matches!(
            WishartParams::new(3.0, SymMatrix::diagonal(&[1.0, -1.0])),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn scalar_log_density() {
        let w = WishartParams::new(1.0f64, SymMatrix::identity(1)).unwrap();
        assert!((w.log_density(&SymMatrix::identity(1)).unwrap() + 1.0).abs() < 1e-15);
        // Gamma(shape 2.5, scale 0.7) at 1.3
        let w = WishartParams::new(2.5, SymMatrix::diagonal(&[0.7])).unwrap();
        let (k, th, x): (f64, f64, f64) = (2.5, 0.7, 1.3);
        let oracle = (k - 1.0) * x.ln() - x / th - k * th.ln() - statrs::function::gamma::ln_gamma(k);
        assert!((w.log_density(&SymMatrix::diagonal(&[1.3])).unwrap() - oracle).abs() < 1e-13);
        assert_eq!(
            w.log_density(&SymMatrix::diagonal(&[-1.0])).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn moment_closed_forms_scalar() {
        let w = WishartParams::new(2.0, SymMatrix::identity(1)).unwrap();
        let m = w.second_moments();
        // Gamma(2,1): E[U^2] = k(k+1) = 6
        assert_eq!(m.tensor.a + m.tensor.b, 6.0);
        assert_eq!(m.congruence.a + m.congruence.b, 6.0);
        let w1 = WishartParams::new(1.0, SymMatrix::identity(2)).unwrap();
        assert_eq!(w1.second_moments().congruence.b, 0.5);
    }

    #[test]
    fn inverse_moments_match_inverse_gamma() {
        // U ~ Gamma(p, 1): E[1/U] = 1/(p-1), E[1/U^2] = 1/((p-1)(p-2))
        let w = WishartParams::new(3.0, SymMatrix::identity(1)).unwrap();
        assert_eq!(w.inverse_mean().unwrap().get(0, 0), 0.5);
        for &p in &[3.5f64, 4.0, 9.25] {
            let w = WishartParams::new(p, SymMatrix::identity(1)).unwrap();
            let im = w.inverse_moments().unwrap();
            let want = 1.0 / ((p - 1.0) * (p - 2.0));
            assert!((im.tensor.a + im.tensor.b - want).abs() < 1e-15);
            assert!((im.congruence.a + im.congruence.b - want).abs() < 1e-15);
        }
        let w = WishartParams::new(2.0, SymMatrix::identity(2)).unwrap();
        match w.inverse_moments() {
            Err(Error::Domain { requirement, .. }) => assert_eq!(requirement, "p > (n+3)/2"),
            other => panic!("{other:?}"),
        }
        let w = WishartParams::new(1.2, SymMatrix::identity(2)).unwrap();
        assert!(matches!(w.inverse_mean(), Err(Error::Domain { .. })));
    }

    #[test]
    fn sampling_is_deterministic() {
        let w = WishartParams::new(2.3, SymMatrix::diagonal(&[1.0, 2.0, 0.5])).unwrap();
        let a = w.sample(&mut substream(17, 3));
        let b = w.sample(&mut substream(17, 3));
        assert_eq!(a, b);
        assert!(a.is_positive_definite());
    }

    #[test]
    fn scalar_sample_mean() {
        let w = WishartParams::new(2.0, SymMatrix::identity(1)).unwrap();
        let sampler = w.sampler();
        let cfg = McConfig::new(2024, 1_000_000, 100).unwrap();
        let est = mc_expectation(&cfg, 1, |rng, out| out[0] = sampler.sample(rng).get(0, 0));
        assert!(est.max_z(&[2.0]) < 3.0, "{:?}", est.mean);
    }

    #[test]
    fn laplace_transform_scalar() {
        let w = WishartParams::new(1.5, SymMatrix::diagonal(&[2.0])).unwrap();
        let l = w.laplace_transform(&SymMatrix::diagonal(&[0.5])).unwrap();
        assert!((l - 2f64.powf(-1.5)).abs() < 1e-15);
    }
}
