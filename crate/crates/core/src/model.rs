//! The Gaussian model with Wishart-randomised precision: `U ~ gamma_{p,sigma}`
//! and `X | U ~ N(0, U^{-1})`, viewed as a statistical model in `sigma`.
//!
//! The marginal density of `X` is
//!
//! ```text
//! f(x) = (2 pi)^{-n/2} Gamma(p+1/2) / Gamma(p-(n-1)/2) * det(sigma)^{1/2} / (1 + x' sigma x / 2)^{p+1/2}
//! ```
//!
//! and its Fisher information is an element of the span of `P(sigma^{-1})`
//! and `sigma^{-1} (x) sigma^{-1}`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::lops::PqOperator;
use crate::mcverify::{mc_operator_expectation, McConfig, OperatorEstimate};
use crate::scalar::Real;
use crate::symspace::{half_vec, DenseOperator, SymMatrix};
use crate::wishart::{WishartParams, WishartSampler};

#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    p: T,
    sigma: SymMatrix<T>,
    sigma_inv: SymMatrix<T>,
    log_norm: T,
}

/// Gradient and Hessian of `sigma -> log f(x)` at fixed `x`.
#[derive(Debug, Clone)]
pub struct ScorePair<T> {
    pub grad: SymMatrix<T>,
    pub hess: DenseOperator<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameterization {
    /// `N(0, u^{-1})` indexed by the precision `u`.
    Precision,
    /// `N(0, v)` indexed by the covariance `v`.
    Covariance,
}

impl<T: Real> ModelParams<T> {
    pub fn new(p: T, sigma: SymMatrix<T>) -> Result<Self> {
        let n = sigma.order();
        let nn = T::from_usize_lossy(n);
        let half = T::lit(0.5);
        if !(p > (nn - T::one()) * half) {
            return Err(Error::domain("p", p.as_f64(), "p > (n-1)/2"));
        }
        let sigma_inv = sigma.inverse()?;
        let log_norm = -nn * half * T::TAU().ln() + (p + half).ln_gamma()
            - (p - (nn - T::one()) * half).ln_gamma()
            + half * sigma.logdet()?;
        Ok(Self {
            p,
            sigma,
            sigma_inv,
            log_norm,
        })
    }

    pub fn shape(&self) -> T {
        self.p
    }

    pub fn sigma(&self) -> &SymMatrix<T> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &SymMatrix<T> {
        &self.sigma_inv
    }

    pub fn order(&self) -> usize {
        self.sigma.order()
    }

    fn check_x(&self, x: &[T]) -> Result<()> {
        if x.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn log_density(&self, x: &[T]) -> Result<T> {
        self.check_x(x)?;
        let half = T::lit(0.5);
        let q = self.sigma.quad_form(x)?;
        Ok(self.log_norm - (self.p + half) * (half * q).ln_1p())
    }

    pub fn density(&self, x: &[T]) -> Result<T> {
        Ok(self.log_density(x)?.exp())
    }

    /// `l'(sigma) = sigma^{-1}/2 - (p+1/2)/2 * x x^t / (1 + x' sigma x / 2)`.
    pub fn grad(&self, x: &[T]) -> Result<SymMatrix<T>> {
        self.check_x(x)?;
        let half = T::lit(0.5);
        let r = T::one() + half * self.sigma.quad_form(x)?;
        let w = (self.p + half) * half / r;
        self.sigma_inv.scale(half).sub(&SymMatrix::outer(x).scale(w))
    }

    /// `l''(sigma) = -P(sigma^{-1})/2 + (p+1/2)/4 * (xx^t (x) xx^t) / (1 + x' sigma x / 2)^2`.
    pub fn hessian(&self, x: &[T]) -> Result<DenseOperator<T>> {
        self.check_x(x)?;
        let half = T::lit(0.5);
        let r = T::one() + half * self.sigma.quad_form(x)?;
        let w = (self.p + half) * T::lit(0.25) / (r * r);
        let base = PqOperator::congruence(self.sigma_inv.clone()).to_dense().scale(-half);
        base.add(&DenseOperator::tensor_square(&SymMatrix::outer(x)).scale(w))
    }

    pub fn score(&self, x: &[T]) -> Result<ScorePair<T>> {
        Ok(ScorePair {
            grad: self.grad(x)?,
            hess: self.hessian(x)?,
        })
    }

    /// `I_p(sigma) = ((2p+1) P(sigma^{-1}) - sigma^{-1}(x)sigma^{-1}) / (2(2p+3))`.
    pub fn fisher_information(&self) -> PqOperator<T> {
        let two = T::lit(2.0);
        let d = two * (two * self.p + T::lit(3.0));
        PqOperator {
            u: self.sigma_inv.clone(),
            a: (two * self.p + T::one()) / d,
            b: -T::one() / d,
        }
    }

    /// Closed form of `J_p = E[xx^t (x) xx^t / (1 + x' sigma x / 2)^2]`:
    /// `4/((p+3/2)(p+1/2)) (sigma^{-1}(x)sigma^{-1}/4 + P(sigma^{-1})/2)`.
    pub fn j_closed_form(&self) -> PqOperator<T> {
        let k = T::lit(4.0) / ((self.p + T::lit(1.5)) * (self.p + T::lit(0.5)));
        PqOperator {
            u: self.sigma_inv.clone(),
            a: k * T::lit(0.5),
            b: k * T::lit(0.25),
        }
    }

    /// `I_p(sigma)^{-1} = 2(2p+3)/(2p+1) (P(sigma) + sigma(x)sigma / (2p+1-n))`.
    pub fn fisher_inverse(&self) -> PqOperator<T> {
        let two = T::lit(2.0);
        let q = two * self.p + T::one();
        let lead = two * (two * self.p + T::lit(3.0)) / q;
        PqOperator {
            u: self.sigma.clone(),
            a: lead,
            b: lead / (q - T::from_usize_lossy(self.order())),
        }
    }

    /// `log det I_p(sigma)` in closed form.
    pub fn fisher_log_det(&self) -> Result<T> {
        let n = self.order();
        let nn = T::from_usize_lossy(n);
        let two = T::lit(2.0);
        let q = two * self.p + T::one();
        let m = T::from_usize_lossy(n * (n + 1) / 2);
        Ok(m * (q / (two * (two * self.p + T::lit(3.0)))).ln() + (T::one() - nn / q).ln()
            - (nn + T::one()) * self.sigma.logdet()?)
    }

    /// Unnormalised Jeffreys log density `-log det I_p(sigma) / 2`.
    pub fn jeffreys_log_density(&self) -> Result<T> {
        Ok(-T::lit(0.5) * self.fisher_log_det()?)
    }

    /// Law of `U | X = x`: shape `p + 1/2`, scale `(sigma^{-1} + xx^t/2)^{-1}`.
    pub fn posterior(&self, x: &[T]) -> Result<WishartParams<T>> {
        self.check_x(x)?;
        let half = T::lit(0.5);
        let prec = self.sigma_inv.add(&SymMatrix::outer(x).scale(half))?;
        WishartParams::new(self.p + half, prec.inverse()?)
    }

    pub fn prior(&self) -> WishartParams<T> {
        WishartParams::new(self.p, self.sigma.clone()).expect("validated on construction")
    }
}

/// Log density of `N(0, u^{-1})` at `x`.
pub fn gaussian_precision_log_density<T: Real>(u: &SymMatrix<T>, x: &[T]) -> Result<T> {
    let half = T::lit(0.5);
    let n = T::from_usize_lossy(u.order());
    Ok(-n * half * T::TAU().ln() + half * u.logdet()? - half * u.quad_form(x)?)
}

/// Fisher information of the plain Gaussian model: `P(u^{-1})/2` in either
/// parameterisation.
pub fn plain_gaussian_fisher<T: Real>(u: &SymMatrix<T>, _parameterization: Parameterization) -> Result<PqOperator<T>> {
    Ok(PqOperator {
        u: u.inverse()?,
        a: T::lit(0.5),
        b: T::zero(),
    })
}

/// Draws `x ~ N(0, u^{-1})`.
pub fn sample_gaussian_precision<R: Rng + ?Sized>(u: &SymMatrix<f64>, rng: &mut R) -> Result<Vec<f64>> {
    let l = u.cholesky()?;
    Ok(solve_upper_transposed(&l, rng))
}

// x = L^{-t} z with z standard normal, so Cov(x) = (L L^t)^{-1}.
fn solve_upper_transposed<R: Rng + ?Sized>(l: &SquareMatrix<f64>, rng: &mut R) -> Vec<f64> {
    let n = l.order();
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Compound sampler for the marginal law of `X`.
#[derive(Debug, Clone)]
pub struct ModelSampler {
    wishart: WishartSampler,
}

impl ModelSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u = self.wishart.sample(rng);
        let l = u.cholesky().expect("Wishart draws are positive definite");
        solve_upper_transposed(&l, rng)
    }
}

impl ModelParams<f64> {
    pub fn sampler(&self) -> ModelSampler {
        ModelSampler {
            wishart: self.prior().sampler(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sampler().sample(rng)
    }

    /// Monte Carlo estimate of `J_p(sigma)` in dense form.
    pub fn j_integral_check(&self, config: &McConfig) -> OperatorEstimate {
        let sampler = self.sampler();
        mc_operator_expectation(
            config,
            self.order(),
            |rng| sampler.sample(rng),
            |x| {
                let r = 1.0 + 0.5 * self.sigma.quad_form(x).expect("order checked");
                DenseOperator::tensor_square(&SymMatrix::outer(x)).scale(1.0 / (r * r))
            },
        )
    }

    /// Monte Carlo estimates of `E[l' (x) l']` and `-E[l'']`.
    pub fn fisher_mc(&self, config: &McConfig) -> (OperatorEstimate, OperatorEstimate) {
        let sampler = self.sampler();
        let n = self.order();
        let outer = mc_operator_expectation(
            config,
            n,
            |rng| sampler.sample(rng),
            |x| DenseOperator::tensor_square(&self.grad(x).expect("order checked")),
        );
        let p_half = PqOperator::congruence(self.sigma_inv.clone()).to_dense().scale(0.5);
        let w0 = (self.p + 0.5) * 0.25;
        let neg_hess = mc_operator_expectation(
            config,
            n,
            |rng| sampler.sample(rng),
            |x| {
                let r = 1.0 + 0.5 * self.sigma.quad_form(x).expect("order checked");
                let t = DenseOperator::tensor_square(&SymMatrix::outer(x)).scale(w0 / (r * r));
                p_half.sub(&t).expect("same order")
            },
        );
        (outer, neg_hess)
    }
}

/// Half-vector of the score, the coordinate gradient in the orthonormal basis.
pub fn grad_coords(params: &ModelParams<f64>, x: &[f64]) -> Result<Vec<f64>> {
    Ok(half_vec(&params.grad(x)?))
}
