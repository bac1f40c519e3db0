//! The verification catalogue: closed forms against quadrature, dense linear
//! algebra and Monte Carlo.
//!
//! Every check reports `measured <= tolerance`. Monte Carlo comparisons
//! measure the largest standardised entrywise deviation (tolerance 3) and
//! Loewner comparisons measure the negated minimum eigenvalue of the gap
//! (tolerance three standard errors).

use std::time::Instant;

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::bounds::{
    averaged_fisher, boundary_flux, density_information, prior_score, van_trees_bound,
    van_trees_information, van_trees_joint_matrix, VanTreesProblem,
};
use crate::error::Result;
use crate::linalg::SquareMatrix;
use crate::lops::PqOperator;
use crate::model::{gaussian_precision_log_density, grad_coords, ModelParams};
use crate::quadrature::{integrate_half_line, integrate_real_line};
use crate::symspace::{half_vec, sym_dim, DenseOperator, SymMatrix};
use crate::wishart::WishartParams;

use super::{
    mc_expectation, mc_operator_expectation, simulate_estimator, substream, Estimator,
    EstimatorSpec, McConfig, McRng,
};

/// Batches used for entrywise standard errors.
pub const ENTRY_BATCHES: usize = 100;
/// Batches used for Loewner-gap standard errors.
pub const LOEWNER_BATCHES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    Fast,
    Full,
}

impl Scope {
    /// Draws for moment-type Monte Carlo checks.
    pub fn moment_samples(self) -> usize {
        match self {
            Scope::Fast => 100_000,
            Scope::Full => 1_000_000,
        }
    }

    /// Prior draws for the end-to-end Van Trees checks.
    pub fn trial_samples(self) -> usize {
        match self {
            Scope::Fast => 20_000,
            Scope::Full => 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    /// Name of the identity or property being checked.
    pub paper_ref: String,
    pub status: CheckStatus,
    pub measured: f64,
    pub tolerance: f64,
    pub runtime_ms: u64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.status == CheckStatus::Pass
    }

    /// Everything except the wall-clock time.
    pub fn same_values(&self, other: &Self) -> bool {
        self.check_id == other.check_id
            && self.paper_ref == other.paper_ref
            && self.status == other.status
            && self.measured.to_bits() == other.measured.to_bits()
            && self.tolerance.to_bits() == other.tolerance.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub scope: Scope,
    pub seed: u64,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn same_values(&self, other: &Self) -> bool {
        self.checks.len() == other.checks.len()
            && self.checks.iter().zip(&other.checks).all(|(a, b)| a.same_values(b))
    }
}

/// Runs one check. An error inside the check is reported as a failure with
/// a NaN measurement.
pub fn run_check(id: &str, reference: &str, f: impl FnOnce() -> Result<(f64, f64)>) -> CheckResult {
    let start = Instant::now();
    let (measured, tolerance) = f().unwrap_or((f64::NAN, 0.0));
    CheckResult {
        check_id: id.to_string(),
        paper_ref: reference.to_string(),
        status: if measured <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        measured,
        tolerance,
        runtime_ms: start.elapsed().as_millis() as u64,
    }
}

/// Seed for one check, derived from the suite seed and the check id so that
/// checks use unrelated streams.
pub fn check_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn entry_config(seed: u64, samples: usize) -> McConfig {
    McConfig::new(seed, samples, ENTRY_BATCHES).expect("samples are multiples of the batch count")
}

fn loewner_config(seed: u64, samples: usize) -> McConfig {
    McConfig::new(seed, samples, LOEWNER_BATCHES).expect("samples are multiples of the batch count")
}

/// `A A^t / n + I / 2` with standard normal `A`.
pub fn random_spd(n: usize, rng: &mut McRng) -> SymMatrix<f64> {
    let a = SquareMatrix::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let aat = a.matmul(&a.transpose()).expect("square");
    SymMatrix::from_square(&aat.scale(1.0 / n as f64))
        .expect("square")
        .add(&SymMatrix::identity(n).scale(0.5))
        .expect("same order")
}

/// `Q diag(l) Q^t` with `|l_i|` in `[0.5, 2]`, random signs unless `definite`.
fn random_symmetric(n: usize, definite: bool, rng: &mut McRng) -> SymMatrix<f64> {
    let q = random_spd(n, rng).eigen().vectors;
    let sign = if definite && rng.random::<bool>() { -1.0 } else { 1.0 };
    let l: Vec<f64> = (0..n)
        .map(|_| {
            let s = if definite || rng.random::<bool>() { sign } else { -sign };
            s * rng.random_range(0.5..2.0)
        })
        .collect();
    let d = SquareMatrix::from_fn(n, |i, j| if i == j { l[i] } else { 0.0 });
    let m = q.matmul(&d).and_then(|m| m.matmul(&q.transpose())).expect("square");
    SymMatrix::from_square(&m).expect("square")
}

fn relative_frobenius(a: &SquareMatrix<f64>, b: &SquareMatrix<f64>) -> f64 {
    a.sub(b).expect("same order").frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

fn fixed_sigma(n: usize) -> SymMatrix<f64> {
    SymMatrix::from_square(&SquareMatrix::from_fn(n, |i, j| {
        if i == j {
            1.0 + 0.25 * i as f64
        } else {
            0.3 / (1.0 + (i + j) as f64)
        }
    }))
    .expect("square")
}

// ---------------------------------------------------------------------------
// density of the randomised model

/// Scalar mixture `int N(x; 0, 1/u) Gamma(u; p, sigma) du` by quadrature.
pub fn scalar_mixture_density(p: f64, sigma: f64, x: f64) -> Result<f64> {
    let ln_norm = -statrs::function::gamma::ln_gamma(p) - p * sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
    let q = integrate_half_line(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            ((p - 0.5) * u.ln() - u / sigma - 0.5 * u * x * x + ln_norm).exp()
        },
        0.0,
        1e-15,
        1e-12,
    )?;
    Ok(q.value)
}

/// Largest relative gap between the closed-form scalar density and the
/// mixture integral over `p in {0.6, 1, 3}`, `sigma in {0.5, 1, 2}` and 20
/// points in `[-5, 5]`.
pub fn density_mixture_check() -> CheckResult {
    run_check("density.mixture_quadrature.n1", "closed form of the mixture density", || {
        let mut worst: f64 = 0.0;
        for &p in &[0.6, 1.0, 3.0] {
            for &s in &[0.5, 1.0, 2.0] {
                let m = ModelParams::new(p, SymMatrix::diagonal(&[s]))?;
                for j in 0..20 {
                    let x = -5.0 + 10.0 * j as f64 / 19.0;
                    let closed = m.density(&[x])?;
                    let mix = scalar_mixture_density(p, s, x)?;
                    worst = worst.max((closed - mix).abs() / closed);
                }
            }
        }
        Ok((worst, 1e-7))
    })
}

/// `|int f - 1|` for the scalar density on the same grid.
pub fn density_normalization_scalar_check() -> CheckResult {
    run_check("density.normalization.n1", "mixture density integrates to one", || {
        let mut worst: f64 = 0.0;
        for &p in &[0.6, 1.0, 3.0] {
            for &s in &[0.5, 1.0, 2.0] {
                let m = ModelParams::new(p, SymMatrix::diagonal(&[s]))?;
                let q = integrate_real_line(|x| m.density(&[x]).unwrap_or(f64::NAN), 1e-13, 1e-12)?;
                worst = worst.max((q.value - 1.0).abs());
            }
        }
        Ok((worst, 1e-8))
    })
}

/// Total mass for `n = 2, 3` by radial quadrature: the density depends on `x`
/// through `x^t sigma x` only.
pub fn density_normalization_radial_check() -> CheckResult {
    run_check("density.normalization.radial", "mixture density integrates to one", || {
        let mut worst: f64 = 0.0;
        for n in 2..=3usize {
            let sigma = fixed_sigma(n);
            let scale = 1.0 / sigma.get(0, 0).sqrt();
            let sphere = 2.0 * std::f64::consts::PI.powf(n as f64 / 2.0)
                / statrs::function::gamma::gamma(n as f64 / 2.0);
            let det_factor = sigma.determinant().powf(-0.5);
            for &p in &[(n as f64 - 1.0) / 2.0 + 0.3, n as f64, 4.0] {
                let m = ModelParams::new(p, sigma.clone())?;
                let q = integrate_half_line(
                    |r| {
                        let mut x = vec![0.0; n];
                        x[0] = r * scale;
                        r.powi(n as i32 - 1) * m.density(&x).unwrap_or(f64::NAN)
                    },
                    0.0,
                    1e-14,
                    1e-12,
                )?;
                worst = worst.max((sphere * det_factor * q.value - 1.0).abs());
            }
        }
        Ok((worst, 1e-8))
    })
}

// ---------------------------------------------------------------------------
// Wishart law

/// `E_q[lambda / q] = 1` with a multivariate t proposal in orthonormal
/// coordinates, which checks the normalising constant of the Wishart density.
pub fn wishart_normalization_check(n: usize, samples: usize, seed: u64) -> CheckResult {
    let id = format!("wishart.normalization.n{n}");
    run_check(&id, "Wishart density normalising constant", || {
        let p = n as f64 + 1.0;
        let w = WishartParams::new(p, fixed_sigma(n))?;
        let m = sym_dim(n);
        let mu = half_vec(&w.mean());
        let cov = PqOperator::congruence(w.scale().clone()).to_dense().scale(p);
        let chol = cov.matrix().cholesky()?;
        let cov_inv = cov.matrix().inverse()?;
        let nu = 3.0;
        let mf = m as f64;
        let ln_q0 = statrs::function::gamma::ln_gamma((nu + mf) / 2.0)
            - statrs::function::gamma::ln_gamma(nu / 2.0)
            - 0.5 * mf * (nu * std::f64::consts::PI).ln()
            - 0.5 * cov.determinant().ln();
        let chi = ChiSquared::new(nu).expect("positive degrees of freedom");
        let est = mc_expectation(&entry_config(seed, samples), 1, |rng, out| {
            let g: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
            let scale = (nu / chi.sample(rng)).sqrt();
            let z = chol.matvec(&g).expect("sized");
            let y: Vec<f64> = mu.iter().zip(&z).map(|(a, b)| a + scale * b).collect();
            let d: Vec<f64> = y.iter().zip(&mu).map(|(a, b)| a - b).collect();
            let delta: f64 = cov_inv.matvec(&d).expect("sized").iter().zip(&d).map(|(a, b)| a * b).sum();
            let ln_q = ln_q0 - 0.5 * (nu + mf) * (delta / nu).ln_1p();
            let u = crate::symspace::half_unvec(n, &y).expect("sized");
            let ln_l = w.log_density(&u).expect("order checked");
            out[0] = (ln_l - ln_q).exp();
        });
        Ok((est.max_z(&[1.0]), 3.0))
    })
}

/// `E[exp(-tr(s U))] = det(I + sigma s)^{-p}` for two shapes.
pub fn laplace_check(n: usize, samples: usize, seed: u64) -> CheckResult {
    let id = format!("wishart.laplace.n{n}");
    run_check(&id, "Wishart Laplace transform", || {
        let mut rng = substream(seed, u64::MAX);
        let s = random_spd(n, &mut rng).scale(0.3);
        let mut worst: f64 = 0.0;
        for (i, &p) in [(n as f64 - 1.0) / 2.0 + 0.3, n as f64 + 1.0].iter().enumerate() {
            let w = WishartParams::new(p, random_spd(n, &mut rng))?;
            let want = w.laplace_transform(&s)?;
            let sampler = w.sampler();
            let est = mc_expectation(&entry_config(seed.wrapping_add(i as u64), samples), 1, |rng, out| {
                let u = sampler.sample(rng);
                out[0] = (-u.inner(&s).expect("same order")).exp();
            });
            worst = worst.max(est.max_z(&[want]));
        }
        Ok((worst, 3.0))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WishartMoment {
    Mean,
    Tensor,
    Congruence,
    InverseMean,
    InverseTensor,
    InverseCongruence,
}

impl WishartMoment {
    pub const ALL: [WishartMoment; 6] = [
        WishartMoment::Mean,
        WishartMoment::Tensor,
        WishartMoment::Congruence,
        WishartMoment::InverseMean,
        WishartMoment::InverseTensor,
        WishartMoment::InverseCongruence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WishartMoment::Mean => "mean",
            WishartMoment::Tensor => "tensor",
            WishartMoment::Congruence => "congruence",
            WishartMoment::InverseMean => "inverse_mean",
            WishartMoment::InverseTensor => "inverse_tensor",
            WishartMoment::InverseCongruence => "inverse_congruence",
        }
    }

    fn reference(self) -> &'static str {
        match self {
            WishartMoment::Mean => "Wishart mean",
            WishartMoment::Tensor => "Wishart second moment E[U (x) U]",
            WishartMoment::Congruence => "Wishart second moment E[P(U)]",
            WishartMoment::InverseMean => "Wishart inverse mean E[U^-1]",
            WishartMoment::InverseTensor => "Wishart inverse second moment E[U^-1 (x) U^-1]",
            WishartMoment::InverseCongruence => "Wishart inverse second moment E[P(U^-1)]",
        }
    }

    /// A shape well inside the range where the estimator has finite variance.
    fn shape(self, n: usize) -> f64 {
        match self {
            WishartMoment::Mean | WishartMoment::Tensor | WishartMoment::Congruence => n as f64,
            _ => n as f64 + 6.0,
        }
    }
}

/// One Wishart moment identity against Monte Carlo.
pub fn wishart_moment_check(moment: WishartMoment, n: usize, samples: usize, seed: u64) -> CheckResult {
    let id = format!("wishart.moment.{}.n{n}", moment.name());
    run_check(&id, moment.reference(), || {
        let w = WishartParams::new(moment.shape(n), fixed_sigma(n))?;
        let sampler = w.sampler();
        let cfg = entry_config(seed, samples);
        let z = match moment {
            WishartMoment::Mean | WishartMoment::InverseMean => {
                let want = if moment == WishartMoment::Mean {
                    w.mean()
                } else {
                    w.inverse_mean()?
                };
                let inverse = moment == WishartMoment::InverseMean;
                let est = mc_expectation(&cfg, sym_dim(n), |rng, out| {
                    let mut u = sampler.sample(rng);
                    if inverse {
                        u = u.inverse().expect("positive definite draw");
                    }
                    out.copy_from_slice(&half_vec(&u));
                });
                est.max_z(&half_vec(&want))
            }
            _ => {
                let want = match moment {
                    WishartMoment::Tensor => w.second_moments().tensor,
                    WishartMoment::Congruence => w.second_moments().congruence,
                    WishartMoment::InverseTensor => w.inverse_moments()?.tensor,
                    _ => w.inverse_moments()?.congruence,
                };
                let est = mc_operator_expectation(
                    &cfg,
                    n,
                    |rng| sampler.sample(rng),
                    |u| {
                        let v = match moment {
                            WishartMoment::InverseTensor | WishartMoment::InverseCongruence => {
                                u.inverse().expect("positive definite draw")
                            }
                            _ => u.clone(),
                        };
                        match moment {
                            WishartMoment::Tensor | WishartMoment::InverseTensor => DenseOperator::tensor_square(&v),
                            _ => PqOperator::congruence(v).to_dense(),
                        }
                    },
                );
                est.max_z(&want.to_dense())
            }
        };
        Ok((z, 3.0))
    })
}

/// Scalar reductions of the moment closed forms against gamma and
/// inverse-gamma moments.
pub fn wishart_scalar_moments_check() -> CheckResult {
    run_check("wishart.moment.scalar_exact", "Wishart moments reduce to gamma moments", || {
        let mut worst: f64 = 0.0;
        let mut rel = |got: f64, want: f64| worst = worst.max((got - want).abs() / want.abs());
        for &p in &[3.5, 4.0, 7.25] {
            for &s in &[0.5, 1.0, 3.0] {
                let w = WishartParams::new(p, SymMatrix::diagonal(&[s]))?;
                let sm = w.second_moments();
                let im = w.inverse_moments()?;
                rel(w.mean().get(0, 0), p * s);
                rel(sm.tensor.apply(&SymMatrix::identity(1))?.get(0, 0), p * (p + 1.0) * s * s);
                rel(sm.congruence.apply(&SymMatrix::identity(1))?.get(0, 0), p * (p + 1.0) * s * s);
                rel(w.inverse_mean()?.get(0, 0), 1.0 / ((p - 1.0) * s));
                let inv2 = 1.0 / ((p - 1.0) * (p - 2.0) * s * s);
                rel(im.tensor.apply(&SymMatrix::identity(1))?.get(0, 0), inv2);
                rel(im.congruence.apply(&SymMatrix::identity(1))?.get(0, 0), inv2);
            }
        }
        Ok((worst, 1e-14))
    })
}

// ---------------------------------------------------------------------------
// Fisher information of the randomised model

/// `E[l' (x) l']` (`outer = true`) or `-E[l'']` against the closed form.
pub fn fisher_mc_check(n: usize, p: f64, outer: bool, samples: usize, seed: u64) -> CheckResult {
    let kind = if outer { "outer" } else { "neg_hessian" };
    let id = format!("model.fisher.{kind}.n{n}");
    let reference = if outer {
        "Fisher information as score covariance"
    } else {
        "Fisher information as expected negative Hessian"
    };
    run_check(&id, reference, || {
        let m = ModelParams::new(p, fixed_sigma(n))?;
        let want = m.fisher_information().to_dense();
        let (o, h) = m.fisher_mc(&entry_config(seed, samples));
        Ok((if outer { o } else { h }.max_z(&want), 3.0))
    })
}

/// `J_p(sigma) = E[(x x^t (x) x x^t) / (1 + x^t sigma x / 2)^2]` against its closed form.
pub fn j_integral_check(n: usize, p: f64, samples: usize, seed: u64) -> CheckResult {
    let id = format!("model.j_integral.n{n}");
    run_check(&id, "closed form of the J integral", || {
        let m = ModelParams::new(p, fixed_sigma(n))?;
        Ok((m.j_integral_check(&entry_config(seed, samples)).max_z(&m.j_closed_form().to_dense()), 3.0))
    })
}

pub fn j_scalar_check() -> CheckResult {
    run_check("model.j_integral.scalar_value", "J integral at n = 1, p = 1, sigma = 1", || {
        let j = ModelParams::new(1.0f64, SymMatrix::identity(1))?.j_closed_form();
        Ok((((j.a + j.b) - 0.8).abs(), 1e-15))
    })
}

pub fn score_mean_check(samples: usize, seed: u64) -> CheckResult {
    run_check("model.score_mean_zero.n2", "score has mean zero", || {
        let m = ModelParams::new(2.0, fixed_sigma(2))?;
        let sampler = m.sampler();
        let est = mc_expectation(&entry_config(seed, samples), 3, |rng, out| {
            let x = sampler.sample(rng);
            out.copy_from_slice(&grad_coords(&m, &x).expect("order checked"));
        });
        Ok((est.max_z(&[0.0; 3]), 3.0))
    })
}

/// Shapes used on the `n <= 5` grids.
fn grid_shapes(n: usize) -> [f64; 3] {
    let base = (n as f64 - 1.0) / 2.0;
    [base + 0.25, base + 1.0, base + 4.5]
}

/// Dense determinant of the Fisher operator against the closed form, three
/// shapes and three random scales per order `n <= 5`.
pub fn jeffreys_determinant_check(seed: u64) -> CheckResult {
    run_check("model.jeffreys_determinant", "determinant of the Fisher information", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for n in 1..=5 {
            for &p in &grid_shapes(n) {
                for _ in 0..3 {
                    let m = ModelParams::new(p, random_spd(n, &mut rng))?;
                    let closed = m.fisher_log_det()?;
                    let dense = m.fisher_information().to_dense().determinant();
                    let pq = m.fisher_information().det();
                    worst = worst.max((dense / closed.exp() - 1.0).abs());
                    worst = worst.max((pq / closed.exp() - 1.0).abs());
                }
            }
        }
        Ok((worst, 1e-10))
    })
}

pub fn jeffreys_reference_check() -> CheckResult {
    run_check("model.jeffreys_reference", "Fisher determinant at n = 2, p = 2, sigma = I", || {
        let m = ModelParams::new(2.0f64, SymMatrix::identity(2))?;
        let want = 75.0 / 2744.0;
        Ok(((m.fisher_log_det()?.exp() / want - 1.0).abs(), 1e-12))
    })
}

/// Frobenius distance of `I_p o I_p^{-1}` from the identity on the same grid.
pub fn fisher_inverse_check(seed: u64) -> CheckResult {
    run_check("model.fisher_inverse_composition", "closed-form inverse Fisher information", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for n in 1..=5 {
            for &p in &grid_shapes(n) {
                for _ in 0..3 {
                    let m = ModelParams::new(p, random_spd(n, &mut rng))?;
                    let c = m.fisher_information().to_dense().compose(&m.fisher_inverse().to_dense())?;
                    worst = worst.max(c.sub(&DenseOperator::identity(n))?.frobenius_norm());
                }
            }
        }
        Ok((worst, 1e-10))
    })
}

/// `dense(I(t sigma t^t)) = L^{-t} dense(I(sigma)) L^{-1}` with `L` the congruence by `t`.
pub fn fisher_equivariance_check(seed: u64) -> CheckResult {
    run_check("model.fisher_equivariance", "Fisher information under change of basis", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for n in 1..=4 {
            let t = SquareMatrix::from_fn(n, |i, j| {
                rng.sample::<f64, _>(StandardNormal) * 0.4 + if i == j { 1.5 } else { 0.0 }
            });
            let sigma = random_spd(n, &mut rng);
            let p = n as f64;
            let l_inv = DenseOperator::congruence(&t)?.inverse()?;
            let moved = ModelParams::new(p, sigma.congruence(&t)?)?.fisher_information().to_dense();
            let base = ModelParams::new(p, sigma)?.fisher_information().to_dense();
            let want = l_inv.transpose().compose(&base)?.compose(&l_inv)?;
            worst = worst.max(relative_frobenius(moved.matrix(), want.matrix()));
        }
        Ok((worst, 1e-10))
    })
}

/// `gamma_{p,sigma}(u) N(x; 0, u^{-1}) / f_{p,sigma}(x) = gamma_{p+1/2, sigma_1}(u)`
/// at 100 random `(u, x)`.
pub fn posterior_check(n: usize, seed: u64) -> CheckResult {
    let id = format!("model.posterior_identity.n{n}");
    run_check(&id, "conjugate Wishart posterior", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let p = (n as f64 - 1.0) / 2.0 + rng.random_range(0.2..4.0);
            let m = ModelParams::new(p, random_spd(n, &mut rng))?;
            let u = random_spd(n, &mut rng).scale(rng.random_range(0.3..3.0));
            let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let lhs = m.prior().log_density(&u)? + gaussian_precision_log_density(&u, &x)? - m.log_density(&x)?;
            let rhs = m.posterior(&x)?.log_density(&u)?;
            worst = worst.max(((lhs - rhs).exp() - 1.0).abs());
        }
        Ok((worst, 1e-10))
    })
}

// ---------------------------------------------------------------------------
// operator algebra

fn relative_gap(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

/// Closed-form inverse, determinant and positive-definiteness of
/// `a P(u) + b u (x) u` against dense linear algebra on random instances.
pub fn operator_algebra_check(instances: usize, seed: u64) -> CheckResult {
    run_check("lops.random_algebra", "inverse and determinant of a P(u) + b u(x)u", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for _ in 0..instances {
            let n = rng.random_range(1..=4usize);
            let definite = rng.random::<bool>();
            let u = random_symmetric(n, definite, &mut rng);
            let a = rng.random_range(0.5..2.0) * if rng.random_range(0..4) == 0 { -1.0 } else { 1.0 };
            let c = loop {
                let c = rng.random_range(-2.0..2.0);
                if (1.0 - n as f64 * c).abs() > 0.05 {
                    break c;
                }
            };
            let op = PqOperator::new(u, a, -c * a)?;
            let dense = op.to_dense();
            let inv = op.invert()?;
            worst = worst.max(relative_frobenius(inv.to_dense().matrix(), dense.inverse()?.matrix()));
            worst = worst.max(relative_gap(op.det(), dense.determinant()));
            if op.is_posdef() != (dense.min_eigenvalue() > 0.0) {
                return Ok((f64::INFINITY, 1e-9));
            }
        }
        Ok((worst, 1e-9))
    })
}

/// Elements with `c = b/(-a) = 1/n` must be reported singular.
pub fn singular_boundary_check(seed: u64) -> CheckResult {
    run_check("lops.singular_boundary", "singular elements at c = 1/n", || {
        let mut rng = substream(seed, 0);
        let mut missed = 0usize;
        for n in 1..=4 {
            for _ in 0..5 {
                let u = random_symmetric(n, true, &mut rng);
                let a = rng.random_range(0.5..2.0);
                let op = PqOperator::new(u, a, -a / n as f64)?;
                if op.invert().is_ok() || op.is_posdef() || op.det().abs() > 1e-9 * a.powi(sym_dim(n) as i32) {
                    missed += 1;
                }
            }
        }
        Ok((missed as f64, 0.0))
    })
}

// ---------------------------------------------------------------------------
// bounds

fn grid_problems(seed: u64, max_n: usize) -> Result<Vec<VanTreesProblem<f64>>> {
    let mut rng = substream(seed, 0);
    let mut out = Vec::new();
    for n in 1..=max_n {
        let nf = n as f64;
        for &p in &[(nf - 1.0) / 2.0 + 0.25, nf + 1.0] {
            for &p1 in &[(nf + 3.0) / 2.0 + 0.1, (nf + 3.0) / 2.0 + 2.0, nf + 8.0] {
                for &k in &[1usize, 3] {
                    let prior = WishartParams::new(p1, random_spd(n, &mut rng))?;
                    out.push(VanTreesProblem::new(p, prior, k)?);
                }
            }
        }
    }
    Ok(out)
}

/// Dense numeric inverse of `dense(D)` against the closed-form bound.
pub fn van_trees_dense_check(max_n: usize, seed: u64) -> CheckResult {
    let id = format!("bounds.van_trees.dense_inverse.n_le_{max_n}");
    run_check(&id, "closed-form inverse of the Van Trees information", || {
        let mut worst: f64 = 0.0;
        for problem in grid_problems(seed, max_n)? {
            let report = van_trees_bound(&problem)?;
            let numeric = van_trees_information(&problem)?.to_dense().inverse()?;
            worst = worst.max(relative_frobenius(report.dense_bound.matrix(), numeric.matrix()));
            if !report.bound.is_posdef() || report.dense_bound.min_eigenvalue() <= 0.0 {
                return Ok((f64::INFINITY, 1e-10));
            }
        }
        Ok((worst, 1e-10))
    })
}

pub fn van_trees_scalar_check() -> CheckResult {
    run_check("bounds.van_trees.scalar_value", "Van Trees bound at n = 1, p = 1, p1 = 4", || {
        let prior = WishartParams::new(4.0f64, SymMatrix::identity(1))?;
        let r = van_trees_bound(&VanTreesProblem::new(1.0, prior, 1)?)?;
        let mut worst = (r.dense_bound.get(0, 0) - 1.875).abs();
        worst = worst.max((r.a_total - 7.0 / 15.0).abs());
        worst = worst.max((r.b_signed - 1.0 / 15.0).abs());
        Ok((worst, 1e-14))
    })
}

/// The bound at `t sigma1 t^t` is `L bound(sigma1) L^t` with `L` the congruence by `t`.
pub fn van_trees_equivariance_check(seed: u64) -> CheckResult {
    run_check("bounds.van_trees.equivariance", "Van Trees bound under change of basis", || {
        let mut rng = substream(seed, 0);
        let mut worst: f64 = 0.0;
        for n in 1..=3 {
            let t = SquareMatrix::from_fn(n, |i, j| {
                rng.sample::<f64, _>(StandardNormal) * 0.4 + if i == j { 1.5 } else { 0.0 }
            });
            let s1 = random_spd(n, &mut rng);
            let (p, p1) = (n as f64, n as f64 + 3.0);
            let base = van_trees_bound(&VanTreesProblem::new(p, WishartParams::new(p1, s1.clone())?, 2)?)?;
            let moved = van_trees_bound(&VanTreesProblem::new(p, WishartParams::new(p1, s1.congruence(&t)?)?, 2)?)?;
            let l = DenseOperator::congruence(&t)?;
            let want = l.compose(&base.dense_bound)?.compose(&l.transpose())?;
            worst = worst.max(relative_frobenius(moved.dense_bound.matrix(), want.matrix()));
        }
        Ok((worst, 1e-10))
    })
}

/// `bound(k) - bound(k + 1)` is positive semidefinite.
pub fn monotone_in_k_check(seed: u64) -> CheckResult {
    run_check("bounds.monotone_in_k", "Van Trees bound decreases with more observations", || {
        let mut worst: f64 = f64::NEG_INFINITY;
        for problem in grid_problems(seed, 3)? {
            for k in 1..6 {
                let a = van_trees_bound(&problem.with_multiplicity(k)?)?.dense_bound;
                let b = van_trees_bound(&problem.with_multiplicity(k + 1)?)?.dense_bound;
                let gap = a.sub(&b)?.min_eigenvalue() / a.frobenius_norm();
                worst = worst.max(-gap);
            }
        }
        Ok((worst, 1e-12))
    })
}

/// `||g'(u)|| lambda(u)` along `u_t = s^{1/2} diag(t, 1, ..) s^{1/2}`, `t -> 0`:
/// strictly decreasing over `t = 10^-1 .. 10^-12`, and the last value relative
/// to the first is measured. With `p1 = (n+3)/2 + 1/2` the decay is `t^{1/2}`.
pub fn boundary_flux_check() -> CheckResult {
    run_check("bounds.boundary_flux", "prior score times density vanishes at the boundary", || {
        let mut worst: f64 = 0.0;
        for n in 1..=3 {
            let s1 = fixed_sigma(n);
            let root = s1.sqrt()?;
            let prior = WishartParams::new((n as f64 + 3.0) / 2.0 + 0.5, s1)?;
            let mut values = Vec::new();
            for j in 1..=12 {
                let mut d = vec![1.0; n];
                d[0] = 10f64.powi(-j);
                let u = root.sandwich(&SymMatrix::diagonal(&d))?;
                values.push(boundary_flux(&prior, &u)?);
            }
            if values.windows(2).any(|w| w[1] >= w[0]) {
                return Ok((f64::INFINITY, 1e-4));
            }
            worst = worst.max(values[values.len() - 1] / values[0]);
        }
        Ok((worst, 1e-4))
    })
}

/// `I_lambda = -E[g''] = A_1 E[P(U^{-1})]`, an exact identity of the closed forms.
pub fn density_information_hessian_check() -> CheckResult {
    run_check("bounds.density_information.hessian_form", "density information as expected negative Hessian", || {
        let mut worst: f64 = 0.0;
        for n in 1..=4 {
            let prior = WishartParams::new(n as f64 + 2.7, fixed_sigma(n))?;
            let a1 = prior.shape() - (n as f64 + 1.0) / 2.0;
            let want = prior.inverse_moments()?.congruence.to_dense().scale(a1);
            let got = density_information(&prior)?.to_dense();
            worst = worst.max(relative_frobenius(got.matrix(), want.matrix()));
        }
        Ok((worst, 1e-12))
    })
}

/// `E[g' (x) g']` under the prior, `n = 2`, `p1 = 5`.
pub fn density_information_mc_check(samples: usize, seed: u64) -> CheckResult {
    run_check("bounds.density_information.mc", "density information of the Wishart prior", || {
        let prior = WishartParams::new(5.0, fixed_sigma(2))?;
        let sampler = prior.sampler();
        let est = mc_operator_expectation(
            &entry_config(seed, samples),
            2,
            |rng| sampler.sample(rng),
            |u| DenseOperator::tensor_square(&prior_score(&prior, u).expect("positive definite draw")),
        );
        Ok((est.max_z(&density_information(&prior)?.to_dense()), 3.0))
    })
}

/// `E[I_p(U)]` under the prior against the closed form, `n = 2`.
pub fn averaged_fisher_mc_check(samples: usize, seed: u64) -> CheckResult {
    run_check("bounds.averaged_fisher.mc", "prior-averaged Fisher information", || {
        let prior = WishartParams::new(6.0, fixed_sigma(2))?;
        let problem = VanTreesProblem::new(2.0, prior.clone(), 1)?;
        let sampler = prior.sampler();
        let est = mc_operator_expectation(
            &entry_config(seed, samples),
            2,
            |rng| sampler.sample(rng),
            |u| {
                ModelParams::new(2.0, u.clone())
                    .expect("positive definite draw")
                    .fisher_information()
                    .to_dense()
            },
        );
        Ok((est.max_z(&averaged_fisher(&problem)?.to_dense()), 3.0))
    })
}

/// `(p - (n+1)/2) (1/k) sum x x^t` has mean `u^{-1}` for `x ~ f_{p,u}`.
pub fn moment_map_unbiased_check(samples: usize, seed: u64) -> CheckResult {
    run_check("mcverify.moment_map_unbiased", "moment statistic is unbiased for the inverse parameter", || {
        let (n, p, k) = (2usize, 8.0, 3usize);
        let u = fixed_sigma(n);
        let m = ModelParams::new(p, u.clone())?;
        let sampler = m.sampler();
        let factor = (p - (n as f64 + 1.0) / 2.0) / k as f64;
        let est = mc_expectation(&entry_config(seed, samples), sym_dim(n), |rng, out| {
            let mut s = SymMatrix::zeros(n);
            for _ in 0..k {
                s = s.add(&SymMatrix::outer(&sampler.sample(rng))).expect("same order");
            }
            out.copy_from_slice(&half_vec(&s.scale(factor)));
        });
        Ok((est.max_z(&half_vec(&u.inverse()?)), 3.0))
    })
}

/// Constant estimator `c = 4` with `U ~ Gamma(4, 1)`: `E[(c - U)^2] = 4`.
pub fn constant_scalar_mse_check(samples: usize, seed: u64) -> CheckResult {
    run_check("mcverify.constant_scalar_mse", "mean squared error of a constant estimator", || {
        let prior = WishartParams::new(4.0, SymMatrix::identity(1))?;
        let problem = VanTreesProblem::new(1.0, prior, 1)?;
        let spec = EstimatorSpec::Constant {
            value: SymMatrix::diagonal(&[4.0]),
        };
        let sim = simulate_estimator(&problem, &spec, &entry_config(seed, samples))?;
        Ok((sim.mse.max_z(&DenseOperator::identity(1).scale(4.0)), 3.0))
    })
}

/// Problem used by the end-to-end Van Trees checks.
pub fn end_to_end_problem() -> VanTreesProblem<f64> {
    let sigma1 = SymMatrix::from_rows(&[vec![1.0, 0.3], vec![0.3, 0.7]]).expect("square");
    let prior = WishartParams::new(10.0, sigma1).expect("valid prior");
    VanTreesProblem::new(3.0, prior, 5).expect("valid problem")
}

pub fn shipped_estimators(problem: &VanTreesProblem<f64>) -> [(&'static str, EstimatorSpec); 2] {
    [
        ("constant", EstimatorSpec::prior_mean(problem)),
        ("clipped", EstimatorSpec::default_clipped(problem)),
    ]
}

/// `-lambda_min(C - bound) <= 3 se` for a shipped estimator.
pub fn simulated_gap_check(name: &str, spec: &EstimatorSpec, samples: usize, seed: u64) -> CheckResult {
    let id = format!("bounds.van_trees.simulated.{name}");
    run_check(&id, "Van Trees inequality for a simulated estimator", || {
        let sim = simulate_estimator(&end_to_end_problem(), spec, &loewner_config(seed, samples))?;
        Ok((-sim.gap, 3.0 * sim.gap_se))
    })
}

/// Joint `2m x 2m` matrix: cross block against the identity, information
/// block against `dense(D)`, and the minimum eigenvalue against `-3 se`.
pub fn joint_matrix_checks(name: &str, spec: &EstimatorSpec, samples: usize, seed: u64) -> Vec<CheckResult> {
    let problem = end_to_end_problem();
    let start = Instant::now();
    let joint = Estimator::new(spec.clone(), &problem)
        .and_then(|e| van_trees_joint_matrix(&problem, &e, &entry_config(seed, samples)));
    let elapsed = start.elapsed().as_millis() as u64;
    let field = |f: fn(&crate::bounds::JointMatrixEstimate) -> (f64, f64)| match &joint {
        Ok(j) => Ok(f(j)),
        Err(e) => Err(e.clone()),
    };
    let mut out = vec![
        run_check(
            &format!("bounds.joint_matrix.cross_block.{name}"),
            "cross block of the joint score matrix is the identity",
            || field(|j| (j.cross_max_z, 3.0)),
        ),
        run_check(
            &format!("bounds.joint_matrix.info_block.{name}"),
            "information block of the joint score matrix",
            || field(|j| (j.info_max_z, 3.0)),
        ),
        run_check(
            &format!("bounds.joint_matrix.min_eigenvalue.{name}"),
            "joint score matrix is positive semidefinite",
            || field(|j| (-j.min_eigenvalue, 3.0 * j.min_eigenvalue_se)),
        ),
    ];
    for r in &mut out {
        r.runtime_ms += elapsed;
    }
    out
}

// ---------------------------------------------------------------------------

/// Runs the whole catalogue. `Fast` only lowers sample counts.
pub fn run_verification_suite(scope: Scope, seed: u64) -> VerificationReport {
    let ms = scope.moment_samples();
    let ts = scope.trial_samples();
    let s = |id: &str| check_seed(seed, id);
    let mut checks = vec![
        density_mixture_check(),
        density_normalization_scalar_check(),
        density_normalization_radial_check(),
    ];
    for n in 2..=3 {
        checks.push(wishart_normalization_check(n, ms, s(&format!("wishart.normalization.n{n}"))));
    }
    for n in 1..=3 {
        checks.push(laplace_check(n, ms, s(&format!("wishart.laplace.n{n}"))));
    }
    for n in 1..=3 {
        for moment in WishartMoment::ALL {
            let id = format!("wishart.moment.{}.n{n}", moment.name());
            checks.push(wishart_moment_check(moment, n, ms, s(&id)));
        }
    }
    checks.push(wishart_scalar_moments_check());
    for (n, p) in [(1usize, 1.0), (2, 2.0), (3, 3.0)] {
        for outer in [true, false] {
            checks.push(fisher_mc_check(n, p, outer, ms, s(&format!("model.fisher.{outer}.n{n}"))));
        }
    }
    for n in 1..=2 {
        checks.push(j_integral_check(n, n as f64, ms, s(&format!("model.j_integral.n{n}"))));
    }
    checks.push(j_scalar_check());
    checks.push(score_mean_check(ms, s("model.score_mean_zero")));
    checks.push(operator_algebra_check(500, s("lops.random_algebra")));
    checks.push(singular_boundary_check(s("lops.singular_boundary")));
    checks.push(jeffreys_determinant_check(s("model.jeffreys_determinant")));
    checks.push(jeffreys_reference_check());
    checks.push(fisher_inverse_check(s("model.jeffreys_determinant")));
    checks.push(fisher_equivariance_check(s("model.fisher_equivariance")));
    for n in 1..=3 {
        checks.push(posterior_check(n, s(&format!("model.posterior_identity.n{n}"))));
    }
    checks.push(van_trees_dense_check(3, s("bounds.van_trees.dense_inverse")));
    checks.push(van_trees_dense_check(4, s("bounds.van_trees.dense_inverse")));
    checks.push(van_trees_scalar_check());
    checks.push(van_trees_equivariance_check(s("bounds.van_trees.equivariance")));
    checks.push(monotone_in_k_check(s("bounds.monotone_in_k")));
    checks.push(boundary_flux_check());
    checks.push(density_information_hessian_check());
    checks.push(density_information_mc_check(ms, s("bounds.density_information.mc")));
    checks.push(averaged_fisher_mc_check(ms, s("bounds.averaged_fisher.mc")));
    checks.push(moment_map_unbiased_check(ms, s("mcverify.moment_map_unbiased")));
    checks.push(constant_scalar_mse_check(ms, s("mcverify.constant_scalar_mse")));
    let problem = end_to_end_problem();
    for (name, spec) in shipped_estimators(&problem) {
        checks.push(simulated_gap_check(name, &spec, ts, s(&format!("simulated.{name}"))));
        checks.extend(joint_matrix_checks(name, &spec, ts, s(&format!("joint.{name}"))));
    }
    let all_passed = checks.iter().all(CheckResult::passed);
    VerificationReport {
        scope,
        seed,
        all_passed,
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_check_reports_errors_as_failures() {
        let r = run_check("x", "y", || Err(crate::Error::Invalid("boom".into())));
        assert!(!r.passed());
        assert!(r.measured.is_nan());
        let ok = run_check("x", "y", || Ok((1.0, 1.0)));
        assert!(ok.passed());
    }

    #[test]
    fn check_seeds_differ_by_id() {
        assert_ne!(check_seed(1, "a"), check_seed(1, "b"));
        assert_ne!(check_seed(1, "a"), check_seed(2, "a"));
        assert_eq!(check_seed(7, "a"), check_seed(7, "a"));
    }

    #[test]
    fn scalar_mixture_matches_reference_value() {
        let v = scalar_mixture_density(1.0, 1.0, 0.0).unwrap();
        assert!((v - 0.353553390593274).abs() < 1e-12);
    }

    #[test]
    fn deterministic_checks_pass() {
        for r in [
            density_mixture_check(),
            density_normalization_scalar_check(),
            density_normalization_radial_check(),
            wishart_scalar_moments_check(),
            j_scalar_check(),
            operator_algebra_check(100, 3),
            singular_boundary_check(3),
            jeffreys_determinant_check(3),
            jeffreys_reference_check(),
            fisher_inverse_check(3),
            fisher_equivariance_check(3),
            posterior_check(2, 3),
            van_trees_dense_check(3, 3),
            van_trees_scalar_check(),
            van_trees_equivariance_check(3),
            monotone_in_k_check(3),
            boundary_flux_check(),
            density_information_hessian_check(),
        ] {
            assert!(r.passed(), "{r:?}");
        }
    }

    #[test]
    fn report_serializes_with_required_keys() {
        let r = jeffreys_reference_check();
        let v = serde_json::to_value(&r).unwrap();
        for key in ["check_id", "paper_ref", "status", "measured", "tolerance", "runtime_ms"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["status"], "pass");
    }
}
