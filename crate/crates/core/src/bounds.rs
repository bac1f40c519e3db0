//! Cramér–Rao and Van Trees lower bounds for the randomised model.
//!
//! With a Wishart prior `U ~ gamma_{p1,sigma1}` on the model parameter, both
//! the prior's density information and the prior-averaged Fisher information
//! are elements of the span of `P(sigma1^{-1})` and
//! `sigma1^{-1} (x) sigma1^{-1}`, so their sum inverts in closed form to an
//! element over base point `sigma1`.
//!
//! All assembly is done with signed coefficient totals `(A, B_signed)` so that
//! `D = A P(sigma1^{-1}) + B_signed sigma1^{-1} (x) sigma1^{-1}`.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix;
use crate::lops::PqOperator;
use crate::mcverify::{mc_expectation, spread_se, substream, Estimator, McConfig, McRng};
use crate::mcverify::estimators::TrialSampler;
use crate::model::ModelParams;
use crate::scalar::Real;
use crate::symspace::{half_vec, sym_dim, DenseOperator, SymMatrix};
use crate::wishart::WishartParams;

#[derive(Debug, Clone)]
pub struct VanTreesProblem<T> {
    model_p: T,
    prior: WishartParams<T>,
    multiplicity: usize,
}

impl<T: Real> VanTreesProblem<T> {
    pub fn new(model_p: T, prior: WishartParams<T>, multiplicity: usize) -> Result<Self> {
        let n = T::from_usize_lossy(prior.order());
        let half = T::lit(0.5);
        if !(prior.shape() > (n + T::lit(3.0)) * half) {
            return Err(Error::domain("p1", prior.shape().as_f64(), "p1 > (n+3)/2"));
        }
        if !(model_p > (n - T::one()) * half) {
            return Err(Error::domain("p", model_p.as_f64(), "p > (n-1)/2"));
        }
        if multiplicity == 0 {
            return Err(Error::domain("k", 0.0, "k >= 1"));
        }
        Ok(Self {
            model_p,
            prior,
            multiplicity,
        })
    }

    pub fn model_p(&self) -> T {
        self.model_p
    }

    pub fn prior(&self) -> &WishartParams<T> {
        &self.prior
    }

    pub fn multiplicity(&self) -> usize {
        self.multiplicity
    }

    pub fn order(&self) -> usize {
        self.prior.order()
    }

    pub fn with_multiplicity(&self, k: usize) -> Result<Self> {
        Self::new(self.model_p, self.prior.clone(), k)
    }
}

/// `A_i = p1 - (n+i)/2`.
fn a_coef<T: Real>(prior: &WishartParams<T>, i: usize) -> T {
    prior.shape() - T::from_usize_lossy(prior.order() + i) * T::lit(0.5)
}

/// Score of the prior log density: `g'(u) = -sigma1^{-1} + A_1 u^{-1}`.
pub fn prior_score<T: Real>(prior: &WishartParams<T>, u: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let a1 = a_coef(prior, 1);
    u.inverse()?.scale(a1).sub(&prior.scale().inverse()?)
}

/// `||g'(u)|| lambda(u)`, which must vanish as `u` approaches the boundary of
/// the positive definite cone for the Stokes step to hold.
pub fn boundary_flux<T: Real>(prior: &WishartParams<T>, u: &SymMatrix<T>) -> Result<T> {
    let dens = prior.log_density(u)?.exp();
    Ok(prior_score(prior, u)?.norm() * dens)
}

/// `I_lambda = (A_1 P(sigma1^{-1}) + sigma1^{-1}(x)sigma1^{-1} / 2) / (A_3 A_0)`.
pub fn density_information<T: Real>(prior: &WishartParams<T>) -> Result<PqOperator<T>> {
    let a3 = a_coef(prior, 3);
    if !(a3 > T::zero()) {
        return Err(Error::domain("p1", prior.shape().as_f64(), "p1 > (n+3)/2"));
    }
    let a0 = a_coef(prior, 0);
    let a1 = a_coef(prior, 1);
    let d = a3 * a0;
    Ok(PqOperator {
        u: prior.scale().inverse()?,
        a: a1 / d,
        b: T::lit(0.5) / d,
    })
}

/// `k E[I_p(U)]` for `U` drawn from the prior:
/// `k ((2p A_1 + A_3) P(sigma1^{-1}) - (A_3 - p) sigma1^{-1}(x)sigma1^{-1}) / (2(2p+3) A_3 A_1 A_0)`.
pub fn averaged_fisher<T: Real>(problem: &VanTreesProblem<T>) -> Result<PqOperator<T>> {
    let prior = &problem.prior;
    let p = problem.model_p;
    let (a0, a1, a3) = (a_coef(prior, 0), a_coef(prior, 1), a_coef(prior, 3));
    let two = T::lit(2.0);
    let k = T::from_usize_lossy(problem.multiplicity);
    let d = two * (two * p + T::lit(3.0)) * a3 * a1 * a0;
    Ok(PqOperator {
        u: prior.scale().inverse()?,
        a: k * (two * p * a1 + a3) / d,
        b: -k * (a3 - p) / d,
    })
}

/// `D = I_lambda + k E[I_p(U)]`.
pub fn van_trees_information<T: Real>(problem: &VanTreesProblem<T>) -> Result<PqOperator<T>> {
    density_information(&problem.prior)?.add(&averaged_fisher(problem)?)
}

#[derive(Debug, Clone)]
pub struct BoundReport<T> {
    /// `D^{-1}`, an element over base point `sigma1`.
    pub bound: PqOperator<T>,
    pub dense_bound: DenseOperator<T>,
    /// Coefficient of `P(sigma1^{-1})` in `D`.
    pub a_total: T,
    /// Signed coefficient of `sigma1^{-1} (x) sigma1^{-1}` in `D`.
    pub b_signed: T,
    pub min_eig_checks: BTreeMap<String, f64>,
}

pub fn van_trees_bound<T: Real>(problem: &VanTreesProblem<T>) -> Result<BoundReport<T>> {
    let info = van_trees_information(problem)?;
    let bound = info.invert()?;
    let dense_bound = bound.to_dense();
    let mut min_eig_checks = BTreeMap::new();
    min_eig_checks.insert(
        "information".to_string(),
        info.to_dense().min_eigenvalue().as_f64(),
    );
    min_eig_checks.insert("bound".to_string(), dense_bound.min_eigenvalue().as_f64());
    Ok(BoundReport {
        a_total: info.a,
        b_signed: info.b,
        bound,
        dense_bound,
        min_eig_checks,
    })
}

impl<T: Real + Serialize> Serialize for BoundReport<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(5))?;
        map.serialize_entry("A", &self.a_total.as_f64())?;
        map.serialize_entry("B_signed", &self.b_signed.as_f64())?;
        map.serialize_entry("bound", &self.bound)?;
        map.serialize_entry("dense_bound", &self.dense_bound)?;
        map.serialize_entry("min_eig_checks", &self.min_eig_checks)?;
        map.end()
    }
}

/// Minimum eigenvalue of `mse - I_p(sigma)^{-1}`.
pub fn cramer_rao_gap<T: Real>(params: &ModelParams<T>, mse: &DenseOperator<T>) -> Result<T> {
    Ok(mse.sub(&params.fisher_inverse().to_dense())?.min_eigenvalue())
}

/// Minimum eigenvalue of `c - bound`.
pub fn loewner_gap<T: Real>(c: &DenseOperator<T>, bound: &PqOperator<T>) -> Result<T> {
    Ok(c.sub(&bound.to_dense())?.min_eigenvalue())
}

/// Monte Carlo estimate of the `2m x 2m` block matrix
/// `E[(e, s)(e, s)^t]` with `e = X - u` and `s = g'(u) + sum_i l'_{x_i}(u)`,
/// whose blocks are `[[C, I], [I, D]]`.
#[derive(Debug, Clone)]
pub struct JointMatrixEstimate {
    pub matrix: SquareMatrix<f64>,
    pub std_err: SquareMatrix<f64>,
    pub min_eigenvalue: f64,
    pub min_eigenvalue_se: f64,
    /// Largest `|cross - I| / se` over the off-diagonal block.
    pub cross_max_z: f64,
    /// Largest `|info - dense(D)| / se` over the bottom-right block.
    pub info_max_z: f64,
}

impl JointMatrixEstimate {
    pub fn block(&self, row: usize, col: usize) -> SquareMatrix<f64> {
        let m = self.matrix.order() / 2;
        SquareMatrix::from_fn(m, |i, j| self.matrix[(row * m + i, col * m + j)])
    }
}

/// Coordinates of the joint score `g'(u) + sum_i l'_{x_i}(u)`.
fn joint_score(problem: &VanTreesProblem<f64>, u: &SymMatrix<f64>, xs: &[Vec<f64>]) -> Vec<f64> {
    let mut s = prior_score(&problem.prior, u).expect("prior draws are positive definite");
    let model = ModelParams::new(problem.model_p, u.clone()).expect("positive definite draw");
    for x in xs {
        s = s.add(&model.grad(x).expect("order checked")).expect("same order");
    }
    half_vec(&s)
}

pub fn van_trees_joint_matrix(
    problem: &VanTreesProblem<f64>,
    estimator: &Estimator,
    config: &McConfig,
) -> Result<JointMatrixEstimate> {
    let n = problem.order();
    let m = sym_dim(n);
    let mm = 2 * m;
    let sampler = TrialSampler::new(problem);
    let est = mc_expectation(config, mm * mm, |rng: &mut McRng, out| {
        let trial = sampler.draw(rng);
        let xhat = estimator.estimate(&trial.xs);
        let mut w = half_vec(&xhat.sub(&trial.u).expect("same order"));
        w.extend(joint_score(problem, &trial.u, &trial.xs));
        for i in 0..mm {
            for j in 0..mm {
                out[i * mm + j] = w[i] * w[j];
            }
        }
    });
    let to_mat = |v: &[f64]| SquareMatrix::from_row_major(mm, v.to_vec()).expect("sized");
    let matrix = to_mat(&est.mean);
    let std_err = to_mat(&est.std_err);
    let min_eigenvalue = matrix.min_eigenvalue();
    let per_batch: Vec<f64> = est.batch_means.iter().map(|b| to_mat(b).min_eigenvalue()).collect();

    let info = van_trees_information(problem)?.to_dense();
    let mut cross_max_z: f64 = 0.0;
    let mut info_max_z: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            let want = if i == j { 1.0 } else { 0.0 };
            let (r, c) = (i, m + j);
            cross_max_z = cross_max_z.max((matrix[(r, c)] - want).abs() / std_err[(r, c)]);
            let (r, c) = (m + i, m + j);
            info_max_z = info_max_z.max((matrix[(r, c)] - info.get(i, j)).abs() / std_err[(r, c)]);
        }
    }
    Ok(JointMatrixEstimate {
        matrix,
        std_err,
        min_eigenvalue,
        min_eigenvalue_se: spread_se(&per_batch),
        cross_max_z,
        info_max_z,
    })
}

/// Regenerates trial `index` of a run seeded with `seed`.
pub fn replay_trial(problem: &VanTreesProblem<f64>, seed: u64, index: u64) -> (SymMatrix<f64>, Vec<Vec<f64>>) {
    let trial = TrialSampler::new(problem).draw(&mut substream(seed, index));
    (trial.u, trial.xs)
}
