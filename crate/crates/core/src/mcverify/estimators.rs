//! Estimators of the randomised parameter and their simulated mean squared error.

use serde::{Deserialize, Serialize};

use crate::bounds::{van_trees_bound, BoundReport, VanTreesProblem};
use crate::error::{Error, Result};
use crate::symspace::{DenseOperator, SymMatrix};
use crate::wishart::{WishartParams, WishartSampler};

use super::{mc_operator_expectation, McConfig, McRng, OperatorEstimate};

/// One draw of `U` from the prior followed by `k` observations from `f_{p,U}`.
#[derive(Debug, Clone)]
pub struct Trial {
    pub u: SymMatrix<f64>,
    pub xs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct TrialSampler {
    prior: WishartSampler,
    model_p: f64,
    k: usize,
}

impl TrialSampler {
    pub fn new(problem: &VanTreesProblem<f64>) -> Self {
        Self {
            prior: problem.prior().sampler(),
            model_p: problem.model_p(),
            k: problem.multiplicity(),
        }
    }

    pub fn draw(&self, rng: &mut McRng) -> Trial {
        let u = self.prior.sample(rng);
        let mixing = WishartSampler::new(&WishartParams::new(self.model_p, u.clone()).expect("validated shape"));
        let xs = (0..self.k)
            .map(|_| {
                let v = mixing.sample(rng);
                crate::model::sample_gaussian_precision(&v, rng).expect("positive definite draw")
            })
            .collect();
        Trial { u, xs }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    /// Always returns the same matrix.
    Constant { value: SymMatrix<f64> },
    /// Inverse of `(p - (n+1)/2) / k * sum x x^t` with eigenvalues clipped to
    /// `[eig_floor, eig_cap]`; non-positive eigenvalues of the moment matrix map to the cap.
    ClippedMoment { eig_floor: f64, eig_cap: f64 },
}

impl EstimatorSpec {
    /// Constant estimator at the prior mean.
    pub fn prior_mean(problem: &VanTreesProblem<f64>) -> Self {
        Self::Constant {
            value: problem.prior().mean(),
        }
    }

    pub fn default_clipped(problem: &VanTreesProblem<f64>) -> Self {
        let s = problem.prior().scale();
        Self::ClippedMoment {
            eig_floor: 1e-3 * s.min_eigenvalue(),
            eig_cap: 1e3 * s.max_eigenvalue(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimator {
    spec: EstimatorSpec,
    factor: f64,
}

impl Estimator {
    pub fn new(spec: EstimatorSpec, problem: &VanTreesProblem<f64>) -> Result<Self> {
        let n = problem.order();
        let factor = match &spec {
            EstimatorSpec::Constant { value } => {
                if value.order() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: value.order(),
                    });
                }
                0.0
            }
            EstimatorSpec::ClippedMoment { eig_floor, eig_cap } => {
                if !(*eig_floor > 0.0 && eig_cap > eig_floor && eig_cap.is_finite()) {
                    return Err(Error::Invalid(format!(
                        "clip range [{eig_floor}, {eig_cap}] must satisfy 0 < floor < cap < inf"
                    )));
                }
                let shift = problem.model_p() - (n as f64 + 1.0) / 2.0;
                if !(shift > 0.0) {
                    return Err(Error::domain("p", problem.model_p(), "p > (n+1)/2"));
                }
                shift / problem.multiplicity() as f64
            }
        };
        Ok(Self { spec, factor })
    }

    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn estimate(&self, xs: &[Vec<f64>]) -> SymMatrix<f64> {
        match &self.spec {
            EstimatorSpec::Constant { value } => value.clone(),
            EstimatorSpec::ClippedMoment { eig_floor, eig_cap } => {
                let n = xs[0].len();
                let mut s = SymMatrix::zeros(n);
                for x in xs {
                    s = s.add(&SymMatrix::outer(x)).expect("same order");
                }
                s.scale(self.factor).map_eigenvalues(|l| {
                    let inv = if l > 0.0 { 1.0 / l } else { f64::INFINITY };
                    inv.clamp(*eig_floor, *eig_cap)
                })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Simulation {
    /// `E[(X - U) (x) (X - U)]`.
    pub mse: OperatorEstimate,
    pub bound: BoundReport<f64>,
    /// Minimum eigenvalue of `mse - bound`.
    pub gap: f64,
    pub gap_se: f64,
}

impl Simulation {
    /// The gap is consistent with `mse >= bound` at three standard errors.
    pub fn dominates_bound(&self) -> bool {
        self.gap >= -3.0 * self.gap_se
    }
}

pub fn simulate_estimator(
    problem: &VanTreesProblem<f64>,
    spec: &EstimatorSpec,
    config: &McConfig,
) -> Result<Simulation> {
    let estimator = Estimator::new(spec.clone(), problem)?;
    let bound = van_trees_bound(problem)?;
    let sampler = TrialSampler::new(problem);
    let mse = mc_operator_expectation(
        config,
        problem.order(),
        |rng| sampler.draw(rng),
        |trial| {
            let e = estimator.estimate(&trial.xs).sub(&trial.u).expect("same order");
            DenseOperator::tensor_square(&e)
        },
    );
    let (gap, gap_se) = mse.loewner_gap(&bound.dense_bound)?;
    Ok(Simulation {
        mse,
        bound,
        gap,
        gap_se,
    })
}
