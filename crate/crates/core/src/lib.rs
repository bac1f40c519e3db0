//! Fisher information and Van Trees bounds for the Wishart-randomised
//! Gaussian model on the cone of positive definite matrices.
//!
//! The closed forms (linear algebra, operators on symmetric matrices, Wishart
//! moments, model information and bounds) are generic over [`Real`], with
//! `f64` and `f32` aliases below. Sampling and Monte Carlo run in `f64`.

pub mod bounds;
pub mod error;
pub mod linalg;
pub mod lops;
pub mod mcverify;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod symspace;
pub mod wishart;

pub use bounds::{van_trees_bound, BoundReport, VanTreesProblem};
pub use error::{Error, Result};
pub use linalg::SquareMatrix;
pub use lops::PqOperator;
pub use mcverify::{McConfig, McRng};
pub use model::ModelParams;
pub use scalar::Real;
pub use symspace::{DenseOperator, OrthoBasis, SymMatrix};
pub use wishart::WishartParams;

pub type SymMatrix64 = SymMatrix<f64>;
pub type SymMatrix32 = SymMatrix<f32>;
pub type DenseOperator64 = DenseOperator<f64>;
pub type DenseOperator32 = DenseOperator<f32>;
pub type PqOperator64 = PqOperator<f64>;
pub type PqOperator32 = PqOperator<f32>;
pub type WishartParams64 = WishartParams<f64>;
pub type WishartParams32 = WishartParams<f32>;
pub type ModelParams64 = ModelParams<f64>;
pub type ModelParams32 = ModelParams<f32>;
pub type VanTreesProblem64 = VanTreesProblem<f64>;
pub type VanTreesProblem32 = VanTreesProblem<f32>;
