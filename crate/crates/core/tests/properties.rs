use proptest::prelude::*;

use wishart_fisher::bounds::{van_trees_bound, van_trees_information};
use wishart_fisher::symspace::{half_unvec, half_vec, inner, rank_one_update_inverse, sym_dim};
use wishart_fisher::{
    DenseOperator, ModelParams, OrthoBasis, PqOperator, SquareMatrix, SymMatrix, VanTreesProblem, WishartParams,
};

fn sym_entries(n: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    prop::collection::vec(-2.0..2.0f64, n * n).prop_map(move |v| {
        let a = SquareMatrix::from_row_major(n, v).unwrap();
        SymMatrix::from_square(&a).unwrap()
    })
}

/// `A A^t / n + I / 4`.
fn spd(n: usize) -> impl Strategy<Value = SymMatrix<f64>> {
    prop::collection::vec(-1.5..1.5f64, n * n).prop_map(move |v| {
        let a = SquareMatrix::from_row_major(n, v).unwrap();
        let g = a.matmul(&a.transpose()).unwrap().scale(1.0 / n as f64);
        SymMatrix::from_square(&g).unwrap().add(&SymMatrix::identity(n).scale(0.25)).unwrap()
    })
}

fn order_and_spd() -> impl Strategy<Value = (usize, SymMatrix<f64>)> {
    (1usize..=4).prop_flat_map(|n| (Just(n), spd(n)))
}

fn rel(a: &SquareMatrix<f64>, b: &SquareMatrix<f64>) -> f64 {
    a.sub(b).unwrap().frobenius_norm() / b.frobenius_norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn half_vec_is_an_isometry(n in 1usize..=5, seed in any::<u64>()) {
        let mut s = seed;
        let mut next = || { s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407); ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5 };
        let u = SymMatrix::from_square(&SquareMatrix::from_fn(n, |_, _| next())).unwrap();
        let v = SymMatrix::from_square(&SquareMatrix::from_fn(n, |_, _| next())).unwrap();
        let (hu, hv) = (half_vec(&u), half_vec(&v));
        prop_assert_eq!(hu.len(), sym_dim(n));
        let dot: f64 = hu.iter().zip(&hv).map(|(a, b)| a * b).sum();
        prop_assert!((dot - inner(&u, &v).unwrap()).abs() < 1e-12);
        prop_assert!(half_unvec(n, &hu).unwrap().sub(&u).unwrap().norm() < 1e-14);
        let basis = OrthoBasis::<f64>::new(n);
        prop_assert_eq!(basis.half_vec(&u).unwrap(), hu);
    }

    #[test]
    fn orthonormal_basis_is_orthonormal(n in 1usize..=5) {
        let b = OrthoBasis::<f64>::new(n);
        for (i, e) in b.vectors().iter().enumerate() {
            for (j, f) in b.vectors().iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((inner(e, f).unwrap() - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pq_apply_matches_dense((n, u) in order_and_spd(), a in -2.0..2.0f64, b in -2.0..2.0f64, v in sym_entries(4)) {
        let v = SymMatrix::from_square(&SquareMatrix::from_fn(n, |i, j| v.get(i, j))).unwrap();
        let op = PqOperator::new(u, a, b).unwrap();
        let direct = half_vec(&op.apply(&v).unwrap());
        let dense = op.to_dense().matrix().matvec(&half_vec(&v)).unwrap();
        for (x, y) in direct.iter().zip(&dense) {
            prop_assert!((x - y).abs() < 1e-11 * (1.0 + x.abs()));
        }
        prop_assert!(op.to_dense().is_symmetric(1e-12));
    }

    #[test]
    fn pq_inverse_composes_to_identity((n, u) in order_and_spd(), a in 0.2..3.0f64, c in -3.0..3.0f64) {
        prop_assume!((1.0 - n as f64 * c).abs() > 0.05);
        let op = PqOperator::new(u, a, -c * a).unwrap();
        let inv = op.invert().unwrap();
        let id = op.to_dense().compose(&inv.to_dense()).unwrap();
        let err = id.sub(&DenseOperator::identity(n)).unwrap().frobenius_norm();
        prop_assert!(err < 1e-8, "err {err}");
        prop_assert!(rel(&op.invert().unwrap().invert().unwrap().to_dense().matrix().clone(), op.to_dense().matrix()) < 1e-9);
    }

    #[test]
    fn pq_det_and_definiteness_match_dense((n, u) in order_and_spd(), a in 0.2..3.0f64, c in -3.0..3.0f64, flip in any::<bool>()) {
        prop_assume!((1.0 - n as f64 * c).abs() > 0.05);
        let u = if flip { u.scale(-1.0) } else { u };
        let op = PqOperator::new(u, a, -c * a).unwrap();
        let dense = op.to_dense();
        let d = dense.determinant();
        prop_assert!((op.det() - d).abs() <= 1e-9 * d.abs().max(1e-300));
        prop_assert_eq!(op.is_posdef(), dense.min_eigenvalue() > 0.0);
    }

    #[test]
    fn sherman_morrison_matches_dense(a in prop::collection::vec(-1.0..1.0f64, 1..6), c in -2.0..2.0f64) {
        let norm2: f64 = a.iter().map(|x| x * x).sum();
        prop_assume!((1.0 - c * norm2).abs() > 1e-3);
        let k = a.len();
        let m = SquareMatrix::identity(k).sub(&SquareMatrix::outer(&a, &a).scale(c)).unwrap();
        let inv = rank_one_update_inverse(&a, c).unwrap().to_matrix(&a);
        prop_assert!(rel(&inv, &m.inverse().unwrap()) < 1e-9);
    }

    #[test]
    fn score_matches_finite_differences((n, sigma) in order_and_spd(), p in 0.6..5.0f64, x in prop::collection::vec(-2.0..2.0f64, 4)) {
        let p = p + (n as f64 - 1.0) / 2.0;
        let x = &x[..n];
        let m = ModelParams::new(p, sigma.clone()).unwrap();
        let g = half_vec(&m.grad(x).unwrap());
        let basis = OrthoBasis::<f64>::new(n);
        let h = 1e-5;
        for (k, e) in basis.vectors().iter().enumerate() {
            let plus = ModelParams::new(p, sigma.add(&e.scale(h)).unwrap()).unwrap().log_density(x).unwrap();
            let minus = ModelParams::new(p, sigma.sub(&e.scale(h)).unwrap()).unwrap().log_density(x).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            prop_assert!((fd - g[k]).abs() < 1e-6 * (1.0 + g[k].abs()), "coordinate {k}: fd {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn hessian_matches_finite_differences((n, sigma) in order_and_spd(), p in 0.6..5.0f64, x in prop::collection::vec(-2.0..2.0f64, 4)) {
        let p = p + (n as f64 - 1.0) / 2.0;
        let x = &x[..n];
        let m = ModelParams::new(p, sigma.clone()).unwrap();
        let hess = m.hessian(x).unwrap();
        let basis = OrthoBasis::<f64>::new(n);
        let h = 1e-5;
        for (k, e) in basis.vectors().iter().enumerate() {
            let gp = half_vec(&ModelParams::new(p, sigma.add(&e.scale(h)).unwrap()).unwrap().grad(x).unwrap());
            let gm = half_vec(&ModelParams::new(p, sigma.sub(&e.scale(h)).unwrap()).unwrap().grad(x).unwrap());
            for j in 0..sym_dim(n) {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                prop_assert!((fd - hess.get(j, k)).abs() < 1e-5 * (1.0 + fd.abs()));
            }
        }
    }

    #[test]
    fn fisher_and_its_inverse((n, sigma) in order_and_spd(), p in 0.05..6.0f64) {
        let p = p + (n as f64 - 1.0) / 2.0;
        let m = ModelParams::new(p, sigma).unwrap();
        let f = m.fisher_information();
        prop_assert!(f.is_posdef());
        let id = f.to_dense().compose(&m.fisher_inverse().to_dense()).unwrap();
        prop_assert!(id.sub(&DenseOperator::identity(n)).unwrap().frobenius_norm() < 1e-9);
        let closed = m.fisher_log_det().unwrap();
        prop_assert!((f.to_dense().determinant().ln() - closed).abs() < 1e-9 * (1.0 + closed.abs()));
    }

    #[test]
    fn posterior_is_conjugate((n, sigma) in order_and_spd(), u in spd(4), p in 0.2..4.0f64, x in prop::collection::vec(-3.0..3.0f64, 4)) {
        let p = p + (n as f64 - 1.0) / 2.0;
        let u = SymMatrix::from_square(&SquareMatrix::from_fn(n, |i, j| u.get(i, j))).unwrap();
        prop_assume!(u.is_positive_definite());
        let x = &x[..n];
        let m = ModelParams::new(p, sigma).unwrap();
        let lhs = m.prior().log_density(&u).unwrap()
            + wishart_fisher::model::gaussian_precision_log_density(&u, x).unwrap()
            - m.log_density(x).unwrap();
        let rhs = m.posterior(x).unwrap().log_density(&u).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-9);
    }

    #[test]
    fn van_trees_bound_properties((n, s1) in (1usize..=4).prop_flat_map(|n| (Just(n), spd(n))), dp in 0.05..4.0f64, dp1 in 0.05..6.0f64, k in 1usize..5) {
        let p = (n as f64 - 1.0) / 2.0 + dp;
        let p1 = (n as f64 + 3.0) / 2.0 + dp1;
        let problem = VanTreesProblem::new(p, WishartParams::new(p1, s1).unwrap(), k).unwrap();
        let report = van_trees_bound(&problem).unwrap();
        prop_assert!(report.bound.is_posdef());
        prop_assert!(report.dense_bound.is_symmetric(1e-12));
        let numeric = van_trees_information(&problem).unwrap().to_dense().inverse().unwrap();
        prop_assert!(rel(report.dense_bound.matrix(), numeric.matrix()) < 1e-10);
        let more = van_trees_bound(&problem.with_multiplicity(k + 1).unwrap()).unwrap();
        let gap = report.dense_bound.sub(&more.dense_bound).unwrap().min_eigenvalue();
        prop_assert!(gap >= -1e-12 * report.dense_bound.frobenius_norm());
    }

    #[test]
    fn single_precision_tracks_double((n, sigma) in order_and_spd(), p in 0.5..4.0f64) {
        let p = p + (n as f64 - 1.0) / 2.0;
        let m64 = ModelParams::new(p, sigma.clone()).unwrap();
        let m32 = ModelParams::new(p as f32, sigma.cast::<f32>()).unwrap();
        let (f64op, f32op) = (m64.fisher_inverse(), m32.fisher_inverse());
        prop_assert!(((f32op.a as f64) - f64op.a).abs() < 1e-4 * f64op.a.abs());
        prop_assert!(((f32op.b as f64) - f64op.b).abs() < 1e-4 * f64op.b.abs().max(1e-3));
    }
}
