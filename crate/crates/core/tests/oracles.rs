//! Closed forms against values computed independently by hand or from statrs.

use statrs::function::gamma::ln_gamma;

use wishart_fisher::bounds::{averaged_fisher, density_information, van_trees_bound};
use wishart_fisher::wishart::ln_multivariate_gamma;
use wishart_fisher::{ModelParams, SymMatrix, VanTreesProblem, WishartParams};

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol * b.abs().max(1.0), "{a} vs {b}");
}

#[test]
fn multivariate_gamma_matches_product_form() {
    // (2 pi) lead factor: Lebesgue measure in orthonormal coordinates.
    let ln_tau = std::f64::consts::TAU.ln();
    for &p in &[1.0, 1.7, 2.5, 4.0] {
        let two = 0.5 * ln_tau + ln_gamma(p) + ln_gamma(p - 0.5);
        close(ln_multivariate_gamma(2, p).unwrap(), two, 1e-14);
        let three = 1.5 * ln_tau + ln_gamma(p) + ln_gamma(p - 0.5) + ln_gamma(p - 1.0);
        if p > 1.0 {
            close(ln_multivariate_gamma(3, p).unwrap(), three, 1e-14);
        }
    }
}

#[test]
fn scalar_density_at_zero_and_sqrt_two() {
    let m = ModelParams::new(1.0, SymMatrix::identity(1)).unwrap();
    close(m.density(&[0.0]).unwrap(), 0.5 / 2f64.sqrt(), 1e-15);
    close(m.density(&[2f64.sqrt()]).unwrap(), 0.125, 1e-15);
}

#[test]
fn scalar_fisher_value() {
    let m = ModelParams::new(1.0, SymMatrix::identity(1)).unwrap();
    close(m.fisher_information().to_dense().get(0, 0), 0.2, 1e-15);
    close(m.fisher_inverse().to_dense().get(0, 0), 5.0, 1e-14);
}

#[test]
fn fisher_determinant_reference() {
    let m = ModelParams::new(2.0f64, SymMatrix::identity(2)).unwrap();
    close(m.fisher_log_det().unwrap().exp(), 75.0 / 2744.0, 1e-13);
}

#[test]
fn scalar_van_trees_values() {
    let prior = WishartParams::new(4.0, SymMatrix::identity(1)).unwrap();
    let problem = VanTreesProblem::new(1.0, prior.clone(), 1).unwrap();
    close(density_information(&prior).unwrap().to_dense().get(0, 0), 0.5, 1e-14);
    close(averaged_fisher(&problem).unwrap().to_dense().get(0, 0), 1.0 / 30.0, 1e-14);
    close(van_trees_bound(&problem).unwrap().dense_bound.get(0, 0), 15.0 / 8.0, 1e-14);
}
