use srkweak::{ex1, ex3, required_distributions, weak_error, McConfig, Method, WeakErrorRecord};

// Expected weak errors of the discrete schemes, from the exact second-moment recursion
// of each linear test problem.
const AN3D1_EX1_H1: f64 = -16.468;
const AN3D1_EX3_H1: f64 = 7.457e-4;
const EULER_EX3_H1: f64 = -4.3729e-2;
const EULER_EX3_H2: f64 = 0.22469;

fn assert_near(rec: &WeakErrorRecord, expected: f64) {
    let sd = rec.sigma2_mu.sqrt();
    let slack = 4.0 * sd + 1e-3 * expected.abs();
    assert!(
        (rec.mu_hat - expected).abs() <= slack,
        "{rec}: expected {expected:e}, off by {:e} (allowed {slack:e})",
        rec.mu_hat - expected
    );
}

#[test]
fn an3d1_ex1_matches_oracle() {
    let rec = weak_error(&Method::an3d1(), &ex1(), 1.0, &McConfig::new(200_000, 1)).unwrap();
    assert_near(&rec, AN3D1_EX1_H1);
}

#[test]
fn discrete_increments_give_the_same_expectation() {
    let cfg = McConfig::new(200_000, 2).with_increments(required_distributions(3).unwrap());
    let rec = weak_error(&Method::an3d1(), &ex1(), 1.0, &cfg).unwrap();
    assert_near(&rec, AN3D1_EX1_H1);
}

#[test]
fn an3d1_ex3_matches_oracle() {
    let rec = weak_error(&Method::an3d1(), &ex3(), 1.0, &McConfig::new(200_000, 3)).unwrap();
    assert_near(&rec, AN3D1_EX3_H1);
}

#[test]
fn euler_ex3_matches_oracle() {
    let cfg = McConfig::new(200_000, 4);
    assert_near(&weak_error(&Method::euler(), &ex3(), 2.0, &cfg).unwrap(), EULER_EX3_H2);
    assert_near(&weak_error(&Method::euler(), &ex3(), 1.0, &cfg).unwrap(), EULER_EX3_H1);
}

#[test]
fn confidence_interval_is_symmetric_ninety_percent() {
    let rec = weak_error(&Method::an3d1(), &ex3(), 2.0, &McConfig::new(10_000, 5)).unwrap();
    let half = 1.6449 * rec.sigma2_mu.sqrt();
    assert!((rec.ci_hi - rec.mu_hat - half).abs() < 1e-15);
    assert!((rec.mu_hat - rec.ci_lo - half).abs() < 1e-15);
}
