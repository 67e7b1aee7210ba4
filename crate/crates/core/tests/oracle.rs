mod common;

use std::f64::consts::FRAC_PI_4;

use dibound::oracle::{
    conditional_entropy_cq, diag, honest_cq_state, honest_statistics, operator_bounds, relative_entropy_eigen,
    relative_entropy_frenkel, relative_entropy_truncated, CqState, MeasurementAngleSet, QuadratureSpec, StateSpec,
};
use dibound::scenario::{bell_value, BellFunctional};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

use common::{binary_entropy, chsh_entropy, random_cq, random_density};

#[test]
fn diagonal_pairs_match_classical_formula() {
    let p: [f64; 3] = [0.7, 0.2, 0.1];
    let q = [0.4, 0.4, 0.2];
    let exact: f64 = p.iter().zip(&q).map(|(p, q)| p * (p / q).log2()).sum();
    let (rho, sigma) = (diag(&p), diag(&q));
    assert!((relative_entropy_eigen(&rho, &sigma).unwrap() - exact).abs() < 1e-12);
    let f = relative_entropy_frenkel(&rho, &sigma, QuadratureSpec::default()).unwrap();
    assert!((f - exact).abs() < 1e-7, "{f} vs {exact}");
    let (mu, lambda) = operator_bounds(&rho, &sigma).unwrap();
    let t = relative_entropy_truncated(&rho, &sigma, mu, lambda).unwrap();
    assert!((t - exact).abs() < 1e-7, "{t} vs {exact}");
}

#[test]
fn support_violation_is_infinite() {
    let rho = diag(&[0.5, 0.5]);
    let sigma = diag(&[1.0, 0.0]);
    assert_eq!(relative_entropy_eigen(&rho, &sigma).unwrap(), f64::INFINITY);
    assert!(operator_bounds(&rho, &sigma).is_err());
}

#[test]
fn truncated_rejects_wrong_bounds() {
    let rho = diag(&[0.8, 0.2]);
    let sigma = diag(&[0.5, 0.5]);
    let err = relative_entropy_truncated(&rho, &sigma, 0.0, 1.0).unwrap_err().to_string();
    assert!(err.contains("upper"), "{err}");
    let err = relative_entropy_truncated(&rho, &sigma, 0.5, 2.0).unwrap_err().to_string();
    assert!(err.contains("lower"), "{err}");
}

#[test]
fn honest_chsh_entropy_lies_above_closed_form() {
    for v in [1.0 / 2f64.sqrt() + 1e-3, 0.8, 0.9, 0.97] {
        let angles = MeasurementAngleSet::chsh_optimal();
        let d = honest_statistics(StateSpec::Werner(v), &angles).unwrap();
        let s = bell_value(&BellFunctional::chsh(), &d).unwrap();
        assert!((s - 2.0 * 2f64.sqrt() * v).abs() < 1e-12);
        let h = conditional_entropy_cq(&honest_cq_state(StateSpec::Werner(v), &angles, 0).unwrap()).unwrap();
        assert!(h >= chsh_entropy(s) - 1e-9, "v = {v}: {h} vs {}", chsh_entropy(s));
    }
    let pure = honest_cq_state(StateSpec::MaxEntangled, &MeasurementAngleSet::chsh_optimal(), 0).unwrap();
    assert!((conditional_entropy_cq(&pure).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn dephased_state_entropy() {
    // Eve's purification distinguishes Phi+ from Phi-, which reveals Z
    // outcomes but not X outcomes
    let angles = MeasurementAngleSet::new(vec![0.0, 2.0 * FRAC_PI_4], vec![0.0]).unwrap();
    for q in [0.0, 0.1, 0.3] {
        let zs = conditional_entropy_cq(&honest_cq_state(StateSpec::Dephased(q), &angles, 0).unwrap()).unwrap();
        assert!((zs - (1.0 - binary_entropy(q))).abs() < 1e-9, "q = {q}: {zs}");
        let xs = conditional_entropy_cq(&honest_cq_state(StateSpec::Dephased(q), &angles, 1).unwrap()).unwrap();
        assert!((xs - 1.0).abs() < 1e-9, "q = {q}: {xs}");
    }
}

fn seeded() -> impl Strategy<Value = (u64, usize)> {
    (any::<u64>(), 2usize..=4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn three_routes_agree((seed, n) in seeded()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rho = random_density(&mut rng, n, n);
        let sigma = random_density(&mut rng, n, n);
        let e = relative_entropy_eigen(&rho, &sigma).unwrap();
        let f = relative_entropy_frenkel(&rho, &sigma, QuadratureSpec::default()).unwrap();
        let (mu, lambda) = operator_bounds(&rho, &sigma).unwrap();
        let t = relative_entropy_truncated(&rho, &sigma, mu, lambda).unwrap();
        prop_assert!((e - f).abs() < 1e-6, "eigen {} frenkel {}", e, f);
        prop_assert!((e - t).abs() < 1e-6, "eigen {} truncated {}", e, t);
    }

    #[test]
    fn klein_inequality((seed, n) in seeded()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let rho = random_density(&mut rng, n, n);
        let sigma = random_density(&mut rng, n, n);
        prop_assert!(relative_entropy_eigen(&rho, &sigma).unwrap() >= -1e-12);
        prop_assert!(relative_entropy_eigen(&rho, &rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn conditional_entropy_range(seed in any::<u64>(), na in 2usize..=3, ne in 1usize..=3) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cq = random_cq(&mut rng, na, ne);
        let h = conditional_entropy_cq(&cq).unwrap();
        prop_assert!(h >= 0.0 && h <= (na as f64).log2() + 1e-12);
    }

    #[test]
    fn identical_blocks_give_shannon_entropy(seed in any::<u64>(), w in 0.01f64..0.99) {
        let mut rng = StdRng::seed_from_u64(seed);
        let block = random_density(&mut rng, 2, 2);
        let cq = CqState::new(vec![w, 1.0 - w], vec![block.clone(), block]).unwrap();
        prop_assert!((conditional_entropy_cq(&cq).unwrap() - binary_entropy(w)).abs() < 1e-9);
    }
}
