mod common;

use dibound::grid::{coefficients, dense_discretized_bound, dense_relative_entropy_bound, make_grid, GridSpec};
use dibound::oracle::{relative_entropy_eigen, relative_entropy_truncated};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::random_cq;

fn random_nodes(rng: &mut impl Rng, r: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..r - 1).map(|_| rng.gen_range(1e-3..1.0)).collect();
    v.push(1.0);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

#[test]
fn equal_operators_give_zero() {
    let mut rng = StdRng::seed_from_u64(7);
    let cq = random_cq(&mut rng, 2, 2);
    let sigma = cq.sigma();
    for r in [2, 5, 12] {
        let c = coefficients(&make_grid(&GridSpec::logarithmic(r, 0.01)).unwrap()).unwrap();
        let b = dense_discretized_bound(&sigma, &sigma, &c).unwrap();
        assert!((-1e-12..=1e-12).contains(&b), "r = {r}: {b}");
    }
}

#[test]
fn deterministic_identity() {
    // sum_k beta_k = 1 for every grid: the weights integrate the hat functions
    // against s/s = 1 and the end term adds t_1
    for spec in [GridSpec::logarithmic(8, 1e-3), GridSpec::uniform(13, 0.2), GridSpec::logarithmic(30, 1e-4)] {
        let c = coefficients(&make_grid(&spec).unwrap()).unwrap();
        let total: f64 = c.beta.iter().sum();
        assert!((total - 1.0).abs() < 1e-12, "{spec:?}: {total}");
    }
}

#[test]
fn rejects_rho_above_lambda_sigma() {
    let mut rng = StdRng::seed_from_u64(1);
    let cq = random_cq(&mut rng, 2, 2);
    let c = coefficients(&[0.5, 1.0]).unwrap();
    assert!(dense_discretized_bound(&cq.rho().scale(3.0), &cq.sigma(), &c).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn coefficient_signs(seed in any::<u64>(), r in 2usize..20) {
        let mut rng = StdRng::seed_from_u64(seed);
        let nodes = random_nodes(&mut rng, r);
        prop_assume!(nodes.len() >= 2);
        let c = coefficients(&nodes).unwrap();
        prop_assert!(c.alpha.iter().all(|a| *a <= 0.0));
        prop_assert!(c.beta.iter().all(|b| *b >= 0.0));
    }

    #[test]
    fn discretization_is_an_upper_bound(seed in any::<u64>(), na in 2usize..=3, ne in 1usize..=3, r in 2usize..16) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cq = random_cq(&mut rng, na, ne);
        let (rho, sigma) = (cq.rho(), cq.sigma());
        let c = coefficients(&random_nodes(&mut rng, r)).unwrap();
        let bound = dense_relative_entropy_bound(&rho, &sigma, &c).unwrap();
        let exact = relative_entropy_eigen(&rho, &sigma).unwrap();
        prop_assert!(bound >= exact - 1e-9, "bound {} < exact {}", bound, exact);
    }

    #[test]
    fn refinement_never_increases(seed in any::<u64>(), r in 2usize..12) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cq = random_cq(&mut rng, 2, 2);
        let (rho, sigma) = (cq.rho(), cq.sigma());
        let nodes = random_nodes(&mut rng, r);
        let t = rng.gen_range(1e-4..1.0);
        prop_assume!(nodes.iter().all(|n| (n - t).abs() > 1e-9));
        let mut finer = nodes.clone();
        finer.push(t);
        finer.sort_by(f64::total_cmp);
        let coarse = dense_discretized_bound(&rho, &sigma, &coefficients(&nodes).unwrap()).unwrap();
        let fine = dense_discretized_bound(&rho, &sigma, &coefficients(&finer).unwrap()).unwrap();
        prop_assert!(fine <= coarse + 1e-12, "refined {} > coarse {}", fine, coarse);
    }

    #[test]
    fn gap_shrinks_on_nested_grids(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let cq = random_cq(&mut rng, 2, 2);
        let (rho, sigma) = (cq.rho(), cq.sigma());
        let exact = relative_entropy_truncated(&rho, &sigma, 0.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        // 2^k + 1 logarithmic nodes are nested
        for k in 1..=5 {
            let c = coefficients(&make_grid(&GridSpec::logarithmic((1 << k) + 1, 1e-3)).unwrap()).unwrap();
            let gap = dense_relative_entropy_bound(&rho, &sigma, &c).unwrap() - exact;
            prop_assert!(gap >= -1e-9 && gap <= last + 1e-12);
            last = gap;
        }
    }
}
