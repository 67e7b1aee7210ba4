#![allow(dead_code)]

use dibound::oracle::{CqState, DenseOperator, C64};
use nalgebra::DMatrix;
use rand::Rng;

/// `G G^dagger / tr` for a complex Gaussian-like `G` with `rank` columns.
pub fn random_density(rng: &mut impl Rng, n: usize, rank: usize) -> DenseOperator {
    let g = DMatrix::from_fn(n, rank, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale(tr)
}

/// `sum_a p(a) |a><a| (x) rho_a` with full-rank random blocks.
pub fn random_cq(rng: &mut impl Rng, alphabet: usize, eve_dim: usize) -> CqState {
    let raw: Vec<f64> = (0..alphabet).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights = raw.iter().map(|w| w / total).collect();
    let blocks = (0..alphabet).map(|_| random_density(rng, eve_dim, eve_dim)).collect();
    CqState::new(weights, blocks).expect("valid cq state")
}

/// `1 - h((1 + sqrt(S^2/4 - 1)) / 2)`, the one-sided CHSH curve.
pub fn chsh_entropy(s: f64) -> f64 {
    let p = 0.5 * (1.0 + (s * s / 4.0 - 1.0).max(0.0).sqrt());
    1.0 - binary_entropy(p)
}

pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}
