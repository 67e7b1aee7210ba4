//! Integration nodes and the coefficient pairs of the discretized bound
//!
//! ```text
//!     int_0^lambda ds/s tr+[s sigma - rho]  <=  sum_{k=0}^r tr+[alpha_k rho + beta_k sigma]
//! ```
//!
//! For `k >= 1`, `-alpha_k = w_k` is the integral of the k-th piecewise
//! linear hat function against `1/s` on `[t_1, t_r]` and `beta_k = w_k t_k`.
//! The segment `[0, t_1]` is covered by `(alpha_0, beta_0) = (-1, t_1)`.

use crate::error::{invalid, Result};
use crate::oracle::{self, DenseOperator};

#[derive(Debug, Clone, PartialEq)]
pub enum Spacing {
    Uniform,
    Logarithmic,
    /// Explicit nodes; the last one is `lambda`.
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nodes: usize,
    pub lambda: f64,
    pub t_min: f64,
    pub spacing: Spacing,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nodes: 8,
            lambda: 1.0,
            t_min: 1e-3,
            spacing: Spacing::Logarithmic,
        }
    }
}

impl GridSpec {
    pub fn logarithmic(nodes: usize, t_min: f64) -> Self {
        Self {
            nodes,
            t_min,
            ..Self::default()
        }
    }

    pub fn uniform(nodes: usize, t_min: f64) -> Self {
        Self {
            nodes,
            t_min,
            spacing: Spacing::Uniform,
            ..Self::default()
        }
    }

    pub fn custom(nodes: Vec<f64>) -> Self {
        Self {
            nodes: nodes.len(),
            lambda: nodes.last().copied().unwrap_or(f64::NAN),
            t_min: nodes.first().copied().unwrap_or(f64::NAN),
            spacing: Spacing::Custom(nodes),
        }
    }
}

fn check_nodes(nodes: &[f64]) -> Result<()> {
    if nodes.len() < 2 {
        return invalid(format!("need at least 2 nodes, got {}", nodes.len()));
    }
    if nodes.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return invalid("nodes must be positive and finite");
    }
    if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
        return invalid(format!("nodes must be strictly increasing ({} then {})", w[0], w[1]));
    }
    Ok(())
}

pub fn make_grid(spec: &GridSpec) -> Result<Vec<f64>> {
    let nodes = match &spec.spacing {
        Spacing::Custom(list) => list.clone(),
        spacing => {
            if !(spec.lambda > 0.0) || !spec.lambda.is_finite() {
                return invalid(format!("lambda must be positive, got {}", spec.lambda));
            }
            if !(spec.t_min > 0.0) || spec.t_min >= spec.lambda {
                return invalid(format!(
                    "t_min must lie in (0, lambda), got t_min = {}, lambda = {}",
                    spec.t_min, spec.lambda
                ));
            }
            if spec.nodes < 2 {
                return invalid(format!("need at least 2 nodes, got {}", spec.nodes));
            }
            let r = spec.nodes;
            let last = (r - 1) as f64;
            let mut v: Vec<f64> = (0..r)
                .map(|i| {
                    let f = i as f64 / last;
                    match spacing {
                        Spacing::Uniform => spec.t_min + (spec.lambda - spec.t_min) * f,
                        _ => spec.t_min * (spec.lambda / spec.t_min).powf(f),
                    }
                })
                .collect();
            v[0] = spec.t_min;
            v[r - 1] = spec.lambda;
            v
        }
    };
    check_nodes(&nodes)?;
    Ok(nodes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCoefficients {
    /// `t_1 .. t_r`.
    pub nodes: Vec<f64>,
    /// `alpha_0 .. alpha_r`.
    pub alpha: Vec<f64>,
    /// `beta_0 .. beta_r`.
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl GridCoefficients {
    /// Number of terms `r + 1`.
    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    /// Node value attached to term `k` (`t_1` for the end term).
    pub fn node(&self, k: usize) -> f64 {
        if k == 0 {
            self.nodes[0]
        } else {
            self.nodes[k - 1]
        }
    }
}

pub fn coefficients(nodes: &[f64]) -> Result<GridCoefficients> {
    check_nodes(nodes)?;
    let r = nodes.len();
    // chord weights: left part of hat k on [t_{k-1}, t_k], right part on [t_k, t_{k+1}]
    let right = |k: usize| {
        let (t, u) = (nodes[k], nodes[k + 1]);
        (1.0 + t / (u - t)) * (u / t).ln() - 1.0
    };
    let left = |k: usize| {
        let (s, t) = (nodes[k - 1], nodes[k]);
        1.0 - (s / (t - s)) * (t / s).ln()
    };
    let mut alpha = vec![-1.0];
    let mut beta = vec![nodes[0]];
    for k in 0..r {
        let mut w = 0.0;
        if k + 1 < r {
            w += right(k);
        }
        if k > 0 {
            w += left(k);
        }
        // rounding can leave -1e-17 for nearly coincident nodes
        let w = w.max(0.0);
        alpha.push(-w);
        beta.push(w * nodes[k]);
    }
    Ok(GridCoefficients {
        nodes: nodes.to_vec(),
        alpha,
        beta,
        lambda: nodes[r - 1],
    })
}

/// `sum_k tr+[alpha_k rho + beta_k sigma]`, the supremum in the discretized
/// bound evaluated exactly for dense operators. Requires `rho <= lambda sigma`.
pub fn dense_discretized_bound(rho: &DenseOperator, sigma: &DenseOperator, coeffs: &GridCoefficients) -> Result<f64> {
    let gap = oracle::hermitian_eigen(&(sigma.scale(coeffs.lambda) - rho)).0;
    if gap.first().is_some_and(|&g| g < -1e-9) {
        return invalid(format!("rho <= {} sigma is violated", coeffs.lambda));
    }
    let mut total = 0.0;
    for (a, b) in coeffs.alpha.iter().zip(&coeffs.beta) {
        total += oracle::trace_plus(&(rho.scale(*a) + sigma.scale(*b)))?;
    }
    Ok(total)
}

/// Upper bound on `D(rho || sigma)` in bits implied by the discretization
/// (`mu = 0`).
pub fn dense_relative_entropy_bound(rho: &DenseOperator, sigma: &DenseOperator, coeffs: &GridCoefficients) -> Result<f64> {
    let sup = dense_discretized_bound(rho, sigma, coeffs)?;
    let (tr_rho, tr_sigma) = (oracle::trace(rho), oracle::trace(sigma));
    let l = coeffs.lambda;
    Ok((tr_rho - tr_sigma + sup + tr_rho * l.ln() - (l - 1.0) * tr_sigma) / std::f64::consts::LN_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(make_grid(&GridSpec::uniform(2, 0.5)).unwrap(), vec![0.5, 1.0]);
        let g = make_grid(&GridSpec::logarithmic(3, 0.25)).unwrap();
        assert!((g[1] - 0.5).abs() < 1e-15 && g[0] == 0.25 && g[2] == 1.0);
        assert_eq!(make_grid(&GridSpec::custom(vec![0.1, 0.3, 2.0])).unwrap(), vec![0.1, 0.3, 2.0]);
        assert!(make_grid(&GridSpec::custom(vec![0.3, 0.1, 1.0])).is_err());
        assert!(make_grid(&GridSpec::logarithmic(4, 1.0)).is_err());
        assert!(make_grid(&GridSpec::logarithmic(1, 0.1)).is_err());
    }

    #[test]
    fn two_node_coefficients() {
        let c = coefficients(&[0.5, 1.0]).unwrap();
        let l2 = std::f64::consts::LN_2;
        assert_eq!((c.alpha[0], c.beta[0]), (-1.0, 0.5));
        assert!((c.alpha[1] + (2.0 * l2 - 1.0)).abs() < 1e-15);
        assert!((c.beta[1] - (2.0 * l2 - 1.0) * 0.5).abs() < 1e-15);
        assert!((c.alpha[2] + (1.0 - l2)).abs() < 1e-15);
        assert!((c.beta[2] - (1.0 - l2)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(coefficients(&[0.5]).is_err());
        assert!(coefficients(&[0.0, 1.0]).is_err());
        assert!(coefficients(&[0.5, 0.5, 1.0]).is_err());
    }
}
