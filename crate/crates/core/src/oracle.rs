//! Dense finite-dimensional reference computations: positive-part traces,
//! relative entropy by three independent routes, conditional entropy of
//! classical-quantum states, and Born-rule statistics of qubit models.

use std::f64::consts::LN_2;

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{invalid, Result};
use crate::quad;
use crate::scenario::{Distribution, Scenario};

pub type C64 = Complex<f64>;
pub type DenseOperator = DMatrix<C64>;

const HERMITIAN_TOL: f64 = 1e-9;
const PSD_TOL: f64 = 1e-10;
/// Relative threshold below which eigenvalues count as zero.
const KERNEL_TOL: f64 = 1e-10;
const OPERATOR_INEQ_TOL: f64 = 1e-9;

pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> DenseOperator {
    DMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| C64::new(x, 0.0)))
}

pub fn diag(values: &[f64]) -> DenseOperator {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| C64::new(x, 0.0)),
    ))
}

pub fn identity(n: usize) -> DenseOperator {
    DMatrix::identity(n, n)
}

pub fn kron(a: &DenseOperator, b: &DenseOperator) -> DenseOperator {
    a.kronecker(b)
}

pub fn trace(a: &DenseOperator) -> f64 {
    a.trace().re
}

fn check_hermitian(a: &DenseOperator) -> Result<()> {
    if !a.is_square() {
        return invalid(format!("operator is {}x{}, not square", a.nrows(), a.ncols()));
    }
    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let dev = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > HERMITIAN_TOL * scale {
        return invalid(format!("operator is not Hermitian (deviation {dev:e})"));
    }
    Ok(())
}

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `a`.
pub fn hermitian_eigen(a: &DenseOperator) -> (Vec<f64>, DenseOperator) {
    let sym = (a + a.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

fn eigenvalues(a: &DenseOperator) -> Vec<f64> {
    hermitian_eigen(a).0
}

fn check_psd(a: &DenseOperator, name: &str) -> Result<()> {
    check_hermitian(a)?;
    let min = eigenvalues(a).first().copied().unwrap_or(0.0);
    if min < -PSD_TOL {
        return invalid(format!("{name} is not positive semidefinite (min eigenvalue {min:e})"));
    }
    Ok(())
}

/// Sum of the positive eigenvalues, `sup { tr[P A] : 0 <= P <= 1 }`.
pub fn trace_plus(a: &DenseOperator) -> Result<f64> {
    check_hermitian(a)?;
    Ok(eigenvalues(a).iter().filter(|&&x| x > 0.0).sum())
}

/// Magnitude of the sum of the negative eigenvalues.
pub fn trace_minus(a: &DenseOperator) -> Result<f64> {
    check_hermitian(a)?;
    Ok(-eigenvalues(a).iter().filter(|&&x| x < 0.0).sum::<f64>())
}

fn unchecked_trace_plus(a: &DenseOperator) -> f64 {
    eigenvalues(a).iter().filter(|&&x| x > 0.0).sum()
}

fn check_pair(rho: &DenseOperator, sigma: &DenseOperator) -> Result<()> {
    if rho.shape() != sigma.shape() {
        return invalid(format!(
            "rho is {}x{} but sigma is {}x{}",
            rho.nrows(),
            rho.ncols(),
            sigma.nrows(),
            sigma.ncols()
        ));
    }
    check_psd(rho, "rho")?;
    check_psd(sigma, "sigma")
}

/// True when `ker sigma` is (numerically) contained in `ker rho`.
fn support_contained(rho: &DenseOperator, sigma: &DenseOperator) -> bool {
    let (q, v) = hermitian_eigen(sigma);
    let qmax = q.iter().copied().fold(0.0, f64::max);
    let rmax = eigenvalues(rho).iter().copied().fold(0.0, f64::max);
    for (j, &qj) in q.iter().enumerate() {
        if qj <= KERNEL_TOL * qmax {
            let vj = v.column(j);
            let weight = (vj.adjoint() * rho * vj)[(0, 0)].re;
            if weight > KERNEL_TOL * rmax.max(1e-300) {
                return false;
            }
        }
    }
    true
}

/// `D(rho || sigma)` in bits from eigendecompositions; `+inf` when the
/// support of `rho` is not contained in that of `sigma`.
pub fn relative_entropy_eigen(rho: &DenseOperator, sigma: &DenseOperator) -> Result<f64> {
    check_pair(rho, sigma)?;
    if !support_contained(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let (p, u) = hermitian_eigen(rho);
    let (q, v) = hermitian_eigen(sigma);
    let pmax = p.iter().copied().fold(0.0, f64::max);
    let qmax = q.iter().copied().fold(0.0, f64::max);
    let overlap = u.adjoint() * &v;
    let mut d = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        if pi <= KERNEL_TOL * pmax {
            continue;
        }
        d += pi * pi.ln();
        for (j, &qj) in q.iter().enumerate() {
            if qj <= KERNEL_TOL * qmax {
                continue;
            }
            d -= pi * overlap[(i, j)].norm_sqr() * qj.ln();
        }
    }
    Ok(d / LN_2)
}

/// Generalized eigenvalues `g` with `rho v = g sigma v` on the support of
/// `sigma`, ascending. These are the kinks of `s -> tr+[s sigma - rho]`.
fn generalized_eigenvalues(rho: &DenseOperator, sigma: &DenseOperator) -> Vec<f64> {
    let (q, v) = hermitian_eigen(sigma);
    let qmax = q.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..q.len()).filter(|&j| q[j] > KERNEL_TOL * qmax).collect();
    if keep.is_empty() {
        return Vec::new();
    }
    // W = V_s diag(q^{-1/2}); G = W^dagger rho W
    let w = DMatrix::from_fn(v.nrows(), keep.len(), |r, c| {
        v[(r, keep[c])] * C64::new(1.0 / q[keep[c]].sqrt(), 0.0)
    });
    eigenvalues(&(w.adjoint() * rho * &w))
}

/// Operator bounds `mu sigma <= rho <= lambda sigma` from the extreme
/// generalized eigenvalues; `lambda` carries `1e-9` slack and `mu` is
/// lowered by the same amount (never below zero).
pub fn operator_bounds(rho: &DenseOperator, sigma: &DenseOperator) -> Result<(f64, f64)> {
    check_pair(rho, sigma)?;
    if !support_contained(rho, sigma) {
        return invalid("rho <= lambda sigma fails for every lambda (support of rho exceeds sigma)");
    }
    let g = generalized_eigenvalues(rho, sigma);
    let lo = g.first().copied().unwrap_or(0.0);
    let hi = g.last().copied().unwrap_or(0.0);
    let mu = if g.len() < sigma.nrows() {
        0.0
    } else {
        (lo - 1e-9).max(0.0)
    };
    Ok((mu, hi + 1e-9))
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { abs_tol: 1e-8 }
    }
}

/// `D(rho || sigma)` in bits from the integral over `t` of
/// `tr-[(1 - t) rho + t sigma] / (|t| (t - 1)^2)`. Only `t < 0` and `t > 1`
/// contribute; both half-lines are mapped onto `(0, 1)`.
pub fn relative_entropy_frenkel(
    rho: &DenseOperator,
    sigma: &DenseOperator,
    quad_spec: QuadratureSpec,
) -> Result<f64> {
    check_pair(rho, sigma)?;
    if !support_contained(rho, sigma) {
        return Ok(f64::INFINITY);
    }
    let pencil = |t: f64| -> f64 {
        let m = rho.scale(1.0 - t) + sigma.scale(t);
        -eigenvalues(&m).iter().filter(|&&x| x < 0.0).sum::<f64>()
    };
    // t = -u / (1 - u) on t < 0; kinks at generalized eigenvalues below 1
    // t = 1 + u / (1 - u) on t > 1; kinks at reciprocals of those above 1
    let g = generalized_eigenvalues(rho, sigma);
    let neg_breaks: Vec<f64> = g.iter().copied().filter(|&x| x > 0.0 && x < 1.0).collect();
    let pos_breaks: Vec<f64> = g.iter().filter(|&&x| x > 1.0).map(|x| 1.0 / x).collect();
    let tol = quad_spec.abs_tol * LN_2 / 2.0;
    let negative = quad::integrate(
        |u| {
            if u <= 0.0 || u >= 1.0 {
                return Ok(0.0);
            }
            let t = -u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            Ok(pencil(t) * jac / (t.abs() * (t - 1.0).powi(2)))
        },
        0.0,
        1.0,
        &neg_breaks,
        tol,
    )?;
    let positive = quad::integrate(
        |u| {
            if u <= 0.0 || u >= 1.0 {
                return Ok(0.0);
            }
            let t = 1.0 + u / (1.0 - u);
            let jac = 1.0 / ((1.0 - u) * (1.0 - u));
            Ok(pencil(t) * jac / (t.abs() * (t - 1.0).powi(2)))
        },
        0.0,
        1.0,
        &pos_breaks,
        tol,
    )?;
    Ok((trace(rho) - trace(sigma) + negative + positive) / LN_2)
}

/// `D(rho || sigma)` in bits from the integral of `tr+[s sigma - rho] / s`
/// over `[mu, lambda]` plus closed-form end terms. Requires
/// `mu sigma <= rho <= lambda sigma`.
pub fn relative_entropy_truncated(
    rho: &DenseOperator,
    sigma: &DenseOperator,
    mu: f64,
    lambda: f64,
) -> Result<f64> {
    check_pair(rho, sigma)?;
    if !(mu >= 0.0) || !(lambda > mu) {
        return invalid(format!("need 0 <= mu < lambda, got mu = {mu}, lambda = {lambda}"));
    }
    let lower = eigenvalues(&(rho - sigma.scale(mu)))[0];
    if lower < -OPERATOR_INEQ_TOL {
        return invalid(format!("lower side mu sigma <= rho fails (min eigenvalue {lower:e})"));
    }
    let upper = eigenvalues(&(sigma.scale(lambda) - rho))[0];
    if upper < -OPERATOR_INEQ_TOL {
        return invalid(format!("upper side rho <= lambda sigma fails (min eigenvalue {upper:e})"));
    }
    let breaks = generalized_eigenvalues(rho, sigma);
    let integral = quad::integrate(
        |s| {
            if s <= 0.0 {
                return Ok(0.0);
            }
            Ok(unchecked_trace_plus(&(sigma.scale(s) - rho)) / s)
        },
        mu,
        lambda,
        &breaks,
        1e-8 * LN_2 / 2.0,
    )?;
    let tr_rho = trace(rho);
    let tr_sigma = trace(sigma);
    Ok((tr_rho - tr_sigma + integral + tr_rho * lambda.ln() - (lambda - 1.0) * tr_sigma) / LN_2)
}

/// Classical-quantum state `sum_a p(a) |a><a| (x) rho_E^a`.
#[derive(Debug, Clone)]
pub struct CqState {
    weights: Vec<f64>,
    blocks: Vec<DenseOperator>,
}

impl CqState {
    pub fn new(weights: Vec<f64>, blocks: Vec<DenseOperator>) -> Result<Self> {
        if weights.is_empty() || weights.len() != blocks.len() {
            return invalid("need one Eve block per classical symbol");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 || weights.iter().any(|&w| w < 0.0) {
            return invalid(format!("weights must be a probability vector (sum {total})"));
        }
        let dim = blocks[0].nrows();
        for (w, b) in weights.iter().zip(&blocks) {
            if b.nrows() != dim {
                return invalid("Eve blocks differ in dimension");
            }
            check_psd(b, "Eve block")?;
            if *w > 0.0 && (trace(b) - 1.0).abs() > 1e-9 {
                return invalid(format!("Eve block has trace {}", trace(b)));
            }
        }
        Ok(Self { weights, blocks })
    }

    /// Builds the state from unnormalized conditional operators
    /// `p(a) rho_E^a`.
    pub fn from_subnormalized(parts: Vec<DenseOperator>) -> Result<Self> {
        let weights: Vec<f64> = parts.iter().map(trace).collect();
        let dim = parts.first().map_or(1, |p| p.nrows());
        let blocks = parts
            .into_iter()
            .zip(&weights)
            .map(|(p, &w)| if w > 0.0 { p.unscale(w) } else { identity(dim).unscale(dim as f64) })
            .collect();
        let total: f64 = weights.iter().sum();
        Self::new(weights.iter().map(|w| w / total).collect(), blocks)
    }

    pub fn alphabet_size(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn eve_dim(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn rho(&self) -> DenseOperator {
        let d = self.eve_dim();
        let n = self.alphabet_size();
        let mut out = DMatrix::zeros(n * d, n * d);
        for (a, (w, b)) in self.weights.iter().zip(&self.blocks).enumerate() {
            out.view_mut((a * d, a * d), (d, d)).copy_from(&b.scale(*w));
        }
        out
    }

    pub fn eve_marginal(&self) -> DenseOperator {
        let d = self.eve_dim();
        let mut out = DMatrix::zeros(d, d);
        for (w, b) in self.weights.iter().zip(&self.blocks) {
            out += b.scale(*w);
        }
        out
    }

    /// `1_A (x) rho_E`.
    pub fn sigma(&self) -> DenseOperator {
        kron(&identity(self.alphabet_size()), &self.eve_marginal())
    }
}

/// `H(A|E) = -D(rho_AE || 1 (x) rho_E)` in bits.
pub fn conditional_entropy_cq(state: &CqState) -> Result<f64> {
    let d = relative_entropy_eigen(&state.rho(), &state.sigma())?;
    let max = (state.alphabet_size() as f64).log2();
    Ok((-d).clamp(0.0, max))
}

/// Two-qubit states used for honest implementations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateSpec {
    /// `(|00> + |11>) / sqrt 2`.
    MaxEntangled,
    /// `v Phi+ + (1 - v) 1/4`.
    Werner(f64),
    /// `(1 - q) Phi+ + q Phi-`.
    Dephased(f64),
}

impl StateSpec {
    pub fn density(&self) -> Result<DenseOperator> {
        let h = 0.5;
        let phi_plus = from_real(4, 4, &[h, 0., 0., h, 0., 0., 0., 0., 0., 0., 0., 0., h, 0., 0., h]);
        let phi_minus = from_real(4, 4, &[h, 0., 0., -h, 0., 0., 0., 0., 0., 0., 0., 0., -h, 0., 0., h]);
        match *self {
            StateSpec::MaxEntangled => Ok(phi_plus),
            StateSpec::Werner(v) => {
                if !(0.0..=1.0).contains(&v) {
                    return invalid(format!("visibility {v} outside [0, 1]"));
                }
                Ok(phi_plus.scale(v) + identity(4).scale((1.0 - v) / 4.0))
            }
            StateSpec::Dephased(q) => {
                if !(0.0..=1.0).contains(&q) {
                    return invalid(format!("dephasing {q} outside [0, 1]"));
                }
                Ok(phi_plus.scale(1.0 - q) + phi_minus.scale(q))
            }
        }
    }
}

/// Measurement angles in the x-z plane of the Bloch sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementAngleSet {
    alice: Vec<f64>,
    bob: Vec<f64>,
}

impl MeasurementAngleSet {
    /// Angles are reduced into `[0, 2 pi)`.
    pub fn new(alice: Vec<f64>, bob: Vec<f64>) -> Result<Self> {
        if alice.is_empty() || bob.is_empty() {
            return invalid("each party needs at least one angle");
        }
        if alice.iter().chain(&bob).any(|a| !a.is_finite()) {
            return invalid("angles must be finite");
        }
        let tau = std::f64::consts::TAU;
        let wrap = |v: Vec<f64>| v.into_iter().map(|a| a.rem_euclid(tau) % tau).collect();
        Ok(Self {
            alice: wrap(alice),
            bob: wrap(bob),
        })
    }

    /// Optimal CHSH strategy for `Phi+`: Alice {0, pi/2}, Bob {pi/4, -pi/4}.
    pub fn chsh_optimal() -> Self {
        use std::f64::consts::FRAC_PI_4;
        Self::new(vec![0.0, 2.0 * FRAC_PI_4], vec![FRAC_PI_4, -FRAC_PI_4]).expect("valid angles")
    }

    pub fn alice(&self) -> &[f64] {
        &self.alice
    }

    pub fn bob(&self) -> &[f64] {
        &self.bob
    }
}

/// `P_alpha = (1 + sin(alpha) X + cos(alpha) Z) / 2`, the projector for
/// outcome 0; outcome 1 is its complement.
pub fn qubit_projector(alpha: f64) -> DenseOperator {
    let (s, c) = alpha.sin_cos();
    from_real(2, 2, &[0.5 * (1.0 + c), 0.5 * s, 0.5 * s, 0.5 * (1.0 - c)])
}

fn outcome_projector(alpha: f64, outcome: usize) -> DenseOperator {
    let p = qubit_projector(alpha);
    if outcome == 0 {
        p
    } else {
        identity(2) - p
    }
}

/// Born-rule table `p(a, b | x, y)` for a two-qubit state and binary
/// x-z plane measurements.
pub fn honest_statistics(state: StateSpec, angles: &MeasurementAngleSet) -> Result<Distribution> {
    let rho = state.density()?;
    let scenario = Scenario::new(angles.alice.len(), angles.bob.len(), 2, 2)?;
    let mut d = Distribution::zeros(scenario);
    for (x, &ax) in angles.alice.iter().enumerate() {
        for (y, &by) in angles.bob.iter().enumerate() {
            for a in 0..2 {
                for b in 0..2 {
                    let m = kron(&outcome_projector(ax, a), &outcome_projector(by, b));
                    d.set(a, b, x, y, (&rho * m).trace().re);
                }
            }
        }
    }
    Ok(d)
}

/// Eve's purification of a two-qubit state: returns the pure state on
/// `A (x) B (x) E` with `E` of dimension 4.
fn purification(rho: &DenseOperator) -> DVector<C64> {
    let (vals, vecs) = hermitian_eigen(rho);
    let n = rho.nrows();
    let mut psi = DVector::zeros(n * n);
    for (i, &l) in vals.iter().enumerate() {
        if l <= 0.0 {
            continue;
        }
        let e_i = vecs.column(i);
        for r in 0..n {
            psi[r * n + i] += e_i[r] * C64::new(l.sqrt(), 0.0);
        }
    }
    psi
}

/// Eve's conditional operators `tr_AB[(M (x) 1_E) |psi><psi|]`.
fn eve_operator(psi: &DVector<C64>, m_ab: &DenseOperator) -> DenseOperator {
    let n = m_ab.nrows();
    let e = psi.len() / n;
    let m_full = kron(m_ab, &identity(e));
    let proj = m_full * psi;
    // (rho_E)_{ij} = sum_s psi[s, j]^* proj[s, i]
    DMatrix::from_fn(e, e, |i, j| (0..n).map(|s| proj[s * e + i] * psi[s * e + j].conj()).sum())
}

/// Classical-quantum state between Alice's outcome on input `x` and an
/// adversary holding the purification of the two-qubit state.
pub fn honest_cq_state(state: StateSpec, angles: &MeasurementAngleSet, x: usize) -> Result<CqState> {
    let Some(&ax) = angles.alice.get(x) else {
        return invalid(format!("no Alice input {x}"));
    };
    let psi = purification(&state.density()?);
    let parts = (0..2)
        .map(|a| eve_operator(&psi, &kron(&outcome_projector(ax, a), &identity(2))))
        .collect();
    CqState::from_subnormalized(parts)
}

/// As [`honest_cq_state`] for the joint outcome pair of inputs `(x, y)`,
/// classical symbols ordered `a * 2 + b`.
pub fn honest_cq_state_two_sided(
    state: StateSpec,
    angles: &MeasurementAngleSet,
    x: usize,
    y: usize,
) -> Result<CqState> {
    let (Some(&ax), Some(&by)) = (angles.alice.get(x), angles.bob.get(y)) else {
        return invalid(format!("no input pair ({x}, {y})"));
    };
    let psi = purification(&state.density()?);
    let mut parts = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            let m = kron(&outcome_projector(ax, a), &outcome_projector(by, b));
            parts.push(eve_operator(&psi, &m));
        }
    }
    CqState::from_subnormalized(parts)
}
