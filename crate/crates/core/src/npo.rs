//! Noncommutative polynomial optimization problems for entropy bounds.
//!
//! One-sided problems bound `H(A|E)` for Alice's key input `x`:
//!
//! ```text
//!     H(A|E) >= (|A| - 1)/ln 2
//!               + inf sum_{k=0}^r sum_a < -alpha_k M_{a|x} P_k^(a) - beta_k P_k^(a) > / ln 2
//! ```
//!
//! over states and projectors `P_k^(a)` commuting with both parties'
//! measurements and compatible with the observed statistics. Two-sided
//! problems do the same for the pair `(a, b)` with `M_{a|x} N_{b|y}`.
//! Per-node mode moves the infimum inside the sum over `k`, which gives
//! `r + 1` independent (smaller, weaker) problems.

use std::f64::consts::LN_2;

use dibound_sdp::Sense;

use crate::algebra::{Alphabet, Generator, Poly};
use crate::error::{invalid, Result};
use crate::grid::GridCoefficients;
use crate::scenario::{BellFunctional, ConstraintSense, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Joint,
    PerNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    OneSided,
    TwoSided,
    MinEntropy,
    BellValue,
}

/// `poly (sense) bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub poly: Poly,
    pub sense: ConstraintSense,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NpoProblem {
    pub kind: ProblemKind,
    pub scenario: Scenario,
    pub alphabet: Alphabet,
    pub objective: Poly,
    pub offset: f64,
    pub sense: Sense,
    pub constraints: Vec<LinearConstraint>,
    pub key_x: usize,
    pub key_y: Option<usize>,
    pub grid: Option<GridCoefficients>,
    /// Grid terms `k` covered by this problem (all of `0..=r` in joint mode).
    pub terms: Vec<usize>,
}

/// `M_{a|x}` with the last outcome written as `1 - sum` of the others.
pub fn alice_projector(s: &Scenario, x: usize, a: usize) -> Poly {
    if a + 1 < s.alice_outcomes {
        Poly::generator(Generator::alice(x, a))
    } else {
        let gens: Vec<Generator> = (0..s.alice_outcomes - 1).map(|o| Generator::alice(x, o)).collect();
        Poly::complement(&gens)
    }
}

pub fn bob_projector(s: &Scenario, y: usize, b: usize) -> Poly {
    if b + 1 < s.bob_outcomes {
        Poly::generator(Generator::bob(y, b))
    } else {
        let gens: Vec<Generator> = (0..s.bob_outcomes - 1).map(|o| Generator::bob(y, o)).collect();
        Poly::complement(&gens)
    }
}

fn measurement_alphabet(s: &Scenario) -> Alphabet {
    Alphabet::measurements(s.alice_inputs, s.alice_outcomes, s.bob_inputs, s.bob_outcomes)
}

/// `sum c_{abxy} <M_{a|x} N_{b|y}>` as a polynomial (without the offset).
pub fn functional_poly(f: &BellFunctional, alphabet: &Alphabet) -> Poly {
    let s = f.scenario;
    let mut p = Poly::zero();
    for (a, b, x, y) in s.entries() {
        let c = f.coeff(a, b, x, y);
        if c == 0.0 {
            continue;
        }
        let term = alice_projector(&s, x, a).mul(&bob_projector(&s, y, b), alphabet);
        p.add_scaled(&term, c);
    }
    p
}

fn translate_constraints(
    scenario: &Scenario,
    constraints: &[BellFunctional],
    alphabet: &Alphabet,
) -> Result<Vec<LinearConstraint>> {
    constraints
        .iter()
        .map(|f| {
            if f.scenario != *scenario {
                return invalid(format!("constraint is for scenario {}, problem for {scenario}", f.scenario));
            }
            Ok(LinearConstraint {
                poly: functional_poly(f, alphabet),
                sense: f.sense,
                bound: f.threshold - f.offset,
            })
        })
        .collect()
}

fn check_grid(grid: &GridCoefficients) -> Result<()> {
    if (grid.lambda - 1.0).abs() > 1e-12 {
        return invalid(format!(
            "entropy problems need lambda = 1 (rho_AE <= 1 (x) rho_E), grid has lambda = {}",
            grid.lambda
        ));
    }
    Ok(())
}

fn check_x(s: &Scenario, x: usize) -> Result<()> {
    if x >= s.alice_inputs {
        return invalid(format!("key input x = {x} but Alice has {} inputs", s.alice_inputs));
    }
    Ok(())
}

/// Objective for the grid terms in `terms`, with Eve node index `node_of(k)`.
fn entropy_objective(
    grid: &GridCoefficients,
    terms: &[usize],
    node_of: impl Fn(usize) -> usize,
    labels: &[Poly],
    alphabet: &Alphabet,
) -> Poly {
    let mut obj = Poly::zero();
    for &k in terms {
        for (label, m) in labels.iter().enumerate() {
            let p = Poly::generator(Generator::eve(node_of(k), label));
            let mp = m.mul(&p, alphabet);
            obj.add_scaled(&mp, -grid.alpha[k] / LN_2);
            obj.add_scaled(&p, -grid.beta[k] / LN_2);
        }
    }
    obj
}

fn build_entropy(
    kind: ProblemKind,
    scenario: &Scenario,
    constraints: &[BellFunctional],
    grid: &GridCoefficients,
    x: usize,
    y: Option<usize>,
    mode: Mode,
) -> Result<Vec<NpoProblem>> {
    check_grid(grid)?;
    check_x(scenario, x)?;
    let base = measurement_alphabet(scenario);
    // classical labels and the measurement operator attached to each
    let labels: Vec<Poly> = match y {
        None => (0..scenario.alice_outcomes).map(|a| alice_projector(scenario, x, a)).collect(),
        Some(y) => {
            let mut v = Vec::new();
            for a in 0..scenario.alice_outcomes {
                for b in 0..scenario.bob_outcomes {
                    v.push(alice_projector(scenario, x, a).mul(&bob_projector(scenario, y, b), &base));
                }
            }
            v
        }
    };
    let offset = (labels.len() as f64 - 1.0) / LN_2;
    let all_terms: Vec<usize> = (0..grid.len()).collect();
    let groups: Vec<Vec<usize>> = match mode {
        Mode::Joint => vec![all_terms],
        Mode::PerNode => all_terms.into_iter().map(|k| vec![k]).collect(),
    };
    let mut out = Vec::with_capacity(groups.len());
    for terms in groups {
        let nodes = terms.len();
        let alphabet = base.clone().with_eve(nodes, labels.len(), false);
        let node_of = |k: usize| terms.iter().position(|&t| t == k).expect("term in group");
        let objective = entropy_objective(grid, &terms, node_of, &labels, &alphabet);
        out.push(NpoProblem {
            kind,
            scenario: *scenario,
            constraints: translate_constraints(scenario, constraints, &alphabet)?,
            alphabet,
            objective,
            offset: if mode == Mode::Joint { offset } else { 0.0 },
            sense: Sense::Minimize,
            key_x: x,
            key_y: y,
            grid: Some(grid.clone()),
            terms,
        });
    }
    Ok(out)
}

/// One-sided problem(s); in per-node mode the caller adds
/// `(|A| - 1)/ln 2` to the sum of the optima.
pub fn one_sided(
    scenario: &Scenario,
    constraints: &[BellFunctional],
    grid: &GridCoefficients,
    x: usize,
    mode: Mode,
) -> Result<Vec<NpoProblem>> {
    build_entropy(ProblemKind::OneSided, scenario, constraints, grid, x, None, mode)
}

/// Two-sided problem(s) for the outcome pair of inputs `(x, y)`; labels are
/// `a * |B| + b` and the per-node offset is `(|A| |B| - 1)/ln 2`.
pub fn two_sided(
    scenario: &Scenario,
    constraints: &[BellFunctional],
    grid: &GridCoefficients,
    x: usize,
    y: usize,
    mode: Mode,
) -> Result<Vec<NpoProblem>> {
    if y >= scenario.bob_inputs {
        return invalid(format!("key input y = {y} but Bob has {} inputs", scenario.bob_inputs));
    }
    build_entropy(ProblemKind::TwoSided, scenario, constraints, grid, x, Some(y), mode)
}

/// Guessing probability `max sum_a <M_{a|x} C_a>` with Eve's projective
/// measurement `{C_a}` (last element eliminated).
pub fn min_entropy(scenario: &Scenario, constraints: &[BellFunctional], x: usize) -> Result<NpoProblem> {
    check_x(scenario, x)?;
    let na = scenario.alice_outcomes;
    let alphabet = measurement_alphabet(scenario).with_eve(1, na - 1, true);
    let mut objective = Poly::zero();
    let eve: Vec<Generator> = (0..na - 1).map(|a| Generator::eve(0, a)).collect();
    for a in 0..na {
        let c = if a + 1 < na {
            Poly::generator(eve[a])
        } else {
            Poly::complement(&eve)
        };
        objective.add_scaled(&alice_projector(scenario, x, a).mul(&c, &alphabet), 1.0);
    }
    Ok(NpoProblem {
        kind: ProblemKind::MinEntropy,
        scenario: *scenario,
        constraints: translate_constraints(scenario, constraints, &alphabet)?,
        alphabet,
        objective,
        offset: 0.0,
        sense: Sense::Maximize,
        key_x: x,
        key_y: None,
        grid: None,
        terms: Vec::new(),
    })
}

/// Maximal value of a Bell functional over quantum correlations.
pub fn bell_maximization(functional: &BellFunctional) -> NpoProblem {
    let s = functional.scenario;
    let alphabet = measurement_alphabet(&s);
    NpoProblem {
        kind: ProblemKind::BellValue,
        scenario: s,
        objective: functional_poly(functional, &alphabet),
        alphabet,
        offset: functional.offset,
        sense: Sense::Maximize,
        constraints: Vec::new(),
        key_x: 0,
        key_y: None,
        grid: None,
        terms: Vec::new(),
    }
}
