//! Bell scenarios, probability tables and linear Bell functionals.

use std::fmt;

use crate::error::{invalid, Result};

/// Two-party scenario with uniform outcome counts, written `n_a n_b o_a o_b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scenario {
    pub alice_inputs: usize,
    pub bob_inputs: usize,
    pub alice_outcomes: usize,
    pub bob_outcomes: usize,
}

impl Scenario {
    pub fn new(alice_inputs: usize, bob_inputs: usize, alice_outcomes: usize, bob_outcomes: usize) -> Result<Self> {
        if alice_inputs == 0 || bob_inputs == 0 || alice_outcomes == 0 || bob_outcomes == 0 {
            return invalid("scenario dimensions must be at least 1");
        }
        Ok(Self {
            alice_inputs,
            bob_inputs,
            alice_outcomes,
            bob_outcomes,
        })
    }

    pub fn chsh() -> Self {
        Self::new(2, 2, 2, 2).expect("valid")
    }

    pub fn cglmp3() -> Self {
        Self::new(2, 2, 3, 3).expect("valid")
    }

    pub fn i3322() -> Self {
        Self::new(3, 3, 2, 2).expect("valid")
    }

    /// Parses the four-digit shorthand such as `"2222"` or `"2233"`.
    pub fn from_code(code: &str) -> Result<Self> {
        let digits: Vec<usize> = code
            .chars()
            .filter_map(|c| c.to_digit(10).map(|d| d as usize))
            .collect();
        if digits.len() != 4 || code.chars().count() != 4 {
            return invalid(format!("scenario code `{code}` must be four digits n_a n_b o_a o_b"));
        }
        Self::new(digits[0], digits[1], digits[2], digits[3])
    }

    /// Number of entries `p(a, b | x, y)`.
    pub fn table_len(&self) -> usize {
        self.alice_outcomes * self.bob_outcomes * self.alice_inputs * self.bob_inputs
    }

    pub fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        debug_assert!(a < self.alice_outcomes && b < self.bob_outcomes);
        debug_assert!(x < self.alice_inputs && y < self.bob_inputs);
        ((a * self.bob_outcomes + b) * self.alice_inputs + x) * self.bob_inputs + y
    }

    /// All `(a, b, x, y)` in table order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let s = *self;
        (0..s.alice_outcomes).flat_map(move |a| {
            (0..s.bob_outcomes).flat_map(move |b| {
                (0..s.alice_inputs).flat_map(move |x| (0..s.bob_inputs).map(move |y| (a, b, x, y)))
            })
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}{}",
            self.alice_inputs, self.bob_inputs, self.alice_outcomes, self.bob_outcomes
        )
    }
}

/// Conditional probability table `p(a, b | x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    scenario: Scenario,
    p: Vec<f64>,
}

impl Distribution {
    pub fn zeros(scenario: Scenario) -> Self {
        Self {
            scenario,
            p: vec![0.0; scenario.table_len()],
        }
    }

    pub fn from_fn(scenario: Scenario, f: impl Fn(usize, usize, usize, usize) -> f64) -> Self {
        let mut d = Self::zeros(scenario);
        for (a, b, x, y) in scenario.entries() {
            d.set(a, b, x, y, f(a, b, x, y));
        }
        d
    }

    /// Table in [`Scenario::index`] order, validated.
    pub fn from_table(scenario: Scenario, p: Vec<f64>) -> Result<Self> {
        if p.len() != scenario.table_len() {
            return invalid(format!(
                "table has {} entries, scenario {scenario} needs {}",
                p.len(),
                scenario.table_len()
            ));
        }
        let d = Self { scenario, p };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(scenario: Scenario) -> Self {
        let v = 1.0 / (scenario.alice_outcomes * scenario.bob_outcomes) as f64;
        Self::from_fn(scenario, |_, _, _, _| v)
    }

    /// Local deterministic strategy: Alice answers `alice[x]`, Bob `bob[y]`.
    pub fn deterministic(scenario: Scenario, alice: &[usize], bob: &[usize]) -> Result<Self> {
        if alice.len() != scenario.alice_inputs || bob.len() != scenario.bob_inputs {
            return invalid("one answer per input is required");
        }
        if alice.iter().any(|&a| a >= scenario.alice_outcomes) || bob.iter().any(|&b| b >= scenario.bob_outcomes) {
            return invalid("answer outside the outcome range");
        }
        Ok(Self::from_fn(scenario, |a, b, x, y| {
            if alice[x] == a && bob[y] == b {
                1.0
            } else {
                0.0
            }
        }))
    }

    /// Popescu–Rohrlich box: `a XOR b = x AND y` uniformly.
    pub fn pr_box() -> Self {
        Self::from_fn(Scenario::chsh(), |a, b, x, y| if (a ^ b) == (x & y) { 0.5 } else { 0.0 })
    }

    /// Every deterministic local strategy of the scenario.
    pub fn deterministic_strategies(scenario: Scenario) -> Vec<Self> {
        let na = scenario.alice_outcomes.pow(scenario.alice_inputs as u32);
        let nb = scenario.bob_outcomes.pow(scenario.bob_inputs as u32);
        let digits = |mut code: usize, base: usize, len: usize| {
            (0..len)
                .map(|_| {
                    let d = code % base;
                    code /= base;
                    d
                })
                .collect::<Vec<_>>()
        };
        let mut out = Vec::with_capacity(na * nb);
        for i in 0..na {
            let alice = digits(i, scenario.alice_outcomes, scenario.alice_inputs);
            for j in 0..nb {
                let bob = digits(j, scenario.bob_outcomes, scenario.bob_inputs);
                out.push(Self::deterministic(scenario, &alice, &bob).expect("in range"));
            }
        }
        out
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.scenario.index(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.scenario.index(a, b, x, y);
        self.p[i] = v;
    }

    pub fn table(&self) -> &[f64] {
        &self.p
    }

    /// Entries at least `-1e-12`, each `(x, y)` block summing to 1 within `1e-9`.
    pub fn validate(&self) -> Result<()> {
        let s = self.scenario;
        if let Some(v) = self.p.iter().find(|v| !v.is_finite() || **v < -1e-12) {
            return invalid(format!("probability {v} is negative or not finite"));
        }
        for x in 0..s.alice_inputs {
            for y in 0..s.bob_inputs {
                let total = self.setting_total(x, y);
                if (total - 1.0).abs() > 1e-9 {
                    return invalid(format!("p(.,.|{x},{y}) sums to {total}"));
                }
            }
        }
        Ok(())
    }

    pub fn setting_total(&self, x: usize, y: usize) -> f64 {
        let s = self.scenario;
        let mut t = 0.0;
        for a in 0..s.alice_outcomes {
            for b in 0..s.bob_outcomes {
                t += self.get(a, b, x, y);
            }
        }
        t
    }

    /// `sum_b p(a, b | x, y)`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.bob_outcomes).map(|b| self.get(a, b, x, y)).sum()
    }

    /// `sum_a p(a, b | x, y)`.
    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.alice_outcomes).map(|a| self.get(a, b, x, y)).sum()
    }

    /// Mixture `(1 - t) self + t other`.
    pub fn mix(&self, other: &Distribution, t: f64) -> Result<Distribution> {
        if self.scenario != other.scenario {
            return invalid("mixing distributions of different scenarios");
        }
        Ok(Self {
            scenario: self.scenario,
            p: self.p.iter().zip(&other.p).map(|(u, v)| (1.0 - t) * u + t * v).collect(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintSense {
    Ge,
    Le,
    Eq,
}

/// `sum c_{abxy} p(a, b | x, y) + offset`, optionally compared to a
/// threshold when used as a constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct BellFunctional {
    pub scenario: Scenario,
    pub coeffs: Vec<f64>,
    pub offset: f64,
    pub sense: ConstraintSense,
    pub threshold: f64,
}

impl BellFunctional {
    pub fn zero(scenario: Scenario) -> Self {
        Self {
            scenario,
            coeffs: vec![0.0; scenario.table_len()],
            offset: 0.0,
            sense: ConstraintSense::Eq,
            threshold: 0.0,
        }
    }

    pub fn from_table(scenario: Scenario, coeffs: Vec<f64>, offset: f64) -> Result<Self> {
        if coeffs.len() != scenario.table_len() {
            return invalid(format!(
                "functional has {} coefficients, scenario {scenario} needs {}",
                coeffs.len(),
                scenario.table_len()
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) || !offset.is_finite() {
            return invalid("functional coefficients must be finite");
        }
        Ok(Self {
            coeffs,
            offset,
            ..Self::zero(scenario)
        })
    }

    pub fn coeff(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.scenario.index(a, b, x, y)]
    }

    fn add(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.scenario.index(a, b, x, y);
        self.coeffs[i] += v;
    }

    /// Adds `w <A_x B_y>` with `A_x = sum_a (-1)^a M_{a|x}`.
    fn add_correlator(&mut self, x: usize, y: usize, w: f64) {
        for a in 0..2 {
            for b in 0..2 {
                let s = if (a + b) % 2 == 0 { 1.0 } else { -1.0 };
                self.add(a, b, x, y, w * s);
            }
        }
    }

    /// Adds `w <A_x>`, read off with Bob's input fixed to 0.
    fn add_alice_marginal(&mut self, x: usize, w: f64) {
        for a in 0..2 {
            for b in 0..2 {
                self.add(a, b, x, 0, if a == 0 { w } else { -w });
            }
        }
    }

    /// Adds `w <B_y>`, read off with Alice's input fixed to 0.
    fn add_bob_marginal(&mut self, y: usize, w: f64) {
        for a in 0..2 {
            for b in 0..2 {
                self.add(a, b, 0, y, if b == 0 { w } else { -w });
            }
        }
    }

    /// `<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>`.
    pub fn chsh() -> Self {
        let mut f = Self::zero(Scenario::chsh());
        for x in 0..2 {
            for y in 0..2 {
                f.add_correlator(x, y, if x == 1 && y == 1 { -1.0 } else { 1.0 });
            }
        }
        f
    }

    /// CGLMP expression for three outcomes; inputs 0 and 1 stand for the
    /// usual settings 1 and 2.
    pub fn cglmp3() -> Self {
        let mut f = Self::zero(Scenario::cglmp3());
        // (x, y, k, sign): adds sign * P(A_x - B_y = k mod 3)
        let terms: [(usize, usize, usize, f64); 8] = [
            (0, 0, 0, 1.0), // A1 = B1
            (1, 0, 2, 1.0), // B1 = A2 + 1
            (1, 1, 0, 1.0), // A2 = B2
            (0, 1, 0, 1.0), // B2 = A1
            (0, 0, 2, -1.0), // A1 = B1 - 1
            (1, 0, 0, -1.0), // B1 = A2
            (1, 1, 2, -1.0), // A2 = B2 - 1
            (0, 1, 1, -1.0), // B2 = A1 - 1
        ];
        for (x, y, k, s) in terms {
            for a in 0..3 {
                for b in 0..3 {
                    if (a + 3 - b) % 3 == k {
                        f.add(a, b, x, y, s);
                    }
                }
            }
        }
        f
    }

    /// The I3322 expression in correlator form with marginal terms
    /// `<A1> - <A2> + <B1> - <B2>`.
    pub fn i3322() -> Self {
        let mut f = Self::zero(Scenario::i3322());
        let corr: [(usize, usize, f64); 8] = [
            (0, 2, 1.0),
            (1, 2, 1.0),
            (2, 0, 1.0),
            (2, 1, 1.0),
            (0, 1, 1.0),
            (1, 0, 1.0),
            (1, 1, -1.0),
            (0, 0, -1.0),
        ];
        for (x, y, w) in corr {
            f.add_correlator(x, y, w);
        }
        f.add_alice_marginal(0, 1.0);
        f.add_alice_marginal(1, -1.0);
        f.add_bob_marginal(0, 1.0);
        f.add_bob_marginal(1, -1.0);
        f
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "chsh" => Ok(Self::chsh()),
            "cglmp3" => Ok(Self::cglmp3()),
            "i3322" => Ok(Self::i3322()),
            _ => invalid(format!("unknown functional `{name}` (expected chsh, cglmp3 or i3322)")),
        }
    }

    pub fn with_constraint(mut self, sense: ConstraintSense, threshold: f64) -> Self {
        self.sense = sense;
        self.threshold = threshold;
        self
    }

    pub fn at_least(self, q: f64) -> Self {
        self.with_constraint(ConstraintSense::Ge, q)
    }

    pub fn equal_to(self, q: f64) -> Self {
        self.with_constraint(ConstraintSense::Eq, q)
    }

    /// Largest value over deterministic local strategies.
    pub fn classical_bound(&self) -> f64 {
        Distribution::deterministic_strategies(self.scenario)
            .iter()
            .map(|d| bell_value(self, d).expect("same scenario"))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn bell_value(f: &BellFunctional, d: &Distribution) -> Result<f64> {
    if f.scenario != d.scenario() {
        return invalid(format!(
            "functional is for scenario {}, distribution for {}",
            f.scenario,
            d.scenario()
        ));
    }
    Ok(f.coeffs.iter().zip(d.table()).map(|(c, p)| c * p).sum::<f64>() + f.offset)
}

/// Which entries of a distribution become equality rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Selection {
    Full,
    Settings(Vec<(usize, usize)>),
}

/// One equality functional `p(a, b | x, y) = value` per retained entry.
pub fn distribution_constraints(d: &Distribution, which: &Selection) -> Result<Vec<BellFunctional>> {
    let s = d.scenario();
    let keep = |x: usize, y: usize| match which {
        Selection::Full => true,
        Selection::Settings(pairs) => pairs.contains(&(x, y)),
    };
    if let Selection::Settings(pairs) = which {
        if let Some(&(x, y)) = pairs.iter().find(|(x, y)| *x >= s.alice_inputs || *y >= s.bob_inputs) {
            return invalid(format!("setting ({x}, {y}) outside scenario {s}"));
        }
    }
    let mut rows = Vec::new();
    for (a, b, x, y) in s.entries() {
        if !keep(x, y) {
            continue;
        }
        let mut f = BellFunctional::zero(s);
        f.add(a, b, x, y, 1.0);
        rows.push(f.equal_to(d.get(a, b, x, y)));
    }
    Ok(rows)
}

/// Replaces every equality row by the band `threshold ± eps`.
///
/// Equality-pinned statistics at a self-testing point leave the moment
/// matrix no strictly feasible point and interior-point solvers stall; a
/// band of width `1e-6` restores an interior. The result remains a
/// relaxation of the original constraints, so bounds stay valid.
pub fn widen_equalities(rows: Vec<BellFunctional>, eps: f64) -> Result<Vec<BellFunctional>> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return invalid(format!("band width must be a nonnegative number, got {eps}"));
    }
    if eps == 0.0 {
        return Ok(rows);
    }
    Ok(rows
        .into_iter()
        .flat_map(|f| match f.sense {
            ConstraintSense::Eq => {
                let t = f.threshold;
                vec![
                    f.clone().with_constraint(ConstraintSense::Ge, t - eps),
                    f.with_constraint(ConstraintSense::Le, t + eps),
                ]
            }
            _ => vec![f],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chsh_values() {
        let f = BellFunctional::chsh();
        assert_eq!(bell_value(&f, &Distribution::uniform(Scenario::chsh())).unwrap(), 0.0);
        let det = Distribution::deterministic(Scenario::chsh(), &[0, 0], &[0, 0]).unwrap();
        assert_eq!(bell_value(&f, &det).unwrap(), 2.0);
        assert_eq!(bell_value(&f, &Distribution::pr_box()).unwrap(), 4.0);
    }

    #[test]
    fn cglmp_values() {
        let f = BellFunctional::cglmp3();
        assert!(bell_value(&f, &Distribution::uniform(Scenario::cglmp3())).unwrap().abs() < 1e-15);
        let det = Distribution::deterministic(Scenario::cglmp3(), &[0, 0], &[0, 0]).unwrap();
        assert_eq!(bell_value(&f, &det).unwrap(), 2.0);
    }

    #[test]
    fn classical_bounds() {
        assert_eq!(BellFunctional::chsh().classical_bound(), 2.0);
        assert_eq!(BellFunctional::cglmp3().classical_bound(), 2.0);
        assert_eq!(BellFunctional::i3322().classical_bound(), 4.0);
        assert_eq!(Distribution::deterministic_strategies(Scenario::i3322()).len(), 64);
    }

    #[test]
    fn i3322_all_plus_one() {
        let f = BellFunctional::i3322();
        let det = Distribution::deterministic(Scenario::i3322(), &[0, 0, 0], &[0, 0, 0]).unwrap();
        // six +1 correlators, two -1, marginals cancel
        assert_eq!(bell_value(&f, &det).unwrap(), 4.0);
        assert_eq!(bell_value(&f, &Distribution::uniform(Scenario::i3322())).unwrap(), 0.0);
    }

    #[test]
    fn constraint_row_counts() {
        let d = Distribution::uniform(Scenario::chsh());
        assert_eq!(distribution_constraints(&d, &Selection::Full).unwrap().len(), 16);
        let d = Distribution::uniform(Scenario::new(2, 4, 2, 2).unwrap());
        assert_eq!(distribution_constraints(&d, &Selection::Full).unwrap().len(), 32);
        let rows = distribution_constraints(&d, &Selection::Settings(vec![(0, 3)])).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(distribution_constraints(&d, &Selection::Settings(vec![(2, 0)])).is_err());
    }

    #[test]
    fn scenario_codes() {
        assert_eq!(Scenario::from_code("2233").unwrap(), Scenario::cglmp3());
        assert_eq!(Scenario::i3322().to_string(), "3322");
        assert!(Scenario::from_code("223").is_err());
        assert!(Scenario::from_code("2203").is_err());
    }

    #[test]
    fn shape_mismatch() {
        assert!(bell_value(&BellFunctional::chsh(), &Distribution::uniform(Scenario::i3322())).is_err());
    }
}
