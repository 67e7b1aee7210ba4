//! Words over Hermitian projector generators and their normal forms.
//!
//! Generators belong to three parties: Alice's measurement projectors
//! `M_{a|x}`, Bob's `N_{b|y}`, and Eve-side projectors (`P_k^(a)` node
//! projectors or guessing projectors `C_a`). Different parties commute.
//! Every generator is idempotent, and projectors of one measurement
//! (same party and setting, different outcome) annihilate each other.
//!
//! A canonical word is sorted into party blocks, contains no two equal
//! neighbours and no orthogonal neighbours. Products that reduce to zero are
//! reported as `None`.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Alice,
    Bob,
    Eve,
}

/// A projector generator. The derived order (party, then setting, then
/// outcome) is the canonical sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Generator {
    /// `M_{outcome|input}`.
    Alice { input: u16, outcome: u16 },
    /// `N_{outcome|input}`.
    Bob { input: u16, outcome: u16 },
    /// Eve projector for integration node `node` and classical label
    /// `label` (`a`, or `a * |B| + b` for outcome pairs).
    Eve { node: u16, label: u16 },
}

impl Generator {
    pub fn alice(input: usize, outcome: usize) -> Self {
        Generator::Alice {
            input: input as u16,
            outcome: outcome as u16,
        }
    }

    pub fn bob(input: usize, outcome: usize) -> Self {
        Generator::Bob {
            input: input as u16,
            outcome: outcome as u16,
        }
    }

    pub fn eve(node: usize, label: usize) -> Self {
        Generator::Eve {
            node: node as u16,
            label: label as u16,
        }
    }

    pub fn party(&self) -> Party {
        match self {
            Generator::Alice { .. } => Party::Alice,
            Generator::Bob { .. } => Party::Bob,
            Generator::Eve { .. } => Party::Eve,
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Generator::Alice { input, outcome } => write!(f, "M{outcome}|{input}"),
            Generator::Bob { input, outcome } => write!(f, "N{outcome}|{input}"),
            Generator::Eve { node, label } => write!(f, "P{node}({label})"),
        }
    }
}

/// A monomial; the empty word is the identity. Ordered by length, then
/// lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Generator>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letters(&self) -> &[Generator] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    /// Wraps letters that are already known to be canonical.
    fn from_canonical(letters: Vec<Generator>) -> Self {
        Word(letters)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Generator set of a problem together with its relations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    /// Outcomes per setting that carry a generator (the last one is
    /// eliminated), one entry per Alice setting.
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
    /// Eve projectors: `nodes` groups of `labels` each.
    pub nodes: usize,
    pub labels: usize,
    /// Whether Eve projectors of one node are mutually orthogonal.
    pub eve_orthogonal: bool,
}

impl Alphabet {
    /// Measurement generators for uniform outcome counts, no Eve projectors.
    pub fn measurements(alice_inputs: usize, alice_outcomes: usize, bob_inputs: usize, bob_outcomes: usize) -> Self {
        Self {
            alice: vec![alice_outcomes.saturating_sub(1); alice_inputs],
            bob: vec![bob_outcomes.saturating_sub(1); bob_inputs],
            nodes: 0,
            labels: 0,
            eve_orthogonal: false,
        }
    }

    pub fn with_eve(mut self, nodes: usize, labels: usize, orthogonal: bool) -> Self {
        self.nodes = nodes;
        self.labels = labels;
        self.eve_orthogonal = orthogonal;
        self
    }

    pub fn contains(&self, g: &Generator) -> bool {
        match *g {
            Generator::Alice { input, outcome } => {
                self.alice.get(input as usize).is_some_and(|&n| (outcome as usize) < n)
            }
            Generator::Bob { input, outcome } => self.bob.get(input as usize).is_some_and(|&n| (outcome as usize) < n),
            Generator::Eve { node, label } => (node as usize) < self.nodes && (label as usize) < self.labels,
        }
    }

    pub fn orthogonal(&self, g: &Generator, h: &Generator) -> bool {
        match (g, h) {
            (Generator::Alice { input: x, outcome: a }, Generator::Alice { input: y, outcome: b })
            | (Generator::Bob { input: x, outcome: a }, Generator::Bob { input: y, outcome: b }) => x == y && a != b,
            (Generator::Eve { node: k, label: a }, Generator::Eve { node: l, label: b }) => {
                self.eve_orthogonal && k == l && a != b
            }
            _ => false,
        }
    }

    /// All generators of one party in canonical order.
    pub fn party_generators(&self, party: Party) -> Vec<Generator> {
        match party {
            Party::Alice => self
                .alice
                .iter()
                .enumerate()
                .flat_map(|(x, &n)| (0..n).map(move |a| Generator::alice(x, a)))
                .collect(),
            Party::Bob => self
                .bob
                .iter()
                .enumerate()
                .flat_map(|(y, &n)| (0..n).map(move |b| Generator::bob(y, b)))
                .collect(),
            Party::Eve => (0..self.nodes)
                .flat_map(|k| (0..self.labels).map(move |a| Generator::eve(k, a)))
                .collect(),
        }
    }

    pub fn generators(&self) -> Vec<Generator> {
        [Party::Alice, Party::Bob, Party::Eve]
            .into_iter()
            .flat_map(|p| self.party_generators(p))
            .collect()
    }

    /// Normal form of a product of generators, or `None` for zero.
    pub fn canonicalize(&self, letters: &[Generator]) -> Result<Option<Word>> {
        if let Some(g) = letters.iter().find(|g| !self.contains(g)) {
            return invalid(format!("generator {g} is not part of the alphabet"));
        }
        Ok(self.reduce(letters.to_vec()))
    }

    fn reduce(&self, mut letters: Vec<Generator>) -> Option<Word> {
        // cross-party commutation; the stable sort keeps each party's order
        letters.sort_by_key(Generator::party);
        let mut out: Vec<Generator> = Vec::with_capacity(letters.len());
        for g in letters {
            match out.last() {
                Some(top) if *top == g => {}
                Some(top) if top.party() == g.party() && self.orthogonal(top, &g) => return None,
                _ => out.push(g),
            }
        }
        Some(Word::from_canonical(out))
    }

    /// Product `u v` of canonical words.
    pub fn multiply(&self, u: &Word, v: &Word) -> Option<Word> {
        let mut letters = Vec::with_capacity(u.len() + v.len());
        letters.extend_from_slice(u.letters());
        letters.extend_from_slice(v.letters());
        self.reduce(letters)
    }

    /// `adjoint(u) v`, the moment-matrix entry for basis words `u`, `v`.
    pub fn entry(&self, u: &Word, v: &Word) -> Option<Word> {
        let mut letters: Vec<Generator> = u.letters().iter().rev().copied().collect();
        letters.extend_from_slice(v.letters());
        self.reduce(letters)
    }

    /// Reversal of a canonical word, brought back to canonical form.
    pub fn adjoint(&self, w: &Word) -> Word {
        self.reduce(w.letters().iter().rev().copied().collect())
            .expect("the reversal of a nonzero word is nonzero")
    }

    /// The representative of `{w, adjoint(w)}` used when moments of a word
    /// and its adjoint are identified.
    pub fn symmetric_representative(&self, w: &Word) -> Word {
        let adj = self.adjoint(w);
        if adj < *w {
            adj
        } else {
            w.clone()
        }
    }

    /// Canonical nonzero words of length at most `level` (identity first,
    /// then by length and lexicographic order), followed by the instances
    /// of each extra pattern not already present.
    pub fn basis(&self, level: usize, extra_patterns: &[Pattern]) -> Vec<Word> {
        let gens = self.generators();
        let mut all: BTreeSet<Word> = BTreeSet::new();
        all.insert(Word::identity());
        let mut frontier = vec![Word::identity()];
        for len in 1..=level {
            let mut next = BTreeSet::new();
            for w in &frontier {
                for g in &gens {
                    let mut letters = w.letters().to_vec();
                    letters.push(*g);
                    if let Some(c) = self.reduce(letters) {
                        if c.len() == len && !all.contains(&c) {
                            next.insert(c);
                        }
                    }
                }
            }
            all.extend(next.iter().cloned());
            frontier = next.into_iter().collect();
        }
        let mut out: Vec<Word> = all.into_iter().collect();
        let mut seen: BTreeSet<Word> = out.iter().cloned().collect();
        for p in extra_patterns {
            for w in self.pattern_instances(p) {
                if seen.insert(w.clone()) {
                    out.push(w);
                }
            }
        }
        out
    }

    /// Canonical nonzero products with one generator per pattern letter,
    /// in canonical order.
    pub fn pattern_instances(&self, pattern: &Pattern) -> Vec<Word> {
        let mut words: BTreeSet<Word> = BTreeSet::new();
        let mut partial: Vec<Vec<Generator>> = vec![Vec::new()];
        for party in &pattern.0 {
            let gens = self.party_generators(*party);
            partial = partial
                .into_iter()
                .flat_map(|p| {
                    gens.iter().map(move |g| {
                        let mut q = p.clone();
                        q.push(*g);
                        q
                    })
                })
                .collect();
        }
        for letters in partial {
            if let Some(w) = self.reduce(letters) {
                words.insert(w);
            }
        }
        words.into_iter().collect()
    }
}

/// Sequence of parties describing extra basis words, e.g. `MNP` for all
/// products `M_{a|x} N_{b|y} P`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(pub Vec<Party>);

impl Pattern {
    /// Letters `M`/`A` (Alice), `N`/`B` (Bob), `P`/`E`/`C` (Eve); `·`, `*`
    /// and spaces are ignored.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parties = Vec::new();
        for c in s.chars() {
            match c {
                'M' | 'A' => parties.push(Party::Alice),
                'N' | 'B' => parties.push(Party::Bob),
                'P' | 'E' | 'C' => parties.push(Party::Eve),
                '·' | '*' | ' ' => {}
                _ => return invalid(format!("unknown letter `{c}` in pattern `{s}`")),
            }
        }
        if parties.is_empty() {
            return invalid("empty pattern");
        }
        Ok(Pattern(parties))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            let c = match p {
                Party::Alice => 'M',
                Party::Bob => 'N',
                Party::Eve => 'P',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Real linear combination of canonical words.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly(BTreeMap<Word, f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(BTreeMap::new())
    }

    pub fn constant(c: f64) -> Self {
        let mut p = Self::zero();
        p.add_term(Word::identity(), c);
        p
    }

    pub fn generator(g: Generator) -> Self {
        let mut p = Self::zero();
        p.add_term(Word::from_canonical(vec![g]), 1.0);
        p
    }

    /// `1 - sum of the listed generators`, the eliminated last projector of
    /// a measurement.
    pub fn complement(gens: &[Generator]) -> Self {
        let mut p = Self::constant(1.0);
        for g in gens {
            p.add_term(Word::from_canonical(vec![*g]), -1.0);
        }
        p
    }

    pub fn add_term(&mut self, w: Word, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.0.entry(w) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Poly, c: f64) {
        for (w, v) in &other.0 {
            self.add_term(w.clone(), c * v);
        }
    }

    pub fn scaled(&self, c: f64) -> Poly {
        let mut p = Poly::zero();
        p.add_scaled(self, c);
        p
    }

    /// Product of two polynomials under the alphabet's relations.
    pub fn mul(&self, other: &Poly, alphabet: &Alphabet) -> Poly {
        let mut p = Poly::zero();
        for (u, cu) in &self.0 {
            for (v, cv) in &other.0 {
                if let Some(w) = alphabet.multiply(u, v) {
                    p.add_term(w, cu * cv);
                }
            }
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, f64)> {
        self.0.iter().map(|(w, c)| (w, *c))
    }

    pub fn coefficient(&self, w: &Word) -> f64 {
        self.0.get(w).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chsh() -> Alphabet {
        Alphabet::measurements(2, 2, 2, 2)
    }

    fn w(a: &Alphabet, letters: &[Generator]) -> Option<Word> {
        a.canonicalize(letters).unwrap()
    }

    #[test]
    fn idempotence_and_orthogonality() {
        let a = Alphabet::measurements(2, 3, 2, 3);
        let m00 = Generator::alice(0, 0);
        let m10 = Generator::alice(0, 1);
        assert_eq!(w(&a, &[m00, m00]).unwrap().letters(), &[m00]);
        assert_eq!(w(&a, &[m00, m10]), None);
    }

    #[test]
    fn commutation_then_idempotence() {
        let a = Alphabet::measurements(2, 2, 2, 2).with_eve(3, 2, false);
        let m = Generator::alice(0, 0);
        let n = Generator::bob(1, 0);
        let p = Generator::eve(2, 0);
        assert_eq!(w(&a, &[n, m, p, m]).unwrap().letters(), &[m, n, p]);
    }

    #[test]
    fn adjoint_examples() {
        let a = chsh().with_eve(3, 1, false);
        assert_eq!(a.adjoint(&Word::identity()), Word::identity());
        let mn = w(&a, &[Generator::alice(0, 0), Generator::bob(1, 0)]).unwrap();
        assert_eq!(a.adjoint(&mn), mn);
        let p12 = w(&a, &[Generator::eve(1, 0), Generator::eve(2, 0)]).unwrap();
        assert_eq!(a.adjoint(&p12).letters(), &[Generator::eve(2, 0), Generator::eve(1, 0)]);
    }

    #[test]
    fn unknown_generator_rejected() {
        assert!(chsh().canonicalize(&[Generator::alice(0, 1)]).is_err());
        assert!(chsh().canonicalize(&[Generator::eve(0, 0)]).is_err());
    }

    #[test]
    fn chsh_basis_sizes() {
        let b1 = chsh().basis(1, &[]);
        assert_eq!(b1.len(), 5);
        assert!(b1[0].is_identity());
        assert_eq!(chsh().basis(2, &[]).len(), 13);
    }

    #[test]
    fn mnp_pattern_count() {
        let a = chsh().with_eve(3, 2, false);
        let n = a.pattern_instances(&Pattern::parse("MNP").unwrap()).len();
        assert_eq!(n, 2 * 2 * 3 * 2);
    }

    #[test]
    fn eve_orthogonality_is_optional() {
        let g = [Generator::eve(0, 0), Generator::eve(0, 1)];
        assert!(w(&chsh().with_eve(1, 2, false), &g).is_some());
        assert!(w(&chsh().with_eve(1, 2, true), &g).is_none());
    }

    #[test]
    fn complement_product() {
        let a = chsh();
        let m0 = Poly::generator(Generator::alice(0, 0));
        let m1 = Poly::complement(&[Generator::alice(0, 0)]);
        assert!(m0.mul(&m1, &a).is_zero());
        assert_eq!(m1.mul(&m1, &a), m1);
    }

    #[test]
    fn patterns_parse() {
        assert_eq!(Pattern::parse("M·N·P").unwrap().to_string(), "MNP");
        assert_eq!(Pattern::parse("AB").unwrap().0, vec![Party::Alice, Party::Bob]);
        assert!(Pattern::parse("MX").is_err());
    }
}
