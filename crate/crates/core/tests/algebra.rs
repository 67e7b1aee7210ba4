//! The rewriting rules are checked against concrete operators: projective
//! measurements on `C^3 (x) C^3 (x) C^2` with Eve acting on the last factor.

use dibound::algebra::{Alphabet, Generator, Party, Pattern, Poly, Word};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Mat = DMatrix<f64>;

const DIMS: [usize; 3] = [3, 3, 2];

fn random_orthogonal(rng: &mut impl Rng, n: usize) -> Mat {
    let g = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    g.qr().q()
}

/// Projectors onto consecutive groups of columns of a random orthogonal
/// basis; the group sizes come from `cuts`.
fn random_pvm(rng: &mut impl Rng, n: usize, parts: usize) -> Vec<Mat> {
    let q = random_orthogonal(rng, n);
    let mut cuts: Vec<usize> = (0..parts - 1).map(|_| rng.gen_range(0..=n)).collect();
    cuts.sort_unstable();
    cuts.insert(0, 0);
    cuts.push(n);
    (0..parts)
        .map(|i| {
            let cols = q.columns(cuts[i], cuts[i + 1] - cuts[i]);
            &cols * cols.transpose()
        })
        .collect()
}

fn random_projector(rng: &mut impl Rng, n: usize) -> Mat {
    let rank = rng.gen_range(0..=n);
    let q = random_orthogonal(rng, n);
    let cols = q.columns(0, rank);
    &cols * cols.transpose()
}

fn embed(local: &Mat, party: usize) -> Mat {
    let mut out = Mat::identity(1, 1);
    for (p, &d) in DIMS.iter().enumerate() {
        let f = if p == party { local.clone() } else { Mat::identity(d, d) };
        out = out.kronecker(&f);
    }
    out
}

struct Representation {
    alphabet: Alphabet,
    ops: Vec<(Generator, Mat)>,
}

impl Representation {
    fn random(seed: u64, eve_orthogonal: bool) -> Self {
        let mut rng = StdRng::seed_from_u64(seed);
        let (inputs, outcomes, nodes, labels) = (2, 3, 2, 2);
        let alphabet = Alphabet::measurements(inputs, outcomes, inputs, outcomes).with_eve(nodes, labels, eve_orthogonal);
        let mut ops = Vec::new();
        for (party, make) in [(0, Generator::alice as fn(usize, usize) -> Generator), (1, Generator::bob)] {
            for x in 0..inputs {
                let pvm = random_pvm(&mut rng, DIMS[party], outcomes);
                for a in 0..outcomes - 1 {
                    ops.push((make(x, a), embed(&pvm[a], party)));
                }
            }
        }
        for k in 0..nodes {
            let eve: Vec<Mat> = if eve_orthogonal {
                random_pvm(&mut rng, DIMS[2], labels + 1)
            } else {
                (0..labels).map(|_| random_projector(&mut rng, DIMS[2])).collect()
            };
            for a in 0..labels {
                ops.push((Generator::eve(k, a), embed(&eve[a], 2)));
            }
        }
        Self { alphabet, ops }
    }

    fn op(&self, g: &Generator) -> &Mat {
        &self.ops.iter().find(|(h, _)| h == g).expect("generator represented").1
    }

    fn product(&self, letters: &[Generator]) -> Mat {
        let n = DIMS.iter().product();
        letters.iter().fold(Mat::identity(n, n), |acc, g| acc * self.op(g))
    }

    fn word(&self, w: &Option<Word>) -> Mat {
        let n = DIMS.iter().product();
        match w {
            None => Mat::zeros(n, n),
            Some(w) => self.product(w.letters()),
        }
    }

    fn poly(&self, p: &Poly) -> Mat {
        let n = DIMS.iter().product();
        p.terms().fold(Mat::zeros(n, n), |acc, (w, c)| acc + self.product(w.letters()) * c)
    }
}

fn letters(rep: &Representation, picks: &[usize]) -> Vec<Generator> {
    picks.iter().map(|&i| rep.ops[i % rep.ops.len()].0).collect()
}

#[test]
fn basis_words_are_distinct_and_nonzero() {
    let rep = Representation::random(3, false);
    let basis = rep.alphabet.basis(2, &[Pattern::parse("MNP").unwrap()]);
    let set: std::collections::BTreeSet<&Word> = basis.iter().collect();
    assert_eq!(set.len(), basis.len());
    assert!(basis[0].is_identity());
    for w in &basis {
        assert_eq!(rep.alphabet.canonicalize(w.letters()).unwrap().as_ref(), Some(w));
    }
}

#[test]
fn party_sets_commute_and_complements_sum_to_identity() {
    let rep = Representation::random(11, true);
    let gens = rep.alphabet.party_generators(Party::Eve);
    let node0: Vec<Generator> = gens.iter().copied().filter(|g| matches!(g, Generator::Eve { node: 0, .. })).collect();
    let total = rep.poly(&Poly::complement(&node0)) + node0.iter().map(|g| rep.op(g).clone()).sum::<Mat>();
    assert!((total - Mat::identity(18, 18)).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_form_preserves_the_operator(seed in any::<u64>(), orth in any::<bool>(), picks in proptest::collection::vec(0usize..64, 0..7)) {
        let rep = Representation::random(seed, orth);
        let w = letters(&rep, &picks);
        let lhs = rep.product(&w);
        let rhs = rep.word(&rep.alphabet.canonicalize(&w).unwrap());
        prop_assert!((lhs - rhs).norm() < 1e-9);
    }

    #[test]
    fn canonical_form_is_idempotent_and_order_independent(seed in any::<u64>(), picks in proptest::collection::vec(0usize..64, 0..7), swap in 0usize..6) {
        let rep = Representation::random(seed, true);
        let mut w = letters(&rep, &picks);
        let c = rep.alphabet.canonicalize(&w).unwrap();
        if let Some(c) = &c {
            prop_assert_eq!(rep.alphabet.canonicalize(c.letters()).unwrap(), Some(c.clone()));
        }
        // swapping adjacent letters of different parties is a relation
        if swap + 1 < w.len() && w[swap].party() != w[swap + 1].party() {
            w.swap(swap, swap + 1);
            prop_assert_eq!(rep.alphabet.canonicalize(&w).unwrap(), c);
        }
    }

    #[test]
    fn adjoint_and_multiplication(seed in any::<u64>(), p in proptest::collection::vec(0usize..64, 0..4), q in proptest::collection::vec(0usize..64, 0..4)) {
        let rep = Representation::random(seed, false);
        let a = rep.alphabet.canonicalize(&letters(&rep, &p)).unwrap();
        let b = rep.alphabet.canonicalize(&letters(&rep, &q)).unwrap();
        if let (Some(a), Some(b)) = (&a, &b) {
            let adj = rep.alphabet.adjoint(a);
            prop_assert!((rep.product(adj.letters()) - rep.product(a.letters()).transpose()).norm() < 1e-9);
            let prod = rep.word(&rep.alphabet.multiply(a, b));
            prop_assert!((prod - rep.product(a.letters()) * rep.product(b.letters())).norm() < 1e-9);
            let entry = rep.word(&rep.alphabet.entry(a, b));
            prop_assert!((entry - rep.product(a.letters()).transpose() * rep.product(b.letters())).norm() < 1e-9);
        }
    }

    #[test]
    fn polynomial_product_is_a_homomorphism(seed in any::<u64>(), p in proptest::collection::vec((0usize..64, -2.0f64..2.0), 1..4), q in proptest::collection::vec((0usize..64, -2.0f64..2.0), 1..4)) {
        let rep = Representation::random(seed, true);
        let build = |terms: &[(usize, f64)]| {
            let mut poly = Poly::constant(0.5);
            for &(i, c) in terms {
                poly.add_scaled(&Poly::generator(rep.ops[i % rep.ops.len()].0), c);
            }
            poly
        };
        let (a, b) = (build(&p), build(&q));
        let lhs = rep.poly(&a.mul(&b, &rep.alphabet));
        prop_assert!((lhs - rep.poly(&a) * rep.poly(&b)).norm() < 1e-9);
    }
}

#[test]
fn unknown_generators_are_rejected() {
    let a = Alphabet::measurements(2, 2, 2, 2);
    let err = a.canonicalize(&[Generator::alice(0, 1)]).unwrap_err().to_string();
    assert!(err.contains("M1|0"), "{err}");
}
