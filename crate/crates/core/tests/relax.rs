mod common;

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use dibound::bound::{build_problems, entropy_bound, BoundConfig, BoundStatus, Task};
use dibound::grid::GridSpec;
use dibound::npo::{self, Mode};
use dibound::oracle::{conditional_entropy_cq, honest_cq_state, honest_statistics, MeasurementAngleSet, StateSpec};
use dibound::relax::{max_bell, moment_matrix, to_sdp, RelaxOptions};
use dibound::scenario::{
    bell_value, distribution_constraints, widen_equalities, BellFunctional, Distribution, Scenario, Selection,
};
use dibound::sdp::sdpa::{parse_sdpa, to_sdpa_string};
use dibound::sdp::SolveOptions;
use dibound::Error;

use common::chsh_entropy;

fn mnp() -> RelaxOptions {
    RelaxOptions::level(2).with_extras(&["MNP"]).unwrap()
}

fn chsh_config(task: Task, constraints: Vec<BellFunctional>) -> BoundConfig {
    let mut cfg = BoundConfig::new(task, Scenario::chsh(), constraints);
    cfg.grid = GridSpec::uniform(8, 0.2);
    cfg.relax = mnp();
    cfg
}

fn one_sided_value(constraints: Vec<BellFunctional>) -> f64 {
    let r = entropy_bound(&chsh_config(Task::OneSided, constraints)).unwrap();
    assert!(
        matches!(r.status, BoundStatus::Optimal | BoundStatus::NearOptimal),
        "{:?}: {}",
        r.status,
        r.message
    );
    r.value.unwrap()
}

#[test]
fn chsh_maximum_at_level_one() {
    let v = max_bell(&BellFunctional::chsh(), &RelaxOptions::level(1), &SolveOptions::default()).unwrap();
    assert!((v - 2.0 * SQRT_2).abs() < 1e-6, "{v}");
}

#[test]
fn per_node_matrix_sizes() {
    for (scenario, functional, size) in [
        (Scenario::i3322(), BellFunctional::i3322(), 62),
        (Scenario::cglmp3(), BellFunctional::cglmp3(), 122),
    ] {
        let mut cfg = BoundConfig::new(Task::OneSided, scenario, vec![functional.at_least(0.0)]);
        cfg.relax = mnp();
        let problems = build_problems(&cfg).unwrap();
        assert_eq!(problems.len(), cfg.grid.nodes + 1);
        for p in &problems {
            assert_eq!(moment_matrix(p, &cfg.relax).unwrap().size(), size);
        }
    }
}

#[test]
fn bound_never_exceeds_honest_entropy() {
    let angles = MeasurementAngleSet::chsh_optimal();
    for v in [0.75, 0.85, 0.95, 1.0] {
        let state = StateSpec::Werner(v);
        let d = honest_statistics(state, &angles).unwrap();
        let s = bell_value(&BellFunctional::chsh(), &d).unwrap();
        let honest = conditional_entropy_cq(&honest_cq_state(state, &angles, 0).unwrap()).unwrap();
        let bound = one_sided_value(vec![BellFunctional::chsh().at_least(s)]);
        assert!(bound <= honest + 1e-6, "v = {v}: bound {bound} above honest {honest}");
        assert!(bound <= chsh_entropy(s) + 1e-6, "v = {v}: bound {bound} above the analytic curve");
    }
}

#[test]
fn bound_grows_with_constraints() {
    let low = one_sided_value(vec![BellFunctional::chsh().at_least(2.5)]);
    let high = one_sided_value(vec![BellFunctional::chsh().at_least(2.7)]);
    assert!(high >= low - 1e-6, "{high} < {low}");

    // full statistics of the optimal strategy imply CHSH >= 2.8 with room to spare
    let d = honest_statistics(StateSpec::MaxEntangled, &MeasurementAngleSet::chsh_optimal()).unwrap();
    let rows = widen_equalities(distribution_constraints(&d, &Selection::Full).unwrap(), 1e-6).unwrap();
    let mut both = rows.clone();
    both.push(BellFunctional::chsh().at_least(2.8));
    let weak = one_sided_value(vec![BellFunctional::chsh().at_least(2.8)]);
    let strong = one_sided_value(both);
    assert!(strong >= weak - 1e-6, "{strong} < {weak}");
    assert!(strong > 0.9, "{strong}");
}

#[test]
fn sdpa_export_is_deterministic() {
    let g = dibound::grid::coefficients(&[0.5, 1.0]).unwrap();
    let build = || {
        let p = npo::one_sided(
            &Scenario::chsh(),
            &[BellFunctional::chsh().at_least(2.5)],
            &g,
            0,
            Mode::Joint,
        )
        .unwrap()
        .remove(0);
        to_sdpa_string(&to_sdp(&moment_matrix(&p, &mnp()).unwrap()))
    };
    let a = build();
    assert_eq!(a, build());
    let reparsed = parse_sdpa(&a).unwrap();
    assert_eq!(to_sdpa_string(&reparsed), a);
}

#[test]
fn missing_word_without_completion() {
    let g = dibound::grid::coefficients(&[0.5, 1.0]).unwrap();
    let p = npo::two_sided(&Scenario::chsh(), &[], &g, 0, 0, Mode::Joint).unwrap().remove(0);
    let opts = RelaxOptions {
        complete: false,
        ..RelaxOptions::level(1)
    };
    match moment_matrix(&p, &opts) {
        Err(Error::MissingWord(w)) => assert!(w.letters().len() >= 3, "{w}"),
        other => panic!("expected a missing word, got {other:?}"),
    }
    let completed = moment_matrix(&p, &RelaxOptions::level(1)).unwrap();
    assert!(!completed.completions.is_empty());
}

#[test]
fn supraquantum_constraint_is_infeasible() {
    let r = entropy_bound(&chsh_config(Task::OneSided, vec![BellFunctional::chsh().at_least(3.0)])).unwrap();
    assert_eq!(r.status, BoundStatus::Infeasible, "{}", r.message);
    assert!(r.value.is_none());
}

fn min_entropy(constraints: Vec<BellFunctional>) -> (BoundStatus, Option<f64>) {
    let mut cfg = BoundConfig::new(Task::MinEntropy, Scenario::chsh(), constraints);
    cfg.relax = mnp();
    let r = entropy_bound(&cfg).unwrap();
    (r.status, r.value)
}

#[test]
fn min_entropy_of_extreme_points() {
    let (status, _) = min_entropy(distribution_constraints(&Distribution::pr_box(), &Selection::Full).unwrap());
    assert_eq!(status, BoundStatus::Infeasible);

    let det = Distribution::deterministic(Scenario::chsh(), &[1, 0], &[0, 1]).unwrap();
    let rows = widen_equalities(distribution_constraints(&det, &Selection::Full).unwrap(), 1e-6).unwrap();
    let (status, value) = min_entropy(rows);
    assert!(status == BoundStatus::Optimal || status == BoundStatus::NearOptimal, "{status:?}");
    assert!(value.unwrap().abs() < 1e-6, "{value:?}");
}

#[test]
fn min_entropy_follows_guessing_curve() {
    for s in [2.2, 2.5, 2.7] {
        let (_, value) = min_entropy(vec![BellFunctional::chsh().at_least(s)]);
        let guess = 0.5 + 0.5 * (2.0 - s * s / 4.0).sqrt();
        let expected = -guess.log2();
        assert!((value.unwrap() - expected).abs() < 1e-4, "S = {s}: {value:?} vs {expected}");
        assert!(value.unwrap() <= chsh_entropy(s) + 1e-6);
    }
}

#[test]
fn two_sided_self_test_certifies_two_bits() {
    let angles = MeasurementAngleSet::new(vec![0.0, PI / 2.0], vec![PI / 2.0, FRAC_PI_4 / 2.0, 5.0 * FRAC_PI_4]).unwrap();
    let d = honest_statistics(StateSpec::MaxEntangled, &angles).unwrap();
    let rows = widen_equalities(distribution_constraints(&d, &Selection::Full).unwrap(), 1e-6).unwrap();
    let mut cfg = BoundConfig::new(Task::TwoSided, d.scenario(), rows);
    cfg.grid = GridSpec::uniform(8, 0.2);
    cfg.relax = mnp();
    cfg.workers = 4;
    let r = entropy_bound(&cfg).unwrap();
    let v = r.value.unwrap_or_else(|| panic!("{:?}: {}", r.status, r.message));
    assert!(v >= 1.9 && v <= 2.0 + 1e-6, "{v}");
}
