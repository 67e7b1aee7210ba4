//! End-to-end entropy bounds: build the problem(s), relax, solve (per-node
//! problems on a small worker pool) and combine the certified optima.

use std::f64::consts::LN_2;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use dibound_sdp::{SolveOptions, SolveStatus};

use crate::error::{invalid, Result};
use crate::grid::{coefficients, make_grid, GridSpec};
use crate::npo::{self, Mode, NpoProblem};
use crate::relax::{solve_relaxation, RelaxOptions, RelaxedSolution};
use crate::scenario::{BellFunctional, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    OneSided,
    TwoSided,
    MinEntropy,
}

#[derive(Debug, Clone)]
pub struct BoundConfig {
    pub task: Task,
    pub scenario: Scenario,
    pub constraints: Vec<BellFunctional>,
    pub grid: GridSpec,
    pub relax: RelaxOptions,
    pub mode: Mode,
    pub key_x: usize,
    pub key_y: usize,
    pub solve: SolveOptions,
    pub workers: usize,
}

impl BoundConfig {
    pub fn new(task: Task, scenario: Scenario, constraints: Vec<BellFunctional>) -> Self {
        Self {
            task,
            scenario,
            constraints,
            grid: GridSpec::default(),
            relax: RelaxOptions::default(),
            mode: Mode::PerNode,
            key_x: 0,
            key_y: 0,
            solve: SolveOptions::default(),
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    SolverError,
}

impl BoundStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundStatus::Optimal => "optimal",
            BoundStatus::NearOptimal => "near_optimal",
            BoundStatus::Infeasible => "infeasible",
            BoundStatus::SolverError => "solver_error",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    /// Lower bound in bits; present only for optimal and near-optimal runs.
    pub value: Option<f64>,
    pub status: BoundStatus,
    /// Certified optimum of each per-node problem (empty in joint mode).
    pub per_node: Vec<f64>,
    /// Largest moment matrix dimension among the solved problems.
    pub matrix_size: usize,
    pub wall_time: f64,
    pub message: String,
}

fn status_of(s: SolveStatus) -> BoundStatus {
    match s {
        SolveStatus::Optimal => BoundStatus::Optimal,
        SolveStatus::NearOptimal => BoundStatus::NearOptimal,
        SolveStatus::Infeasible => BoundStatus::Infeasible,
        SolveStatus::Unbounded | SolveStatus::SolverError => BoundStatus::SolverError,
    }
}

/// Solves independent problems with up to `workers` threads; results keep
/// the input order.
pub fn solve_all(
    problems: &[NpoProblem],
    relax: &RelaxOptions,
    opts: &SolveOptions,
    workers: usize,
) -> Vec<Result<RelaxedSolution>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RelaxedSolution>>>> = problems.iter().map(|_| Mutex::new(None)).collect();
    let workers = workers.clamp(1, problems.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= problems.len() {
                    break;
                }
                let r = solve_relaxation(&problems[i], relax, opts);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every problem solved"))
        .collect()
}

/// Builds the problems a configuration describes without solving them.
pub fn build_problems(cfg: &BoundConfig) -> Result<Vec<NpoProblem>> {
    if cfg.workers == 0 {
        return invalid("workers must be at least 1");
    }
    match cfg.task {
        Task::MinEntropy => Ok(vec![npo::min_entropy(&cfg.scenario, &cfg.constraints, cfg.key_x)?]),
        Task::OneSided | Task::TwoSided => {
            let grid = coefficients(&make_grid(&cfg.grid)?)?;
            if cfg.task == Task::OneSided {
                npo::one_sided(&cfg.scenario, &cfg.constraints, &grid, cfg.key_x, cfg.mode)
            } else {
                npo::two_sided(&cfg.scenario, &cfg.constraints, &grid, cfg.key_x, cfg.key_y, cfg.mode)
            }
        }
    }
}

/// Certified lower bound on `H(A|E)` (one-sided), `H(AB|E)` (two-sided) or
/// `H_min(A|E)`.
pub fn entropy_bound(cfg: &BoundConfig) -> Result<BoundResult> {
    let start = Instant::now();
    let problems = build_problems(cfg)?;
    let results = solve_all(&problems, &cfg.relax, &cfg.solve, cfg.workers);
    let mut solved = Vec::with_capacity(results.len());
    for r in results {
        solved.push(r?);
    }
    let matrix_size = solved.iter().map(|s| s.matrix_size).max().unwrap_or(0);
    let worst = solved
        .iter()
        .map(|s| status_of(s.status))
        .max_by_key(|s| match s {
            BoundStatus::Optimal => 0,
            BoundStatus::NearOptimal => 1,
            BoundStatus::Infeasible => 2,
            BoundStatus::SolverError => 3,
        })
        .unwrap_or(BoundStatus::SolverError);
    let message = solved
        .iter()
        .filter(|s| s.status != SolveStatus::Optimal)
        .map(|s| s.message.clone())
        .collect::<Vec<_>>()
        .join("; ");
    let mut result = BoundResult {
        value: None,
        status: worst,
        per_node: Vec::new(),
        matrix_size,
        wall_time: 0.0,
        message,
    };
    if matches!(worst, BoundStatus::Optimal | BoundStatus::NearOptimal) {
        let value = match cfg.task {
            Task::MinEntropy => 0.0 - solved[0].bound.min(1.0).log2(),
            _ if cfg.mode == Mode::Joint => solved[0].bound,
            _ => {
                let labels = match cfg.task {
                    Task::TwoSided => cfg.scenario.alice_outcomes * cfg.scenario.bob_outcomes,
                    _ => cfg.scenario.alice_outcomes,
                };
                result.per_node = solved.iter().map(|s| s.bound).collect();
                (labels as f64 - 1.0) / LN_2 + result.per_node.iter().sum::<f64>()
            }
        };
        result.value = Some(value);
    }
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}
