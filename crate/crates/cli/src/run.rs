//! Executes a [`Plan`]: projection of observed data, the sweep itself, CSV
//! output and SDPA export.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use dibound::bound::{build_problems, entropy_bound, BoundConfig, BoundStatus};
use dibound::ingest::{is_nonsignalling, project_nonsignalling};
use dibound::npo;
use dibound::relax::{moment_matrix, solve_relaxation, to_sdp};
use dibound::scenario::{distribution_constraints, widen_equalities, BellFunctional};
use dibound::sdp::sdpa::export_sdpa;
use dibound::sdp::SolveStatus;

use crate::config::{Plan, PointSource, TaskName};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub parameter: f64,
    pub bound: Option<f64>,
    pub status: BoundStatus,
    pub matrix_size: usize,
    pub wall_time: f64,
}

/// Constraint rows of one sweep point. Signalling data are projected first
/// and the size of the correction is logged; a failed projection is returned
/// as an error.
pub fn constraints_for(src: &PointSource, band: f64) -> Result<Vec<BellFunctional>, String> {
    match src {
        PointSource::Constraints(c) => Ok(c.clone()),
        PointSource::Observed { distribution, selection } => {
            let (ok, violation) = is_nonsignalling(distribution, 1e-12);
            let d = if ok {
                distribution.clone()
            } else {
                let p = project_nonsignalling(distribution).map_err(|e| e.to_string())?;
                eprintln!(
                    "note: signalling up to {violation:.3e}; projected onto the non-signalling set (l1 change {:.3e}, l2 change {:.3e}{})",
                    p.l1_distance,
                    p.l2_distance,
                    if p.clipped { ", negative entries clipped" } else { "" }
                );
                p.distribution
            };
            let rows = distribution_constraints(&d, selection).map_err(|e| e.to_string())?;
            widen_equalities(rows, band).map_err(|e| e.to_string())
        }
    }
}

fn status_of(s: SolveStatus) -> BoundStatus {
    match s {
        SolveStatus::Optimal => BoundStatus::Optimal,
        SolveStatus::NearOptimal => BoundStatus::NearOptimal,
        SolveStatus::Infeasible => BoundStatus::Infeasible,
        SolveStatus::Unbounded | SolveStatus::SolverError => BoundStatus::SolverError,
    }
}

fn max_bell_row(plan: &Plan) -> Row {
    let start = Instant::now();
    let f = plan.functional.as_ref().expect("validated max_bell plan");
    let problem = npo::bell_maximization(f);
    let parameter = plan.template.relax.level as f64;
    match solve_relaxation(&problem, &plan.template.relax, &plan.template.solve) {
        Ok(sol) => {
            let status = status_of(sol.status);
            if status != BoundStatus::Optimal {
                eprintln!("note: {}", sol.message);
            }
            Row {
                parameter,
                bound: sol.status.has_value().then_some(sol.bound),
                status,
                matrix_size: sol.matrix_size,
                wall_time: start.elapsed().as_secs_f64(),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            Row {
                parameter,
                bound: None,
                status: BoundStatus::SolverError,
                matrix_size: 0,
                wall_time: start.elapsed().as_secs_f64(),
            }
        }
    }
}

fn entropy_row(parameter: f64, cfg: &BoundConfig) -> Row {
    let start = Instant::now();
    match entropy_bound(cfg) {
        Ok(r) => {
            if !r.message.is_empty() && r.status != BoundStatus::Optimal {
                eprintln!("note: parameter {parameter}: {}", r.message);
            }
            Row {
                parameter,
                bound: r.value,
                status: r.status,
                matrix_size: r.matrix_size,
                wall_time: r.wall_time,
            }
        }
        Err(e) => {
            eprintln!("error: parameter {parameter}: {e}");
            Row {
                parameter,
                bound: None,
                status: BoundStatus::SolverError,
                matrix_size: 0,
                wall_time: start.elapsed().as_secs_f64(),
            }
        }
    }
}

/// Per-point configurations, in sweep order.
pub fn point_configs(plan: &Plan) -> Result<Vec<(f64, BoundConfig)>, String> {
    plan.points
        .iter()
        .map(|(parameter, src)| {
            let mut cfg = plan.template.clone();
            cfg.constraints = constraints_for(src, plan.band)?;
            Ok((*parameter, cfg))
        })
        .collect()
}

/// Runs every sweep point. Points are spread over the worker pool when
/// there are several; a single point uses the workers for its nodes.
pub fn run(plan: &Plan) -> Result<Vec<Row>, String> {
    if plan.task == TaskName::MaxBell {
        return Ok(vec![max_bell_row(plan)]);
    }
    let mut configs = point_configs(plan)?;
    if configs.len() == 1 {
        let (p, cfg) = &configs[0];
        return Ok(vec![entropy_row(*p, cfg)]);
    }
    for (_, cfg) in &mut configs {
        cfg.workers = 1;
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Row>>> = configs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..plan.workers.clamp(1, configs.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((p, cfg)) = configs.get(i) else { break };
                let row = entropy_row(*p, cfg);
                *slots[i].lock().expect("slot lock") = Some(row);
            });
        }
    });
    Ok(slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every point ran"))
        .collect())
}

pub fn write_csv(rows: &[Row], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "bound", "status", "matrix_size", "wall_time"])?;
    for r in rows {
        w.write_record([
            r.parameter.to_string(),
            r.bound.map(|b| b.to_string()).unwrap_or_default(),
            r.status.as_str().to_string(),
            r.matrix_size.to_string(),
            format!("{:.3}", r.wall_time),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// 0 when every row has a value, 3 on any solver failure, otherwise 4 when
/// some statistics are infeasible.
pub fn exit_code(rows: &[Row]) -> i32 {
    if rows.iter().any(|r| r.status == BoundStatus::SolverError) {
        3
    } else if rows.iter().any(|r| r.status == BoundStatus::Infeasible) {
        4
    } else {
        0
    }
}

/// Writes one SDPA file per problem (`point<i>_node<k>.dat-s`, or
/// `max_bell.dat-s`) without solving; returns the number of files.
pub fn export(plan: &Plan, dir: &Path) -> Result<usize, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let write = |problem: &npo::NpoProblem, name: String| -> Result<(), String> {
        let mp = moment_matrix(problem, &plan.template.relax).map_err(|e| e.to_string())?;
        export_sdpa(&to_sdp(&mp), &dir.join(name)).map_err(|e| e.to_string())
    };
    if plan.task == TaskName::MaxBell {
        let problem = npo::bell_maximization(plan.functional.as_ref().expect("validated max_bell plan"));
        write(&problem, "max_bell.dat-s".into())?;
        return Ok(1);
    }
    let mut count = 0;
    for (i, (_, cfg)) in point_configs(plan)?.iter().enumerate() {
        for (k, problem) in build_problems(cfg).map_err(|e| e.to_string())?.iter().enumerate() {
            write(problem, format!("point{i:03}_node{k:02}.dat-s"))?;
            count += 1;
        }
    }
    Ok(count)
}
