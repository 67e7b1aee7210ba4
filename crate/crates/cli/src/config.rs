//! Run configuration: TOML schema, defaults and validation into a [`Plan`].

use std::path::PathBuf;

use dibound::bound::{BoundConfig, Task};
use dibound::grid::{GridSpec, Spacing};
use dibound::ingest::{load_distribution, Format};
use dibound::npo::Mode;
use dibound::oracle::{MeasurementAngleSet, StateSpec};
use dibound::relax::RelaxOptions;
use dibound::scenario::{BellFunctional, Distribution, Scenario, Selection};
use dibound::sdp::SolveOptions;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    OneSidedVn,
    TwoSidedVn,
    MinEntropy,
    MaxBell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum ModeName {
    Joint,
    PerNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingName {
    Logarithmic,
    Uniform,
    /// Nodes taken from `points`.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateName {
    MaxEntangled,
    Werner,
    Dephased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: usize,
    pub t_min: f64,
    pub lambda: f64,
    pub spacing: SpacingName,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            nodes: g.nodes,
            t_min: g.t_min,
            lambda: g.lambda,
            spacing: SpacingName::Logarithmic,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    pub level: usize,
    /// Extra monomial patterns such as `"MNP"` (Alice, Bob, node projector).
    pub extras: Vec<String>,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        Self {
            level: 2,
            extras: vec!["MNP".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolveOptions::default();
        Self {
            tolerance: s.tolerance,
            max_iterations: s.max_iterations,
        }
    }
}

/// Where the constraints of each sweep point come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// `functional >= v` for `steps` values of `v` from `lo` to `hi`.
    Inequality {
        functional: String,
        lo: f64,
        hi: f64,
        steps: usize,
    },
    /// Observed statistics; projected onto the non-signalling set when
    /// needed. `settings` restricts the constraints to some `[x, y]` pairs.
    Distribution {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        settings: Vec<[usize; 2]>,
    },
    /// Statistics of a two-qubit model with measurement angles, swept over
    /// the visibility (Werner) or dephasing probability. With `functional`
    /// set, only that functional's value is imposed.
    Honest {
        state: StateName,
        alice: Vec<f64>,
        bob: Vec<f64>,
        #[serde(default = "one")]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
        #[serde(default = "one_step")]
        steps: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        functional: Option<String>,
    },
}

fn one() -> f64 {
    1.0
}

fn one_step() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Four-digit code `n_a n_b o_a o_b`, e.g. `"2222"`.
    pub scenario: String,
    pub task: TaskName,
    #[serde(default = "per_node")]
    pub mode: ModeName,
    #[serde(default)]
    pub key_x: usize,
    #[serde(default)]
    pub key_y: usize,
    /// Half-width of the band replacing each observed-probability equality.
    #[serde(default = "default_band")]
    pub equality_band: f64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// CSV destination; standard output when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub source: Source,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub relaxation: RelaxConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn per_node() -> ModeName {
    ModeName::PerNode
}

fn default_band() -> f64 {
    1e-6
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    /// Template printed by `--print-config` without `--config`.
    pub fn example() -> Self {
        Self {
            scenario: "2222".into(),
            task: TaskName::OneSidedVn,
            mode: ModeName::PerNode,
            key_x: 0,
            key_y: 0,
            equality_band: default_band(),
            workers: default_workers(),
            output: None,
            source: Source::Inequality {
                functional: "chsh".into(),
                lo: 2.0,
                hi: 2.0 * std::f64::consts::SQRT_2,
                steps: 13,
            },
            grid: GridConfig::default(),
            relaxation: RelaxConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

/// Input of one sweep point before any projection.
#[derive(Debug, Clone)]
pub enum PointSource {
    Constraints(Vec<BellFunctional>),
    Observed { distribution: Distribution, selection: Selection },
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct Plan {
    pub task: TaskName,
    pub template: BoundConfig,
    /// Functional maximized by the `max_bell` task.
    pub functional: Option<BellFunctional>,
    pub points: Vec<(f64, PointSource)>,
    pub band: f64,
    pub workers: usize,
    pub output: Option<PathBuf>,
}

fn sweep(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![lo];
    }
    (0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
        .collect()
}

/// Smallest and largest value of a functional over all tables.
fn algebraic_range(f: &BellFunctional) -> (f64, f64) {
    let s = f.scenario;
    let (mut lo, mut hi) = (f.offset, f.offset);
    for x in 0..s.alice_inputs {
        for y in 0..s.bob_inputs {
            let cs: Vec<f64> = (0..s.alice_outcomes)
                .flat_map(|a| (0..s.bob_outcomes).map(move |b| (a, b)))
                .map(|(a, b)| f.coeff(a, b, x, y))
                .collect();
            lo += cs.iter().copied().fold(f64::INFINITY, f64::min);
            hi += cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    (lo, hi)
}

fn check_sweep(errors: &mut Vec<String>, what: &str, lo: f64, hi: f64, steps: usize, range: (f64, f64)) {
    if steps == 0 {
        errors.push(format!("{what}: steps must be at least 1"));
    }
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        errors.push(format!("{what}: need finite lo <= hi, got lo = {lo}, hi = {hi}"));
    } else if lo < range.0 - 1e-12 || hi > range.1 + 1e-12 {
        errors.push(format!(
            "{what}: sweep [{lo}, {hi}] leaves the range [{}, {}]",
            range.0, range.1
        ));
    }
}

impl RunConfig {
    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<Plan, Vec<String>> {
        let mut errors = Vec::new();
        let scenario = match Scenario::from_code(&self.scenario) {
            Ok(s) => Some(s),
            Err(e) => {
                errors.push(format!("scenario: {e}"));
                None
            }
        };
        if self.workers == 0 {
            errors.push("workers must be at least 1".into());
        }
        if !(self.equality_band >= 0.0) || !self.equality_band.is_finite() {
            errors.push(format!("equality_band must be a nonnegative number, got {}", self.equality_band));
        }
        if self.relaxation.level == 0 {
            errors.push("relaxation.level must be at least 1".into());
        }
        let relax = self
            .relaxation
            .extras
            .iter()
            .try_fold(RelaxOptions::level(self.relaxation.level.max(1)), |r, p| r.with_extras(&[p]))
            .map_err(|e| errors.push(format!("relaxation.extras: {e}")))
            .ok();
        let solve = SolveOptions {
            tolerance: self.solver.tolerance,
            max_iterations: self.solver.max_iterations,
            ..SolveOptions::default()
        };
        if let Err(e) = solve.validate() {
            errors.push(format!("solver: {e}"));
        }
        let grid = self.grid_spec(&mut errors);
        if let Some(s) = scenario {
            if self.key_x >= s.alice_inputs {
                errors.push(format!("key_x = {} but Alice has {} inputs", self.key_x, s.alice_inputs));
            }
            if self.task == TaskName::TwoSidedVn && self.key_y >= s.bob_inputs {
                errors.push(format!("key_y = {} but Bob has {} inputs", self.key_y, s.bob_inputs));
            }
        }
        let functional_for = |errors: &mut Vec<String>, name: &str| -> Option<BellFunctional> {
            match BellFunctional::by_name(name) {
                Ok(f) => {
                    if scenario.is_some_and(|s| s != f.scenario) {
                        errors.push(format!(
                            "functional `{name}` belongs to scenario {}, not {}",
                            f.scenario, self.scenario
                        ));
                    }
                    Some(f)
                }
                Err(e) => {
                    errors.push(format!("source.functional: {e}"));
                    None
                }
            }
        };
        let mut points = Vec::new();
        let mut max_functional = None;
        match &self.source {
            Source::Inequality { functional, lo, hi, steps } => {
                if let Some(f) = functional_for(&mut errors, functional) {
                    if self.task != TaskName::MaxBell {
                        check_sweep(&mut errors, "source", *lo, *hi, *steps, algebraic_range(&f));
                        for v in sweep(*lo, *hi, (*steps).max(1)) {
                            points.push((v, PointSource::Constraints(vec![f.clone().at_least(v)])));
                        }
                    }
                    max_functional = Some(f);
                }
            }
            Source::Distribution { path, settings } => {
                if self.task == TaskName::MaxBell {
                    errors.push("max_bell needs an inequality source".into());
                }
                match load_distribution(path, Format::from_path(path)) {
                    Ok(d) => {
                        if scenario.is_some_and(|s| s != d.scenario()) {
                            errors.push(format!(
                                "{} holds scenario {}, config says {}",
                                path.display(),
                                d.scenario(),
                                self.scenario
                            ));
                        }
                        let selection = if settings.is_empty() {
                            Selection::Full
                        } else {
                            let s = d.scenario();
                            for [x, y] in settings {
                                if *x >= s.alice_inputs || *y >= s.bob_inputs {
                                    errors.push(format!("source.settings: [{x}, {y}] outside scenario {s}"));
                                }
                            }
                            Selection::Settings(settings.iter().map(|[x, y]| (*x, *y)).collect())
                        };
                        points.push((0.0, PointSource::Observed { distribution: d, selection }));
                    }
                    Err(e) => errors.push(format!("source.path: {e}")),
                }
            }
            Source::Honest { state, alice, bob, lo, hi, steps, functional } => {
                if self.task == TaskName::MaxBell {
                    errors.push("max_bell needs an inequality source".into());
                }
                let angles = MeasurementAngleSet::new(alice.clone(), bob.clone())
                    .map_err(|e| errors.push(format!("source angles: {e}")))
                    .ok();
                if let Some(s) = scenario {
                    if (alice.len(), bob.len(), s.alice_outcomes, s.bob_outcomes)
                        != (s.alice_inputs, s.bob_inputs, 2, 2)
                    {
                        errors.push(format!(
                            "honest model gives {} x {} binary measurements, scenario is {s}",
                            alice.len(),
                            bob.len()
                        ));
                    }
                }
                let f = functional.as_ref().and_then(|n| functional_for(&mut errors, n));
                let range = match state {
                    StateName::MaxEntangled => (*lo, *hi),
                    _ => (0.0, 1.0),
                };
                check_sweep(&mut errors, "source", *lo, *hi, *steps, range);
                if errors.is_empty() {
                    let angles = angles.expect("checked");
                    for v in sweep(*lo, *hi, (*steps).max(1)) {
                        let spec = match state {
                            StateName::MaxEntangled => StateSpec::MaxEntangled,
                            StateName::Werner => StateSpec::Werner(v),
                            StateName::Dephased => StateSpec::Dephased(v),
                        };
                        match dibound::oracle::honest_statistics(spec, &angles) {
                            Ok(d) => {
                                let src = match &f {
                                    Some(f) => {
                                        let value = dibound::scenario::bell_value(f, &d).expect("same scenario");
                                        PointSource::Constraints(vec![f.clone().at_least(value)])
                                    }
                                    None => PointSource::Observed {
                                        distribution: d,
                                        selection: Selection::Full,
                                    },
                                };
                                points.push((v, src));
                            }
                            Err(e) => errors.push(format!("source: {e}")),
                        }
                    }
                }
            }
        }
        if !errors.is_empty() {
            return Err(errors);
        }
        let scenario = scenario.expect("checked");
        let task = match self.task {
            TaskName::OneSidedVn | TaskName::MaxBell => Task::OneSided,
            TaskName::TwoSidedVn => Task::TwoSided,
            TaskName::MinEntropy => Task::MinEntropy,
        };
        let mut template = BoundConfig::new(task, scenario, Vec::new());
        template.grid = grid.expect("checked");
        template.relax = relax.expect("checked");
        template.mode = match self.mode {
            ModeName::Joint => Mode::Joint,
            ModeName::PerNode => Mode::PerNode,
        };
        template.key_x = self.key_x;
        template.key_y = self.key_y;
        template.solve = solve;
        template.workers = self.workers;
        Ok(Plan {
            task: self.task,
            template,
            functional: if self.task == TaskName::MaxBell { max_functional } else { None },
            points,
            band: self.equality_band,
            workers: self.workers,
            output: self.output.clone(),
        })
    }

    fn grid_spec(&self, errors: &mut Vec<String>) -> Option<GridSpec> {
        let g = &self.grid;
        let spec = match g.spacing {
            SpacingName::Custom => GridSpec::custom(g.points.clone()),
            spacing => {
                if !g.points.is_empty() {
                    errors.push("grid.points is only used with spacing = \"custom\"".into());
                }
                GridSpec {
                    nodes: g.nodes,
                    lambda: g.lambda,
                    t_min: g.t_min,
                    spacing: if spacing == SpacingName::Uniform {
                        Spacing::Uniform
                    } else {
                        Spacing::Logarithmic
                    },
                }
            }
        };
        match dibound::grid::make_grid(&spec) {
            Ok(_) => Some(spec),
            Err(e) => {
                errors.push(format!("grid: {e}"));
                None
            }
        }
    }
}
