use std::path::Path;
use std::process::{Command, Output};

fn dibound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dibound")).args(args).output().expect("binary runs")
}

fn run_config(dir: &Path, name: &str, text: &str, extra: &[&str]) -> Output {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    let mut args = vec!["--config", path.to_str().unwrap()];
    args.extend_from_slice(extra);
    dibound(&args)
}

struct Row {
    parameter: f64,
    bound: Option<f64>,
    status: String,
    matrix_size: usize,
}

fn rows(stdout: &[u8]) -> Vec<Row> {
    let text = std::str::from_utf8(stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("parameter,bound,status,matrix_size,wall_time"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5, "{l}");
            Row {
                parameter: f[0].parse().unwrap(),
                bound: (!f[1].is_empty()).then(|| f[1].parse().unwrap()),
                status: f[2].to_string(),
                matrix_size: f[3].parse().unwrap(),
            }
        })
        .collect()
}

/// Everything but the wall-time column.
fn without_times(stdout: &[u8]) -> Vec<String> {
    std::str::from_utf8(stdout)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

const CHSH_SWEEP: &str = r#"
scenario = "2222"
task = "one_sided_vn"
[source]
kind = "inequality"
functional = "chsh"
lo = 2.0
hi = 2.8284271247461903
steps = 13
[grid]
nodes = 4
t_min = 0.2
lambda = 1.0
spacing = "uniform"
"#;

#[test]
fn template_round_trips() {
    let out = dibound(&["--print-config"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let again = run_config(dir.path(), "t.toml", std::str::from_utf8(&out.stdout).unwrap(), &["--print-config"]);
    assert_eq!(again.stdout, out.stdout);
    let text = String::from_utf8(again.stdout).unwrap();
    for key in ["equality_band", "workers", "[grid]", "[relaxation]", "[solver]", "spacing"] {
        assert!(text.contains(key), "{key} missing from\n{text}");
    }
}

#[test]
fn overrides_reach_the_printed_config() {
    let out = dibound(&["--print-config", "--nodes", "12", "--level", "3", "--mode", "joint", "--workers", "2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("nodes = 12") && text.contains("level = 3"));
    assert!(text.contains("mode = \"joint\"") && text.contains("workers = 2"));
}

#[test]
fn chsh_sweep_is_monotone_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_config(dir.path(), "chsh.toml", CHSH_SWEEP, &["--workers", "2"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let r = rows(&first.stdout);
    assert_eq!(r.len(), 13);
    assert!(r.windows(2).all(|w| w[0].parameter < w[1].parameter));
    let bounds: Vec<f64> = r.iter().map(|x| x.bound.unwrap()).collect();
    assert!(bounds.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{bounds:?}");
    assert!(bounds[0].abs() < 1e-3 && bounds[12] > 0.9, "{bounds:?}");
    let second = run_config(dir.path(), "chsh.toml", CHSH_SWEEP, &[]);
    assert_eq!(without_times(&first.stdout), without_times(&second.stdout));
}

#[test]
fn config_errors_are_listed_together() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHSH_SWEEP
        .replace("steps = 13", "steps = 0")
        .replace("hi = 2.8284271247461903", "hi = 4.5")
        .replace("nodes = 4", "nodes = 1")
        + "[relaxation]\nlevel = 0\nextras = []\n";
    let out = run_config(dir.path(), "bad.toml", &text, &["--workers", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    for needle in ["steps must be at least 1", "leaves the range [-4, 4]", "at least 2 nodes", "level must be", "workers"] {
        assert!(err.contains(needle), "{needle} missing from\n{err}");
    }
    assert_eq!(err.lines().filter(|l| l.starts_with("config error")).count(), 5, "{err}");
    assert!(out.stdout.is_empty());

    let missing = dibound(&[]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = run_config(dir.path(), "typo.toml", &CHSH_SWEEP.replace("workers", "x").replace("task", "tsak"), &[]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn infeasible_statistics_exit_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHSH_SWEEP.replace("lo = 2.0", "lo = 3.0").replace("hi = 2.8284271247461903", "hi = 3.2").replace("steps = 13", "steps = 2");
    let out = run_config(dir.path(), "pr.toml", &text, &[]);
    assert_eq!(out.status.code(), Some(4));
    let r = rows(&out.stdout);
    assert!(r.iter().all(|x| x.status == "infeasible" && x.bound.is_none()));
}

#[test]
fn oversized_joint_problem_is_a_solver_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHSH_SWEEP.replace("steps = 13", "steps = 1").replace("nodes = 4", "nodes = 8");
    let out = run_config(dir.path(), "joint.toml", &text, &["--mode", "joint"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(rows(&out.stdout)[0].status, "solver_error");
    assert!(String::from_utf8_lossy(&out.stderr).contains("exceed the limit"));
}

#[test]
fn signalling_file_is_projected() {
    let dir = tempfile::tempdir().unwrap();
    // CHSH 2.4 counts with a signalling bias on (1, 1)
    let mut csv = String::from("2,2,2,2,mode=counts\n");
    for (x, y) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let (same, diff) = if (x, y) == (1, 1) { (200, 800) } else { (800, 200) };
        let bias = if (x, y) == (1, 1) { 20 } else { 0 };
        csv.push_str(&format!("{x},{y},0,0,{}\n", same / 2 + bias));
        csv.push_str(&format!("{x},{y},1,1,{}\n", same / 2 - bias));
        csv.push_str(&format!("{x},{y},0,1,{}\n", diff / 2));
        csv.push_str(&format!("{x},{y},1,0,{}\n", diff / 2));
    }
    std::fs::write(dir.path().join("data.csv"), csv).unwrap();
    let text = format!(
        "scenario = \"2222\"\ntask = \"one_sided_vn\"\n[source]\nkind = \"distribution\"\npath = \"{}\"\n[grid]\nnodes = 4\nt_min = 0.2\nlambda = 1.0\nspacing = \"uniform\"\n",
        dir.path().join("data.csv").display()
    );
    let out = run_config(dir.path(), "file.toml", &text, &[]);
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{err}");
    assert!(err.contains("projected onto the non-signalling set"), "{err}");
    let r = rows(&out.stdout);
    assert_eq!(r.len(), 1);
    assert!(r[0].bound.unwrap() > 0.1, "{:?}", r[0].bound);
}

#[test]
fn export_writes_one_file_per_problem() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHSH_SWEEP.replace("steps = 13", "steps = 3");
    let out_dir = dir.path().join("sdpa");
    let out = run_config(dir.path(), "x.toml", &text, &["--export-sdpa", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stdout.is_empty());
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    // 3 points x (4 nodes + end term)
    assert_eq!(names.len(), 15);
    assert_eq!(names[0], "point000_node00.dat-s");
    let body = std::fs::read_to_string(out_dir.join("point002_node04.dat-s")).unwrap();
    assert!(body.lines().any(|l| l.trim_start().starts_with('2')), "{body}");
}

#[test]
fn max_bell_task() {
    let dir = tempfile::tempdir().unwrap();
    let text = CHSH_SWEEP.replace("one_sided_vn", "max_bell");
    let out = run_config(dir.path(), "mb.toml", &text, &["--level", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = rows(&out.stdout);
    assert_eq!(r.len(), 1);
    assert_eq!(r[0].parameter, 1.0);
    assert!((r[0].bound.unwrap() - 2.0 * std::f64::consts::SQRT_2).abs() < 1e-6);
    assert_eq!(r[0].matrix_size, 5);
}

#[test]
fn i3322_rows_approach_the_maximum() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
scenario = "3322"
task = "one_sided_vn"
[source]
kind = "inequality"
functional = "i3322"
lo = 4.8
hi = 5.0
steps = 3
[grid]
nodes = 8
t_min = 0.2
lambda = 1.0
spacing = "uniform"
"#;
    let out = run_config(dir.path(), "i3322.toml", text, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = rows(&out.stdout);
    let b: Vec<f64> = r.iter().map(|x| x.bound.unwrap()).collect();
    assert!(b[0].abs() < 1e-3 && b[1] > b[0] && b[2] > b[1], "{b:?}");
    assert!((b[2] - 0.8996).abs() < 0.01, "{b:?}");
    assert_eq!(r[2].matrix_size, 62);
}

#[test]
fn two_sided_werner_smoke_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
scenario = "2322"
task = "two_sided_vn"
[source]
kind = "honest"
state = "werner"
alice = [0.0, 1.5707963267948966]
bob = [1.5707963267948966, 0.39269908169872414, 3.9269908169872414]
lo = 0.9
hi = 1.0
steps = 3
[grid]
nodes = 4
t_min = 0.2
lambda = 1.0
spacing = "uniform"
"#;
    let out = run_config(dir.path(), "w.toml", text, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let b: Vec<f64> = rows(&out.stdout).iter().map(|x| x.bound.unwrap()).collect();
    assert!(b.windows(2).all(|w| w[1] >= w[0] - 1e-6), "{b:?}");
    assert!(b[2] > 1.5 && b[2] <= 2.0 + 1e-6, "{b:?}");
}
