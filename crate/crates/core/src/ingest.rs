//! Reading observed statistics and projecting them onto the
//! non-signalling set.
//!
//! CSV layout: a header line `na,nb,nx,ny,mode=counts` (or `mode=probs`)
//! giving Alice's and Bob's outcome counts and input counts, then one line
//! `x,y,a,b,value` per entry. Missing entries are zero. In count mode each
//! setting is normalized by its total; in probability mode each setting
//! must already sum to 1 within `1e-6`.
//!
//! JSON layout: `{"na": .., "nb": .., "nx": .., "ny": .., "mode": "probs",
//! "table": t}` with `t[x][y][a][b]`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scenario::{Distribution, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonTable,
}

impl Format {
    /// Guesses the format from the file extension (`.json` or CSV).
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::JsonTable,
            _ => Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    Counts,
    Probs,
}

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn load_distribution(path: &Path, format: Format) -> Result<Distribution> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    match format {
        Format::Csv => parse_csv(&text).map_err(|m| parse_err(path, m)),
        Format::JsonTable => parse_json(&text).map_err(|m| parse_err(path, m)),
    }
}

fn finish(scenario: Scenario, mode: Mode, mut table: Vec<f64>) -> std::result::Result<Distribution, String> {
    let block = scenario.alice_outcomes * scenario.bob_outcomes;
    for x in 0..scenario.alice_inputs {
        for y in 0..scenario.bob_inputs {
            let idx: Vec<usize> = scenario
                .entries()
                .filter(|&(_, _, xx, yy)| xx == x && yy == y)
                .map(|(a, b, _, _)| scenario.index(a, b, x, y))
                .collect();
            debug_assert_eq!(idx.len(), block);
            let total: f64 = idx.iter().map(|&i| table[i]).sum();
            match mode {
                Mode::Counts => {
                    if total <= 0.0 {
                        return Err(format!("setting ({x}, {y}) has no trials"));
                    }
                    for &i in &idx {
                        table[i] /= total;
                    }
                }
                Mode::Probs => {
                    if (total - 1.0).abs() > 1e-6 {
                        return Err(format!("probabilities of setting ({x}, {y}) sum to {total}"));
                    }
                }
            }
        }
    }
    Distribution::from_table(scenario, table).map_err(|e| e.to_string())
}

fn parse_csv(text: &str) -> std::result::Result<Distribution, String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or("empty file")?
        .map_err(|e| format!("header: {e}"))?;
    if header.len() != 5 {
        return Err(format!(
            "header must be `na,nb,nx,ny,mode=counts|probs`, found {} fields",
            header.len()
        ));
    }
    let dim = |i: usize, name: &str| -> std::result::Result<usize, String> {
        header[i]
            .parse::<usize>()
            .ok()
            .filter(|v| *v > 0)
            .ok_or_else(|| format!("header field {name} = `{}` is not a positive integer", &header[i]))
    };
    let (na, nb, nx, ny) = (dim(0, "na")?, dim(1, "nb")?, dim(2, "nx")?, dim(3, "ny")?);
    let mode = match header[4].strip_prefix("mode=") {
        Some("counts") => Mode::Counts,
        Some("probs") => Mode::Probs,
        _ => return Err(format!("unknown mode `{}` (expected mode=counts or mode=probs)", &header[4])),
    };
    let scenario = Scenario::new(nx, ny, na, nb).map_err(|e| e.to_string())?;
    let mut table = vec![0.0; scenario.table_len()];
    let mut seen = vec![false; scenario.table_len()];
    for rec in records {
        let rec = rec.map_err(|e| e.to_string())?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(format!("row {row}: expected 5 fields x,y,a,b,value, found {}", rec.len()));
        }
        let idx = |i: usize, limit: usize, name: &str| -> std::result::Result<usize, String> {
            let v: usize = rec[i]
                .parse()
                .map_err(|_| format!("row {row}: {name} = `{}` is not an index", &rec[i]))?;
            if v >= limit {
                return Err(format!("row {row}: {name} = {v} but the header declares {limit}"));
            }
            Ok(v)
        };
        let (x, y, a, b) = (idx(0, nx, "x")?, idx(1, ny, "y")?, idx(2, na, "a")?, idx(3, nb, "b")?);
        let v: f64 = rec[4]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| format!("row {row}: value `{}` is not a nonnegative number", &rec[4]))?;
        let i = scenario.index(a, b, x, y);
        if seen[i] {
            return Err(format!("row {row}: duplicate entry for x={x}, y={y}, a={a}, b={b}"));
        }
        seen[i] = true;
        table[i] = v;
    }
    finish(scenario, mode, table)
}

#[derive(Deserialize)]
struct JsonTable {
    na: usize,
    nb: usize,
    nx: usize,
    ny: usize,
    mode: Mode,
    table: Vec<Vec<Vec<Vec<f64>>>>,
}

fn parse_json(text: &str) -> std::result::Result<Distribution, String> {
    let t: JsonTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let scenario = Scenario::new(t.nx, t.ny, t.na, t.nb).map_err(|e| e.to_string())?;
    let mismatch = |what: &str, expected: usize, found: usize| {
        format!("{what}: expected {expected} entries (declared), found {found}")
    };
    if t.table.len() != t.nx {
        return Err(mismatch("table", t.nx, t.table.len()));
    }
    let mut table = vec![0.0; scenario.table_len()];
    for (x, tx) in t.table.iter().enumerate() {
        if tx.len() != t.ny {
            return Err(mismatch(&format!("table[{x}]"), t.ny, tx.len()));
        }
        for (y, txy) in tx.iter().enumerate() {
            if txy.len() != t.na {
                return Err(mismatch(&format!("table[{x}][{y}]"), t.na, txy.len()));
            }
            for (a, row) in txy.iter().enumerate() {
                if row.len() != t.nb {
                    return Err(mismatch(&format!("table[{x}][{y}][{a}]"), t.nb, row.len()));
                }
                for (b, &v) in row.iter().enumerate() {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(format!("table[{x}][{y}][{a}][{b}] = {v} is not a nonnegative number"));
                    }
                    table[scenario.index(a, b, x, y)] = v;
                }
            }
        }
    }
    finish(scenario, t.mode, table)
}

/// Largest difference between a party's marginal under two different
/// inputs of the other party.
pub fn signalling_violation(d: &Distribution) -> f64 {
    let s = d.scenario();
    let mut worst: f64 = 0.0;
    for x in 0..s.alice_inputs {
        for a in 0..s.alice_outcomes {
            let m: Vec<f64> = (0..s.bob_inputs).map(|y| d.alice_marginal(a, x, y)).collect();
            for y in 1..m.len() {
                worst = worst.max((m[y] - m[0]).abs());
            }
        }
    }
    for y in 0..s.bob_inputs {
        for b in 0..s.bob_outcomes {
            let m: Vec<f64> = (0..s.alice_inputs).map(|x| d.bob_marginal(b, x, y)).collect();
            for x in 1..m.len() {
                worst = worst.max((m[x] - m[0]).abs());
            }
        }
    }
    worst
}

/// Whether all marginal discrepancies are within `tol`, and the largest one.
pub fn is_nonsignalling(d: &Distribution, tol: f64) -> (bool, f64) {
    let v = signalling_violation(d);
    (v <= tol, v)
}

/// Rows of the linear system `C p = e` defining normalized non-signalling
/// tables.
fn ns_system(s: &Scenario) -> (DMatrix<f64>, DVector<f64>) {
    let n = s.table_len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for x in 0..s.alice_inputs {
        for y in 0..s.bob_inputs {
            let mut r = vec![0.0; n];
            for a in 0..s.alice_outcomes {
                for b in 0..s.bob_outcomes {
                    r[s.index(a, b, x, y)] = 1.0;
                }
            }
            rows.push((r, 1.0));
        }
    }
    for x in 0..s.alice_inputs {
        for a in 0..s.alice_outcomes {
            for y in 1..s.bob_inputs {
                let mut r = vec![0.0; n];
                for b in 0..s.bob_outcomes {
                    r[s.index(a, b, x, y)] += 1.0;
                    r[s.index(a, b, x, 0)] -= 1.0;
                }
                rows.push((r, 0.0));
            }
        }
    }
    for y in 0..s.bob_inputs {
        for b in 0..s.bob_outcomes {
            for x in 1..s.alice_inputs {
                let mut r = vec![0.0; n];
                for a in 0..s.alice_outcomes {
                    r[s.index(a, b, x, y)] += 1.0;
                    r[s.index(a, b, 0, y)] -= 1.0;
                }
                rows.push((r, 0.0));
            }
        }
    }
    let c = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].0[j]);
    let e = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    (c, e)
}

fn affine_projection(c: &DMatrix<f64>, cct_pinv: &DMatrix<f64>, e: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
    let residual = c * p - e;
    p - c.transpose() * (cct_pinv * residual)
}

#[derive(Debug, Clone)]
pub struct Projection {
    pub distribution: Distribution,
    /// `||d - projected||_1`, reported alongside results.
    pub l1_distance: f64,
    pub l2_distance: f64,
    /// Whether negative entries were clipped and the point reprojected.
    pub clipped: bool,
}

/// Euclidean projection onto the affine set of normalized non-signalling
/// tables. Negative entries are clipped once and the result reprojected;
/// entries still below `-1e-6` are an error.
pub fn project_nonsignalling(d: &Distribution) -> Result<Projection> {
    let s = d.scenario();
    let (c, e) = ns_system(&s);
    let cct_pinv = (&c * c.transpose())
        .pseudo_inverse(1e-10)
        .map_err(|m| Error::InvalidArgument(m.to_string()))?;
    let p0 = DVector::from_column_slice(d.table());
    let mut p = affine_projection(&c, &cct_pinv, &e, &p0);
    let mut clipped = false;
    if p.iter().any(|v| *v < -1e-12) {
        clipped = true;
        p.iter_mut().for_each(|v| *v = v.max(0.0));
        p = affine_projection(&c, &cct_pinv, &e, &p);
        let min = p.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -1e-6 {
            return Err(Error::InvalidArgument(format!(
                "projection leaves an entry of {min:e} after clipping; treat this table with an explicit QP"
            )));
        }
    }
    let diff = &p - &p0;
    let distribution = Distribution::from_fn(s, |a, b, x, y| p[s.index(a, b, x, y)]);
    Ok(Projection {
        distribution,
        l1_distance: diff.iter().map(|v| v.abs()).sum(),
        l2_distance: diff.norm(),
        clipped,
    })
}
