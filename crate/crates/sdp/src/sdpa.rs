//! Sparse SDPA (`.dat-s`) text format.
//!
//! Layout: number of variables, number of blocks, block sizes (negative for
//! diagonal blocks), the objective vector, then one `k b i j v` line per
//! upper-triangle nonzero with 1-based indices. The format always minimizes,
//! so maximization problems are written with the objective negated.
//!
//! Two things have no place in the plain format and are carried in leading
//! `*` comment lines, written only when present: a constant objective offset
//! (`*offset v`) and equality rows, which are appended as a trailing diagonal
//! block holding the pair `a^T y - b >= 0`, `b - a^T y >= 0` for each row
//! (`*equality-block n`). External solvers treat both as ordinary data.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::SdpError;
use crate::instance::{Block, BlockKind, LinearRow, SdpInstance, Sense};

/// Renders the instance in sparse SDPA format.
pub fn to_sdpa_string(inst: &SdpInstance) -> String {
    let norm = inst.normalized();
    let mut out = String::new();
    if norm.offset != 0.0 {
        writeln!(out, "*offset {}", norm.offset).unwrap();
    }
    let eq_block = norm.blocks.len();
    let mut blocks = norm.blocks.clone();
    if !norm.equalities.is_empty() {
        writeln!(out, "*equality-block {}", eq_block + 1).unwrap();
        blocks.push(Block::diagonal(2 * norm.equalities.len()));
    }
    writeln!(out, "{}", norm.num_vars).unwrap();
    writeln!(out, "{}", blocks.len()).unwrap();
    let sizes: Vec<String> = blocks
        .iter()
        .map(|b| match b.kind {
            BlockKind::Psd => format!("{}", b.size),
            BlockKind::Diagonal => format!("-{}", b.size),
        })
        .collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let c: Vec<String> = norm.objective.iter().map(|v| format!("{v}")).collect();
    writeln!(out, "{}", c.join(" ")).unwrap();

    // gather equality entries per matrix so the output stays sorted by matrix
    let mut eq_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); norm.num_vars + 1];
    for (k, row) in norm.equalities.iter().enumerate() {
        if row.rhs != 0.0 {
            eq_entries[0].push((2 * k, row.rhs));
            eq_entries[0].push((2 * k + 1, -row.rhs));
        }
        for &(v, a) in &row.coeffs {
            eq_entries[v + 1].push((2 * k, a));
            eq_entries[v + 1].push((2 * k + 1, -a));
        }
    }
    let mut idx = 0;
    for (matrix, extra) in eq_entries.iter_mut().enumerate() {
        while idx < norm.entries.len() && norm.entries[idx].matrix == matrix {
            let e = &norm.entries[idx];
            writeln!(out, "{} {} {} {} {}", e.matrix, e.block + 1, e.row + 1, e.col + 1, e.value)
                .unwrap();
            idx += 1;
        }
        extra.sort_by_key(|&(pos, _)| pos);
        for &(pos, v) in extra.iter() {
            writeln!(out, "{} {} {} {} {}", matrix, eq_block + 1, pos + 1, pos + 1, v).unwrap();
        }
    }
    out
}

/// Writes the instance to `path` in sparse SDPA format.
pub fn export_sdpa(inst: &SdpInstance, path: &Path) -> Result<(), SdpError> {
    inst.validate()?;
    std::fs::write(path, to_sdpa_string(inst)).map_err(|source| SdpError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_sdpa(path: &Path) -> Result<SdpInstance, SdpError> {
    let text = std::fs::read_to_string(path).map_err(|source| SdpError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_sdpa(&text)
}

fn perr(line: usize, message: impl Into<String>) -> SdpError {
    SdpError::Parse {
        line,
        message: message.into(),
    }
}

/// Parses sparse SDPA text. The result is always a minimization problem.
pub fn parse_sdpa(text: &str) -> Result<SdpInstance, SdpError> {
    let mut offset = 0.0;
    let mut eq_block: Option<usize> = None;
    let mut lines = text.lines().enumerate().peekable();
    while let Some((no, line)) = lines.peek() {
        let t = line.trim_start();
        if let Some(rest) = t.strip_prefix('*').or_else(|| t.strip_prefix('"')) {
            let mut words = rest.split_whitespace();
            match words.next() {
                Some("offset") => {
                    offset = parse_num(words.next().unwrap_or(""), no + 1)?;
                }
                Some("equality-block") => {
                    let b: usize = words
                        .next()
                        .and_then(|w| w.parse().ok())
                        .ok_or_else(|| perr(no + 1, "bad equality-block marker"))?;
                    eq_block = Some(b);
                }
                _ => {}
            }
            lines.next();
        } else if t.is_empty() {
            lines.next();
        } else {
            break;
        }
    }

    // token stream with line numbers; the first two lines may carry trailing text
    let mut header: Vec<(usize, usize)> = Vec::new();
    let mut tokens: Vec<(usize, String)> = Vec::new();
    for (no, line) in lines {
        let cleaned: String = line
            .chars()
            .map(|ch| if matches!(ch, ',' | '{' | '}' | '(' | ')') { ' ' } else { ch })
            .collect();
        let mut words = cleaned.split_whitespace();
        if header.len() < 2 {
            if let Some(w) = words.next() {
                let v: usize = w.parse().map_err(|_| perr(no + 1, format!("expected a count, got `{w}`")))?;
                header.push((no + 1, v));
            }
            continue;
        }
        tokens.extend(words.map(|w| (no + 1, w.to_string())));
    }
    if header.len() < 2 {
        return Err(perr(text.lines().count(), "missing header"));
    }
    let m = header[0].1;
    let nblocks = header[1].1;
    let mut it = tokens.into_iter();
    let last_line = header[1].0;
    let mut next = |what: &str| it.next().ok_or_else(|| perr(last_line, format!("unexpected end of input reading {what}")));

    let mut blocks = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let (no, w) = next("block sizes")?;
        let s: i64 = w.parse().map_err(|_| perr(no, format!("bad block size `{w}`")))?;
        if s == 0 {
            return Err(perr(no, "zero block size"));
        }
        blocks.push(if s < 0 {
            Block::diagonal((-s) as usize)
        } else {
            Block::psd(s as usize)
        });
    }
    let mut objective = Vec::with_capacity(m);
    for _ in 0..m {
        let (no, w) = next("objective")?;
        objective.push(parse_num(&w, no)?);
    }
    let mut inst = SdpInstance::new(m, blocks.clone(), Sense::Minimize);
    inst.objective = objective;
    inst.offset = offset;

    let eq_index = match eq_block {
        Some(b) if b >= 1 && b <= nblocks && blocks[b - 1].kind == BlockKind::Diagonal => Some(b - 1),
        Some(b) => return Err(perr(1, format!("equality-block {b} is not a diagonal block"))),
        None => None,
    };
    let mut eq_rows: Vec<LinearRow> = match eq_index {
        Some(b) => vec![LinearRow { coeffs: Vec::new(), rhs: 0.0 }; blocks[b].size / 2],
        None => Vec::new(),
    };

    loop {
        let Ok((no, w)) = next("") else { break };
        let k: usize = w.parse().map_err(|_| perr(no, format!("bad matrix index `{w}`")))?;
        let mut field = |name: &str| -> Result<(usize, String), SdpError> {
            next(name).map_err(|_| perr(no, format!("truncated entry, missing {name}")))
        };
        let (_, b) = field("block")?;
        let (_, i) = field("row")?;
        let (_, j) = field("column")?;
        let (_, v) = field("value")?;
        let idx = |s: &str| s.parse::<usize>().ok().filter(|v| *v >= 1);
        let (Some(b), Some(i), Some(j)) = (idx(&b), idx(&i), idx(&j)) else {
            return Err(perr(no, "bad entry index"));
        };
        let v = parse_num(&v, no)?;
        if k > m || b > nblocks || i > blocks[b - 1].size || j > blocks[b - 1].size {
            return Err(perr(no, "entry index out of range"));
        }
        if Some(b - 1) == eq_index {
            if i != j {
                return Err(perr(no, "off-diagonal entry in equality block"));
            }
            // only the first of each pair carries the row
            if (i - 1) % 2 == 0 {
                let row = &mut eq_rows[(i - 1) / 2];
                if k == 0 {
                    row.rhs += v;
                } else {
                    row.coeffs.push((k - 1, v));
                }
            }
            continue;
        }
        inst.push_entry(k, b - 1, i - 1, j - 1, v);
    }

    if let Some(b) = eq_index {
        inst.blocks.remove(b);
        for e in &mut inst.entries {
            if e.block > b {
                e.block -= 1;
            }
        }
        inst.equalities = eq_rows;
    }
    Ok(inst.normalized())
}

fn parse_num(w: &str, line: usize) -> Result<f64, SdpError> {
    w.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| perr(line, format!("bad number `{w}`")))
}
