//! Problem data for block-diagonal linear matrix inequalities.
//!
//! An [`SdpInstance`] describes
//!
//! ```text
//!     optimize   c^T y + offset
//!     subject to sum_i y_i F_i - F_0  is PSD   (block diagonal)
//!                A y = b
//! ```
//!
//! which is the "dual" form used by the SDPA file format. Matrix index 0 is
//! the constant `F_0`, matrix `i >= 1` multiplies variable `y_{i-1}`.

use crate::error::SdpError;

/// Kind of a diagonal block of the LMI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// Dense symmetric block constrained to the PSD cone.
    Psd,
    /// Diagonal block, i.e. a vector of nonnegative scalars.
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub size: usize,
}

impl Block {
    pub fn psd(size: usize) -> Self {
        Self { kind: BlockKind::Psd, size }
    }

    pub fn diagonal(size: usize) -> Self {
        Self { kind: BlockKind::Diagonal, size }
    }
}

/// One upper-triangle nonzero of `F_matrix`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixEntry {
    /// 0 for the constant matrix, `i + 1` for variable `i`.
    pub matrix: usize,
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Sparse linear row `sum coeffs = rhs` over the variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpInstance {
    pub num_vars: usize,
    pub blocks: Vec<Block>,
    pub entries: Vec<MatrixEntry>,
    pub equalities: Vec<LinearRow>,
    pub objective: Vec<f64>,
    pub offset: f64,
    pub sense: Sense,
}

impl SdpInstance {
    pub fn new(num_vars: usize, blocks: Vec<Block>, sense: Sense) -> Self {
        Self {
            num_vars,
            blocks,
            entries: Vec::new(),
            equalities: Vec::new(),
            objective: vec![0.0; num_vars],
            offset: 0.0,
            sense,
        }
    }

    /// Adds `value` at `(row, col)` of `F_matrix` in `block`. Entries are
    /// stored in the upper triangle; the lower triangle is implied.
    pub fn push_entry(&mut self, matrix: usize, block: usize, row: usize, col: usize, value: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(MatrixEntry {
            matrix,
            block,
            row,
            col,
            value,
        });
    }

    pub fn push_equality(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(LinearRow { coeffs, rhs });
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.size).sum()
    }

    pub fn validate(&self) -> Result<(), SdpError> {
        if self.objective.len() != self.num_vars {
            return Err(SdpError::Invalid(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.num_vars
            )));
        }
        if self.blocks.iter().any(|b| b.size == 0) {
            return Err(SdpError::Invalid("empty block".into()));
        }
        let mut touched = vec![false; self.num_vars];
        for e in &self.entries {
            let Some(block) = self.blocks.get(e.block) else {
                return Err(SdpError::Invalid(format!("entry refers to missing block {}", e.block)));
            };
            if e.matrix > self.num_vars {
                return Err(SdpError::Invalid(format!("entry refers to missing matrix {}", e.matrix)));
            }
            if e.row > e.col || e.col >= block.size {
                return Err(SdpError::Invalid(format!(
                    "entry ({}, {}) outside upper triangle of block {} (size {})",
                    e.row, e.col, e.block, block.size
                )));
            }
            if block.kind == BlockKind::Diagonal && e.row != e.col {
                return Err(SdpError::Invalid(format!(
                    "off-diagonal entry in diagonal block {}",
                    e.block
                )));
            }
            if !e.value.is_finite() {
                return Err(SdpError::Invalid("non-finite matrix entry".into()));
            }
            if e.matrix > 0 && e.value != 0.0 {
                touched[e.matrix - 1] = true;
            }
        }
        if let Some(v) = touched.iter().position(|t| !t) {
            return Err(SdpError::Invalid(format!("variable {v} does not enter any block")));
        }
        for row in &self.equalities {
            if let Some(&(v, _)) = row.coeffs.iter().find(|(v, _)| *v >= self.num_vars) {
                return Err(SdpError::Invalid(format!("equality refers to missing variable {v}")));
            }
        }
        Ok(())
    }

    /// Evaluates `sum_i y_i F_i - F_0` as dense symmetric blocks (diagonal
    /// blocks are returned as `size x 1` columns).
    pub fn slack(&self, y: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self
            .blocks
            .iter()
            .map(|b| match b.kind {
                BlockKind::Psd => vec![0.0; b.size * b.size],
                BlockKind::Diagonal => vec![0.0; b.size],
            })
            .collect();
        for e in &self.entries {
            let scale = if e.matrix == 0 { -1.0 } else { y[e.matrix - 1] };
            let v = scale * e.value;
            let b = &self.blocks[e.block];
            match b.kind {
                BlockKind::Psd => {
                    out[e.block][e.row * b.size + e.col] += v;
                    if e.row != e.col {
                        out[e.block][e.col * b.size + e.row] += v;
                    }
                }
                BlockKind::Diagonal => out[e.block][e.row] += v,
            }
        }
        out
    }

    /// Objective value `c^T y + offset` in the instance's own sense.
    pub fn objective_value(&self, y: &[f64]) -> f64 {
        self.objective.iter().zip(y).map(|(c, y)| c * y).sum::<f64>() + self.offset
    }

    /// Canonical equivalent instance: minimization (objective and offset
    /// negated for maximization), duplicate entries merged, zeros dropped,
    /// entries sorted by `(matrix, block, row, col)` and equality
    /// coefficients merged and sorted. This is what an SDPA round trip
    /// reproduces.
    pub fn normalized(&self) -> SdpInstance {
        let flip = match self.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let mut merged = std::collections::BTreeMap::<(usize, usize, usize, usize), f64>::new();
        for e in &self.entries {
            *merged.entry((e.matrix, e.block, e.row, e.col)).or_insert(0.0) += e.value;
        }
        let entries = merged
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((matrix, block, row, col), value)| MatrixEntry {
                matrix,
                block,
                row,
                col,
                value,
            })
            .collect();
        let equalities = self
            .equalities
            .iter()
            .map(|r| {
                let mut m = std::collections::BTreeMap::<usize, f64>::new();
                for &(v, c) in &r.coeffs {
                    *m.entry(v).or_insert(0.0) += c;
                }
                LinearRow {
                    coeffs: m.into_iter().filter(|(_, c)| *c != 0.0).collect(),
                    rhs: r.rhs,
                }
            })
            .collect();
        SdpInstance {
            num_vars: self.num_vars,
            blocks: self.blocks.clone(),
            entries,
            equalities,
            objective: self.objective.iter().map(|c| flip * c).collect(),
            offset: flip * self.offset,
            sense: Sense::Minimize,
        }
    }
}
