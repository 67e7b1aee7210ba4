//! Infeasible primal-dual interior-point method with the HKM search direction
//! and Mehrotra predictor-corrector steps.
//!
//! The instance is treated in its LMI form `Z = sum_i y_i F_i - F_0 >= 0`,
//! `A y = b`, minimizing `c^T y` (maximization is handled by negating `c`).
//! The conjugate problem is
//!
//! ```text
//!     maximize   <F_0, X> + b^T w
//!     subject to <F_i, X> + (A^T w)_i = c_i,   X >= 0
//! ```
//!
//! Each iteration forms the dense Schur complement
//! `S_ij = tr(F_i X F_j Z^{-1})` and eliminates the equality multipliers
//! through `A S^{-1} A^T`.

use std::time::Instant;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

use crate::error::SdpError;
use crate::instance::{BlockKind, SdpInstance, Sense};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Relative tolerance on gap and infeasibilities.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// 0 silent, 1 summary line, 2 per-iteration log on stderr.
    pub verbosity: u8,
    /// Largest number of variables accepted; the dense Schur complement
    /// needs `8 m^2` bytes.
    pub max_variables: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            verbosity: 0,
            max_variables: 20_000,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SdpError> {
        if !(self.tolerance > 0.0) {
            return Err(SdpError::Invalid("tolerance must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(SdpError::Invalid("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Stalled with gap and residuals within `sqrt(tolerance)`-ish bounds.
    NearOptimal,
    /// The LMI together with the equalities has no solution.
    Infeasible,
    /// The objective is unbounded over the feasible set.
    Unbounded,
    SolverError,
}

impl SolveStatus {
    pub fn has_value(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }
}

/// A block of the conjugate variable `X` or of the slack `Z`.
#[derive(Debug, Clone)]
pub enum BlockValue {
    Dense(Mat<f64>),
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    pub x: Vec<BlockValue>,
    pub z: Vec<BlockValue>,
    /// Multipliers of the equality rows (after redundant rows were dropped,
    /// mapped back to the original rows).
    pub w: Vec<f64>,
    /// `c^T y + offset` in the instance's sense.
    pub primal_objective: f64,
    /// Conjugate objective in the instance's sense: a lower bound for
    /// minimization, an upper bound for maximization, once `dual_residual`
    /// vanishes.
    pub dual_objective: f64,
    /// `c_i - <F_i, X> - (A^T w)_i` in the internal minimization form.
    pub dual_residual: Vec<f64>,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub message: String,
}

impl Solution {
    /// Bound on the optimum that stays valid when the conjugate point is not
    /// exactly feasible: the dual objective corrected by `||r||_1 * var_bound`,
    /// where `var_bound` bounds `|y_i|` over the feasible set.
    pub fn certified_bound(&self, sense: Sense, var_bound: f64) -> f64 {
        let slack: f64 = self.dual_residual.iter().map(|r| r.abs()).sum::<f64>() * var_bound;
        match sense {
            Sense::Minimize => self.dual_objective - slack,
            Sense::Maximize => self.dual_objective + slack,
        }
    }
}

enum Mats {
    Dense(Mat<f64>),
    Diag(Vec<f64>),
}

impl Mats {
    fn zeros_like(kind: BlockKind, n: usize) -> Self {
        match kind {
            BlockKind::Psd => Mats::Dense(Mat::zeros(n, n)),
            BlockKind::Diagonal => Mats::Diag(vec![0.0; n]),
        }
    }

    fn scaled_identity(kind: BlockKind, n: usize, s: f64) -> Self {
        match kind {
            BlockKind::Psd => Mats::Dense(Mat::from_fn(n, n, |i, j| if i == j { s } else { 0.0 })),
            BlockKind::Diagonal => Mats::Diag(vec![s; n]),
        }
    }

    fn dot(&self, other: &Mats) -> f64 {
        match (self, other) {
            (Mats::Dense(a), Mats::Dense(b)) => {
                let n = a.nrows();
                let mut s = 0.0;
                for j in 0..n {
                    let ca = a.col_as_slice(j);
                    let cb = b.col_as_slice(j);
                    s += ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>();
                }
                s
            }
            (Mats::Diag(a), Mats::Diag(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            _ => unreachable!("block kinds always agree"),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    fn axpy(&mut self, alpha: f64, other: &Mats) {
        match (self, other) {
            (Mats::Dense(a), Mats::Dense(b)) => {
                let n = a.nrows();
                for j in 0..n {
                    let cb = b.col_as_slice(j);
                    for (x, y) in a.col_as_slice_mut(j).iter_mut().zip(cb) {
                        *x += alpha * y;
                    }
                }
            }
            (Mats::Diag(a), Mats::Diag(b)) => {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += alpha * y;
                }
            }
            _ => unreachable!("block kinds always agree"),
        }
    }

    fn to_value(&self) -> BlockValue {
        match self {
            Mats::Dense(a) => BlockValue::Dense(a.clone()),
            Mats::Diag(d) => BlockValue::Diagonal(d.clone()),
        }
    }
}

impl Clone for Mats {
    fn clone(&self) -> Self {
        match self {
            Mats::Dense(a) => Mats::Dense(a.clone()),
            Mats::Diag(d) => Mats::Diag(d.clone()),
        }
    }
}

fn symmetrize(m: &mut Mat<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `alpha` with `x + alpha * dx` PSD (`f64::INFINITY` if unbounded).
fn max_step(x: &Mats, dx: &Mats) -> Option<f64> {
    match (x, dx) {
        (Mats::Dense(x), Mats::Dense(dx)) => {
            let llt = x.llt(Side::Lower).ok()?;
            let l = llt.L();
            // L^{-1} dX L^{-T}
            let mut t = dx.clone();
            solve_lower_triangular_in_place(l, t.as_mut(), Par::Seq);
            let mut t = t.transpose().to_owned();
            solve_lower_triangular_in_place(l, t.as_mut(), Par::Seq);
            symmetrize(&mut t);
            let eig = t.self_adjoint_eigenvalues(Side::Lower).ok()?;
            let lmin = eig.first().copied().unwrap_or(0.0);
            Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
        }
        (Mats::Diag(x), Mats::Diag(dx)) => {
            let mut a = f64::INFINITY;
            for (xi, di) in x.iter().zip(dx) {
                if *di < 0.0 {
                    a = a.min(-xi / di);
                }
            }
            Some(a)
        }
        _ => unreachable!("block kinds always agree"),
    }
}

/// Sparse coefficient matrices grouped per block, with symmetric entries
/// expanded to both triangles.
struct Structure {
    kinds: Vec<BlockKind>,
    sizes: Vec<usize>,
    /// per block: list of (var, entries (row, col, value))
    per_block: Vec<Vec<(usize, Vec<(usize, usize, f64)>)>>,
    f0: Vec<Mats>,
}

impl Structure {
    fn new(inst: &SdpInstance) -> Self {
        let kinds: Vec<BlockKind> = inst.blocks.iter().map(|b| b.kind).collect();
        let sizes: Vec<usize> = inst.blocks.iter().map(|b| b.size).collect();
        let mut f0: Vec<Mats> = kinds
            .iter()
            .zip(&sizes)
            .map(|(k, n)| Mats::zeros_like(*k, *n))
            .collect();
        let mut grouped: Vec<std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>>> =
            vec![Default::default(); kinds.len()];
        for e in &inst.entries {
            if e.value == 0.0 {
                continue;
            }
            if e.matrix == 0 {
                match &mut f0[e.block] {
                    Mats::Dense(m) => {
                        m[(e.row, e.col)] += e.value;
                        if e.row != e.col {
                            m[(e.col, e.row)] += e.value;
                        }
                    }
                    Mats::Diag(d) => d[e.row] += e.value,
                }
                continue;
            }
            let list = grouped[e.block].entry(e.matrix - 1).or_default();
            list.push((e.row, e.col, e.value));
            if e.row != e.col && kinds[e.block] == BlockKind::Psd {
                list.push((e.col, e.row, e.value));
            }
        }
        let per_block = grouped
            .into_iter()
            .map(|g| g.into_iter().collect::<Vec<_>>())
            .collect();
        Self {
            kinds,
            sizes,
            per_block,
            f0,
        }
    }

    /// `(<F_i, M>)_i` for blockwise matrices `M` (not necessarily symmetric).
    fn inner(&self, m: &[Mats], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (b, vars) in self.per_block.iter().enumerate() {
            match &m[b] {
                Mats::Dense(mat) => {
                    for (var, ents) in vars {
                        out[*var] += ents.iter().map(|&(r, c, f)| f * mat[(r, c)]).sum::<f64>();
                    }
                }
                Mats::Diag(d) => {
                    for (var, ents) in vars {
                        out[*var] += ents.iter().map(|&(r, _, f)| f * d[r]).sum::<f64>();
                    }
                }
            }
        }
    }

    /// `sum_i y_i F_i` (without `F_0`).
    fn combine(&self, y: &[f64]) -> Vec<Mats> {
        let mut out: Vec<Mats> = self
            .kinds
            .iter()
            .zip(&self.sizes)
            .map(|(k, n)| Mats::zeros_like(*k, *n))
            .collect();
        for (b, vars) in self.per_block.iter().enumerate() {
            match &mut out[b] {
                Mats::Dense(mat) => {
                    for (var, ents) in vars {
                        let yv = y[*var];
                        if yv == 0.0 {
                            continue;
                        }
                        for &(r, c, f) in ents {
                            mat[(r, c)] += yv * f;
                        }
                    }
                }
                Mats::Diag(d) => {
                    for (var, ents) in vars {
                        for &(r, _, f) in ents {
                            d[r] += y[*var] * f;
                        }
                    }
                }
            }
        }
        out
    }

    /// Schur complement `S_ij = tr(F_i X F_j Z^{-1})`.
    fn schur(&self, m: usize, x: &[Mats], zinv: &[Mats]) -> Mat<f64> {
        let mut s = Mat::<f64>::zeros(m, m);
        for (b, vars) in self.per_block.iter().enumerate() {
            match (&x[b], &zinv[b]) {
                (Mats::Dense(xm), Mats::Dense(zi)) => {
                    let n = self.sizes[b];
                    let mut t = Mat::<f64>::zeros(n, n);
                    for (iu, (u, eu)) in vars.iter().enumerate() {
                        t.fill(0.0);
                        // T[r, s] = sum_{(p,q,f) in E_u} f X[r,q] Zi[p,s]
                        for &(p, q, f) in eu {
                            let xq = xm.col_as_slice(q);
                            let zp = zi.col_as_slice(p);
                            for (col, &zps) in zp.iter().enumerate() {
                                let coef = f * zps;
                                if coef == 0.0 {
                                    continue;
                                }
                                for (tv, xv) in t.col_as_slice_mut(col).iter_mut().zip(xq) {
                                    *tv += coef * xv;
                                }
                            }
                        }
                        for (v, ev) in &vars[iu..] {
                            let val: f64 = ev.iter().map(|&(r, c, g)| g * t[(r, c)]).sum();
                            s[(*u, *v)] += val;
                            if u != v {
                                s[(*v, *u)] += val;
                            }
                        }
                    }
                }
                (Mats::Diag(xd), Mats::Diag(zd)) => {
                    let n = self.sizes[b];
                    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
                    for (var, ents) in vars {
                        for &(r, _, f) in ents {
                            rows[r].push((*var, f));
                        }
                    }
                    for (l, row) in rows.iter().enumerate() {
                        let h = xd[l] * zd[l];
                        for &(u, fu) in row {
                            for &(v, fv) in row {
                                s[(u, v)] += fu * fv * h;
                            }
                        }
                    }
                }
                _ => unreachable!("block kinds always agree"),
            }
        }
        s
    }
}

/// Equality rows after removing dependent ones, orthonormalized.
struct Equalities {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// maps kept orthonormal rows back to original row multipliers:
    /// original w = transform^T * w_kept
    transform: Vec<Vec<f64>>,
}

fn presolve_equalities(inst: &SdpInstance) -> Result<Equalities, ()> {
    let m = inst.num_vars;
    let p = inst.equalities.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    let mut transform: Vec<Vec<f64>> = Vec::new();
    for (k, row) in inst.equalities.iter().enumerate() {
        let mut a = vec![0.0; m];
        for &(v, c) in &row.coeffs {
            a[v] += c;
        }
        let mut beta = row.rhs;
        let mut coef = vec![0.0; p];
        coef[k] = 1.0;
        let norm0 = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        // two passes of Gram-Schmidt for stability
        for _ in 0..2 {
            for (q, (gamma, tq)) in rows.iter().zip(rhs.iter().zip(&transform)) {
                let d: f64 = a.iter().zip(q.iter()).map(|(x, y)| x * y).sum();
                if d == 0.0 {
                    continue;
                }
                for (x, y) in a.iter_mut().zip(q.iter()) {
                    *x -= d * y;
                }
                beta -= d * gamma;
                for (x, y) in coef.iter_mut().zip(tq.iter()) {
                    *x -= d * y;
                }
            }
        }
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= 1e-10 * norm0.max(1e-300) {
            if beta.abs() > 1e-8 * (1.0 + row.rhs.abs()) {
                return Err(());
            }
            continue;
        }
        a.iter_mut().for_each(|v| *v /= norm);
        coef.iter_mut().for_each(|v| *v /= norm);
        rows.push(a);
        rhs.push(beta / norm);
        transform.push(coef);
    }
    Ok(Equalities {
        rows,
        rhs,
        transform,
    })
}

fn invert_pd(m: &Mat<f64>) -> Option<Mat<f64>> {
    let llt = m.llt(Side::Lower).ok()?;
    let mut inv = llt.inverse();
    symmetrize(&mut inv);
    Some(inv)
}

fn factor_regularized(s: &Mat<f64>) -> Option<faer::linalg::solvers::Llt<f64>> {
    if let Ok(f) = s.llt(Side::Lower) {
        return Some(f);
    }
    let m = s.nrows();
    let scale = (0..m).map(|i| s[(i, i)].abs()).fold(0.0f64, f64::max).max(1e-300);
    let mut delta = 1e-14 * scale;
    for _ in 0..10 {
        let mut reg = s.clone();
        for i in 0..m {
            reg[(i, i)] += delta;
        }
        if let Ok(f) = reg.llt(Side::Lower) {
            return Some(f);
        }
        delta *= 100.0;
    }
    None
}

struct Direction {
    dy: Vec<f64>,
    dw: Vec<f64>,
    dx: Vec<Mats>,
    dz: Vec<Mats>,
}

struct Newton<'a> {
    st: &'a Structure,
    eq: &'a Equalities,
    schur: faer::linalg::solvers::Llt<f64>,
    /// S^{-1} A^T, m x p
    sinv_at: Mat<f64>,
    /// factor of A S^{-1} A^T
    m_factor: Option<faer::linalg::solvers::Llt<f64>>,
}

impl Newton<'_> {
    /// Solves `S dy - A^T dw = h`, `A dy = re`.
    fn solve(&self, h: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = h.len();
        let hm = Mat::<f64>::from_fn(m, 1, |i, _| h[i]);
        let sh = self.schur.solve(&hm);
        let p = self.eq.rows.len();
        if p == 0 {
            return ((0..m).map(|i| sh[(i, 0)]).collect(), Vec::new());
        }
        let mut rhs = Mat::<f64>::zeros(p, 1);
        for k in 0..p {
            let a_sh: f64 = self.eq.rows[k].iter().enumerate().map(|(i, a)| a * sh[(i, 0)]).sum();
            rhs[(k, 0)] = re[k] - a_sh;
        }
        let dw = match &self.m_factor {
            Some(f) => f.solve(&rhs),
            None => rhs,
        };
        let dy: Vec<f64> = (0..m)
            .map(|i| sh[(i, 0)] + (0..p).map(|k| self.sinv_at[(i, k)] * dw[(k, 0)]).sum::<f64>())
            .collect();
        (dy, (0..p).map(|k| dw[(k, 0)]).collect())
    }

    /// Full HKM direction for the right-hand side matrix
    /// `R = target - X - X P Z^{-1} [- corr]` (per block).
    fn direction(
        &self,
        r_mat: &[Mats],
        x: &[Mats],
        zinv: &[Mats],
        p_res: &[Mats],
        r_dual: &[f64],
        re: &[f64],
    ) -> Direction {
        let m = r_dual.len();
        let mut g = vec![0.0; m];
        self.st.inner(r_mat, &mut g);
        let h: Vec<f64> = g.iter().zip(r_dual).map(|(g, r)| g - r).collect();
        let (dy, dw) = self.solve(&h, re);
        let mut dz = self.st.combine(&dy);
        for (d, p) in dz.iter_mut().zip(p_res) {
            d.axpy(1.0, p);
        }
        // dX = R_without_XPZi - X (sum dy F) Zi  ==  R - X (dZ - P) Zi
        let sum_f = self.st.combine(&dy);
        let dx = r_mat
            .iter()
            .zip(x.iter().zip(zinv.iter().zip(&sum_f)))
            .map(|(r, (xb, (zi, sf)))| match (r, xb, zi, sf) {
                (Mats::Dense(r), Mats::Dense(xb), Mats::Dense(zi), Mats::Dense(sf)) => {
                    let mut d = r - xb * sf * zi;
                    symmetrize(&mut d);
                    Mats::Dense(d)
                }
                (Mats::Diag(r), Mats::Diag(xb), Mats::Diag(zi), Mats::Diag(sf)) => Mats::Diag(
                    r.iter()
                        .zip(xb.iter().zip(zi.iter().zip(sf)))
                        .map(|(r, (x, (zi, s)))| r - x * s * zi)
                        .collect(),
                ),
                _ => unreachable!("block kinds always agree"),
            })
            .collect();
        Direction { dy, dw, dx, dz }
    }
}

fn step_length(x: &[Mats], dx: &[Mats]) -> Option<f64> {
    let mut a = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        a = a.min(max_step(xb, db)?);
    }
    Some(a)
}

/// Solves the instance. Never panics on numerical trouble; failures are
/// reported through [`SolveStatus`].
pub fn solve(inst: &SdpInstance, opts: &SolveOptions) -> Result<Solution, SdpError> {
    inst.validate()?;
    opts.validate()?;
    let start = Instant::now();
    let m = inst.num_vars;
    if m > opts.max_variables {
        return Err(SdpError::Invalid(format!(
            "{m} variables exceed the limit of {} (dense Schur complement)",
            opts.max_variables
        )));
    }
    let st = Structure::new(inst);
    let nb = st.kinds.len();
    let sign = match inst.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let c: Vec<f64> = inst.objective.iter().map(|v| sign * v).collect();
    let user = |internal: f64| sign * internal + inst.offset;

    let Ok(eq) = presolve_equalities(inst) else {
        return Ok(trivial_infeasible(inst, start, "inconsistent equality rows"));
    };
    let p = eq.rows.len();
    let n_total: usize = st.sizes.iter().sum();

    // starting point
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let b_norm = eq.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let f0_norm = st.f0.iter().map(|f| f.norm_sq()).sum::<f64>().sqrt();
    let mut x: Vec<Mats> = Vec::with_capacity(nb);
    let mut z: Vec<Mats> = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = st.sizes[b] as f64;
        let mut xi = 10f64.max(n.sqrt());
        let mut eta = 10f64.max(n.sqrt()).max(st.f0[b].norm_sq().sqrt());
        for (var, ents) in &st.per_block[b] {
            let fnorm = ents.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
            xi = xi.max(n * (1.0 + c[*var].abs()) / (1.0 + fnorm));
            eta = eta.max(fnorm);
        }
        x.push(Mats::scaled_identity(st.kinds[b], st.sizes[b], xi));
        z.push(Mats::scaled_identity(st.kinds[b], st.sizes[b], eta));
    }
    let mut y = vec![0.0; m];
    let mut w = vec![0.0; p];

    let mut best: Option<Solution> = None;
    let mut status = SolveStatus::SolverError;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    let mut stall = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter;
        // residuals
        let fy = st.combine(&y);
        let p_res: Vec<Mats> = (0..nb)
            .map(|b| {
                let mut r = fy[b].clone();
                r.axpy(-1.0, &st.f0[b]);
                r.axpy(-1.0, &z[b]);
                r
            })
            .collect();
        let mut fx = vec![0.0; m];
        st.inner(&x, &mut fx);
        let mut r_dual: Vec<f64> = c.iter().zip(&fx).map(|(c, f)| c - f).collect();
        for (k, row) in eq.rows.iter().enumerate() {
            for (i, a) in row.iter().enumerate() {
                r_dual[i] -= a * w[k];
            }
        }
        let re: Vec<f64> = (0..p)
            .map(|k| eq.rhs[k] - eq.rows[k].iter().zip(&y).map(|(a, y)| a * y).sum::<f64>())
            .collect();
        let pobj: f64 = c.iter().zip(&y).map(|(c, y)| c * y).sum();
        let dobj: f64 = (0..nb).map(|b| st.f0[b].dot(&x[b])).sum::<f64>()
            + eq.rhs.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>();
        let gap: f64 = (0..nb).map(|b| x[b].dot(&z[b])).sum();
        let mu = gap / n_total as f64;
        let pinf_mat = p_res.iter().map(|r| r.norm_sq()).sum::<f64>().sqrt() / (1.0 + f0_norm);
        let pinf_eq = re.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + b_norm);
        let pinf = pinf_mat.max(pinf_eq);
        let dinf = r_dual.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + c_norm);
        let relgap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());

        if opts.verbosity >= 2 {
            eprintln!(
                "{iter:3} pobj {:+.10e} dobj {:+.10e} gap {:.2e} pinf {:.2e} dinf {:.2e} mu {:.2e}",
                pobj, dobj, relgap, pinf, dinf, mu
            );
        }

        let snapshot = |status: SolveStatus, msg: &str| {
            // map multipliers back to the original equality rows
            let mut w_orig = vec![0.0; inst.equalities.len()];
            for (k, t) in eq.transform.iter().enumerate() {
                for (j, v) in t.iter().enumerate() {
                    w_orig[j] += v * w[k];
                }
            }
            Solution {
                status,
                y: y.clone(),
                x: x.iter().map(Mats::to_value).collect(),
                z: z.iter().map(Mats::to_value).collect(),
                w: w_orig,
                primal_objective: user(pobj),
                dual_objective: user(dobj),
                dual_residual: r_dual.clone(),
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                relative_gap: relgap,
                iterations: iter,
                seconds: start.elapsed().as_secs_f64(),
                message: msg.to_string(),
            }
        };

        if pinf < opts.tolerance && dinf < opts.tolerance && relgap < opts.tolerance {
            status = SolveStatus::Optimal;
            best = Some(snapshot(status, "converged"));
            break;
        }
        let near = pinf < 1e3 * opts.tolerance && dinf < 1e3 * opts.tolerance && relgap < 1e3 * opts.tolerance;
        if near {
            let better = best.as_ref().map_or(true, |b| {
                b.relative_gap.max(b.primal_infeasibility).max(b.dual_infeasibility)
                    > relgap.max(pinf).max(dinf)
            });
            if better {
                best = Some(snapshot(SolveStatus::NearOptimal, "stalled near optimum"));
            }
        }

        // infeasibility certificates
        let hom_dual: f64 = c
            .iter()
            .zip(&r_dual)
            .map(|(c, r)| (c - r).abs())
            .fold(0.0, f64::max);
        if dobj > 0.0 && hom_dual / dobj < 1e-8 {
            status = SolveStatus::Infeasible;
            message = "conjugate ray certifies infeasibility".into();
            best = Some(snapshot(status, &message));
            break;
        }
        if pobj < 0.0 {
            let f0p = (0..nb)
                .map(|b| {
                    let mut t = st.f0[b].clone();
                    t.axpy(1.0, &p_res[b]);
                    t.norm_sq()
                })
                .sum::<f64>()
                .sqrt();
            let ay = eq.rhs.iter().zip(&re).map(|(b, r)| (b - r).powi(2)).sum::<f64>().sqrt();
            if (f0p + ay) / (-pobj) < 1e-8 {
                status = SolveStatus::Unbounded;
                message = "improving ray found".into();
                best = Some(snapshot(status, &message));
                break;
            }
        }

        // Newton system
        let mut zinv = Vec::with_capacity(nb);
        let mut ok = true;
        for zb in &z {
            match zb {
                Mats::Dense(zm) => match invert_pd(zm) {
                    Some(inv) => zinv.push(Mats::Dense(inv)),
                    None => {
                        ok = false;
                        break;
                    }
                },
                Mats::Diag(d) => zinv.push(Mats::Diag(d.iter().map(|v| 1.0 / v).collect())),
            }
        }
        if !ok {
            message = "slack lost definiteness".into();
            break;
        }
        let s = st.schur(m, &x, &zinv);
        let Some(schur) = factor_regularized(&s) else {
            message = "Schur complement factorization failed".into();
            break;
        };
        let mut sinv_at = Mat::<f64>::zeros(m, p);
        let mut m_factor = None;
        if p > 0 {
            let at = Mat::<f64>::from_fn(m, p, |i, k| eq.rows[k][i]);
            sinv_at = schur.solve(&at);
            let mm = Mat::<f64>::from_fn(p, p, |k, l| {
                eq.rows[k].iter().enumerate().map(|(i, a)| a * sinv_at[(i, l)]).sum()
            });
            let mut mm_sym = mm;
            symmetrize(&mut mm_sym);
            m_factor = factor_regularized(&mm_sym);
            if m_factor.is_none() {
                message = "equality system factorization failed".into();
                break;
            }
        }
        let newton = Newton {
            st: &st,
            eq: &eq,
            schur,
            sinv_at,
            m_factor,
        };

        // R = target*Zi - X - X P Zi (+ corrector)
        let base: Vec<Mats> = (0..nb)
            .map(|b| match (&x[b], &zinv[b], &p_res[b]) {
                (Mats::Dense(xm), Mats::Dense(zi), Mats::Dense(pm)) => {
                    Mats::Dense(-xm - xm * pm * zi)
                }
                (Mats::Diag(xd), Mats::Diag(zi), Mats::Diag(pd)) => Mats::Diag(
                    xd.iter()
                        .zip(zi.iter().zip(pd))
                        .map(|(x, (zi, p))| -x - x * p * zi)
                        .collect(),
                ),
                _ => unreachable!("block kinds always agree"),
            })
            .collect();

        // predictor
        let pred = newton.direction(&base, &x, &zinv, &p_res, &r_dual, &re);
        let (Some(ap), Some(ad)) = (step_length(&x, &pred.dx), step_length(&z, &pred.dz)) else {
            message = "step length computation failed".into();
            break;
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut gap_pred = 0.0;
        for b in 0..nb {
            let mut xt = x[b].clone();
            xt.axpy(ap, &pred.dx[b]);
            let mut zt = z[b].clone();
            zt.axpy(ad, &pred.dz[b]);
            gap_pred += xt.dot(&zt);
        }
        let sigma = (gap_pred / gap).clamp(0.0, 1.0).powi(3).max(1e-6).min(1.0);
        let target = sigma * mu;

        // corrector
        let corr: Vec<Mats> = (0..nb)
            .map(|b| match (&base[b], &zinv[b], &pred.dx[b], &pred.dz[b]) {
                (Mats::Dense(bm), Mats::Dense(zi), Mats::Dense(dx), Mats::Dense(dz)) => {
                    let r = bm + zi * target - dx * dz * zi;
                    Mats::Dense(r)
                }
                (Mats::Diag(bd), Mats::Diag(zi), Mats::Diag(dx), Mats::Diag(dz)) => Mats::Diag(
                    (0..bd.len())
                        .map(|l| bd[l] + target * zi[l] - dx[l] * dz[l] * zi[l])
                        .collect(),
                ),
                _ => unreachable!("block kinds always agree"),
            })
            .collect();
        let dir = newton.direction(&corr, &x, &zinv, &p_res, &r_dual, &re);
        let (Some(ap), Some(ad)) = (step_length(&x, &dir.dx), step_length(&z, &dir.dz)) else {
            message = "step length computation failed".into();
            break;
        };
        let gamma = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        if ap < 1e-10 && ad < 1e-10 {
            stall += 1;
            if stall > 3 {
                message = "step lengths collapsed".into();
                break;
            }
        } else {
            stall = 0;
        }
        for b in 0..nb {
            x[b].axpy(ap, &dir.dx[b]);
            z[b].axpy(ad, &dir.dz[b]);
        }
        for (wi, d) in w.iter_mut().zip(&dir.dw) {
            *wi += ap * d;
        }
        for (yi, d) in y.iter_mut().zip(&dir.dy) {
            *yi += ad * d;
        }
    }

    let mut sol = match best {
        Some(sol) => sol,
        None => {
            // report the last iterate with an error status
            let fy = st.combine(&y);
            let mut fx = vec![0.0; m];
            st.inner(&x, &mut fx);
            let r_dual: Vec<f64> = c.iter().zip(&fx).map(|(c, f)| c - f).collect();
            let pobj: f64 = c.iter().zip(&y).map(|(c, y)| c * y).sum();
            let dobj: f64 = (0..nb).map(|b| st.f0[b].dot(&x[b])).sum::<f64>()
                + eq.rhs.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>();
            drop(fy);
            Solution {
                status: SolveStatus::SolverError,
                y: y.clone(),
                x: x.iter().map(Mats::to_value).collect(),
                z: z.iter().map(Mats::to_value).collect(),
                w: vec![0.0; inst.equalities.len()],
                primal_objective: user(pobj),
                dual_objective: user(dobj),
                dual_residual: r_dual,
                primal_infeasibility: f64::NAN,
                dual_infeasibility: f64::NAN,
                relative_gap: f64::NAN,
                iterations,
                seconds: start.elapsed().as_secs_f64(),
                message: message.clone(),
            }
        }
    };
    if sol.status == SolveStatus::NearOptimal && status == SolveStatus::SolverError {
        sol.message = format!("{} ({})", sol.message, message);
    }
    sol.seconds = start.elapsed().as_secs_f64();
    if opts.verbosity >= 1 {
        eprintln!(
            "sdp: {:?} after {} iterations, primal {:.10e} dual {:.10e} ({:.2}s) {}",
            sol.status, sol.iterations, sol.primal_objective, sol.dual_objective, sol.seconds, sol.message
        );
    }
    Ok(sol)
}

fn trivial_infeasible(inst: &SdpInstance, start: Instant, msg: &str) -> Solution {
    Solution {
        status: SolveStatus::Infeasible,
        y: vec![0.0; inst.num_vars],
        x: Vec::new(),
        z: Vec::new(),
        w: vec![0.0; inst.equalities.len()],
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        dual_residual: vec![0.0; inst.num_vars],
        primal_infeasibility: f64::NAN,
        dual_infeasibility: f64::NAN,
        relative_gap: f64::NAN,
        iterations: 0,
        seconds: start.elapsed().as_secs_f64(),
        message: msg.to_string(),
    }
}
