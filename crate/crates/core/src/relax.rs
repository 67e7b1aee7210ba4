//! Moment-matrix relaxations of [`NpoProblem`]s and their translation into
//! block-diagonal SDPs.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use dibound_sdp::{solve, Block, SdpInstance, Sense, Solution, SolveOptions, SolveStatus};

use crate::algebra::{Alphabet, Pattern, Poly, Word};
use crate::error::{Error, Result};
use crate::npo::{self, LinearConstraint, NpoProblem};
use crate::scenario::{BellFunctional, ConstraintSense};

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxOptions {
    pub level: usize,
    pub extras: Vec<Pattern>,
    /// Identify the moments of `w` and `adjoint(w)` (real moment matrix).
    /// When false the Hermitian matrix is embedded as a real one of twice
    /// the size.
    pub real: bool,
    /// Add basis words until every objective and constraint word appears
    /// in the matrix; otherwise report the first missing word.
    pub complete: bool,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            level: 2,
            extras: Vec::new(),
            real: true,
            complete: true,
        }
    }
}

impl RelaxOptions {
    pub fn level(level: usize) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }

    pub fn with_extras(mut self, patterns: &[&str]) -> Result<Self> {
        for p in patterns {
            self.extras.push(Pattern::parse(p)?);
        }
        Ok(self)
    }
}

/// Sparse row `sum coeffs (relation) rhs` over moment ids.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Matrix entry: moment id and whether the entry word is the adjoint of
/// the id's representative (relevant only in Hermitian mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntryRef {
    pub id: usize,
    pub adjoint: bool,
}

#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub basis: Vec<Word>,
    /// Representative word per moment id; id 0 is the identity.
    pub moments: Vec<Word>,
    /// Whether the representative equals its own adjoint.
    pub self_adjoint: Vec<bool>,
    index: HashMap<Word, usize>,
    /// Row-major `basis x basis`; `None` where the entry word is zero.
    pub matrix: Vec<Option<EntryRef>>,
    pub equalities: Vec<MomentRow>,
    /// Rows `sum coeffs >= rhs`.
    pub inequalities: Vec<MomentRow>,
    pub objective: Vec<(usize, f64)>,
    pub offset: f64,
    pub sense: Sense,
    pub real: bool,
    /// Basis words added to make objective and constraints expressible.
    pub completions: Vec<Word>,
}

impl MomentProblem {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn num_moments(&self) -> usize {
        self.moments.len()
    }

    pub fn id_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Number of SDP variables for this problem.
    pub fn num_vars(&self) -> usize {
        if self.real {
            self.moments.len()
        } else {
            self.moments.len() + self.self_adjoint.iter().filter(|s| !**s).count()
        }
    }
}

fn entry_words(alphabet: &Alphabet, basis: &[Word]) -> Vec<Option<Word>> {
    let n = basis.len();
    let mut out = Vec::with_capacity(n * n);
    for u in basis {
        for v in basis {
            out.push(alphabet.entry(u, v));
        }
    }
    out
}

fn needed_words(problem: &NpoProblem) -> BTreeSet<Word> {
    let mut words = BTreeSet::new();
    let polys = std::iter::once(&problem.objective).chain(problem.constraints.iter().map(|c| &c.poly));
    for p in polys {
        for (w, _) in p.terms() {
            words.insert(problem.alphabet.symmetric_representative(w));
        }
    }
    words
}

/// Smallest basis extension that makes `w` appear as `adjoint(b_i) b_j`.
fn completion_for(alphabet: &Alphabet, basis: &BTreeSet<Word>, w: &Word) -> Vec<Word> {
    let mut best: Option<Word> = None;
    let targets = [w.clone(), alphabet.adjoint(w)];
    for t in &targets {
        let letters = t.letters();
        for k in 0..=letters.len() {
            let u = alphabet.canonicalize(&letters[..k]).ok().flatten();
            let v = alphabet.canonicalize(&letters[k..]).ok().flatten();
            let (Some(u), Some(v)) = (u, v) else { continue };
            let left = alphabet.adjoint(&u);
            let candidate = match (basis.contains(&left), basis.contains(&v)) {
                (true, false) => v,
                (false, true) => left,
                _ => continue,
            };
            if best.as_ref().is_none_or(|b| candidate < *b) {
                best = Some(candidate);
            }
        }
    }
    if let Some(b) = best {
        return vec![b];
    }
    // neither half of any split is present: add both halves of the middle split
    let letters = w.letters();
    let k = letters.len() / 2;
    let u = alphabet.canonicalize(&letters[..k]).ok().flatten().expect("prefix of a word");
    let v = alphabet.canonicalize(&letters[k..]).ok().flatten().expect("suffix of a word");
    vec![alphabet.adjoint(&u), v]
}

fn translate_poly(
    p: &Poly,
    alphabet: &Alphabet,
    index: &HashMap<Word, usize>,
) -> std::result::Result<(Vec<(usize, f64)>, f64), Word> {
    let mut coeffs: std::collections::BTreeMap<usize, f64> = Default::default();
    let mut constant = 0.0;
    for (w, c) in p.terms() {
        if w.is_identity() {
            constant += c;
            continue;
        }
        let rep = alphabet.symmetric_representative(w);
        let Some(&id) = index.get(&rep) else {
            return Err(w.clone());
        };
        *coeffs.entry(id).or_insert(0.0) += c;
    }
    Ok((coeffs.into_iter().filter(|(_, c)| *c != 0.0).collect(), constant))
}

/// Builds the level-`level` moment matrix (plus extra patterns and
/// completions) and maps objective and constraints onto moment ids.
pub fn moment_matrix(problem: &NpoProblem, opts: &RelaxOptions) -> Result<MomentProblem> {
    if opts.level == 0 {
        return Err(Error::InvalidArgument("relaxation level must be at least 1".into()));
    }
    let alphabet = &problem.alphabet;
    let mut basis = alphabet.basis(opts.level, &opts.extras);
    let needed = needed_words(problem);
    let mut completions = Vec::new();
    let mut entries;
    loop {
        entries = entry_words(alphabet, &basis);
        let present: BTreeSet<Word> = entries
            .iter()
            .flatten()
            .map(|w| alphabet.symmetric_representative(w))
            .collect();
        let Some(missing) = needed.iter().find(|w| !present.contains(*w)) else {
            break;
        };
        if !opts.complete {
            return Err(Error::MissingWord(missing.clone()));
        }
        let in_basis: BTreeSet<Word> = basis.iter().cloned().collect();
        for w in completion_for(alphabet, &in_basis, missing) {
            if !in_basis.contains(&w) {
                completions.push(w.clone());
                basis.push(w);
            }
        }
    }

    // moment ids in order of first appearance in the upper triangle
    let n = basis.len();
    let mut index: HashMap<Word, usize> = HashMap::new();
    let mut moments = vec![Word::identity()];
    let mut self_adjoint = vec![true];
    index.insert(Word::identity(), 0);
    let mut matrix = vec![None; n * n];
    for i in 0..n {
        for j in i..n {
            let Some(w) = &entries[i * n + j] else { continue };
            let rep = alphabet.symmetric_representative(w);
            let id = *index.entry(rep.clone()).or_insert_with(|| {
                moments.push(rep.clone());
                self_adjoint.push(alphabet.adjoint(&rep) == rep);
                moments.len() - 1
            });
            let upper = EntryRef { id, adjoint: *w != rep };
            matrix[i * n + j] = Some(upper);
            // entry (j, i) is the adjoint word
            matrix[j * n + i] = Some(EntryRef {
                id,
                adjoint: !upper.adjoint && !self_adjoint[id],
            });
        }
    }
    if matrix[0] != Some(EntryRef { id: 0, adjoint: false }) {
        return Err(Error::InvalidArgument("basis must start with the identity".into()));
    }

    let mut equalities = vec![MomentRow {
        coeffs: vec![(0, 1.0)],
        rhs: 1.0,
    }];
    let mut inequalities = Vec::new();
    for LinearConstraint { poly, sense, bound } in &problem.constraints {
        let (coeffs, constant) = translate_poly(poly, alphabet, &index).map_err(Error::MissingWord)?;
        let rhs = bound - constant;
        if coeffs.is_empty() {
            let ok = match sense {
                ConstraintSense::Eq => rhs.abs() <= 1e-12,
                ConstraintSense::Ge => rhs <= 1e-12,
                ConstraintSense::Le => rhs >= -1e-12,
            };
            if ok {
                continue;
            }
            // a constant row that fails is kept so the solver reports infeasibility
        }
        match sense {
            ConstraintSense::Eq => equalities.push(MomentRow { coeffs, rhs }),
            ConstraintSense::Ge => inequalities.push(MomentRow { coeffs, rhs }),
            ConstraintSense::Le => inequalities.push(MomentRow {
                coeffs: coeffs.into_iter().map(|(i, c)| (i, -c)).collect(),
                rhs: -rhs,
            }),
        }
    }
    let (objective, constant) = translate_poly(&problem.objective, alphabet, &index).map_err(Error::MissingWord)?;
    Ok(MomentProblem {
        basis,
        moments,
        self_adjoint,
        index,
        matrix,
        equalities,
        inequalities,
        objective,
        offset: problem.offset + constant,
        sense: problem.sense,
        real: opts.real,
        completions,
    })
}

/// SDP variables: moment ids first (real parts); in Hermitian mode the
/// imaginary parts of non-self-adjoint moments follow.
pub fn to_sdp(mp: &MomentProblem) -> SdpInstance {
    let n = mp.size();
    let mut im_var = vec![usize::MAX; mp.moments.len()];
    let mut nvars = mp.moments.len();
    if !mp.real {
        for (id, sa) in mp.self_adjoint.iter().enumerate() {
            if !sa {
                im_var[id] = nvars;
                nvars += 1;
            }
        }
    }
    let mut blocks = vec![Block::psd(if mp.real { n } else { 2 * n })];
    if !mp.inequalities.is_empty() {
        blocks.push(Block::diagonal(mp.inequalities.len()));
    }
    let mut inst = SdpInstance::new(nvars, blocks, mp.sense);
    for i in 0..n {
        for j in i..n {
            let Some(e) = mp.matrix[i * n + j] else { continue };
            inst.push_entry(e.id + 1, 0, i, j, 1.0);
            if !mp.real {
                inst.push_entry(e.id + 1, 0, n + i, n + j, 1.0);
            }
        }
    }
    if !mp.real {
        // off-diagonal block holds -Im(Gamma); Gamma_ij = re + i s im with s = -1 on adjoint entries
        for i in 0..n {
            for j in 0..n {
                let Some(e) = mp.matrix[i * n + j] else { continue };
                if mp.self_adjoint[e.id] {
                    continue;
                }
                let s = if e.adjoint { -1.0 } else { 1.0 };
                inst.push_entry(im_var[e.id] + 1, 0, i, n + j, -s);
            }
        }
    }
    for (r, row) in mp.inequalities.iter().enumerate() {
        for &(id, c) in &row.coeffs {
            inst.push_entry(id + 1, 1, r, r, c);
        }
        if row.rhs != 0.0 {
            inst.push_entry(0, 1, r, r, row.rhs);
        }
    }
    for row in &mp.equalities {
        inst.push_equality(row.coeffs.clone(), row.rhs);
    }
    for &(id, c) in &mp.objective {
        inst.objective[id] += c;
    }
    inst.offset = mp.offset;
    inst
}

/// Moment values (real parts, indexed by moment id) from SDP variables.
pub fn extract_moments(mp: &MomentProblem, y: &[f64]) -> Vec<f64> {
    y[..mp.moments.len()].to_vec()
}

/// Outcome of solving one relaxation.
#[derive(Debug, Clone)]
pub struct RelaxedSolution {
    pub status: SolveStatus,
    /// Certified side of the optimum: a lower bound for minimization, an
    /// upper bound for maximization (up to solver tolerance).
    pub bound: f64,
    pub primal: f64,
    pub matrix_size: usize,
    pub seconds: f64,
    pub message: String,
    pub solution: Solution,
}

/// Builds, relaxes and solves `problem`.
pub fn solve_relaxation(problem: &NpoProblem, relax: &RelaxOptions, opts: &SolveOptions) -> Result<RelaxedSolution> {
    let start = Instant::now();
    let mp = moment_matrix(problem, relax)?;
    let inst = to_sdp(&mp);
    let sol = solve(&inst, opts)?;
    // moments of projector words lie in [-1, 1]
    let bound = sol.certified_bound(mp.sense, 1.0);
    Ok(RelaxedSolution {
        status: sol.status,
        bound,
        primal: sol.primal_objective,
        matrix_size: mp.size(),
        seconds: start.elapsed().as_secs_f64(),
        message: sol.message.clone(),
        solution: sol,
    })
}

/// Upper bound on the quantum value of a Bell functional.
pub fn max_bell(functional: &BellFunctional, relax: &RelaxOptions, opts: &SolveOptions) -> Result<f64> {
    let problem = npo::bell_maximization(functional);
    let sol = solve_relaxation(&problem, relax, opts)?;
    if !sol.status.has_value() {
        return Err(Error::NumericFailure {
            message: format!("Bell maximization ended with {:?}: {}", sol.status, sol.message),
            estimate: f64::NAN,
        });
    }
    Ok(sol.bound)
}
