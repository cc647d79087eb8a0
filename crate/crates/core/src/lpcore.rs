//! Exact rational LP feasibility via a two-phase simplex.
//!
//! Infeasible models come back with a Farkas certificate; feasible models with
//! an exact point. Both can be re-checked with [`check_point`] and
//! [`verify_certificate`] without trusting the solver.
//!
//! A floating-point solve runs first. Its vertex is rebuilt in exact
//! arithmetic from the tight rows, or its dual ray is turned into an exact
//! certificate on the supporting rows; either answer is re-checked exactly.
//! When that fails the exact sparse tableau solves the model from scratch.

use microlp::{ComparisonOp, Error as FloatError, OptimizationDirection, Problem};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt::Write as _;
use thiserror::Error;

pub type Q = BigRational;

pub const DEFAULT_MAX_NONZEROS: usize = 200_000;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Le => "<=",
            Cmp::Ge => ">=",
            Cmp::Eq => "=",
        }
    }

    fn holds(self, lhs: &Q, rhs: &Q) -> bool {
        match self {
            Cmp::Le => lhs <= rhs,
            Cmp::Ge => lhs >= rhs,
            Cmp::Eq => lhs == rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Constraint {
    /// Sorted by variable, no zero coefficients, no repeats.
    pub terms: Vec<(usize, Q)>,
    pub cmp: Cmp,
    pub rhs: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub lower: Q,
    pub upper: Option<Q>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LpModel {
    vars: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Option<Vec<(usize, Q)>>,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: Q, upper: Option<Q>) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.vars.len() - 1
    }

    /// Adds `Σ coef·x cmp rhs`; repeated variables are merged and zeros dropped.
    pub fn add_constraint(&mut self, terms: Vec<(usize, Q)>, cmp: Cmp, rhs: Q) -> usize {
        let terms = normalize_terms(terms);
        for &(v, _) in &terms {
            assert!(
                v < self.vars.len(),
                "constraint references unknown variable {v}"
            );
        }
        self.constraints.push(Constraint { terms, cmp, rhs });
        self.constraints.len() - 1
    }

    /// Objective to minimize; feasibility mode when never set.
    pub fn set_objective(&mut self, terms: Vec<(usize, Q)>) {
        self.objective = Some(normalize_terms(terms));
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn nonzeros(&self) -> usize {
        self.constraints.iter().map(|c| c.terms.len()).sum()
    }

    /// Plain-text dump.
    ///
    /// ```text
    /// min: <terms>                 (only when an objective is set)
    /// c<k>: <terms> <op> <p/q>     (op is <=, >= or =)
    /// <p/q> <= <name> [<= <p/q>]   (one bounds line per variable)
    /// ```
    /// `<terms>` is `<p/q> <name>` items joined by ` + `, or `0` when empty.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(obj) = &self.objective {
            let _ = writeln!(out, "min: {}", self.terms_text(obj));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let _ = writeln!(
                out,
                "c{k}: {} {} {}",
                self.terms_text(&c.terms),
                c.cmp.symbol(),
                ratio_text(&c.rhs)
            );
        }
        for v in &self.vars {
            match &v.upper {
                Some(u) => {
                    let _ = writeln!(
                        out,
                        "{} <= {} <= {}",
                        ratio_text(&v.lower),
                        v.name,
                        ratio_text(u)
                    );
                }
                None => {
                    let _ = writeln!(out, "{} <= {}", ratio_text(&v.lower), v.name);
                }
            }
        }
        out
    }

    fn terms_text(&self, terms: &[(usize, Q)]) -> String {
        if terms.is_empty() {
            return "0".to_string();
        }
        terms
            .iter()
            .map(|(v, c)| format!("{} {}", ratio_text(c), self.vars[*v].name))
            .collect::<Vec<_>>()
            .join(" + ")
    }
}

/// `p/q` with `q ≥ 1` always written, so the text is bit-exact.
pub fn ratio_text(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

fn normalize_terms(mut terms: Vec<(usize, Q)>) -> Vec<(usize, Q)> {
    terms.sort_by_key(|(v, _)| *v);
    let mut out: Vec<(usize, Q)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match out.last_mut() {
            Some((lv, lc)) if *lv == v => *lc += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|(_, c)| !c.is_zero());
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("model has {nonzeros} nonzeros, cap is {cap}")]
    TooLarge { nonzeros: usize, cap: usize },
    #[error("variable {0} has an upper bound below its lower bound")]
    EmptyBounds(usize),
}

/// Nonnegative combination of the constraints and bounds deriving `0 ≥ c` with `c > 0`.
///
/// `rows[k]` multiplies constraint `k`: it is `≥ 0` for `≥` rows, `≤ 0` for `≤`
/// rows and free for `=` rows, so `rows[k]·(aₖx) ≥ rows[k]·bₖ` always holds.
/// `lower[i]` and `upper[i]` (both `≥ 0`) multiply `xᵢ ≥ lᵢ` and `−xᵢ ≥ −uᵢ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FarkasCertificate {
    pub rows: Vec<Q>,
    pub lower: Vec<Q>,
    pub upper: Vec<Q>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpOutcome {
    Feasible(Vec<Q>),
    Infeasible(FarkasCertificate),
    /// Feasible but the objective is unbounded below; carries a feasible point.
    Unbounded(Vec<Q>),
}

impl LpOutcome {
    pub fn point(&self) -> Option<&[Q]> {
        match self {
            LpOutcome::Feasible(x) | LpOutcome::Unbounded(x) => Some(x),
            LpOutcome::Infeasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.point().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub max_nonzeros: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_nonzeros: DEFAULT_MAX_NONZEROS,
        }
    }
}

pub fn solve_feasibility(model: &LpModel) -> Result<LpOutcome, LpError> {
    solve(model, &SolverConfig::default())
}

pub fn solve(model: &LpModel, config: &SolverConfig) -> Result<LpOutcome, LpError> {
    let nnz = model.nonzeros();
    if nnz > config.max_nonzeros {
        return Err(LpError::TooLarge {
            nonzeros: nnz,
            cap: config.max_nonzeros,
        });
    }
    for (i, v) in model.vars.iter().enumerate() {
        if matches!(&v.upper, Some(u) if *u < v.lower) {
            return Err(LpError::EmptyBounds(i));
        }
    }
    Ok(guided(model).unwrap_or_else(|| solve_exact(model)))
}

/// Exact check of a candidate point against bounds and constraints.
pub fn check_point(model: &LpModel, x: &[Q]) -> Result<(), PointViolation> {
    if x.len() != model.num_vars() {
        return Err(PointViolation::Dimension);
    }
    for (i, v) in model.vars.iter().enumerate() {
        if x[i] < v.lower || matches!(&v.upper, Some(u) if x[i] > *u) {
            return Err(PointViolation::Bound(i));
        }
    }
    for (k, c) in model.constraints.iter().enumerate() {
        let lhs: Q = c.terms.iter().map(|(v, a)| a * &x[*v]).sum();
        if !c.cmp.holds(&lhs, &c.rhs) {
            return Err(PointViolation::Constraint(k));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointViolation {
    Dimension,
    Bound(usize),
    Constraint(usize),
}

/// Independent check that `cert` proves `model` infeasible.
pub fn verify_certificate(model: &LpModel, cert: &FarkasCertificate) -> bool {
    let n = model.num_vars();
    if cert.rows.len() != model.num_constraints() || cert.lower.len() != n || cert.upper.len() != n
    {
        return false;
    }
    let mut coef = vec![Q::zero(); n];
    let mut constant = Q::zero();
    for (c, y) in model.constraints.iter().zip(&cert.rows) {
        let sign_ok = match c.cmp {
            Cmp::Ge => !y.is_negative(),
            Cmp::Le => !y.is_positive(),
            Cmp::Eq => true,
        };
        if !sign_ok {
            return false;
        }
        if y.is_zero() {
            continue;
        }
        for (v, a) in &c.terms {
            coef[*v] += y * a;
        }
        constant += y * &c.rhs;
    }
    for (i, v) in model.vars.iter().enumerate() {
        if cert.lower[i].is_negative() || cert.upper[i].is_negative() {
            return false;
        }
        coef[i] += &cert.lower[i];
        constant += &cert.lower[i] * &v.lower;
        if !cert.upper[i].is_zero() {
            match &v.upper {
                Some(u) => {
                    coef[i] -= &cert.upper[i];
                    constant -= &cert.upper[i] * u;
                }
                None => return false,
            }
        }
    }
    coef.iter().all(Zero::is_zero) && constant.is_positive()
}

type Row = Vec<(usize, Q)>;

const DEGENERATE_RUN_LIMIT: usize = 50;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Origin {
    Constraint(usize),
    Upper(usize),
}

/// Standard form `A x' + slacks + artificials = b`, `b ≥ 0`, everything `≥ 0`,
/// with `x = lower + x'`.
struct Tableau {
    n_struct: usize,
    n_cols: usize,
    rows: Vec<Row>,
    rhs: Vec<Q>,
    basis: Vec<usize>,
    origin: Vec<Origin>,
    /// `+1` when the stored row equals the source row, `−1` when it was negated.
    flipped: Vec<bool>,
    /// Column that formed the identity for each row at the start, with its cost.
    initial: Vec<(usize, bool)>,
    artificial: Vec<bool>,
    cost: Vec<Q>,
    value: Q,
}

impl Tableau {
    fn build(model: &LpModel) -> Tableau {
        let n = model.num_vars();
        let mut raw: Vec<(Row, Cmp, Q, Origin)> = Vec::new();
        for (k, c) in model.constraints.iter().enumerate() {
            let shift: Q = c.terms.iter().map(|(v, a)| a * &model.vars[*v].lower).sum();
            raw.push((
                c.terms.clone(),
                c.cmp,
                &c.rhs - shift,
                Origin::Constraint(k),
            ));
        }
        for (i, v) in model.vars.iter().enumerate() {
            if let Some(u) = &v.upper {
                raw.push((vec![(i, Q::one())], Cmp::Le, u - &v.lower, Origin::Upper(i)));
            }
        }

        let mut t = Tableau {
            n_struct: n,
            n_cols: n,
            rows: Vec::with_capacity(raw.len()),
            rhs: Vec::with_capacity(raw.len()),
            basis: Vec::with_capacity(raw.len()),
            origin: Vec::with_capacity(raw.len()),
            flipped: Vec::with_capacity(raw.len()),
            initial: Vec::with_capacity(raw.len()),
            artificial: vec![false; n],
            cost: Vec::new(),
            value: Q::zero(),
        };
        for (mut row, mut cmp, mut b, origin) in raw {
            // prefer a slack basis: `≥ 0` becomes `≤ 0`, negative right-hand sides flip
            let flip = b.is_negative() || (cmp == Cmp::Ge && b.is_zero());
            if flip {
                for (_, a) in row.iter_mut() {
                    *a = -a.clone();
                }
                b = -b;
                cmp = match cmp {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
            }
            let basic = match cmp {
                Cmp::Le => {
                    let s = t.new_col(false);
                    row.push((s, Q::one()));
                    (s, false)
                }
                Cmp::Ge => {
                    let s = t.new_col(false);
                    row.push((s, -Q::one()));
                    (t.new_col(true), true)
                }
                Cmp::Eq => (t.new_col(true), true),
            };
            if basic.1 {
                row.push((basic.0, Q::one()));
            }
            t.rows.push(row);
            t.rhs.push(b);
            t.basis.push(basic.0);
            t.origin.push(origin);
            t.flipped.push(flip);
            t.initial.push(basic);
        }
        t
    }

    fn new_col(&mut self, artificial: bool) -> usize {
        self.artificial.push(artificial);
        self.n_cols += 1;
        self.n_cols - 1
    }

    fn entry(row: &Row, col: usize) -> Option<&Q> {
        row.binary_search_by_key(&col, |(c, _)| *c)
            .ok()
            .map(|i| &row[i].1)
    }

    /// Phase-one objective `Σ artificials`; returns its optimum.
    fn run_phase_one(&mut self) -> Q {
        self.cost = vec![Q::zero(); self.n_cols];
        self.value = Q::zero();
        for c in 0..self.n_cols {
            if self.artificial[c] {
                self.cost[c] = Q::one();
            }
        }
        for r in 0..self.rows.len() {
            if self.artificial[self.basis[r]] {
                for (c, a) in &self.rows[r] {
                    self.cost[*c] -= a;
                }
                self.value += &self.rhs[r];
            }
        }
        if !self.value.is_zero() {
            let optimal = self.iterate(&vec![false; self.n_cols]);
            debug_assert!(optimal, "phase one is bounded below by zero");
        }
        self.value.clone()
    }

    /// Primal simplex on the current cost row; false when unbounded.
    ///
    /// Prices by the most negative reduced cost and switches to Bland's rule
    /// after a run of degenerate pivots, until the objective moves again.
    fn iterate(&mut self, banned: &[bool]) -> bool {
        let mut degenerate_run = 0usize;
        loop {
            let q = if degenerate_run >= DEGENERATE_RUN_LIMIT {
                (0..self.n_cols).find(|&c| !banned[c] && self.cost[c].is_negative())
            } else {
                let mut best: Option<usize> = None;
                for c in 0..self.n_cols {
                    if banned[c] || !self.cost[c].is_negative() {
                        continue;
                    }
                    if best.is_none_or(|b| self.cost[c] < self.cost[b]) {
                        best = Some(c);
                    }
                }
                best
            };
            let Some(q) = q else {
                return true;
            };
            let mut best: Option<(usize, Q)> = None;
            for r in 0..self.rows.len() {
                let Some(a) = Self::entry(&self.rows[r], q) else {
                    continue;
                };
                if !a.is_positive() {
                    continue;
                }
                let ratio = &self.rhs[r] / a;
                let better = match &best {
                    None => true,
                    Some((br, bq)) => {
                        ratio < *bq || (ratio == *bq && self.basis[r] < self.basis[*br])
                    }
                };
                if better {
                    best = Some((r, ratio));
                }
            }
            let Some((p, ratio)) = best else {
                return false;
            };
            if ratio.is_zero() {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(p, q);
        }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let a = Self::entry(&self.rows[p], q)
            .expect("pivot on a structural nonzero")
            .clone();
        if !a.is_one() {
            let inv = a.recip();
            for (_, v) in self.rows[p].iter_mut() {
                *v *= &inv;
            }
            self.rhs[p] *= &inv;
        }
        let prow = std::mem::take(&mut self.rows[p]);
        for r in 0..self.rows.len() {
            if r == p {
                continue;
            }
            let Some(f) = Self::entry(&self.rows[r], q).cloned() else {
                continue;
            };
            let updated = axpy(&self.rows[r], &f, &prow);
            self.rows[r] = updated;
            let delta = &f * &self.rhs[p];
            self.rhs[r] -= delta;
        }
        let d = self.cost[q].clone();
        if !d.is_zero() {
            for (c, v) in &prow {
                self.cost[*c] -= &d * v;
            }
            self.value += &d * &self.rhs[p];
        }
        self.rows[p] = prow;
        self.basis[p] = q;
    }

    /// Dual values of the phase-one optimum, mapped onto the source rows.
    fn certificate(&self, model: &LpModel) -> FarkasCertificate {
        let n = model.num_vars();
        let mut cert = FarkasCertificate {
            rows: vec![Q::zero(); model.num_constraints()],
            lower: vec![Q::zero(); n],
            upper: vec![Q::zero(); n],
        };
        let mut combined = vec![Q::zero(); n];
        for r in 0..self.rows.len() {
            let (col, art) = self.initial[r];
            let c = if art { Q::one() } else { Q::zero() };
            let mut pi = c - &self.cost[col];
            if pi.is_zero() {
                continue;
            }
            if self.flipped[r] {
                pi = -pi;
            }
            match self.origin[r] {
                Origin::Constraint(k) => {
                    for (v, a) in &model.constraints[k].terms {
                        combined[*v] += &pi * a;
                    }
                    cert.rows[k] = pi;
                }
                Origin::Upper(i) => {
                    // an upper bound row is `xᵢ ≤ uᵢ`, so its multiplier is ≤ 0
                    combined[i] += &pi;
                    cert.upper[i] = -pi;
                }
            }
        }
        for i in 0..n {
            cert.lower[i] = -combined[i].clone();
        }
        cert
    }

    /// Pivots zero-valued artificials out of the basis; rows that only
    /// contain artificials are redundant and are dropped.
    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.artificial[self.basis[r]] {
                let col = self.rows[r]
                    .iter()
                    .find(|(c, _)| !self.artificial[*c])
                    .map(|(c, _)| *c);
                match col {
                    Some(c) => self.pivot(r, c),
                    None => {
                        self.rows.remove(r);
                        self.rhs.remove(r);
                        self.basis.remove(r);
                        self.origin.remove(r);
                        self.flipped.remove(r);
                        self.initial.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    fn run_phase_two(&mut self, objective: &[(usize, Q)]) -> bool {
        self.cost = vec![Q::zero(); self.n_cols];
        for (v, c) in objective {
            self.cost[*v] = c.clone();
        }
        self.value = Q::zero();
        for r in 0..self.rows.len() {
            let cb = self.cost[self.basis[r]].clone();
            if cb.is_zero() {
                continue;
            }
            for (c, a) in &self.rows[r] {
                self.cost[*c] -= &cb * a;
            }
            self.value += &cb * &self.rhs[r];
        }
        let banned = self.artificial.clone();
        self.iterate(&banned)
    }

    fn point(&self, model: &LpModel) -> Vec<Q> {
        let mut x: Vec<Q> = model.vars.iter().map(|v| v.lower.clone()).collect();
        for (r, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] += &self.rhs[r];
            }
        }
        x
    }
}

/// `row − f·other` on sorted sparse rows.
fn axpy(row: &Row, f: &Q, other: &Row) -> Row {
    let mut out = Vec::with_capacity(row.len() + other.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < other.len() {
        let take_row = j >= other.len() || (i < row.len() && row[i].0 < other[j].0);
        let take_other = i >= row.len() || (j < other.len() && other[j].0 < row[i].0);
        if take_row {
            out.push(row[i].clone());
            i += 1;
        } else if take_other {
            out.push((other[j].0, -(f * &other[j].1)));
            j += 1;
        } else {
            let v = &row[i].1 - f * &other[j].1;
            if !v.is_zero() {
                out.push((row[i].0, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Values below this count as zero when reading the floating-point guide.
const GUIDE_TOLERANCE: f64 = 1e-9;

enum Guide {
    Point(Vec<f64>),
    Infeasible,
}

fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

fn float_cmp(cmp: Cmp) -> ComparisonOp {
    match cmp {
        Cmp::Le => ComparisonOp::Le,
        Cmp::Ge => ComparisonOp::Ge,
        Cmp::Eq => ComparisonOp::Eq,
    }
}

/// Floating-point solve of the same model; `None` when it is unbounded or fails.
fn float_guide(model: &LpModel) -> Option<Guide> {
    let mut costs = vec![0.0; model.num_vars()];
    for (v, c) in model.objective.iter().flatten() {
        costs[*v] = to_f64(c);
    }
    let mut p = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = model
        .vars
        .iter()
        .zip(&costs)
        .map(|(v, &c)| {
            let hi = v.upper.as_ref().map_or(f64::INFINITY, to_f64);
            p.add_var(c, (to_f64(&v.lower), hi))
        })
        .collect();
    for c in &model.constraints {
        let terms: Vec<_> = c.terms.iter().map(|(v, a)| (vars[*v], to_f64(a))).collect();
        p.add_constraint(terms.as_slice(), float_cmp(c.cmp), to_f64(&c.rhs));
    }
    match p.solve() {
        Ok(out) => {
            let sol = out.solution()?;
            Some(Guide::Point(
                vars.iter().map(|&v| sol.var_value(v)).collect(),
            ))
        }
        Err(FloatError::Infeasible) => Some(Guide::Infeasible),
        Err(_) => None,
    }
}

/// The Farkas system of `model`: maximize Σ πₖbₖ + Σ λᵢlᵢ − Σ μᵢuᵢ subject to
/// Σ πₖaₖ + λ − μ = 0 with |πₖ| ≤ 1, written as a minimization. Columns are
/// the π block followed by one λ and, for bounded variables, one μ each.
fn farkas_model(model: &LpModel) -> LpModel {
    let mut dual = LpModel::new();
    let mut columns: Vec<Vec<(usize, Q)>> = vec![Vec::new(); model.num_vars()];
    let mut objective = Vec::new();
    for (k, c) in model.constraints.iter().enumerate() {
        let (lo, hi) = match c.cmp {
            Cmp::Ge => (q(0), q(1)),
            Cmp::Le => (q(-1), q(0)),
            Cmp::Eq => (q(-1), q(1)),
        };
        let pi = dual.add_var(format!("pi{k}"), lo, Some(hi));
        for (v, a) in &c.terms {
            columns[*v].push((pi, a.clone()));
        }
        objective.push((pi, -c.rhs.clone()));
    }
    for (i, v) in model.vars.iter().enumerate() {
        let lambda = dual.add_var(format!("l{i}"), q(0), None);
        columns[i].push((lambda, q(1)));
        objective.push((lambda, -v.lower.clone()));
        if let Some(u) = &v.upper {
            let mu = dual.add_var(format!("u{i}"), q(0), None);
            columns[i].push((mu, q(-1)));
            objective.push((mu, u.clone()));
        }
    }
    for col in columns {
        dual.add_constraint(col, Cmp::Eq, q(0));
    }
    dual.set_objective(objective);
    dual
}

/// Certificate whose row multipliers are `pi`, with the bound multipliers
/// chosen to cancel the remaining coefficients.
fn certificate_from_rows(model: &LpModel, pi: Vec<Q>) -> Option<FarkasCertificate> {
    let n = model.num_vars();
    let mut coef = vec![Q::zero(); n];
    for (c, y) in model.constraints.iter().zip(&pi) {
        if !y.is_zero() {
            for (v, a) in &c.terms {
                coef[*v] += y * a;
            }
        }
    }
    let mut cert = FarkasCertificate {
        rows: pi,
        lower: vec![Q::zero(); n],
        upper: vec![Q::zero(); n],
    };
    for (i, c) in coef.into_iter().enumerate() {
        if c.is_negative() {
            cert.lower[i] = -c;
        } else if c.is_positive() {
            model.vars[i].upper.as_ref()?;
            cert.upper[i] = c;
        }
    }
    verify_certificate(model, &cert).then_some(cert)
}

/// Exact Farkas certificate rebuilt from a floating-point solve of the Farkas
/// system, falling back to an exact solve restricted to its supporting rows.
fn guided_certificate(model: &LpModel) -> Option<FarkasCertificate> {
    let dual = farkas_model(model);
    let Some(Guide::Point(x)) = float_guide(&dual) else {
        return None;
    };
    let rows = model.num_constraints();
    if let Some(p) = vertex_from_guide(&dual, &x) {
        if let Some(cert) = certificate_from_rows(model, p[..rows].to_vec()) {
            return Some(cert);
        }
    }
    let support: Vec<usize> = (0..rows)
        .filter(|&k| x[k].abs() > GUIDE_TOLERANCE)
        .collect();
    let sub = LpModel {
        vars: model.vars.clone(),
        constraints: support
            .iter()
            .map(|&k| model.constraints[k].clone())
            .collect(),
        objective: None,
    };
    let LpOutcome::Infeasible(part) = solve_exact(&sub) else {
        return None;
    };
    let mut cert = FarkasCertificate {
        rows: vec![Q::zero(); rows],
        lower: part.lower,
        upper: part.upper,
    };
    for (j, &k) in support.iter().enumerate() {
        cert.rows[k] = part.rows[j].clone();
    }
    verify_certificate(model, &cert).then_some(cert)
}

/// The model with every variable outside `keep` fixed at its lower bound and
/// removed, plus the map back to the original indices. `None` when a row left
/// without variables is violated.
fn restrict_to_face(model: &LpModel, keep: &[bool]) -> Option<(LpModel, Vec<usize>)> {
    let mut sub = LpModel::new();
    let mut index = vec![usize::MAX; model.num_vars()];
    let mut back = Vec::new();
    for (i, v) in model.vars.iter().enumerate() {
        if keep[i] {
            index[i] = sub.add_var(v.name.clone(), v.lower.clone(), v.upper.clone());
            back.push(i);
        }
    }
    for c in &model.constraints {
        let mut rhs = c.rhs.clone();
        let mut terms = Vec::new();
        for (v, a) in &c.terms {
            if keep[*v] {
                terms.push((index[*v], a.clone()));
            } else {
                rhs -= a * &model.vars[*v].lower;
            }
        }
        if terms.is_empty() {
            if !c.cmp.holds(&Q::zero(), &rhs) {
                return None;
            }
            continue;
        }
        sub.add_constraint(terms, c.cmp, rhs);
    }
    if let Some(obj) = &model.objective {
        let terms: Vec<_> = obj
            .iter()
            .filter(|(v, _)| keep[*v])
            .map(|(v, c)| (index[*v], c.clone()))
            .collect();
        sub.set_objective(terms);
    }
    Some((sub, back))
}

/// Rebuilds the guide's vertex exactly: variables at a bound stay there and
/// the remaining ones solve the tight rows by Gauss-Jordan elimination.
/// `None` unless the tight system pins every free variable and the result
/// passes [`check_point`].
fn vertex_from_guide(model: &LpModel, x: &[f64]) -> Option<Vec<Q>> {
    let n = model.num_vars();
    let mut value: Vec<Option<Q>> = vec![None; n];
    for (i, v) in model.vars.iter().enumerate() {
        if x[i] - to_f64(&v.lower) <= GUIDE_TOLERANCE {
            value[i] = Some(v.lower.clone());
        } else if let Some(u) = &v.upper {
            if to_f64(u) - x[i] <= GUIDE_TOLERANCE {
                value[i] = Some(u.clone());
            }
        }
    }
    let mut rows: Vec<Row> = Vec::new();
    let mut rhs: Vec<Q> = Vec::new();
    for c in &model.constraints {
        let b = to_f64(&c.rhs);
        let lhs: f64 = c.terms.iter().map(|(v, a)| to_f64(a) * x[*v]).sum();
        if c.cmp != Cmp::Eq && (lhs - b).abs() > GUIDE_TOLERANCE * (1.0 + b.abs()) {
            continue;
        }
        let mut r = c.rhs.clone();
        let mut row = Vec::new();
        for (v, a) in &c.terms {
            match &value[*v] {
                Some(val) => r -= a * val,
                None => row.push((*v, a.clone())),
            }
        }
        rows.push(row);
        rhs.push(r);
    }

    // forward elimination, always on the shortest remaining row
    let mut done = vec![false; rows.len()];
    let mut order: Vec<(usize, usize)> = Vec::new();
    let mut pivoted = vec![false; n];
    for _ in 0..rows.len() {
        let p = (0..rows.len())
            .filter(|&r| !done[r])
            .min_by_key(|&r| rows[r].len())?;
        done[p] = true;
        let Some(&(col, ref a)) = rows[p].first() else {
            if !rhs[p].is_zero() {
                return None;
            }
            continue;
        };
        let inv = a.recip();
        for (_, a) in rows[p].iter_mut() {
            *a *= &inv;
        }
        rhs[p] *= &inv;
        for r in 0..rows.len() {
            if done[r] {
                continue;
            }
            let Some(f) = Tableau::entry(&rows[r], col).cloned() else {
                continue;
            };
            rows[r] = axpy(&rows[r], &f, &rows[p]);
            let delta = &f * &rhs[p];
            rhs[r] -= delta;
        }
        pivoted[col] = true;
        order.push((p, col));
    }
    if (0..n).any(|i| value[i].is_none() && !pivoted[i]) {
        return None;
    }
    for &(p, col) in order.iter().rev() {
        let mut v = rhs[p].clone();
        for (c, a) in &rows[p] {
            if *c != col {
                v -= a * value[*c].as_ref().expect("later pivots are solved first");
            }
        }
        value[col] = Some(v);
    }
    let point: Vec<Q> = value
        .into_iter()
        .map(|v| v.expect("every column is set"))
        .collect();
    check_point(model, &point).ok()?;
    Some(point)
}

/// Exact answer reached through the floating-point guide, or `None` when the
/// guide's claim does not survive the exact check.
fn guided(model: &LpModel) -> Option<LpOutcome> {
    match float_guide(model)? {
        Guide::Point(x) => {
            if let Some(p) = vertex_from_guide(model, &x) {
                return Some(LpOutcome::Feasible(p));
            }
            let keep: Vec<bool> = model
                .vars
                .iter()
                .zip(&x)
                .map(|(v, &xi)| xi - to_f64(&v.lower) > GUIDE_TOLERANCE)
                .collect();
            let (sub, back) = restrict_to_face(model, &keep)?;
            let lift = |p: Vec<Q>| {
                let mut full: Vec<Q> = model.vars.iter().map(|v| v.lower.clone()).collect();
                for (j, v) in p.into_iter().enumerate() {
                    full[back[j]] = v;
                }
                full
            };
            match solve_exact(&sub) {
                LpOutcome::Feasible(p) => Some(LpOutcome::Feasible(lift(p))),
                LpOutcome::Unbounded(p) => Some(LpOutcome::Unbounded(lift(p))),
                LpOutcome::Infeasible(_) => None,
            }
        }
        Guide::Infeasible => guided_certificate(model).map(LpOutcome::Infeasible),
    }
}

fn solve_exact(model: &LpModel) -> LpOutcome {
    let mut t = Tableau::build(model);
    if t.run_phase_one().is_positive() {
        return LpOutcome::Infeasible(t.certificate(model));
    }
    if let Some(obj) = &model.objective {
        t.drive_out_artificials();
        if !t.run_phase_two(obj) {
            return LpOutcome::Unbounded(t.point(model));
        }
    }
    LpOutcome::Feasible(t.point(model))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nonneg(model: &mut LpModel, name: &str) -> usize {
        model.add_var(name, q(0), None)
    }

    #[test]
    fn contradictory_bounds_give_a_certificate() {
        let mut m = LpModel::new();
        let x = m.add_var("x", q(-5), None);
        m.add_constraint(vec![(x, q(1))], Cmp::Ge, q(1));
        m.add_constraint(vec![(x, q(1))], Cmp::Le, q(0));
        match solve_feasibility(&m).unwrap() {
            LpOutcome::Infeasible(cert) => {
                assert!(verify_certificate(&m, &cert));
                assert!(cert.rows[0].is_positive() && cert.rows[1].is_negative());
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn simplex_point_is_exact() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        let y = nonneg(&mut m, "y");
        m.add_constraint(vec![(x, q(1)), (y, q(1))], Cmp::Eq, q(1));
        let out = solve_feasibility(&m).unwrap();
        let p = out.point().unwrap();
        assert_eq!(check_point(&m, p), Ok(()));
        assert_eq!(&p[0] + &p[1], q(1));
    }

    #[test]
    fn bound_certificates() {
        // x ≤ 1/2 from the bound, 2x ≥ 3 from a row
        let mut m = LpModel::new();
        let x = m.add_var("x", q(0), Some(qr(1, 2)));
        m.add_constraint(vec![(x, q(2))], Cmp::Ge, q(3));
        let LpOutcome::Infeasible(cert) = solve_feasibility(&m).unwrap() else {
            panic!("infeasible expected");
        };
        assert!(verify_certificate(&m, &cert));
        assert!(cert.upper[0].is_positive());
    }

    #[test]
    fn tampered_certificates_fail() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        m.add_constraint(vec![(x, q(1))], Cmp::Le, q(-1));
        let LpOutcome::Infeasible(mut cert) = solve_feasibility(&m).unwrap() else {
            panic!("infeasible expected");
        };
        assert!(verify_certificate(&m, &cert));
        cert.rows[0] = -cert.rows[0].clone();
        assert!(!verify_certificate(&m, &cert));
    }

    #[test]
    fn objective_is_minimized() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        let y = nonneg(&mut m, "y");
        m.add_constraint(vec![(x, q(1)), (y, q(2))], Cmp::Ge, q(4));
        m.add_constraint(vec![(x, q(3)), (y, q(1))], Cmp::Ge, q(6));
        m.set_objective(vec![(x, q(1)), (y, q(1))]);
        let LpOutcome::Feasible(p) = solve_feasibility(&m).unwrap() else {
            panic!("feasible expected");
        };
        // vertex (8/5, 6/5)
        assert_eq!(p, vec![qr(8, 5), qr(6, 5)]);

        let mut u = LpModel::new();
        let x = nonneg(&mut u, "x");
        u.add_constraint(vec![(x, q(1))], Cmp::Ge, q(1));
        u.set_objective(vec![(x, q(-1))]);
        assert!(matches!(
            solve_feasibility(&u).unwrap(),
            LpOutcome::Unbounded(_)
        ));
    }

    #[test]
    fn redundant_equalities() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        let y = nonneg(&mut m, "y");
        m.add_constraint(vec![(x, q(1)), (y, q(1))], Cmp::Eq, q(2));
        m.add_constraint(vec![(x, q(2)), (y, q(2))], Cmp::Eq, q(4));
        m.add_constraint(vec![(x, q(1)), (y, q(-1))], Cmp::Eq, q(0));
        m.set_objective(vec![(y, q(1))]);
        let LpOutcome::Feasible(p) = solve_feasibility(&m).unwrap() else {
            panic!("feasible expected");
        };
        assert_eq!(p, vec![q(1), q(1)]);
    }

    #[test]
    fn resource_cap() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        for _ in 0..5 {
            m.add_constraint(vec![(x, q(1))], Cmp::Le, q(1));
        }
        let cfg = SolverConfig { max_nonzeros: 4 };
        assert_eq!(
            solve(&m, &cfg),
            Err(LpError::TooLarge {
                nonzeros: 5,
                cap: 4
            })
        );
    }

    #[test]
    fn dump_format() {
        let mut m = LpModel::new();
        let x = m.add_var("x", q(0), Some(q(1)));
        let y = nonneg(&mut m, "y");
        m.add_constraint(
            vec![(y, qr(-2, 4)), (x, q(1)), (x, q(1))],
            Cmp::Ge,
            qr(1, 3),
        );
        assert_eq!(
            m.dump(),
            "c0: 2/1 x + -1/2 y >= 1/3\n0/1 <= x <= 1/1\n0/1 <= y\n"
        );
    }

    /// Random small systems: every verdict comes with a certificate that checks.
    #[test]
    fn random_systems_are_certified_and_deterministic() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (mut feasible, mut infeasible) = (0, 0);
        for _ in 0..300 {
            let mut m = LpModel::new();
            let nv = rng.gen_range(1..5);
            for i in 0..nv {
                let lo = rng.gen_range(-2..2);
                let up = rng.gen_bool(0.3).then(|| q(lo + rng.gen_range(0..4)));
                m.add_var(format!("x{i}"), q(lo), up);
            }
            for _ in 0..rng.gen_range(1..6) {
                let mut terms = Vec::new();
                for v in 0..nv {
                    if rng.gen_bool(0.7) {
                        terms.push((v, qr(rng.gen_range(-3..4), rng.gen_range(1..3))));
                    }
                }
                let cmp = [Cmp::Le, Cmp::Ge, Cmp::Eq][rng.gen_range(0..3)];
                m.add_constraint(terms, cmp, q(rng.gen_range(-4..5)));
            }
            let out = solve_feasibility(&m).unwrap();
            assert_eq!(solve_feasibility(&m).unwrap(), out);
            // the floating-point guide never changes the verdict
            assert_eq!(solve_exact(&m).is_feasible(), out.is_feasible());
            match out {
                LpOutcome::Feasible(p) => {
                    assert_eq!(check_point(&m, &p), Ok(()));
                    feasible += 1;
                }
                LpOutcome::Infeasible(c) => {
                    assert!(verify_certificate(&m, &c), "{}", m.dump());
                    infeasible += 1;
                }
                LpOutcome::Unbounded(_) => unreachable!(),
            }
        }
        assert!(
            feasible > 30 && infeasible > 30,
            "{feasible} / {infeasible}"
        );
    }

    #[test]
    fn face_restriction_checks_emptied_rows() {
        let mut m = LpModel::new();
        let x = nonneg(&mut m, "x");
        let y = nonneg(&mut m, "y");
        m.add_constraint(vec![(x, q(1)), (y, q(1))], Cmp::Ge, q(1));
        m.add_constraint(vec![(y, q(1))], Cmp::Le, q(3));
        assert!(restrict_to_face(&m, &[false, false]).is_none());
        let (sub, back) = restrict_to_face(&m, &[false, true]).unwrap();
        assert_eq!(back, vec![1]);
        assert_eq!(sub.num_constraints(), 2);
        assert!(solve_exact(&sub).is_feasible());
    }
}
