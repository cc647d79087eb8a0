//! Sherali–Adams lifts of `K(T)`, conditioning, ownership queries and
//! moment-matrix checks.
//!
//! A level-`r` vector stores `y_S` for sets `S` of base variables `(j, t)` with
//! `|S| ≤ r + 1`. Sets that put one job on two slots, or put `j` no later than
//! a predecessor, are zero in every lifted solution and are never stored.
//!
//! Only the multipliers `x^U` (`|U| ≤ r`) are generated. For `K(T)` this is
//! the full level-`r` system: every job sum is lifted, so a factor `1 − x_{j,t}`
//! equals `Σ_{t′≠t} x_{j,t′}` and each product with a `(1 − x)` factor is a sum
//! of rows already present. [`HierarchyVector::check_lifted_constraints`]
//! evaluates the complete `(U, W)` family directly.

use crate::instance::{Instance, PartialSchedule};
use crate::lpcore::{self, Cmp, LpError, LpModel, LpOutcome, SolverConfig, Q};
use crate::relax::{build_k_with, KOptions};
use nalgebra::{DMatrix, SymmetricEigen};
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;
use thiserror::Error;

pub type Subset = Vec<u32>;

/// Limit on stored subsets per lift, checked before building the LP.
pub const MAX_SUBSETS: usize = 150_000;

pub const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LiftError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("lift would need more than {cap} subset variables")]
    TooManySubsets { cap: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("entry of size {size} requested, vector stores sets up to size {cap}")]
    Incomplete { size: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub job: usize,
    pub slot: usize,
}

#[derive(Debug, Clone)]
struct BaseRow {
    terms: Vec<(u32, Q)>,
    cmp: Cmp,
    rhs: Q,
}

/// Instance, horizon and the base rows of (window-pruned) `K(T)`.
#[derive(Debug)]
pub struct LiftContext {
    inst: Instance,
    horizon: usize,
    vars: Vec<Var>,
    index: HashMap<(usize, usize), u32>,
    job_vars: Vec<Vec<u32>>,
    rows: Vec<BaseRow>,
    base_level: usize,
    config: SolverConfig,
}

impl LiftContext {
    /// Base variables `x[j][t]` for `t ∈ 1..=horizon` inside the chain windows.
    /// `base_level` is the level used when a re-solve is needed.
    pub fn new(inst: &Instance, horizon: usize, base_level: usize) -> Arc<LiftContext> {
        Self::with_config(inst, horizon, base_level, SolverConfig::default())
    }

    pub fn with_config(
        inst: &Instance,
        horizon: usize,
        base_level: usize,
        config: SolverConfig,
    ) -> Arc<LiftContext> {
        let k = build_k_with(
            inst,
            horizon,
            &KOptions {
                prune_windows: true,
                aggregates: false,
                capacity: None,
            },
        );
        let mut vars = Vec::new();
        let mut index = HashMap::new();
        let mut job_vars = vec![Vec::new(); inst.n()];
        for (j, row) in k.cols.iter().enumerate() {
            for (t0, c) in row.iter().enumerate() {
                if let Some(c) = c {
                    // columns are created job by job, slot by slot
                    assert_eq!(*c, vars.len());
                    index.insert((j, t0 + 1), vars.len() as u32);
                    job_vars[j].push(vars.len() as u32);
                    vars.push(Var {
                        job: j,
                        slot: t0 + 1,
                    });
                }
            }
        }
        let rows = k
            .model
            .constraints()
            .iter()
            .map(|c| BaseRow {
                terms: c
                    .terms
                    .iter()
                    .map(|(v, a)| (*v as u32, a.clone()))
                    .collect(),
                cmp: c.cmp,
                rhs: c.rhs.clone(),
            })
            .collect();
        Arc::new(LiftContext {
            inst: inst.clone(),
            horizon,
            vars,
            index,
            job_vars,
            rows,
            base_level,
            config,
        })
    }

    pub fn instance(&self) -> &Instance {
        &self.inst
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn base_level(&self) -> usize {
        self.base_level
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn var(&self, v: u32) -> Var {
        self.vars[v as usize]
    }

    pub fn index_of(&self, job: usize, slot: usize) -> Option<u32> {
        self.index.get(&(job, slot)).copied()
    }

    pub fn job_vars(&self, job: usize) -> &[u32] {
        &self.job_vars[job]
    }

    pub fn compatible(&self, a: u32, b: u32) -> bool {
        if a == b {
            return true;
        }
        let (va, vb) = (self.vars[a as usize], self.vars[b as usize]);
        if va.job == vb.job {
            return false;
        }
        !(self.inst.precedes(va.job, vb.job) && vb.slot <= va.slot
            || self.inst.precedes(vb.job, va.job) && va.slot <= vb.slot)
    }

    /// Pairwise compatible, i.e. not forced to zero by the lifted rows.
    pub fn consistent(&self, s: &[u32]) -> bool {
        s.iter()
            .enumerate()
            .all(|(i, &a)| s[i + 1..].iter().all(|&b| self.compatible(a, b)))
    }

    fn format_subset(&self, s: &[u32]) -> String {
        let items: Vec<String> = s
            .iter()
            .map(|&v| {
                format!(
                    "({},{})",
                    self.vars[v as usize].job, self.vars[v as usize].slot
                )
            })
            .collect();
        format!("{{{}}}", items.join(","))
    }
}

fn union_with(s: &[u32], v: u32) -> Subset {
    match s.binary_search(&v) {
        Ok(_) => s.to_vec(),
        Err(pos) => {
            let mut out = Vec::with_capacity(s.len() + 1);
            out.extend_from_slice(&s[..pos]);
            out.push(v);
            out.extend_from_slice(&s[pos..]);
            out
        }
    }
}

fn union(a: &[u32], b: &[u32]) -> Subset {
    let mut out: Subset = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Variables pinned to 0 or 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Fixings {
    pub zero: BTreeSet<u32>,
    pub one: BTreeSet<u32>,
}

/// All consistent subsets of `active` with `1 ≤ |S| ≤ max_size`, in DFS order.
fn consistent_subsets(
    ctx: &LiftContext,
    active: &[u32],
    max_size: usize,
) -> Result<Vec<Subset>, LiftError> {
    fn go(
        ctx: &LiftContext,
        active: &[u32],
        from: usize,
        cur: &mut Subset,
        max_size: usize,
        out: &mut Vec<Subset>,
    ) -> Result<(), LiftError> {
        for i in from..active.len() {
            let v = active[i];
            if !cur.iter().all(|&u| ctx.compatible(u, v)) {
                continue;
            }
            cur.push(v);
            out.push(cur.clone());
            if out.len() > MAX_SUBSETS {
                return Err(LiftError::TooManySubsets { cap: MAX_SUBSETS });
            }
            if cur.len() < max_size {
                go(ctx, active, i + 1, cur, max_size, out)?;
            }
            cur.pop();
        }
        Ok(())
    }
    let mut out = Vec::new();
    if max_size > 0 {
        go(ctx, active, 0, &mut Vec::new(), max_size, &mut out)?;
    }
    Ok(out)
}

/// Solves the level-`r` lift with the given pins. `Ok(None)` when empty.
pub fn solve_lift(
    ctx: &Arc<LiftContext>,
    level: usize,
    fixings: &Fixings,
) -> Result<Option<HierarchyVector>, LiftError> {
    solve_lift_with_objective(ctx, level, fixings, |_| None)
}

/// Like [`solve_lift`], minimizing `Σ c_S y_S` where `objective(S)` gives `c_S`.
pub fn solve_lift_with_objective<F>(
    ctx: &Arc<LiftContext>,
    level: usize,
    fixings: &Fixings,
    objective: F,
) -> Result<Option<HierarchyVector>, LiftError>
where
    F: Fn(&[u32]) -> Option<Q>,
{
    let mut inactive: BTreeSet<u32> = fixings.zero.clone();
    for &v in &fixings.one {
        if fixings.zero.contains(&v) {
            return Ok(None);
        }
        let job = ctx.vars[v as usize].job;
        inactive.extend(ctx.job_vars[job].iter().filter(|&&u| u != v));
    }
    let active: Vec<u32> = (0..ctx.vars.len() as u32)
        .filter(|v| !inactive.contains(v))
        .collect();
    let is_active = |v: u32| !inactive.contains(&v);

    let subsets = consistent_subsets(ctx, &active, level + 1)?;
    let mut model = LpModel::new();
    let mut col: HashMap<Subset, usize> = HashMap::with_capacity(subsets.len());
    for s in &subsets {
        let c = model.add_var(ctx.format_subset(s), Q::zero(), None);
        col.insert(s.clone(), c);
    }

    let mut multipliers: Vec<Subset> = vec![Vec::new()];
    multipliers.extend(subsets.iter().filter(|s| s.len() <= level).cloned());
    let mut seen: HashSet<(Vec<(usize, Q)>, Cmp, Q)> = HashSet::new();
    for u in &multipliers {
        for row in &ctx.rows {
            let mut terms: Vec<(usize, Q)> = Vec::with_capacity(row.terms.len() + 1);
            for (i, a) in &row.terms {
                if !is_active(*i) || !u.iter().all(|&w| ctx.compatible(w, *i)) {
                    continue;
                }
                terms.push((col[&union_with(u, *i)], a.clone()));
            }
            let mut rhs = Q::zero();
            if u.is_empty() {
                rhs = row.rhs.clone();
            } else if !row.rhs.is_zero() {
                terms.push((col[u], -row.rhs.clone()));
            }
            terms.sort_by_key(|(c, _)| *c);
            let mut merged: Vec<(usize, Q)> = Vec::with_capacity(terms.len());
            for (c, a) in terms {
                match merged.last_mut() {
                    Some((lc, la)) if *lc == c => *la += a,
                    _ => merged.push((c, a)),
                }
            }
            merged.retain(|(_, a)| !a.is_zero());
            let trivial = match row.cmp {
                Cmp::Ge => !rhs.is_positive() && merged.iter().all(|(_, a)| !a.is_negative()),
                Cmp::Le => !rhs.is_negative() && merged.iter().all(|(_, a)| !a.is_positive()),
                Cmp::Eq => merged.is_empty() && rhs.is_zero(),
            };
            if trivial {
                continue;
            }
            let key = (merged, row.cmp, rhs);
            if seen.contains(&key) {
                continue;
            }
            model.add_constraint(key.0.clone(), key.1, key.2.clone());
            seen.insert(key);
        }
    }
    for &v in &fixings.one {
        // pinned variables with no sibling still need their marginal set
        if let Some(&c) = col.get(&vec![v]) {
            model.add_constraint(vec![(c, Q::one())], Cmp::Eq, Q::one());
        }
    }

    let costs: Vec<(usize, Q)> = col
        .iter()
        .filter_map(|(s, &c)| objective(s).map(|w| (c, w)))
        .collect();
    if !costs.is_empty() {
        model.set_objective(costs);
    }
    let point = match lpcore::solve(&model, &ctx.config)? {
        LpOutcome::Infeasible(_) => return Ok(None),
        LpOutcome::Feasible(p) | LpOutcome::Unbounded(p) => p,
    };
    let mut values = BTreeMap::new();
    values.insert(Vec::new(), Q::one());
    for (s, c) in &col {
        if !point[*c].is_zero() {
            values.insert(s.clone(), point[*c].clone());
        }
    }
    let mut zero = inactive;
    zero.extend(fixings.zero.iter().copied());
    Ok(Some(HierarchyVector::from_parts(
        ctx.clone(),
        level,
        level + 1,
        values,
        zero,
        fixings.one.clone(),
    )))
}

/// Subset-indexed moment vector. Absent subsets within the size cap are zero.
#[derive(Debug, Clone)]
pub struct HierarchyVector {
    ctx: Arc<LiftContext>,
    level: usize,
    size_cap: usize,
    values: BTreeMap<Subset, Q>,
    marginals: Vec<Q>,
    zero_set: BTreeSet<u32>,
    one_set: BTreeSet<u32>,
}

/// Result of conditioning with the re-solve fallback.
#[derive(Debug, Clone)]
pub enum Conditioned {
    /// Derived from the parent by the conditioning formula.
    Direct(HierarchyVector),
    /// Level exhausted; the base lift was re-solved with the event pinned.
    Resolved(HierarchyVector),
    /// The re-solve with the event pinned is infeasible.
    Failed,
}

impl HierarchyVector {
    fn from_parts(
        ctx: Arc<LiftContext>,
        level: usize,
        size_cap: usize,
        values: BTreeMap<Subset, Q>,
        zero_set: BTreeSet<u32>,
        one_set: BTreeSet<u32>,
    ) -> Self {
        let mut marginals = vec![Q::zero(); ctx.vars.len()];
        for (s, v) in values.range(vec![0u32]..) {
            if s.len() == 1 {
                marginals[s[0] as usize] = v.clone();
            }
        }
        HierarchyVector {
            ctx,
            level,
            size_cap,
            values,
            marginals,
            zero_set,
            one_set,
        }
    }

    /// The 0/1 vector of a complete schedule, storing sets up to `size_cap`.
    pub fn from_schedule(
        ctx: &Arc<LiftContext>,
        sched: &PartialSchedule,
        size_cap: usize,
    ) -> Result<Self, LiftError> {
        let mut ones = Vec::new();
        for j in 0..ctx.inst.n() {
            let t = sched
                .slot(j)
                .ok_or_else(|| LiftError::Precondition(format!("job {j} has no slot")))?;
            let v = ctx
                .index_of(j, t)
                .ok_or_else(|| LiftError::Precondition(format!("({j},{t}) outside the windows")))?;
            ones.push(v);
        }
        ones.sort_unstable();
        let mut values = BTreeMap::new();
        let mut stack: Vec<(usize, Subset)> = vec![(0, Vec::new())];
        while let Some((from, s)) = stack.pop() {
            if s.len() < size_cap {
                for i in from..ones.len() {
                    let mut t = s.clone();
                    t.push(ones[i]);
                    stack.push((i + 1, t));
                }
            }
            values.insert(s, Q::one());
        }
        let zero: BTreeSet<u32> = (0..ctx.vars.len() as u32)
            .filter(|v| ones.binary_search(v).is_err())
            .collect();
        let level = size_cap.saturating_sub(1);
        Ok(Self::from_parts(
            ctx.clone(),
            level,
            size_cap,
            values,
            zero,
            ones.into_iter().collect(),
        ))
    }

    /// `λ·a + (1 − λ)·b`, a point of any lift containing both.
    pub fn convex_combination(
        a: &HierarchyVector,
        b: &HierarchyVector,
        lambda: &Q,
    ) -> Result<HierarchyVector, LiftError> {
        if !Arc::ptr_eq(&a.ctx, &b.ctx) || a.size_cap != b.size_cap {
            return Err(LiftError::Precondition(
                "vectors come from different lifts".into(),
            ));
        }
        if lambda.is_negative() || *lambda > Q::one() {
            return Err(LiftError::Precondition(format!(
                "weight {lambda} outside [0,1]"
            )));
        }
        let mu = Q::one() - lambda;
        let mut values: BTreeMap<Subset, Q> = BTreeMap::new();
        for (s, y) in &a.values {
            *values.entry(s.clone()).or_insert_with(Q::zero) += lambda * y;
        }
        for (s, y) in &b.values {
            *values.entry(s.clone()).or_insert_with(Q::zero) += &mu * y;
        }
        values.retain(|_, y| !y.is_zero());
        Ok(Self::from_parts(
            a.ctx.clone(),
            a.level.min(b.level),
            a.size_cap,
            values,
            a.zero_set.intersection(&b.zero_set).copied().collect(),
            a.one_set.intersection(&b.one_set).copied().collect(),
        ))
    }

    pub fn is_fractional(&self) -> bool {
        self.marginals.iter().any(|p| !p.is_zero() && !p.is_one())
    }

    pub fn context(&self) -> &Arc<LiftContext> {
        &self.ctx
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn size_cap(&self) -> usize {
        self.size_cap
    }

    pub fn zero_set(&self) -> &BTreeSet<u32> {
        &self.zero_set
    }

    pub fn one_set(&self) -> &BTreeSet<u32> {
        &self.one_set
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Subset, &Q)> {
        self.values.iter()
    }

    /// `y_S` for a sorted set; zero when absent, an error beyond the size cap.
    pub fn value(&self, s: &[u32]) -> Result<Q, LiftError> {
        if s.len() > self.size_cap {
            return Err(LiftError::Incomplete {
                size: s.len(),
                cap: self.size_cap,
            });
        }
        Ok(self.values.get(s).cloned().unwrap_or_else(Q::zero))
    }

    pub fn marginal(&self, job: usize, slot: usize) -> Q {
        match self.ctx.index_of(job, slot) {
            Some(v) => self.marginals[v as usize].clone(),
            None => Q::zero(),
        }
    }

    pub fn marginal_of(&self, v: u32) -> &Q {
        &self.marginals[v as usize]
    }

    /// `x[j][t − 1]` for `t ∈ 1..=horizon`.
    pub fn marginal_matrix(&self) -> Vec<Vec<Q>> {
        (0..self.ctx.inst.n())
            .map(|j| {
                (1..=self.ctx.horizon)
                    .map(|t| self.marginal(j, t))
                    .collect()
            })
            .collect()
    }

    /// `y_{j,I} = Σ_{t∈I} y_{(j,t)}` for an inclusive slot range.
    pub fn job_interval(&self, job: usize, (a, b): (usize, usize)) -> Q {
        self.ctx.job_vars[job]
            .iter()
            .filter(|&&v| (a..=b).contains(&self.ctx.vars[v as usize].slot))
            .map(|&v| self.marginals[v as usize].clone())
            .sum()
    }

    /// Slots with positive marginal, ascending.
    pub fn supp(&self, job: usize) -> Vec<usize> {
        self.ctx.job_vars[job]
            .iter()
            .filter(|&&v| self.marginals[v as usize].is_positive())
            .map(|&v| self.ctx.vars[v as usize].slot)
            .collect()
    }

    pub fn is_integral_for(&self, job: usize) -> bool {
        self.supp(job).len() == 1
    }

    /// `z¹` (value `true`) or `z⁰` of conditioning on one base variable.
    ///
    /// Conditioning on an event that already has probability one returns the
    /// vector unchanged and keeps its level.
    pub fn condition(&self, v: u32, value: bool) -> Result<HierarchyVector, LiftError> {
        let p = self.marginals[v as usize].clone();
        let certain = if value { p.is_one() } else { p.is_zero() };
        if certain {
            return Ok(self.clone());
        }
        let impossible = if value { p.is_zero() } else { p.is_one() };
        if impossible {
            return Err(LiftError::Precondition(format!(
                "conditioning {} = {} has probability zero",
                self.ctx.format_subset(&[v]),
                value as u8
            )));
        }
        if self.level == 0 {
            return Err(LiftError::Precondition(
                "level-0 vectors cannot be conditioned".into(),
            ));
        }
        let cap = self.size_cap - 1;
        let mut values: BTreeMap<Subset, Q> = BTreeMap::new();
        if value {
            for (s, y) in &self.values {
                if s.len() > self.size_cap || s.binary_search(&v).is_err() {
                    continue;
                }
                let q = y / &p;
                let rest: Subset = s.iter().copied().filter(|&u| u != v).collect();
                if s.len() <= cap {
                    values.insert(s.clone(), q.clone());
                }
                values.insert(rest, q);
            }
        } else {
            let denom = Q::one() - &p;
            for (s, y) in &self.values {
                if s.len() > cap || s.binary_search(&v).is_ok() {
                    continue;
                }
                let with = self.value(&union_with(s, v))?;
                let z = (y - with) / &denom;
                if !z.is_zero() {
                    values.insert(s.clone(), z);
                }
            }
        }
        let (mut zero, mut one) = (self.zero_set.clone(), self.one_set.clone());
        if value {
            one.insert(v);
        } else {
            zero.insert(v);
        }
        let z = Self::from_parts(self.ctx.clone(), self.level - 1, cap, values, zero, one);
        debug_assert!(z.values.get(&Vec::new()).is_some_and(One::is_one));
        Ok(z)
    }

    /// Conditions on the event "job `j` runs inside `I`", i.e.
    /// `z_S = Σ_{t∈I} y_{S∪{(j,t)}} / y_{j,I}`.
    pub fn condition_on_interval(
        &self,
        job: usize,
        interval: (usize, usize),
    ) -> Result<HierarchyVector, LiftError> {
        let p = self.job_interval(job, interval);
        if p.is_zero() {
            return Err(LiftError::Precondition(format!(
                "job {job} has no weight in {}..={}",
                interval.0, interval.1
            )));
        }
        if p.is_one() {
            return Ok(self.clone());
        }
        if self.level == 0 {
            return Err(LiftError::Precondition(
                "level-0 vectors cannot be conditioned".into(),
            ));
        }
        let (a, b) = interval;
        let inside: Vec<u32> = self.ctx.job_vars[job]
            .iter()
            .copied()
            .filter(|&v| (a..=b).contains(&self.ctx.vars[v as usize].slot))
            .collect();
        let cap = self.size_cap - 1;
        let mut acc: BTreeMap<Subset, Q> = BTreeMap::new();
        for (s, y) in &self.values {
            if s.len() > self.size_cap {
                continue;
            }
            // a consistent set holds at most one variable of `job`
            let Some(&v) = s.iter().find(|u| inside.binary_search(u).is_ok()) else {
                continue;
            };
            if s.len() <= cap {
                *acc.entry(s.clone()).or_insert_with(Q::zero) += y;
            }
            let rest: Subset = s.iter().copied().filter(|&u| u != v).collect();
            *acc.entry(rest).or_insert_with(Q::zero) += y;
        }
        let values: BTreeMap<Subset, Q> = acc
            .into_iter()
            .filter(|(_, y)| !y.is_zero())
            .map(|(s, y)| (s, y / &p))
            .collect();
        let mut zero = self.zero_set.clone();
        zero.extend(
            self.ctx.job_vars[job]
                .iter()
                .copied()
                .filter(|v| inside.binary_search(v).is_err()),
        );
        Ok(Self::from_parts(
            self.ctx.clone(),
            self.level - 1,
            cap,
            values,
            zero,
            self.one_set.clone(),
        ))
    }

    /// Re-solves the base-level lift keeping this vector's pins, pinning every
    /// currently zero variable, and additionally pinning `extra_zero`.
    pub fn resolve(&self, extra_zero: &[u32]) -> Result<Option<HierarchyVector>, LiftError> {
        let mut fixings = Fixings {
            zero: self.zero_set.clone(),
            one: self.one_set.clone(),
        };
        for (v, y) in self.marginals.iter().enumerate() {
            if y.is_zero() {
                fixings.zero.insert(v as u32);
            }
        }
        fixings.zero.extend(extra_zero.iter().copied());
        solve_lift(&self.ctx, self.ctx.base_level, &fixings)
    }

    /// Interval conditioning that falls back to a re-solve once the level is used up.
    pub fn condition_on_interval_or_resolve(
        &self,
        job: usize,
        interval: (usize, usize),
    ) -> Result<Conditioned, LiftError> {
        let p = self.job_interval(job, interval);
        if p.is_zero() {
            return Ok(Conditioned::Failed);
        }
        if p.is_one() || self.level >= 1 {
            return Ok(Conditioned::Direct(
                self.condition_on_interval(job, interval)?,
            ));
        }
        let outside: Vec<u32> = self.ctx.job_vars[job]
            .iter()
            .copied()
            .filter(|&v| !(interval.0..=interval.1).contains(&self.ctx.vars[v as usize].slot))
            .collect();
        Ok(match self.resolve(&outside)? {
            Some(z) => Conditioned::Resolved(z),
            None => Conditioned::Failed,
        })
    }

    /// Entrywise `y_S = p·z¹_S + (1 − p)·z⁰_S` on every set both children store.
    pub fn convex_identity_holds(
        &self,
        v: u32,
        z1: &HierarchyVector,
        z0: &HierarchyVector,
    ) -> bool {
        let p = self.marginals[v as usize].clone();
        let cap = z1.size_cap.min(z0.size_cap);
        let mut keys: BTreeSet<&Subset> = BTreeSet::new();
        keys.extend(self.values.keys().filter(|s| s.len() <= cap));
        keys.extend(z1.values.keys().filter(|s| s.len() <= cap));
        keys.extend(z0.values.keys().filter(|s| s.len() <= cap));
        keys.into_iter().all(|s| {
            let (y, a, b) = (
                self.value(s).unwrap(),
                z1.value(s).unwrap(),
                z0.value(s).unwrap(),
            );
            y == &p * a + (Q::one() - &p) * b
        })
    }

    /// `0 ≤ y_T ≤ y_S ≤ 1` for every stored `S ⊂ T`.
    pub fn is_monotone(&self) -> bool {
        for (s, y) in &self.values {
            if y.is_negative() || *y > Q::one() {
                return false;
            }
            for (i, _) in s.iter().enumerate() {
                let mut sub = s.clone();
                sub.remove(i);
                if self.values.get(&sub).is_none_or(|ys| ys < y) {
                    return false;
                }
            }
        }
        true
    }

    /// Marginals lie in the unpruned `K(T)`.
    pub fn marginals_in_k(&self) -> bool {
        crate::relax::k_contains(&self.ctx.inst, self.ctx.horizon, &self.marginal_matrix())
    }

    /// Evaluates every level-`level` Sherali–Adams row: for disjoint `U`, `W`
    /// with `|U| + |W| ≤ level` and each base row `aᵀx cmp b`,
    /// `Σ_{W′⊆W} (−1)^{|W′|} (Σ_i a_i y_{U∪W′∪{i}} − b·y_{U∪W′}) cmp 0`, plus
    /// the nonnegativity of `Σ_{W′⊆N} (−1)^{|W′|} y_{P∪W′}` for all disjoint
    /// `P`, `N` with `|P| + |N| ≤ level + 1`. Returns the first failing row.
    pub fn check_lifted_constraints(&self, level: usize) -> Result<(), String> {
        if level + 1 > self.size_cap {
            return Err(format!("level {level} needs sets up to {}", level + 1));
        }
        let all: Vec<u32> = (0..self.ctx.vars.len() as u32).collect();
        let y = |s: &[u32]| -> Q {
            if self.ctx.consistent(s) {
                self.value(s).unwrap()
            } else {
                Q::zero()
            }
        };
        let mut sets: Vec<Subset> = vec![Vec::new()];
        let mut frontier: Vec<Subset> = vec![Vec::new()];
        for _ in 0..=level {
            let mut next = Vec::new();
            for s in &frontier {
                let from = s.last().map_or(0, |&l| l + 1);
                for &v in &all[from as usize..] {
                    let mut t = s.clone();
                    t.push(v);
                    next.push(t);
                }
            }
            sets.extend(next.iter().cloned());
            frontier = next;
        }
        for s in &sets {
            // each element goes to P or N
            for mask in 0u32..(1 << s.len()) {
                let p: Subset = (0..s.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| s[i])
                    .collect();
                let n: Subset = (0..s.len())
                    .filter(|i| mask >> i & 1 == 0)
                    .map(|i| s[i])
                    .collect();
                let mut total = Q::zero();
                for sub in 0u32..(1 << n.len()) {
                    let w: Subset = (0..n.len())
                        .filter(|i| sub >> i & 1 == 1)
                        .map(|i| n[i])
                        .collect();
                    let term = y(&union(&p, &w));
                    if w.len().is_multiple_of(2) {
                        total += term;
                    } else {
                        total -= term;
                    }
                }
                if total.is_negative() {
                    return Err(format!(
                        "box row P={} N={} is {}",
                        self.ctx.format_subset(&p),
                        self.ctx.format_subset(&n),
                        total
                    ));
                }
            }
            if s.len() > level {
                continue;
            }
            for mask in 0u32..(1 << s.len()) {
                let u: Subset = (0..s.len())
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| s[i])
                    .collect();
                let w: Subset = (0..s.len())
                    .filter(|i| mask >> i & 1 == 0)
                    .map(|i| s[i])
                    .collect();
                for (k, row) in self.ctx.rows.iter().enumerate() {
                    let mut total = Q::zero();
                    for sub in 0u32..(1 << w.len()) {
                        let wp: Subset = (0..w.len())
                            .filter(|i| sub >> i & 1 == 1)
                            .map(|i| w[i])
                            .collect();
                        let base = union(&u, &wp);
                        let mut val: Q = row
                            .terms
                            .iter()
                            .map(|(i, a)| a * y(&union_with(&base, *i)))
                            .sum();
                        val -= &row.rhs * y(&base);
                        if wp.len().is_multiple_of(2) {
                            total += val;
                        } else {
                            total -= val;
                        }
                    }
                    let ok = match row.cmp {
                        Cmp::Ge => !total.is_negative(),
                        Cmp::Le => !total.is_positive(),
                        Cmp::Eq => total.is_zero(),
                    };
                    if !ok {
                        return Err(format!(
                            "row {k} with U={} W={} evaluates to {}",
                            self.ctx.format_subset(&u),
                            self.ctx.format_subset(&w),
                            total
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// For `i ≺ j` the support of `j` cannot end where the support of `i` starts.
    /// Returns an offending pair if one exists.
    pub fn support_order_violation(&self) -> Option<(usize, usize)> {
        let n = self.ctx.inst.n();
        let supp: Vec<Vec<usize>> = (0..n).map(|j| self.supp(j)).collect();
        for (i, j) in self.ctx.inst.closure_pairs() {
            if let (Some(&first_i), Some(&last_j)) = (supp[i].first(), supp[j].last()) {
                if last_j <= first_i {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Sorted `{(j,t),...} = p/q` lines (by size, then lexicographically).
    pub fn dump(&self) -> String {
        let mut keys: Vec<&Subset> = self.values.keys().collect();
        keys.sort_by(|a, b| {
            let va: Vec<Var> = a.iter().map(|&v| self.ctx.var(v)).collect();
            let vb: Vec<Var> = b.iter().map(|&v| self.ctx.var(v)).collect();
            a.len().cmp(&b.len()).then(va.cmp(&vb))
        });
        let mut out = String::new();
        for s in keys {
            let _ = writeln!(
                out,
                "{} = {}",
                self.ctx.format_subset(s),
                lpcore::ratio_text(&self.values[s])
            );
        }
        out
    }
}

/// Binary laminar family over `start..start + len`, `len` a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntervalFamily {
    start: usize,
    len: usize,
}

impl IntervalFamily {
    pub fn new(start: usize, len: usize) -> Self {
        assert!(
            len.is_power_of_two(),
            "family length {len} is not a power of two"
        );
        IntervalFamily { start, len }
    }

    pub fn root(&self) -> (usize, usize) {
        (self.start, self.start + self.len - 1)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `L = log₂ |I*|`.
    pub fn depth(&self) -> usize {
        self.len.trailing_zeros() as usize
    }

    pub fn interval_len(&self, level: usize) -> usize {
        self.len >> level
    }

    pub fn interval(&self, level: usize, idx: usize) -> (usize, usize) {
        let w = self.interval_len(level);
        let a = self.start + idx * w;
        (a, a + w - 1)
    }

    pub fn intervals(&self, level: usize) -> Vec<(usize, usize)> {
        (0..1usize << level)
            .map(|i| self.interval(level, i))
            .collect()
    }

    /// Index of the level-`level` interval holding slot `t`.
    pub fn locate(&self, level: usize, t: usize) -> usize {
        (t - self.start) / self.interval_len(level)
    }

    pub fn contains(&self, t: usize) -> bool {
        t >= self.start && t < self.start + self.len
    }

    pub fn subfamily(&self, level: usize, idx: usize) -> IntervalFamily {
        let (a, _) = self.interval(level, idx);
        IntervalFamily::new(a, self.interval_len(level))
    }
}

/// `(level, index)` of the deepest family interval carrying all of `j`'s weight.
pub fn owner(
    y: &HierarchyVector,
    fam: &IntervalFamily,
    job: usize,
) -> Result<(usize, usize), LiftError> {
    let supp = y.supp(job);
    let (Some(&lo), Some(&hi)) = (supp.first(), supp.last()) else {
        return Err(LiftError::Precondition(format!(
            "job {job} has empty support"
        )));
    };
    if !fam.contains(lo) || !fam.contains(hi) {
        return Err(LiftError::Precondition(format!(
            "job {job} is not owned by the root {:?}",
            fam.root()
        )));
    }
    for level in (0..=fam.depth()).rev() {
        let (a, b) = (fam.locate(level, lo), fam.locate(level, hi));
        if a == b {
            return Ok((level, a));
        }
    }
    unreachable!("the root holds the whole support")
}

pub fn owner_level(
    y: &HierarchyVector,
    fam: &IntervalFamily,
    job: usize,
) -> Result<usize, LiftError> {
    owner(y, fam, job).map(|(l, _)| l)
}

/// `J(ℓ, y)`: jobs of `jobs` owned by level `level`.
pub fn jobs_at_level(
    y: &HierarchyVector,
    fam: &IntervalFamily,
    jobs: &[usize],
    level: usize,
) -> Result<Vec<usize>, LiftError> {
    let mut out = Vec::new();
    for &j in jobs {
        if owner_level(y, fam, j)? == level {
            out.push(j);
        }
    }
    Ok(out)
}

/// `J(I, y)` for `I` the `idx`-th interval of level `level`.
pub fn jobs_of_interval(
    y: &HierarchyVector,
    fam: &IntervalFamily,
    jobs: &[usize],
    level: usize,
    idx: usize,
) -> Result<Vec<usize>, LiftError> {
    let mut out = Vec::new();
    for &j in jobs {
        if owner(y, fam, j)? == (level, idx) {
            out.push(j);
        }
    }
    Ok(out)
}

/// `log₂(T*)·2mk²·2^{k²}/δ`, the level the recursion on a length-`T*` root asks for.
pub fn theoretical_level(t_star: usize, m: usize, k: usize, delta: &Q) -> Q {
    assert!(t_star.is_power_of_two());
    let log = t_star.trailing_zeros() as i64;
    let k2 = (k * k) as u32;
    let pow = num_bigint::BigInt::from(2u8).pow(k2);
    Q::from_integer(pow) * lpcore::q(log * 2 * m as i64 * (k * k) as i64) / delta
}

/// Smallest eigenvalue of a symmetric matrix, `+∞` for the empty matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Index sets of a moment matrix of order `r` over `vars`: all sets of size ≤ r.
pub fn moment_index(vars: &[u32], r: usize) -> Vec<Subset> {
    let mut out: Vec<Subset> = vec![Vec::new()];
    let mut frontier: Vec<Subset> = vec![Vec::new()];
    for _ in 0..r {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s
                .last()
                .map_or(0, |l| vars.iter().position(|v| v == l).unwrap() + 1);
            for &v in &vars[start..] {
                let mut t = s.clone();
                t.push(v);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// `(y_{I∪J})` over the given index sets.
pub fn moment_matrix<F>(index: &[Subset], lookup: F) -> Result<DMatrix<f64>, LiftError>
where
    F: Fn(&[u32]) -> Result<Q, LiftError>,
{
    let d = index.len();
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = lookup(&union(&index[a], &index[b]))?
                .to_f64()
                .unwrap_or(f64::NAN);
            m[(a, b)] = v;
            m[(b, a)] = v;
        }
    }
    Ok(m)
}

/// `(Σ_i a_i y_{I∪J∪{i}} − b·y_{I∪J})` for the row `aᵀx ≥ b`.
pub fn slack_matrix<F>(
    index: &[Subset],
    terms: &[(u32, Q)],
    rhs: &Q,
    lookup: F,
) -> Result<DMatrix<f64>, LiftError>
where
    F: Fn(&[u32]) -> Result<Q, LiftError>,
{
    let d = index.len();
    let mut m = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let base = union(&index[a], &index[b]);
            let mut v = -(rhs * lookup(&base)?);
            for (i, c) in terms {
                v += c * lookup(&union_with(&base, *i))?;
            }
            let f = v.to_f64().unwrap_or(f64::NAN);
            m[(a, b)] = f;
            m[(b, a)] = f;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub min_eigenvalue: f64,
    /// `None` for the moment matrix, `Some(k)` for the slack matrix of base row `k`.
    pub worst: Option<usize>,
    pub matrices: usize,
}

impl PsdReport {
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= PSD_TOLERANCE
    }
}

/// Builds `M_r(y)` and every slack matrix `M_r^ℓ(y)` over all base variables
/// and reports the smallest eigenvalue. Equality rows contribute both signs.
pub fn verify_moment_psd(y: &HierarchyVector, r: usize) -> Result<PsdReport, LiftError> {
    if 2 * r + 1 > y.size_cap {
        return Err(LiftError::Incomplete {
            size: 2 * r + 1,
            cap: y.size_cap,
        });
    }
    let ctx = &y.ctx;
    let vars: Vec<u32> = (0..ctx.vars.len() as u32).collect();
    let index = moment_index(&vars, r);
    let lookup = |s: &[u32]| -> Result<Q, LiftError> {
        if ctx.consistent(s) {
            y.value(s)
        } else {
            Ok(Q::zero())
        }
    };
    let mut report = PsdReport {
        min_eigenvalue: min_eigenvalue(&moment_matrix(&index, lookup)?),
        worst: None,
        matrices: 1,
    };
    for (k, row) in ctx.rows.iter().enumerate() {
        let signs: &[i64] = match row.cmp {
            Cmp::Ge => &[1],
            Cmp::Le => &[-1],
            Cmp::Eq => &[1, -1],
        };
        for &s in signs {
            let sq = lpcore::q(s);
            let terms: Vec<(u32, Q)> = row.terms.iter().map(|(i, a)| (*i, a * &sq)).collect();
            let m = slack_matrix(&index, &terms, &(&row.rhs * &sq), lookup)?;
            let e = min_eigenvalue(&m);
            report.matrices += 1;
            if e < report.min_eigenvalue {
                report.min_eigenvalue = e;
                report.worst = Some(k);
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gap_instance, random_dag};
    use crate::lpcore::{q, qr};

    fn chain(n: usize, m: usize) -> Instance {
        let edges: Vec<_> = (1..n).map(|j| (j - 1, j)).collect();
        Instance::new(n, m, &edges).unwrap()
    }

    #[test]
    fn single_job_single_slot() {
        let inst = Instance::new(1, 1, &[]).unwrap();
        let ctx = LiftContext::new(&inst, 1, 1);
        let y = solve_lift(&ctx, 1, &Fixings::default()).unwrap().unwrap();
        assert_eq!(y.marginal(0, 1), q(1));
        assert_eq!(y.supp(0), vec![1]);
    }

    #[test]
    fn level_zero_is_a_point_of_k() {
        for seed in 0..10 {
            let inst = random_dag(6, 2, 0.3, seed);
            let t = crate::relax::lp_horizon(&inst).unwrap();
            let ctx = LiftContext::new(&inst, t, 0);
            let y = solve_lift(&ctx, 0, &Fixings::default()).unwrap().unwrap();
            assert!(y.marginals_in_k());
            assert!(y.check_lifted_constraints(0).is_ok());
        }
    }

    #[test]
    fn level_one_vectors_pass_the_full_family() {
        for seed in 0..6 {
            let inst = random_dag(5, 2, 0.35, seed);
            let t = crate::relax::lp_horizon(&inst).unwrap() + 1;
            let ctx = LiftContext::new(&inst, t, 1);
            let y = solve_lift(&ctx, 1, &Fixings::default()).unwrap().unwrap();
            assert_eq!(y.check_lifted_constraints(1), Ok(()), "seed {seed}");
            assert!(y.is_monotone());
            assert!(y.marginals_in_k());
            assert_eq!(y.support_order_violation(), None);
        }
    }

    #[test]
    fn level_one_closes_the_small_gap() {
        // gap(m=2, k=2): level 0 fits in 3 slots, level 1 does not
        let g = gap_instance(2, 2);
        let ctx = LiftContext::new(&g, 3, 1);
        assert!(solve_lift(&ctx, 0, &Fixings::default()).unwrap().is_some());
        assert!(solve_lift(&ctx, 1, &Fixings::default()).unwrap().is_none());
    }

    /// Fractional level-2 points: the midpoint of two vertices of the same lift.
    pub(crate) fn mixed_level_two(seed: u64) -> Option<HierarchyVector> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(2..=3);
        let inst = random_dag(n, rng.gen_range(1..=2), 0.3, seed);
        let t = crate::relax::lp_horizon(&inst).unwrap() + rng.gen_range(0..=1);
        let ctx = LiftContext::new(&inst, t, 2);
        if ctx.num_vars() > 9 {
            return None;
        }
        let w: Vec<i64> = (0..ctx.num_vars()).map(|_| rng.gen_range(-3..=3)).collect();
        let solve = |sign: i64| {
            solve_lift_with_objective(&ctx, 2, &Fixings::default(), |s| {
                (s.len() == 1).then(|| q(sign * w[s[0] as usize]))
            })
            .unwrap()
            .unwrap()
        };
        let y = HierarchyVector::convex_combination(&solve(1), &solve(-1), &qr(1, 2)).unwrap();
        y.is_fractional().then_some(y)
    }

    #[test]
    fn conditioning_identity_and_support() {
        let mut checked = 0;
        for seed in 0..40 {
            let Some(y) = mixed_level_two(seed) else {
                continue;
            };
            assert_eq!(y.check_lifted_constraints(2), Ok(()));
            let ctx = y.context().clone();
            for v in 0..ctx.num_vars() as u32 {
                let p = y.marginal_of(v).clone();
                if p.is_zero() || p.is_one() {
                    continue;
                }
                let z1 = y.condition(v, true).unwrap();
                let z0 = y.condition(v, false).unwrap();
                assert!(y.convex_identity_holds(v, &z1, &z0));
                assert_eq!(z1.marginal_of(v), &q(1));
                assert_eq!(z0.marginal_of(v), &q(0));
                for z in [&z1, &z0] {
                    assert_eq!(z.level(), 1);
                    assert_eq!(z.check_lifted_constraints(1), Ok(()));
                    for j in 0..ctx.instance().n() {
                        assert!(z.supp(j).iter().all(|t| y.supp(j).contains(t)));
                    }
                }
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn certain_events_are_identities() {
        let inst = Instance::new(2, 1, &[(0, 1)]).unwrap();
        let ctx = LiftContext::new(&inst, 2, 1);
        let y = solve_lift(&ctx, 1, &Fixings::default()).unwrap().unwrap();
        let v = ctx.index_of(0, 1).unwrap();
        let z = y.condition(v, true).unwrap();
        assert_eq!(z.dump(), y.dump());
        assert_eq!(z.level(), y.level());
        let w = y.condition_on_interval(1, (1, 2)).unwrap();
        assert_eq!(w.dump(), y.dump());
        assert!(matches!(
            y.condition(v, false),
            Err(LiftError::Precondition(_))
        ));
    }

    /// A job split evenly over the two halves lands in the chosen half.
    #[test]
    fn interval_conditioning_renormalizes() {
        let inst = Instance::new(4, 1, &[]).unwrap();
        let ctx = LiftContext::new(&inst, 4, 1);
        // job 0 half in slot 1, half in slot 3; the rest fills the gaps
        let mut values = BTreeMap::new();
        values.insert(vec![], q(1));
        let v = |j, t| ctx.index_of(j, t).unwrap();
        let half = qr(1, 2);
        let rows: [(usize, [usize; 2]); 4] = [(0, [1, 3]), (1, [3, 1]), (2, [2, 4]), (3, [4, 2])];
        for (j, slots) in rows {
            for &t in &slots {
                values.insert(vec![v(j, t)], half.clone());
            }
        }
        // two integral schedules mixed 1/2 : 1/2
        let a = [v(0, 1), v(1, 3), v(2, 2), v(3, 4)];
        let b = [v(0, 3), v(1, 1), v(2, 4), v(3, 2)];
        for sched in [a, b] {
            for x in 0..4 {
                for y2 in x + 1..4 {
                    let mut s = vec![sched[x], sched[y2]];
                    s.sort_unstable();
                    values.insert(s, half.clone());
                }
            }
        }
        let y = HierarchyVector::from_parts(
            ctx.clone(),
            1,
            2,
            values,
            BTreeSet::new(),
            BTreeSet::new(),
        );
        assert_eq!(y.check_lifted_constraints(1), Ok(()));
        let z = y.condition_on_interval(0, (3, 4)).unwrap();
        assert_eq!(z.job_interval(0, (3, 4)), q(1));
        assert_eq!(z.supp(0), vec![3]);
        assert_eq!(z.supp(1), vec![1]);
        assert!(z.marginals_in_k());
        let full = y.condition_on_interval(0, (1, 4)).unwrap();
        assert_eq!(full.dump(), y.dump());
    }

    /// The aggregate event equals a sequence of zero-conditionings on the slots outside it.
    #[test]
    fn interval_event_matches_sequential_zeros() {
        let mut checked = 0;
        for seed in 0..40 {
            let Some(y) = mixed_level_two(seed) else {
                continue;
            };
            let ctx = y.context().clone();
            for j in 0..ctx.instance().n() {
                let supp = y.supp(j);
                if supp.len() != 2 {
                    continue;
                }
                // keep the later slot; the earlier one is conditioned to zero
                let agg = y
                    .condition_on_interval(j, (supp[1], ctx.horizon()))
                    .unwrap();
                let seq = y
                    .condition(ctx.index_of(j, supp[0]).unwrap(), false)
                    .unwrap();
                assert_eq!(agg.dump(), seq.dump());
                assert!(agg.marginals_in_k());
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn resolve_keeps_supports() {
        let inst = random_dag(6, 2, 0.2, 3);
        let t = crate::relax::lp_horizon(&inst).unwrap() + 1;
        let ctx = LiftContext::new(&inst, t, 0);
        let y = solve_lift(&ctx, 0, &Fixings::default()).unwrap().unwrap();
        for j in 0..6 {
            let s = y.supp(j);
            if s.len() < 2 {
                continue;
            }
            let target = (s[s.len() - 1], s[s.len() - 1]);
            match y.condition_on_interval_or_resolve(j, target).unwrap() {
                Conditioned::Resolved(z) => {
                    assert_eq!(z.supp(j), vec![target.0]);
                    for i in 0..6 {
                        assert!(z.supp(i).iter().all(|t| y.supp(i).contains(t)));
                    }
                }
                Conditioned::Failed => {}
                Conditioned::Direct(_) => panic!("level 0 cannot condition directly"),
            }
        }
    }

    #[test]
    fn family_geometry() {
        let f = IntervalFamily::new(1, 8);
        assert_eq!(f.depth(), 3);
        assert_eq!(f.intervals(1), vec![(1, 4), (5, 8)]);
        assert_eq!(f.interval(3, 5), (6, 6));
        assert_eq!(f.locate(2, 7), 3);
        assert_eq!(f.subfamily(1, 1).root(), (5, 8));
    }

    #[test]
    fn owner_level_matches_a_scan() {
        for seed in 0..8 {
            let inst = random_dag(7, 2, 0.25, seed);
            let t = crate::relax::lp_horizon(&inst).unwrap().next_power_of_two();
            let ctx = LiftContext::new(&inst, t, 0);
            let y = solve_lift(&ctx, 0, &Fixings::default()).unwrap().unwrap();
            let fam = IntervalFamily::new(1, t);
            for j in 0..7 {
                let scan = (0..=fam.depth())
                    .filter(|&l| {
                        fam.intervals(l)
                            .into_iter()
                            .any(|i| y.job_interval(j, i).is_one())
                    })
                    .max()
                    .unwrap();
                assert_eq!(owner_level(&y, &fam, j).unwrap(), scan);
            }
        }
        let inst = Instance::new(1, 1, &[]).unwrap();
        let ctx = LiftContext::new(&inst, 4, 0);
        let mut s = PartialSchedule::new(1, 4);
        s.assign(0, 3);
        let y = HierarchyVector::from_schedule(&ctx, &s, 1).unwrap();
        assert_eq!(owner_level(&y, &IntervalFamily::new(1, 4), 0).unwrap(), 2);
    }

    #[test]
    fn dump_lines() {
        let inst = Instance::new(2, 2, &[]).unwrap();
        let ctx = LiftContext::new(&inst, 1, 1);
        let y = solve_lift(&ctx, 1, &Fixings::default()).unwrap().unwrap();
        assert_eq!(
            y.dump(),
            "{} = 1/1\n{(0,1)} = 1/1\n{(1,1)} = 1/1\n{(0,1),(1,1)} = 1/1\n"
        );
    }

    #[test]
    fn integral_vectors_are_psd() {
        let g = chain(3, 1);
        let ctx = LiftContext::new(&g, 4, 1);
        let mut s = PartialSchedule::new(3, 4);
        s.assign(0, 1);
        s.assign(1, 3);
        s.assign(2, 4);
        let y = HierarchyVector::from_schedule(&ctx, &s, 3).unwrap();
        let rep = verify_moment_psd(&y, 1).unwrap();
        assert!(rep.is_psd(), "{rep:?}");
        assert!(matches!(
            verify_moment_psd(&y, 2),
            Err(LiftError::Incomplete { .. })
        ));
    }

    #[test]
    fn three_by_three_examples() {
        let table = |yi: Q, yij: Q| {
            move |s: &[u32]| -> Result<Q, LiftError> {
                Ok(match s.len() {
                    0 => q(1),
                    1 => yi.clone(),
                    _ => yij.clone(),
                })
            }
        };
        let index = moment_index(&[0, 1], 1);
        let m = moment_matrix(&index, table(qr(1, 2), qr(1, 2))).unwrap();
        assert!(min_eigenvalue(&m) >= PSD_TOLERANCE);
        let slack = slack_matrix(
            &index,
            &[(0, q(1)), (1, q(1))],
            &q(1),
            table(qr(1, 2), q(0)),
        )
        .unwrap();
        assert!(min_eigenvalue(&slack).abs() <= 1e-9);
    }

    #[test]
    fn theoretical_level_formula() {
        // log₂8 · 2·1·1 · 2 / (1/4) = 48
        assert_eq!(theoretical_level(8, 1, 1, &qr(1, 4)), q(48));
    }
}
