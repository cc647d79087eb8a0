//! Recursive rounding of a lifted solution: chain breaking, middle-level
//! choice, recursion on subintervals, windows, matching and EDF for top jobs,
//! and reinsertion of discarded jobs.

use crate::bitset::JobSet;
use crate::exact::{self, Feasibility, SlotConstraints};
use crate::instance::{validate_schedule, Instance, PartialSchedule};
use crate::lift::{
    self, Conditioned, Fixings, HierarchyVector, IntervalFamily, LiftContext, LiftError,
};
use crate::lpcore::{q, Q};
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundingError {
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error("conditioning job {job} into slots {}..={}: {source}", interval.0, interval.1)]
    Conditioning {
        job: usize,
        interval: (usize, usize),
        source: LiftError,
    },
    #[error("job {before} precedes job {after} but its window is not earlier")]
    InconsistentWindows { before: usize, after: usize },
    #[error("no horizon up to {0} admits a lift")]
    NoFeasibleHorizon(usize),
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

impl RoundingError {
    /// True when a solver size cap was hit rather than a logical failure.
    pub fn is_resource(&self) -> bool {
        matches!(
            self,
            RoundingError::Lift(LiftError::Lp(_) | LiftError::TooManySubsets { .. })
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Practical,
    Theoretical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundingParams {
    pub mode: Mode,
    pub epsilon: f64,
    pub k: usize,
    pub delta: Q,
    pub c1: f64,
    /// Intervals of at most this many slots are solved directly (practical mode).
    pub base_case_threshold: usize,
    /// Lift level solved at the start and on every re-solve.
    pub level: usize,
    /// Condition to integrality in the base case before trying the exact search.
    pub conditioning_base_case: bool,
    pub exact_budget: usize,
}

impl RoundingParams {
    pub fn practical(epsilon: f64) -> Self {
        RoundingParams {
            mode: Mode::Practical,
            epsilon,
            k: 1,
            delta: Q::new(1.into(), 4.into()),
            c1: 1.0,
            base_case_threshold: 2,
            level: 1,
            conditioning_base_case: false,
            exact_budget: exact::DEFAULT_BUDGET,
        }
    }

    /// `k` and `δ` from their formulas for `m` machines and horizon `t`.
    pub fn theoretical(epsilon: f64, m: usize, t: usize) -> Self {
        let mut p = Self::practical(epsilon);
        p.mode = Mode::Theoretical;
        p.k = theoretical_k(epsilon, p.c1, m, t);
        p.delta = theoretical_delta(epsilon, p.k, m, t);
        p
    }
}

/// `⌈(c1·m/ε)·log₂log₂T⌉`, at least 1.
pub fn theoretical_k(epsilon: f64, c1: f64, m: usize, t: usize) -> usize {
    let loglog = (t.max(2) as f64).log2().log2().max(0.0);
    ((c1 * m as f64 / epsilon) * loglog).ceil().max(1.0) as usize
}

/// `ε/(8k²·m·2^{2k²}·log₂T)` with `log₂T` rounded up and at least 1.
pub fn theoretical_delta(epsilon: f64, k: usize, m: usize, t: usize) -> Q {
    let eps = Q::from_float(epsilon).expect("finite epsilon");
    let log = ceil_log2(t).max(1) as i64;
    let k2 = (k * k) as u32;
    let pow = num_bigint::BigInt::from(2u8).pow(2 * k2);
    eps / (Q::from_integer(pow) * q(8 * (k * k) as i64 * m as i64 * log))
}

fn ceil_log2(t: usize) -> usize {
    t.max(1).next_power_of_two().trailing_zeros() as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    BaseCase,
    ChainBreaking,
    Middle,
    Matching,
    Edf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    /// Discarded inside a recursive call or a base case.
    Recursive,
    /// Top job lost in the matching or by EDF.
    MatchingEdf,
    /// Middle job, or a job whose conditioning could not be carried out.
    Middle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DiscardRecord {
    pub job: usize,
    pub depth: usize,
    pub reason: DiscardReason,
}

impl DiscardRecord {
    /// Category with respect to the root call.
    pub fn category(&self) -> Category {
        if self.depth > 0 {
            return Category::Recursive;
        }
        match self.reason {
            DiscardReason::BaseCase => Category::Recursive,
            DiscardReason::ChainBreaking | DiscardReason::Middle => Category::Middle,
            DiscardReason::Matching | DiscardReason::Edf => Category::MatchingEdf,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RoundingStats {
    #[serde(rename = "T")]
    pub t: usize,
    pub t_pad: usize,
    pub makespan: usize,
    pub discard_recursive: usize,
    pub discard_matching_edf: usize,
    pub discard_middle: usize,
    pub conditionings: usize,
    pub resolves: usize,
    pub base_case_fallbacks: usize,
    pub level: usize,
    pub k: usize,
    pub delta: String,
    pub warnings: Vec<String>,
    pub discards: Vec<DiscardRecord>,
}

impl RoundingStats {
    pub fn total_discards(&self) -> usize {
        self.discard_recursive + self.discard_matching_edf + self.discard_middle
    }

    fn tally(&mut self) {
        let count = |c| self.discards.iter().filter(|d| d.category() == c).count();
        self.discard_recursive = count(Category::Recursive);
        self.discard_matching_edf = count(Category::MatchingEdf);
        self.discard_middle = count(Category::Middle);
    }
}

/// `(level, index)` owners of `jobs`, in the order given.
fn owners(
    y: &HierarchyVector,
    fam: &IntervalFamily,
    jobs: &[usize],
) -> Result<Vec<(usize, usize)>, RoundingError> {
    jobs.iter()
        .map(|&j| lift::owner(y, fam, j).map_err(RoundingError::from))
        .collect()
}

fn job_set(inst: &Instance, jobs: impl IntoIterator<Item = usize>) -> JobSet {
    JobSet::from_iter_with_capacity(inst.n(), jobs)
}

#[derive(Debug, Clone)]
pub struct ChainBreak {
    pub y: HierarchyVector,
    /// Input jobs minus the ones that had to be discarded.
    pub jobs: Vec<usize>,
    pub conditionings: usize,
    pub resolves: usize,
    pub discarded: Vec<usize>,
}

/// Outcome of a conditioning attempt with the other half as fallback.
enum Step {
    Moved(HierarchyVector, bool),
    Stuck,
}

fn condition_into(
    y: &HierarchyVector,
    job: usize,
    first: (usize, usize),
    second: (usize, usize),
) -> Result<Step, RoundingError> {
    for interval in [first, second] {
        let c = y
            .condition_on_interval_or_resolve(job, interval)
            .map_err(|source| RoundingError::Conditioning {
                job,
                interval,
                source,
            })?;
        match c {
            Conditioned::Direct(z) => return Ok(Step::Moved(z, false)),
            Conditioned::Resolved(z) => return Ok(Step::Moved(z, true)),
            Conditioned::Failed => continue,
        }
    }
    Ok(Step::Stuck)
}

/// Conditions until `Δ(J(I, y)) ≤ δ|I|` for every interval on levels
/// `0..k²` that still has two halves.
pub fn break_chains(
    inst: &Instance,
    y: &HierarchyVector,
    fam: &IntervalFamily,
    jobs: &[usize],
    params: &RoundingParams,
) -> Result<ChainBreak, RoundingError> {
    let mut out = ChainBreak {
        y: y.clone(),
        jobs: jobs.to_vec(),
        conditionings: 0,
        resolves: 0,
        discarded: Vec::new(),
    };
    let levels = (params.k * params.k).min(fam.depth());
    loop {
        let own = owners(&out.y, fam, &out.jobs)?;
        let mut violation = None;
        'scan: for level in 0..levels {
            let bound = &params.delta * q(fam.interval_len(level) as i64);
            for idx in 0..1usize << level {
                let members: Vec<usize> = out
                    .jobs
                    .iter()
                    .zip(&own)
                    .filter(|(_, o)| **o == (level, idx))
                    .map(|(&j, _)| j)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let set = job_set(inst, members.iter().copied());
                if q(inst.max_degree(&set) as i64) > bound {
                    violation = Some((level, idx, members, set));
                    break 'scan;
                }
            }
        }
        let Some((level, idx, members, set)) = violation else {
            return Ok(out);
        };
        let j = *members
            .iter()
            .max_by_key(|&&j| (inst.degree_within(j, &set), std::cmp::Reverse(j)))
            .expect("a violating interval owns a job");
        let len = q(fam.interval_len(level) as i64);
        let first_half = fam.interval(level + 1, 2 * idx);
        let second_half = fam.interval(level + 1, 2 * idx + 1);
        let out_deg = q(inst.out_degree_within(j, &set) as i64 + 1);
        let (first, second) = if out_deg >= &params.delta * len / q(2) {
            (second_half, first_half)
        } else {
            (first_half, second_half)
        };
        match condition_into(&out.y, j, first, second)? {
            Step::Moved(z, resolved) => {
                out.y = z;
                out.conditionings += 1;
                out.resolves += resolved as usize;
            }
            Step::Stuck => {
                out.jobs.retain(|&x| x != j);
                out.discarded.push(j);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MiddleChoice {
    pub index: usize,
    pub ell_star: usize,
    pub alphas: Vec<usize>,
    pub top: Vec<usize>,
    pub middle: Vec<usize>,
    pub bottom: Vec<usize>,
    /// Neither condition held for any index; the smallest `α_i` was used.
    pub fallback: bool,
}

/// Picks `ℓ* = (i+1)k` for the first block `i` of `k` levels with
/// `α_i ≤ ε/(4 log₂T)·T*` or `α_i ≤ ε/(2m)·Σ_{j<i} α_j`.
pub fn choose_middle_level(
    inst: &Instance,
    y: &HierarchyVector,
    fam: &IntervalFamily,
    jobs: &[usize],
    params: &RoundingParams,
    log2_t: usize,
) -> Result<MiddleChoice, RoundingError> {
    let k = params.k;
    let own = owners(y, fam, jobs)?;
    let mut alphas = vec![0usize; k];
    for &(level, _) in &own {
        if level < k * k {
            alphas[level / k] += 1;
        }
    }
    let thr_abs = params.epsilon / (4.0 * log2_t.max(1) as f64) * fam.len() as f64;
    let thr_rel = params.epsilon / (2.0 * inst.m() as f64);
    let mut prefix = 0usize;
    let mut chosen = None;
    for (i, &a) in alphas.iter().enumerate() {
        if a as f64 <= thr_abs || a as f64 <= thr_rel * prefix as f64 {
            chosen = Some(i);
            break;
        }
        prefix += a;
    }
    let fallback = chosen.is_none();
    let index = chosen.unwrap_or_else(|| (0..k).min_by_key(|&i| (alphas[i], i)).expect("k ≥ 1"));
    let ell_star = (index + 1) * k;
    let (mut top, mut middle, mut bottom) = (Vec::new(), Vec::new(), Vec::new());
    for (&j, &(level, _)) in jobs.iter().zip(&own) {
        if level + k < ell_star {
            top.push(j);
        } else if level < ell_star {
            middle.push(j);
        } else {
            bottom.push(j);
        }
    }
    Ok(MiddleChoice {
        index,
        ell_star,
        alphas,
        top,
        middle,
        bottom,
        fallback,
    })
}

/// Hypothesis `α_i ≥ α_min > 0` and `α_i ≥ (1/q)·Σ_{j<i} α_j` for all `i`
/// implies `α_i ≥ 2^{⌊i/(2q)⌋}·α_min`. Returns false only on a counterexample.
pub fn growth_bound_holds(alphas: &[u64], q_: u64, alpha_min: u64) -> bool {
    let mut prefix = 0u64;
    let mut hypothesis = alpha_min > 0 && q_ > 0;
    for &a in alphas {
        if a < alpha_min || a * q_ < prefix {
            hypothesis = false;
        }
        prefix += a;
    }
    if !hypothesis {
        return true;
    }
    alphas
        .iter()
        .enumerate()
        .all(|(i, &a)| a >= (1u64 << (i as u64 / (2 * q_))) * alpha_min)
}

/// Release time and deadline of a top job, aligned to the level-`ℓ*` intervals
/// `I_1..I_p`. `i_r > i_d` means the window is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TopJobWindow {
    pub job: usize,
    pub release: usize,
    pub deadline: usize,
    pub i_r: usize,
    pub i_d: usize,
}

impl TopJobWindow {
    pub fn is_empty(&self) -> bool {
        self.i_r > self.i_d
    }
}

/// `r_j` is the first slot after the interval of the latest scheduled bottom
/// predecessor, `d_j` the last slot before the interval of the earliest
/// scheduled bottom successor.
pub fn compute_windows(
    inst: &Instance,
    bottom: &[(usize, usize)],
    fam: &IntervalFamily,
    ell_star: usize,
    top: &[usize],
) -> Vec<TopJobWindow> {
    let p = 1usize << ell_star;
    let (start, end) = fam.root();
    top.iter()
        .map(|&j| {
            let latest_pred = bottom
                .iter()
                .filter(|(b, _)| inst.precedes(*b, j))
                .map(|&(_, t)| t)
                .max();
            let earliest_succ = bottom
                .iter()
                .filter(|(b, _)| inst.precedes(j, *b))
                .map(|&(_, t)| t)
                .min();
            let i_r = latest_pred.map_or(1, |t| fam.locate(ell_star, t) + 2);
            let i_d = earliest_succ.map_or(p, |t| fam.locate(ell_star, t));
            let release = if i_r <= p {
                fam.interval(ell_star, i_r - 1).0
            } else {
                end + 1
            };
            let deadline = if i_d >= 1 {
                fam.interval(ell_star, i_d - 1).1
            } else {
                start - 1
            };
            TopJobWindow {
                job: j,
                release,
                deadline,
                i_r,
                i_d,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopMatching {
    /// `(job, i)` with `i` the 1-based interval index.
    pub assignment: Vec<(usize, usize)>,
    pub discarded: Vec<usize>,
}

impl TopMatching {
    /// Places matched jobs into the earliest free slots of their interval.
    /// `caps[t - start]` is the free capacity of slot `t`.
    pub fn witness_slots(
        &self,
        fam: &IntervalFamily,
        ell_star: usize,
        caps: &SlotCapacity,
    ) -> Vec<(usize, usize)> {
        let mut free = caps.caps.clone();
        let mut out = Vec::new();
        for &(j, i) in &self.assignment {
            let (a, b) = fam.interval(ell_star, i - 1);
            let t = (a..=b)
                .find(|&t| free[t - caps.start] > 0)
                .expect("matching respects interval capacity");
            free[t - caps.start] -= 1;
            out.push((j, t));
        }
        out
    }
}

/// Maximum capacitated matching of jobs to intervals `i_r..=i_d` by augmenting
/// paths, jobs taken in increasing id. `interval_caps[i - 1]` is `cap(I_i)`.
pub fn top_matching(windows: &[TopJobWindow], interval_caps: &[usize]) -> TopMatching {
    let p = interval_caps.len();
    let mut order: Vec<usize> = (0..windows.len()).collect();
    order.sort_by_key(|&w| windows[w].job);
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); p + 1];
    let mut matched: Vec<Option<usize>> = vec![None; windows.len()];

    fn augment(
        w: usize,
        windows: &[TopJobWindow],
        caps: &[usize],
        holders: &mut Vec<Vec<usize>>,
        matched: &mut Vec<Option<usize>>,
        seen: &mut Vec<bool>,
    ) -> bool {
        let p = caps.len();
        let (lo, hi) = (windows[w].i_r.max(1), windows[w].i_d.min(p));
        for i in lo..=hi {
            if seen[i] || caps[i - 1] == 0 {
                continue;
            }
            seen[i] = true;
            if holders[i].len() < caps[i - 1] {
                holders[i].push(w);
                matched[w] = Some(i);
                return true;
            }
            for slot in 0..holders[i].len() {
                let other = holders[i][slot];
                if augment(other, windows, caps, holders, matched, seen) {
                    holders[i][slot] = w;
                    matched[w] = Some(i);
                    return true;
                }
            }
        }
        false
    }

    for &w in &order {
        let mut seen = vec![false; p + 1];
        augment(
            w,
            windows,
            interval_caps,
            &mut holders,
            &mut matched,
            &mut seen,
        );
    }
    let mut assignment = Vec::new();
    let mut discarded = Vec::new();
    for &w in &order {
        match matched[w] {
            Some(i) => assignment.push((windows[w].job, i)),
            None => discarded.push(windows[w].job),
        }
    }
    TopMatching {
        assignment,
        discarded,
    }
}

/// Free capacity of slots `start..start + caps.len()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotCapacity {
    pub start: usize,
    pub caps: Vec<usize>,
}

impl SlotCapacity {
    pub fn get(&self, t: usize) -> usize {
        if t < self.start {
            return 0;
        }
        self.caps.get(t - self.start).copied().unwrap_or(0)
    }

    pub fn end(&self) -> usize {
        self.start + self.caps.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdfOutcome {
    pub assignment: Vec<(usize, usize)>,
    pub discarded: Vec<usize>,
}

impl EdfOutcome {
    pub fn slot_of(&self, job: usize) -> Option<usize> {
        self.assignment
            .iter()
            .find(|(j, _)| *j == job)
            .map(|&(_, t)| t)
    }
}

/// Earliest deadline first over the slots of `caps`. A job is available at
/// `t` when `r_j ≤ t ≤ d_j` and every input predecessor ran before `t` or was
/// discarded; unplaced jobs are discarded at their deadline.
pub fn edf_schedule(
    inst: &Instance,
    windows: &[TopJobWindow],
    caps: &SlotCapacity,
) -> Result<EdfOutcome, RoundingError> {
    for a in windows {
        for b in windows {
            if inst.precedes(a.job, b.job) && (a.release > b.release || a.deadline > b.deadline) {
                return Err(RoundingError::InconsistentWindows {
                    before: a.job,
                    after: b.job,
                });
            }
        }
    }
    let mut order: Vec<&TopJobWindow> = windows.iter().collect();
    order.sort_by_key(|w| (w.deadline, w.job));
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Open,
        At(usize),
        Dropped,
    }
    let mut state = vec![State::Open; order.len()];
    let preds: Vec<Vec<usize>> = order
        .iter()
        .map(|w| {
            (0..order.len())
                .filter(|&x| inst.precedes(order[x].job, w.job))
                .collect()
        })
        .collect();
    for t in caps.start..=caps.end() {
        for _ in 0..caps.get(t) {
            let pick = (0..order.len()).find(|&x| {
                state[x] == State::Open
                    && order[x].release <= t
                    && t <= order[x].deadline
                    && preds[x].iter().all(|&p| match state[p] {
                        State::At(s) => s < t,
                        State::Dropped => true,
                        State::Open => false,
                    })
            });
            match pick {
                Some(x) => state[x] = State::At(t),
                None => break,
            }
        }
        for x in 0..order.len() {
            if state[x] == State::Open && order[x].deadline == t {
                state[x] = State::Dropped;
            }
        }
    }
    let mut out = EdfOutcome {
        assignment: Vec::new(),
        discarded: Vec::new(),
    };
    for (x, w) in order.iter().enumerate() {
        match state[x] {
            State::At(t) => out.assignment.push((w.job, t)),
            // windows outside the slot range never reach their deadline step
            State::Open | State::Dropped => out.discarded.push(w.job),
        }
    }
    out.assignment.sort_unstable();
    out.discarded.sort_unstable();
    Ok(out)
}

/// Sub-blocks `[a, b]` of the given intervals that break the non-busy bound:
/// some job whose window covers the block is discarded or runs after `b`, yet
/// more than `chain_bound` slots of the block are not full.
pub fn nonbusy_violations(
    windows: &[TopJobWindow],
    caps: &SlotCapacity,
    outcome: &EdfOutcome,
    intervals: &[(usize, usize)],
    chain_bound: usize,
) -> Vec<(usize, usize)> {
    let mut load = vec![0usize; caps.caps.len()];
    for &(_, t) in &outcome.assignment {
        load[t - caps.start] += 1;
    }
    let nonbusy = |t: usize| load[t - caps.start] < caps.get(t);
    let mut bad = Vec::new();
    for &(lo, hi) in intervals {
        for a in lo..=hi {
            for b in a..=hi {
                let witnessed = windows.iter().any(|w| {
                    w.release <= a
                        && b <= w.deadline
                        && outcome.slot_of(w.job).is_none_or(|s| s > b)
                });
                if witnessed && (a..=b).filter(|&t| nonbusy(t)).count() > chain_bound {
                    bad.push((a, b));
                }
            }
        }
    }
    bad
}

/// Places each discarded job alone in a fresh slot right before its earliest
/// successor (or at the end), shifting later slots by one.
pub fn insert_discarded(
    inst: &Instance,
    sched: &PartialSchedule,
) -> Result<PartialSchedule, RoundingError> {
    let n = inst.n();
    let mut slot: Vec<Option<usize>> = (0..n).map(|j| sched.slot(j)).collect();
    let mut horizon = sched.horizon().max(sched.makespan());
    let discarded: BTreeSet<usize> = sched.discarded().into_iter().collect();
    for j in inst.topological_order() {
        if !discarded.contains(&j) {
            continue;
        }
        let latest_pred = inst
            .predecessors(j)
            .iter()
            .filter_map(|p| slot[p])
            .max()
            .unwrap_or(0);
        let t_star = inst
            .successors(j)
            .iter()
            .filter_map(|s| slot[s])
            .min()
            .map_or(horizon, |t| t - 1);
        if latest_pred > t_star {
            return Err(RoundingError::Internal(format!(
                "no insertion point for job {j}: predecessor at {latest_pred}, successor at {}",
                t_star + 1
            )));
        }
        for s in slot.iter_mut().flatten() {
            if *s > t_star {
                *s += 1;
            }
        }
        slot[j] = Some(t_star + 1);
        horizon += 1;
    }
    let mut out = PartialSchedule::new(n, horizon);
    for (j, s) in slot.iter().enumerate() {
        match s {
            Some(t) => out.assign(j, *t),
            None => {
                return Err(RoundingError::Internal(format!(
                    "job {j} neither placed nor discarded"
                )))
            }
        }
    }
    Ok(out)
}

/// Smallest `T` with a nonempty level-`level` lift, and the lift solution there.
pub fn lift_horizon(
    inst: &Instance,
    level: usize,
) -> Result<(usize, HierarchyVector), RoundingError> {
    let n = inst.n();
    let lo = n.div_ceil(inst.m()).max(inst.longest_chain()).max(1);
    let hi = n.max(lo);
    let solve = |t: usize| -> Result<Option<HierarchyVector>, RoundingError> {
        let ctx = LiftContext::new(inst, t, level);
        Ok(lift::solve_lift(&ctx, level, &Fixings::default())?)
    };
    // galloping upward from the lower bound keeps the models small: the
    // answer is usually within a slot or two of `lo`
    let (mut a, mut step) = (lo, 1);
    let mut best = loop {
        let t = (a + step - 1).min(hi);
        match solve(t)? {
            Some(y) => break (t, y),
            None if t == hi => return Err(RoundingError::NoFeasibleHorizon(hi)),
            None => {
                a = t + 1;
                step *= 2;
            }
        }
    };
    let mut b = best.0;
    while a < b {
        let mid = (a + b) / 2;
        match solve(mid)? {
            Some(y) => {
                best = (mid, y);
                b = mid;
            }
            None => a = mid + 1,
        }
    }
    Ok(best)
}

/// Recursion state shared by every interval of one rounding run.
pub struct Rounder<'a> {
    inst: &'a Instance,
    params: RoundingParams,
    t_lift: usize,
    log2_t: usize,
    stats: RoundingStats,
}

impl<'a> Rounder<'a> {
    /// Slots after `t_lift` exist only to make the family a power of two and
    /// have no capacity.
    pub fn new(inst: &'a Instance, params: &RoundingParams, t_lift: usize, t_pad: usize) -> Self {
        Rounder {
            inst,
            params: params.clone(),
            t_lift,
            log2_t: ceil_log2(t_pad),
            stats: RoundingStats::default(),
        }
    }

    pub fn stats(&self) -> &RoundingStats {
        &self.stats
    }

    pub fn into_stats(self) -> RoundingStats {
        self.stats
    }

    fn capacity(&self, t: usize) -> usize {
        if t >= 1 && t <= self.t_lift {
            self.inst.m()
        } else {
            0
        }
    }

    fn drop_job(&mut self, job: usize, depth: usize, reason: DiscardReason) {
        self.stats
            .discards
            .push(DiscardRecord { job, depth, reason });
    }

    fn is_base_case(&self, fam: &IntervalFamily) -> bool {
        let k2 = self.params.k * self.params.k;
        match self.params.mode {
            Mode::Theoretical => fam.depth() <= k2,
            Mode::Practical => fam.len() <= self.params.base_case_threshold || fam.depth() < k2,
        }
    }

    /// Places `jobs` (each fully assigned to the root of `fam`) inside it,
    /// recording discards. Returns `(job, slot)` pairs.
    pub fn schedule_interval(
        &mut self,
        y: &HierarchyVector,
        fam: &IntervalFamily,
        jobs: &[usize],
        depth: usize,
    ) -> Result<Vec<(usize, usize)>, RoundingError> {
        if jobs.is_empty() {
            return Ok(Vec::new());
        }
        if self.is_base_case(fam) {
            return self.base_case(y, fam, jobs, depth);
        }
        // step 1
        let cb = break_chains(self.inst, y, fam, jobs, &self.params)?;
        self.stats.conditionings += cb.conditionings;
        self.stats.resolves += cb.resolves;
        for &j in &cb.discarded {
            self.drop_job(j, depth, DiscardReason::ChainBreaking);
        }
        // step 2
        let mid = choose_middle_level(self.inst, &cb.y, fam, &cb.jobs, &self.params, self.log2_t)?;
        if mid.fallback {
            self.stats.warnings.push(format!(
                "no block satisfied the middle-level conditions on {:?} (alphas {:?}); used index {}",
                fam.root(),
                mid.alphas,
                mid.index
            ));
        }
        for &j in &mid.middle {
            self.drop_job(j, depth, DiscardReason::Middle);
        }
        // step 3
        let own = owners(&cb.y, fam, &mid.bottom)?;
        let mut placed = Vec::new();
        for idx in 0..1usize << mid.ell_star {
            let sub: Vec<usize> = mid
                .bottom
                .iter()
                .zip(&own)
                .filter(|(_, &(level, at))| at >> (level - mid.ell_star) == idx)
                .map(|(&j, _)| j)
                .collect();
            if sub.is_empty() {
                continue;
            }
            let child = fam.subfamily(mid.ell_star, idx);
            placed.extend(self.schedule_interval(&cb.y, &child, &sub, depth + 1)?);
        }
        // step 4
        if !mid.top.is_empty() {
            let (start, end) = fam.root();
            let mut caps = SlotCapacity {
                start,
                caps: (start..=end).map(|t| self.capacity(t)).collect(),
            };
            for &(_, t) in &placed {
                caps.caps[t - start] -= 1;
            }
            let windows = compute_windows(self.inst, &placed, fam, mid.ell_star, &mid.top);
            let interval_caps: Vec<usize> = fam
                .intervals(mid.ell_star)
                .iter()
                .map(|&(a, b)| (a..=b).map(|t| caps.get(t)).sum())
                .collect();
            let matching = top_matching(&windows, &interval_caps);
            for &j in &matching.discarded {
                self.drop_job(j, depth, DiscardReason::Matching);
            }
            let kept: Vec<TopJobWindow> = windows
                .iter()
                .filter(|w| matching.assignment.iter().any(|(j, _)| *j == w.job))
                .copied()
                .collect();
            let edf = edf_schedule(self.inst, &kept, &caps)?;
            for &j in &edf.discarded {
                self.drop_job(j, depth, DiscardReason::Edf);
            }
            placed.extend(edf.assignment);
        }
        Ok(placed)
    }

    fn base_case(
        &mut self,
        y: &HierarchyVector,
        fam: &IntervalFamily,
        jobs: &[usize],
        depth: usize,
    ) -> Result<Vec<(usize, usize)>, RoundingError> {
        if self.params.conditioning_base_case {
            if let Some(placed) = self.condition_to_integral(y, fam, jobs)? {
                return Ok(placed);
            }
        }
        let (start, end) = fam.root();
        let len = fam.len();
        let capacity: Vec<usize> = (start..=end).map(|t| self.capacity(t)).collect();
        let mut active: Vec<usize> = jobs.to_vec();
        active.sort_unstable();
        let mut fell_back = false;
        loop {
            let sub = self.inst.induced(&active);
            let c = SlotConstraints {
                capacity: capacity.clone(),
                windows: vec![(1, len); active.len()],
            };
            match exact::feasible_with_constraints(&sub, len, &c, self.params.exact_budget) {
                Feasibility::Yes(s) => {
                    if fell_back {
                        self.stats.base_case_fallbacks += 1;
                    }
                    return Ok(active
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| (j, s.slot(i).expect("witness is complete") + start - 1))
                        .collect());
                }
                verdict => {
                    if verdict == Feasibility::Unknown {
                        self.stats.warnings.push(format!(
                            "exact search budget exhausted on {:?} with {} jobs",
                            fam.root(),
                            active.len()
                        ));
                    }
                    let victim = *active
                        .iter()
                        .max_by_key(|&&j| (y.supp(j).last().copied().unwrap_or(0), j))
                        .expect("an empty job set is always feasible");
                    active.retain(|&j| j != victim);
                    self.drop_job(victim, depth, DiscardReason::BaseCase);
                    fell_back = true;
                }
            }
        }
    }

    /// Conditions on single slots until every job is integral. `None` when a
    /// conditioning fails or the integral assignment is not a valid schedule.
    fn condition_to_integral(
        &mut self,
        y: &HierarchyVector,
        fam: &IntervalFamily,
        jobs: &[usize],
    ) -> Result<Option<Vec<(usize, usize)>>, RoundingError> {
        let mut y = y.clone();
        let mut sorted = jobs.to_vec();
        sorted.sort_unstable();
        for &j in &sorted {
            while y.supp(j).len() > 1 {
                let mut moved = false;
                for t in y.supp(j) {
                    let c = y
                        .condition_on_interval_or_resolve(j, (t, t))
                        .map_err(|source| RoundingError::Conditioning {
                            job: j,
                            interval: (t, t),
                            source,
                        })?;
                    match c {
                        Conditioned::Direct(z) => {
                            y = z;
                            self.stats.conditionings += 1;
                        }
                        Conditioned::Resolved(z) => {
                            y = z;
                            self.stats.conditionings += 1;
                            self.stats.resolves += 1;
                        }
                        Conditioned::Failed => continue,
                    }
                    moved = true;
                    break;
                }
                if !moved {
                    return Ok(None);
                }
            }
        }
        let placed: Vec<(usize, usize)> = sorted.iter().map(|&j| (j, y.supp(j)[0])).collect();
        let (start, end) = fam.root();
        let mut load = vec![0usize; end - start + 1];
        for &(_, t) in &placed {
            load[t - start] += 1;
            if load[t - start] > self.capacity(t) {
                return Ok(None);
            }
        }
        for &(a, ta) in &placed {
            for &(b, tb) in &placed {
                if self.inst.precedes(a, b) && ta >= tb {
                    return Ok(None);
                }
            }
        }
        Ok(Some(placed))
    }
}

#[derive(Debug, Clone)]
pub struct RoundingOutcome {
    pub schedule: PartialSchedule,
    pub stats: RoundingStats,
}

/// Full pipeline: least lift-feasible `T`, recursive rounding on the padded
/// family `[1, 2^⌈log₂T⌉]`, then reinsertion of discarded jobs.
///
/// The reported makespan is the final horizon `T + |discarded|`.
pub fn round_full(
    inst: &Instance,
    params: &RoundingParams,
) -> Result<RoundingOutcome, RoundingError> {
    let n = inst.n();
    if n == 0 {
        return Ok(RoundingOutcome {
            schedule: PartialSchedule::new(0, 0),
            stats: RoundingStats {
                level: params.level,
                k: params.k,
                delta: params.delta.to_string(),
                ..RoundingStats::default()
            },
        });
    }
    let (t_lift, y) = lift_horizon(inst, params.level)?;
    let t_pad = t_lift.next_power_of_two();
    let mut params = params.clone();
    if params.mode == Mode::Theoretical {
        params.k = theoretical_k(params.epsilon, params.c1, inst.m(), t_pad);
        params.delta = theoretical_delta(params.epsilon, params.k, inst.m(), t_pad);
    }
    let fam = IntervalFamily::new(1, t_pad);
    let mut rounder = Rounder::new(inst, &params, t_lift, t_pad);
    let all: Vec<usize> = (0..n).collect();
    let placed = rounder.schedule_interval(&y, &fam, &all, 0)?;
    let mut stats = rounder.into_stats();

    let mut partial = PartialSchedule::new(n, t_lift);
    for &(j, t) in &placed {
        if partial.slot(j).is_some() {
            return Err(RoundingError::Internal(format!("job {j} placed twice")));
        }
        partial.assign(j, t);
    }
    for d in &stats.discards {
        if partial.slot(d.job).is_some() || partial.is_discarded(d.job) {
            return Err(RoundingError::Internal(format!(
                "job {} both kept and discarded",
                d.job
            )));
        }
        partial.discard(d.job);
    }
    if let Some(j) = (0..n).find(|&j| partial.slot(j).is_none() && !partial.is_discarded(j)) {
        return Err(RoundingError::Internal(format!(
            "job {j} was silently dropped"
        )));
    }
    let verdict = validate_schedule(inst, &partial);
    if !verdict.is_ok() {
        return Err(RoundingError::Internal(format!(
            "rounded schedule is invalid: {}",
            verdict.violations[0]
        )));
    }
    let schedule = insert_discarded(inst, &partial)?;
    stats.tally();
    stats.t = t_lift;
    stats.t_pad = t_pad;
    stats.makespan = schedule.horizon();
    stats.level = params.level;
    stats.k = params.k;
    stats.delta = params.delta.to_string();
    Ok(RoundingOutcome { schedule, stats })
}

/// `log₂T*·2mk²·2^{k²}/δ` for these parameters, as a float for reporting.
pub fn conditioning_budget(m: usize, k: usize, delta: &Q) -> f64 {
    let k2 = (k * k) as u32;
    let pow = num_bigint::BigInt::from(2u8).pow(k2);
    let v = Q::from_integer(pow) * q(2 * m as i64 * (k * k) as i64) / delta;
    if delta.is_zero() {
        f64::INFINITY
    } else {
        v.to_f64().unwrap_or(f64::INFINITY)
    }
}
