//! Exact optimal makespan by breadth-first search over down-sets.
//!
//! A state is the set of completed jobs (always closed under predecessors).
//! Layer `t` holds the states reachable after `t` slots. Each state is expanded
//! by the `min(cap, |available|)`-subsets of its available jobs: for unit jobs
//! an optimal schedule never leaves a machine idle while a job is available,
//! so smaller antichains need not be enumerated.

use crate::instance::{Instance, PartialSchedule};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

pub const DEFAULT_MAX_JOBS: usize = 20;
pub const DEFAULT_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("{n} jobs exceed the exact-search cap of {cap}")]
    TooManyJobs { n: usize, cap: usize },
    #[error("search budget exhausted after {expanded} expansions; optimum unknown")]
    BudgetExhausted { expanded: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Feasibility {
    Yes(PartialSchedule),
    No,
    Unknown,
}

impl Feasibility {
    pub fn is_yes(&self) -> bool {
        matches!(self, Feasibility::Yes(_))
    }
}

/// Per-job release/deadline (1-based, inclusive) and per-slot capacities for
/// a windowed feasibility question.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotConstraints {
    pub capacity: Vec<usize>,
    pub windows: Vec<(usize, usize)>,
}

impl SlotConstraints {
    pub fn unconstrained(inst: &Instance, horizon: usize) -> Self {
        SlotConstraints {
            capacity: vec![inst.m(); horizon],
            windows: vec![(1, horizon); inst.n()],
        }
    }
}

/// Minimum makespan and a witness schedule. `Err(BudgetExhausted)` is returned
/// instead of a possibly wrong value when the node budget runs out.
pub fn optimal_makespan(
    inst: &Instance,
    budget: usize,
) -> Result<(usize, PartialSchedule), ExactError> {
    check_size(inst, DEFAULT_MAX_JOBS)?;
    let n = inst.n();
    if n == 0 {
        return Ok((0, PartialSchedule::new(0, 0)));
    }
    let c = SlotConstraints::unconstrained(inst, n);
    match search(inst, n, &c, budget) {
        Outcome::Found(s) => Ok((s.makespan(), s)),
        Outcome::Exhausted(expanded) => Err(ExactError::BudgetExhausted { expanded }),
        Outcome::Infeasible => unreachable!("n slots always suffice"),
    }
}

/// Decision form: is there a complete schedule within `horizon` slots?
pub fn feasible_within(inst: &Instance, horizon: usize, budget: usize) -> Feasibility {
    if check_size(inst, DEFAULT_MAX_JOBS).is_err() {
        return Feasibility::Unknown;
    }
    let c = SlotConstraints::unconstrained(inst, horizon);
    feasible_with_constraints(inst, horizon, &c, budget)
}

/// Decision form with release times, deadlines and a capacity profile.
pub fn feasible_with_constraints(
    inst: &Instance,
    horizon: usize,
    c: &SlotConstraints,
    budget: usize,
) -> Feasibility {
    // bitmask states cap the windowed search at 64 jobs
    if check_size(inst, 64).is_err() {
        return Feasibility::Unknown;
    }
    assert_eq!(c.capacity.len(), horizon);
    assert_eq!(c.windows.len(), inst.n());
    if inst.n() == 0 {
        return Feasibility::Yes(PartialSchedule::new(0, horizon));
    }
    match search(inst, horizon, c, budget) {
        Outcome::Found(mut s) => {
            s.set_horizon(horizon);
            Feasibility::Yes(s)
        }
        Outcome::Infeasible => Feasibility::No,
        Outcome::Exhausted(_) => Feasibility::Unknown,
    }
}

fn check_size(inst: &Instance, cap: usize) -> Result<(), ExactError> {
    if inst.n() > cap {
        return Err(ExactError::TooManyJobs { n: inst.n(), cap });
    }
    Ok(())
}

enum Outcome {
    Found(PartialSchedule),
    Infeasible,
    Exhausted(usize),
}

struct Step {
    parent: u64,
    chosen: u64,
    slot: usize,
}

fn search(inst: &Instance, horizon: usize, c: &SlotConstraints, budget: usize) -> Outcome {
    let n = inst.n();
    let full: u64 = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let pred_mask: Vec<u64> = (0..n)
        .map(|j| inst.predecessors(j).iter().fold(0u64, |a, p| a | 1 << p))
        .collect();
    let tails = inst.tails();
    let m = inst.m();

    let lower_bound = |mask: u64| -> usize {
        let rem = n - mask.count_ones() as usize;
        let chain = (0..n)
            .filter(|&j| mask >> j & 1 == 0)
            .map(|j| tails[j])
            .max()
            .unwrap_or(0);
        rem.div_ceil(m).max(chain)
    };

    let mut steps: HashMap<u64, Step> = HashMap::new();
    let mut seen: HashSet<u64> = HashSet::new();
    seen.insert(0);
    let mut frontier = vec![0u64];
    let mut expanded = 0usize;

    for t in 0..horizon {
        let slot = t + 1;
        let cap = c.capacity[t];
        let mut next: Vec<u64> = Vec::new();
        let mut in_next: HashSet<u64> = HashSet::new();
        frontier.sort_unstable();
        for &mask in &frontier {
            if t + lower_bound(mask) > horizon {
                continue;
            }
            // a remaining job whose deadline has passed kills the state
            if (0..n).any(|j| mask >> j & 1 == 0 && c.windows[j].1 < slot) {
                continue;
            }
            expanded += 1;
            if expanded > budget {
                return Outcome::Exhausted(expanded);
            }
            let avail: Vec<usize> = (0..n)
                .filter(|&j| {
                    mask >> j & 1 == 0
                        && pred_mask[j] & !mask == 0
                        && c.windows[j].0 <= slot
                        && slot <= c.windows[j].1
                })
                .collect();
            let k = cap.min(avail.len());
            if k == 0 {
                if in_next.insert(mask) {
                    next.push(mask);
                }
                continue;
            }
            let mut found = None;
            for_each_subset(&avail, k, |chosen| {
                let nm = mask | chosen;
                if seen.insert(nm) {
                    steps.insert(
                        nm,
                        Step {
                            parent: mask,
                            chosen,
                            slot,
                        },
                    );
                    if nm == full {
                        found = Some(nm);
                        return false;
                    }
                    in_next.insert(nm);
                    next.push(nm);
                }
                true
            });
            if let Some(nm) = found {
                return Outcome::Found(rebuild(n, nm, &steps));
            }
        }
        if next.is_empty() {
            return Outcome::Infeasible;
        }
        frontier = next;
    }
    Outcome::Infeasible
}

fn rebuild(n: usize, mut mask: u64, steps: &HashMap<u64, Step>) -> PartialSchedule {
    let mut sched = PartialSchedule::new(n, 0);
    let mut horizon = 0;
    while mask != 0 {
        let st = &steps[&mask];
        horizon = horizon.max(st.slot);
        for j in 0..n {
            if st.chosen >> j & 1 == 1 {
                sched.assign(j, st.slot);
            }
        }
        mask = st.parent;
    }
    sched.set_horizon(horizon);
    sched
}

/// Visits the `k`-subsets of `items` in lexicographic order as bitmasks; stops when `f` returns false.
fn for_each_subset(items: &[usize], k: usize, mut f: impl FnMut(u64) -> bool) {
    let len = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mask = idx.iter().fold(0u64, |a, &i| a | 1 << items[i]);
        if !f(mask) {
            return;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == i - 1 + len - k {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}
