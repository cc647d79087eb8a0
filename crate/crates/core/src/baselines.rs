//! Graham list scheduling and the Coffman–Graham labelling.

use crate::instance::{Instance, PartialSchedule};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorityError {
    #[error("priority list has {found} entries for {expected} jobs")]
    WrongLength { expected: usize, found: usize },
    #[error("job {0} missing from or repeated in the priority list")]
    NotPermutation(usize),
    #[error("job {after} is listed before its predecessor {before}")]
    NotTopological { before: usize, after: usize },
}

/// Greedy list schedule: each slot takes up to `m` available jobs (all
/// predecessors in strictly earlier slots) in priority order.
pub fn graham_list(inst: &Instance, priority: &[usize]) -> Result<PartialSchedule, PriorityError> {
    let n = inst.n();
    if priority.len() != n {
        return Err(PriorityError::WrongLength {
            expected: n,
            found: priority.len(),
        });
    }
    let mut rank = vec![usize::MAX; n];
    for (r, &j) in priority.iter().enumerate() {
        if j >= n || rank[j] != usize::MAX {
            return Err(PriorityError::NotPermutation(j.min(n)));
        }
        rank[j] = r;
    }
    for (u, v) in inst.closure_pairs() {
        if rank[u] > rank[v] {
            return Err(PriorityError::NotTopological {
                before: u,
                after: v,
            });
        }
    }

    let mut sched = PartialSchedule::new(n, 0);
    let mut remaining_preds: Vec<usize> = (0..n).map(|j| inst.predecessors(j).len()).collect();
    let mut done = 0;
    let mut slot = 0;
    while done < n {
        slot += 1;
        let picked: Vec<usize> = priority
            .iter()
            .copied()
            .filter(|&j| sched.slot(j).is_none() && remaining_preds[j] == 0)
            .take(inst.m())
            .collect();
        for &j in &picked {
            sched.assign(j, slot);
        }
        // successors become available only from the next slot on
        for &j in &picked {
            for s in inst.successors(j).iter() {
                remaining_preds[s] -= 1;
            }
        }
        done += picked.len();
    }
    sched.set_horizon(slot);
    Ok(sched)
}

/// List schedule with the default priority (min-id topological order).
pub fn graham_default(inst: &Instance) -> PartialSchedule {
    graham_list(inst, &inst.topological_order()).expect("Kahn order is topological")
}

/// Coffman–Graham labels (1-based) computed on the transitive reduction.
///
/// Labels are handed out in increasing order; the next label goes to the
/// job, among those whose immediate successors are all labelled, whose
/// decreasingly sorted successor labels are lexicographically smallest.
pub fn coffman_graham_labels(inst: &Instance) -> Vec<usize> {
    let n = inst.n();
    let succ = inst.reduction_successors();
    let mut label = vec![0usize; n];
    for next in 1..=n {
        let mut best: Option<(usize, Vec<usize>)> = None;
        for j in 0..n {
            if label[j] != 0 || succ[j].iter().any(|&s| label[s] == 0) {
                continue;
            }
            let mut key: Vec<usize> = succ[j].iter().map(|&s| label[s]).collect();
            key.sort_unstable_by(|a, b| b.cmp(a));
            let better = match &best {
                None => true,
                Some((_, bk)) => lex_cmp(&key, bk) == Ordering::Less,
            };
            if better {
                best = Some((j, key));
            }
        }
        let (j, _) = best.expect("a DAG always has an unlabelled job with labelled successors");
        label[j] = next;
    }
    label
}

/// Lexicographic comparison where a proper prefix is smaller.
fn lex_cmp(a: &[usize], b: &[usize]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Coffman–Graham: list scheduling by decreasing label.
pub fn coffman_graham(inst: &Instance) -> PartialSchedule {
    let label = coffman_graham_labels(inst);
    let mut priority: Vec<usize> = (0..inst.n()).collect();
    priority.sort_by(|&a, &b| label[b].cmp(&label[a]));
    graham_list(inst, &priority).expect("decreasing labels give a topological order")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gap_instance, random_dag, validate_schedule};

    #[test]
    fn independent_jobs() {
        let inst = Instance::new(6, 2, &[]).unwrap();
        assert_eq!(graham_default(&inst).makespan(), 3);
    }

    #[test]
    fn gap_takes_two_slots_per_block() {
        let g = gap_instance(3, 2);
        assert_eq!(graham_default(&g).makespan(), 4);
        let rev: Vec<usize> = vec![3, 2, 1, 0, 7, 6, 5, 4];
        assert_eq!(graham_list(&g, &rev).unwrap().makespan(), 4);
    }

    #[test]
    fn rejects_bad_priorities() {
        let inst = Instance::new(3, 1, &[(0, 2)]).unwrap();
        assert!(matches!(
            graham_list(&inst, &[2, 1, 0]),
            Err(PriorityError::NotTopological {
                before: 0,
                after: 2
            })
        ));
        assert!(graham_list(&inst, &[0, 0, 1]).is_err());
        assert!(graham_list(&inst, &[0, 1]).is_err());
    }

    #[test]
    fn chain_under_coffman_graham() {
        let edges: Vec<_> = (1..6).map(|j| (j - 1, j)).collect();
        let c = Instance::new(6, 3, &edges).unwrap();
        assert_eq!(coffman_graham(&c).makespan(), 6);
    }

    #[test]
    fn labels_are_a_permutation_and_topological() {
        for seed in 0..30 {
            let inst = random_dag(11, 2, 0.3, seed);
            let label = coffman_graham_labels(&inst);
            let mut sorted = label.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (1..=11).collect::<Vec<_>>());
            for (u, v) in inst.closure_pairs() {
                assert!(label[u] > label[v]);
            }
        }
    }

    #[test]
    fn busy_or_blocked_dichotomy() {
        for seed in 0..40 {
            let inst = random_dag(12, 3, 0.25, seed);
            let s = graham_default(&inst);
            assert!(validate_schedule(&inst, &s).is_ok() && s.is_complete());
            let occ = s.occupancy();
            for t in 1..s.makespan() {
                if occ[t] < inst.m() {
                    // every job scheduled later has a predecessor at slot ≥ t
                    for (j, tj) in s.scheduled() {
                        if tj > t {
                            assert!(inst.predecessors(j).iter().any(|p| s.slot(p).unwrap() >= t));
                        }
                    }
                }
            }
        }
    }
}
