//! Scheduling instances: unit jobs, `m` identical machines and a precedence DAG.
//!
//! Jobs are dense ids `0..n`. The transitive closure of the precedence
//! relation is materialized as one bit row per job, so `δ⁺(j)`, `δ⁻(j)` and
//! degree queries inside arbitrary job subsets are cheap.

mod generate;
mod io;
mod schedule;

pub use generate::{gap_instance, layered_dag, pad_to_power_of_two, random_dag};
pub use io::{parse_instance, parse_schedule, write_instance, write_schedule, FormatError};
pub use schedule::{validate_schedule, PartialSchedule, Placement, Verdict, Violation};

use crate::bitset::JobSet;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("machine count must be at least 1")]
    NoMachines,
    #[error("edge ({0}, {1}) refers to a job outside 0..{2}")]
    JobOutOfRange(usize, usize, usize),
    #[error("self loop on job {0}")]
    SelfLoop(usize),
    #[error("precedence relation has a cycle: {witness:?}")]
    Cycle { witness: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    n: usize,
    m: usize,
    /// Edges as supplied (deduplicated, sorted).
    edges: Vec<(usize, usize)>,
    succ: Vec<JobSet>,
    pred: Vec<JobSet>,
}

impl Instance {
    pub fn new(n: usize, m: usize, edges: &[(usize, usize)]) -> Result<Self, InstanceError> {
        if m == 0 {
            return Err(InstanceError::NoMachines);
        }
        let mut edges = edges.to_vec();
        edges.sort_unstable();
        edges.dedup();
        let succ = closure_rows(n, &edges)?;
        let mut pred = vec![JobSet::new(n); n];
        for (u, row) in succ.iter().enumerate() {
            for v in row.iter() {
                pred[v].insert(u);
            }
        }
        Ok(Instance {
            n,
            m,
            edges,
            succ,
            pred,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `u ≺ v` in the transitive closure.
    #[inline]
    pub fn precedes(&self, u: usize, v: usize) -> bool {
        self.succ[u].contains(v)
    }

    #[inline]
    pub fn comparable(&self, u: usize, v: usize) -> bool {
        self.precedes(u, v) || self.precedes(v, u)
    }

    /// `δ⁺(j)`: all jobs depending on `j`.
    pub fn successors(&self, j: usize) -> &JobSet {
        &self.succ[j]
    }

    /// `δ⁻(j)`: all jobs `j` depends on.
    pub fn predecessors(&self, j: usize) -> &JobSet {
        &self.pred[j]
    }

    /// All pairs of the closure, sorted.
    pub fn closure_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, row) in self.succ.iter().enumerate() {
            out.extend(row.iter().map(|v| (u, v)));
        }
        out
    }

    /// `|δ(j) ∩ within|` where `within` is a job set.
    pub fn degree_within(&self, j: usize, within: &JobSet) -> usize {
        self.succ[j].intersection_len(within) + self.pred[j].intersection_len(within)
    }

    pub fn out_degree_within(&self, j: usize, within: &JobSet) -> usize {
        self.succ[j].intersection_len(within)
    }

    /// `Δ(J′)`: maximum number of related jobs inside `J′`, counting the job itself.
    /// Zero for the empty set.
    pub fn max_degree(&self, jobs: &JobSet) -> usize {
        jobs.iter()
            .map(|j| self.degree_within(j, jobs) + 1)
            .max()
            .unwrap_or(0)
    }

    /// Kahn's method with a min-id tie-break.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = (0..self.n).map(|j| self.pred[j].len()).collect();
        let mut ready: std::collections::BTreeSet<usize> =
            (0..self.n).filter(|&j| indeg[j] == 0).collect();
        let mut order = Vec::with_capacity(self.n);
        while let Some(j) = ready.pop_first() {
            order.push(j);
            for v in self.succ[j].iter() {
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    ready.insert(v);
                }
            }
        }
        order
    }

    /// Longest chain ending at each job (counting the job).
    pub fn heads(&self) -> Vec<usize> {
        let mut head = vec![1usize; self.n];
        for j in self.topological_order() {
            for p in self.pred[j].iter() {
                head[j] = head[j].max(head[p] + 1);
            }
        }
        head
    }

    /// Longest chain starting at each job (counting the job).
    pub fn tails(&self) -> Vec<usize> {
        let mut tail = vec![1usize; self.n];
        for j in self.topological_order().into_iter().rev() {
            for s in self.succ[j].iter() {
                tail[j] = tail[j].max(tail[s] + 1);
            }
        }
        tail
    }

    /// Number of jobs on a maximum chain of `≺`.
    pub fn longest_chain(&self) -> usize {
        self.heads().into_iter().max().unwrap_or(0)
    }

    /// Longest chain inside a subset of jobs.
    pub fn longest_chain_within(&self, jobs: &JobSet) -> usize {
        let mut best = 0;
        let mut head = vec![0usize; self.n];
        for j in self.topological_order() {
            if !jobs.contains(j) {
                continue;
            }
            head[j] = 1 + self.pred[j]
                .iter()
                .filter(|&p| jobs.contains(p))
                .map(|p| head[p])
                .max()
                .unwrap_or(0);
            best = best.max(head[j]);
        }
        best
    }

    /// Sub-instance induced by `jobs`, relabelled `0..jobs.len()` in the given order.
    pub fn induced(&self, jobs: &[usize]) -> Instance {
        let mut edges = Vec::new();
        for (a, &u) in jobs.iter().enumerate() {
            for (b, &v) in jobs.iter().enumerate() {
                if self.precedes(u, v) {
                    edges.push((a, b));
                }
            }
        }
        Instance::new(jobs.len(), self.m, &edges).expect("induced order of a DAG is acyclic")
    }

    /// Immediate-successor lists of the transitive reduction.
    pub fn reduction_successors(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|u| {
                self.succ[u]
                    .iter()
                    .filter(|&v| !self.succ[u].iter().any(|w| self.precedes(w, v)))
                    .collect()
            })
            .collect()
    }
}

/// Transitive closure of `prec` over jobs `0..n`, as a sorted pair list.
pub fn transitive_closure(
    prec: &[(usize, usize)],
    n: usize,
) -> Result<Vec<(usize, usize)>, InstanceError> {
    let rows = closure_rows(n, prec)?;
    let mut out = Vec::new();
    for (u, row) in rows.iter().enumerate() {
        out.extend(row.iter().map(|v| (u, v)));
    }
    Ok(out)
}

fn closure_rows(n: usize, edges: &[(usize, usize)]) -> Result<Vec<JobSet>, InstanceError> {
    let mut out_adj = vec![Vec::new(); n];
    let mut indeg = vec![0usize; n];
    for &(u, v) in edges {
        if u >= n || v >= n {
            return Err(InstanceError::JobOutOfRange(u, v, n));
        }
        if u == v {
            return Err(InstanceError::SelfLoop(u));
        }
        out_adj[u].push(v);
        indeg[v] += 1;
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in &out_adj[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                queue.push_back(v);
            }
        }
    }
    if order.len() < n {
        return Err(InstanceError::Cycle {
            witness: find_cycle(n, &out_adj, &indeg),
        });
    }
    let mut rows = vec![JobSet::new(n); n];
    for &u in order.iter().rev() {
        let mut row = JobSet::new(n);
        for &v in &out_adj[u] {
            row.insert(v);
            row.union_with(&rows[v]);
        }
        rows[u] = row;
    }
    Ok(rows)
}

/// Jobs left over by Kahn's method each keep a leftover predecessor, so walking
/// predecessors inside that set must close a cycle.
fn find_cycle(n: usize, out_adj: &[Vec<usize>], indeg: &[usize]) -> Vec<usize> {
    let stuck: Vec<bool> = (0..n).map(|j| indeg[j] > 0).collect();
    let mut stuck_pred = vec![usize::MAX; n];
    for u in 0..n {
        if !stuck[u] {
            continue;
        }
        for &v in &out_adj[u] {
            if stuck[v] && stuck_pred[v] == usize::MAX {
                stuck_pred[v] = u;
            }
        }
    }
    let start = (0..n).find(|&j| stuck[j]).expect("a leftover job exists");
    let mut pos = vec![usize::MAX; n];
    let mut path = Vec::new();
    let mut cur = start;
    while pos[cur] == usize::MAX {
        pos[cur] = path.len();
        path.push(cur);
        cur = stuck_pred[cur];
    }
    let mut cycle = path[pos[cur]..].to_vec();
    cycle.reverse();
    cycle
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn floyd_warshall(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
        let mut r = vec![vec![false; n]; n];
        for &(u, v) in edges {
            r[u][v] = true;
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if r[i][k] && r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
        let mut out = Vec::new();
        for (i, row) in r.iter().enumerate() {
            for (j, &b) in row.iter().enumerate() {
                if b {
                    out.push((i, j));
                }
            }
        }
        out
    }

    #[test]
    fn chain_closure() {
        assert_eq!(
            transitive_closure(&[(0, 1), (1, 2)], 3).unwrap(),
            vec![(0, 1), (0, 2), (1, 2)]
        );
    }

    #[test]
    fn empty_closure() {
        assert!(transitive_closure(&[], 4).unwrap().is_empty());
    }

    #[test]
    fn closure_matches_floyd_warshall() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let perm = {
                let mut p: Vec<usize> = (0..10).collect();
                for i in (1..10).rev() {
                    p.swap(i, rng.gen_range(0..=i));
                }
                p
            };
            let mut edges = Vec::new();
            for a in 0..10 {
                for b in a + 1..10 {
                    if rng.gen_bool(0.25) {
                        edges.push((perm[a], perm[b]));
                    }
                }
            }
            assert_eq!(
                transitive_closure(&edges, 10).unwrap(),
                floyd_warshall(10, &edges)
            );
        }
    }

    #[test]
    fn cycle_is_rejected_with_witness() {
        let err = Instance::new(4, 1, &[(0, 1), (1, 2), (2, 1), (2, 3)]).unwrap_err();
        match err {
            InstanceError::Cycle { witness } => {
                assert!(!witness.is_empty());
                for w in witness.windows(2) {
                    assert!([(1, 2), (2, 1)].contains(&(w[0], w[1])));
                }
                let (first, last) = (witness[0], *witness.last().unwrap());
                assert!([(1, 2), (2, 1)].contains(&(last, first)));
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn structural_errors() {
        assert_eq!(
            Instance::new(2, 0, &[]).unwrap_err(),
            InstanceError::NoMachines
        );
        assert_eq!(
            Instance::new(2, 1, &[(1, 1)]).unwrap_err(),
            InstanceError::SelfLoop(1)
        );
        assert!(matches!(
            Instance::new(2, 1, &[(0, 2)]).unwrap_err(),
            InstanceError::JobOutOfRange(0, 2, 2)
        ));
    }

    #[test]
    fn longest_chain_examples() {
        let chain = Instance::new(5, 2, &[(0, 1), (1, 2), (2, 3), (3, 4)]).unwrap();
        assert_eq!(chain.longest_chain(), 5);
        let anti = Instance::new(7, 2, &[]).unwrap();
        assert_eq!(anti.longest_chain(), 1);
        assert_eq!(gap_instance(3, 4).longest_chain(), 4);
        assert_eq!(Instance::new(0, 1, &[]).unwrap().longest_chain(), 0);
    }

    #[test]
    fn gap_degree() {
        let g = gap_instance(3, 3);
        let all = JobSet::from_iter_with_capacity(g.n(), 0..g.n());
        assert_eq!(g.max_degree(&all), 2 * 3 + 3);
        // on the transitive order a job relates to every job outside its block
        for k in 4..7 {
            let g = gap_instance(3, k);
            let all = JobSet::from_iter_with_capacity(g.n(), 0..g.n());
            assert_eq!(g.max_degree(&all), (k - 1) * 4 + 1);
        }
    }

    #[test]
    fn reduction_of_chain() {
        let inst = Instance::new(3, 1, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(inst.reduction_successors(), vec![vec![1], vec![2], vec![]]);
    }
}
