//! The time-indexed relaxation `K(T)` and the search for its least feasible horizon.
//!
//! Variables `x[j][t]` for slots `t ∈ 1..=T`, with
//! * `Σ_t x[j][t] = 1` for every job,
//! * `Σ_j x[j][t] ≤ cap(t)` for every slot,
//! * `Σ_{t′≤t} x[i][t′] ≥ Σ_{t′≤t+1} x[j][t′]` for every `i ≺ j` and `t ∈ 0..T`.
//!
//! The precedence rows start at `t = 0`, so a job with a predecessor never
//! gets weight in slot 1; the last row, `t = T`, reads `1 ≥ 1` and is omitted.

use crate::instance::Instance;
use crate::lpcore::{q, solve_feasibility, Cmp, LpError, LpModel, LpOutcome, Q};
use num_traits::{One, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelaxError {
    #[error("K({hi}) is infeasible; the search range must end at a feasible horizon")]
    InfeasibleUpperEnd { hi: usize },
    #[error("empty search range {lo}..={hi}")]
    EmptyRange { lo: usize, hi: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KOptions {
    /// Only create `x[j][t]` for `head(j) ≤ t ≤ T − tail(j) + 1`. Every other
    /// variable is forced to zero by the precedence rows anyway.
    pub prune_windows: bool,
    /// Add `x[j][I] = Σ_{t∈I} x[j][t]` for the laminar intervals of length ≥ 2.
    pub aggregates: bool,
    /// Per-slot capacity (index `t − 1`); `m` everywhere when absent.
    pub capacity: Option<Vec<usize>>,
}

impl Default for KOptions {
    fn default() -> Self {
        KOptions {
            prune_windows: false,
            aggregates: true,
            capacity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregate {
    pub job: usize,
    /// Inclusive slot range.
    pub interval: (usize, usize),
    pub col: usize,
}

#[derive(Debug, Clone)]
pub struct TimeIndexedModel {
    pub model: LpModel,
    pub horizon: usize,
    /// `cols[j][t − 1]` is the column of `x[j][t]`, if created.
    pub cols: Vec<Vec<Option<usize>>>,
    pub aggregates: Vec<Aggregate>,
    pub job_rows: usize,
    pub capacity_rows: usize,
}

impl TimeIndexedModel {
    pub fn col(&self, j: usize, t: usize) -> Option<usize> {
        self.cols[j][t - 1]
    }

    pub fn base_vars(&self) -> usize {
        self.cols.iter().flatten().filter(|c| c.is_some()).count()
    }

    /// Splits a solver point into `x[j][t − 1]`, zero where no column exists.
    pub fn unpack(&self, point: &[Q]) -> Vec<Vec<Q>> {
        self.cols
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| c.map_or_else(Q::zero, |c| point[c].clone()))
                    .collect()
            })
            .collect()
    }

    /// Inverse of [`unpack`](Self::unpack), with aggregates filled in. `None`
    /// when `x` puts weight on a slot that has no column.
    pub fn pack(&self, x: &[Vec<Q>]) -> Option<Vec<Q>> {
        let mut point = vec![Q::zero(); self.model.num_vars()];
        for (j, row) in x.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                match self.cols[j][t] {
                    Some(c) => point[c] = v.clone(),
                    None if !v.is_zero() => return None,
                    None => {}
                }
            }
        }
        for a in &self.aggregates {
            point[a.col] = (a.interval.0..=a.interval.1)
                .map(|t| x[a.job][t - 1].clone())
                .sum();
        }
        Some(point)
    }
}

/// The binary laminar family over `1..=2^z` (`2^z ≥ T` minimal), clipped to
/// `1..=T`, keeping intervals of length at least 2. Listed top-down, left to right.
pub fn laminar_intervals(horizon: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if horizon == 0 {
        return out;
    }
    let root = horizon.next_power_of_two();
    let mut len = root;
    while len >= 2 {
        let mut a = 1;
        while a <= horizon {
            let b = (a + len - 1).min(horizon);
            if b > a && !out.contains(&(a, b)) {
                out.push((a, b));
            }
            a += len;
        }
        len /= 2;
    }
    out
}

/// `K(T)` exactly as stated, with aggregates for the laminar family.
pub fn build_k(inst: &Instance, horizon: usize) -> TimeIndexedModel {
    build_k_with(inst, horizon, &KOptions::default())
}

pub fn build_k_with(inst: &Instance, horizon: usize, opts: &KOptions) -> TimeIndexedModel {
    let n = inst.n();
    let cap: Vec<usize> = opts
        .capacity
        .clone()
        .unwrap_or_else(|| vec![inst.m(); horizon]);
    assert_eq!(cap.len(), horizon, "capacity profile must cover every slot");
    let (heads, tails) = (inst.heads(), inst.tails());
    let mut model = LpModel::new();
    let mut cols = vec![vec![None; horizon]; n];
    for (j, row) in cols.iter_mut().enumerate() {
        let (lo, hi) = if opts.prune_windows {
            (heads[j], (horizon + 1).saturating_sub(tails[j]))
        } else {
            (1, horizon)
        };
        for t in lo..=hi.min(horizon) {
            row[t - 1] = Some(model.add_var(format!("x_{j}_{t}"), q(0), Some(q(1))));
        }
    }

    for row in &cols {
        let terms = row.iter().flatten().map(|&c| (c, Q::one())).collect();
        model.add_constraint(terms, Cmp::Eq, q(1));
    }
    for t in 0..horizon {
        let terms = cols
            .iter()
            .filter_map(|row| row[t])
            .map(|c| (c, Q::one()))
            .collect();
        model.add_constraint(terms, Cmp::Le, q(cap[t] as i64));
    }

    for (i, j) in inst.closure_pairs() {
        let i_cols: Vec<usize> = cols[i].iter().flatten().copied().collect();
        for t in 0..horizon {
            let left: Vec<usize> = cols[i][..t].iter().flatten().copied().collect();
            let right: Vec<usize> = cols[j][..t + 1].iter().flatten().copied().collect();
            if right.is_empty() {
                continue;
            }
            // `1 ≥ Σ_{t′≤t+1} x[j][t′]` follows from the job sum of `j`
            if opts.prune_windows && left.len() == i_cols.len() && !left.is_empty() {
                continue;
            }
            let mut terms: Vec<(usize, Q)> = left.into_iter().map(|c| (c, Q::one())).collect();
            terms.extend(right.into_iter().map(|c| (c, -Q::one())));
            model.add_constraint(terms, Cmp::Ge, q(0));
        }
    }

    let mut aggregates = Vec::new();
    if opts.aggregates {
        for (a, b) in laminar_intervals(horizon) {
            for (j, row) in cols.iter().enumerate() {
                let inside: Vec<usize> = row[a - 1..b].iter().flatten().copied().collect();
                if inside.is_empty() {
                    continue;
                }
                let col = model.add_var(format!("x_{j}_I{a}_{b}"), q(0), Some(q(1)));
                let mut terms: Vec<(usize, Q)> =
                    inside.into_iter().map(|c| (c, Q::one())).collect();
                terms.push((col, -Q::one()));
                model.add_constraint(terms, Cmp::Eq, q(0));
                aggregates.push(Aggregate {
                    job: j,
                    interval: (a, b),
                    col,
                });
            }
        }
    }

    TimeIndexedModel {
        model,
        horizon,
        cols,
        aggregates,
        job_rows: n,
        capacity_rows: horizon,
    }
}

/// A fractional point of `K(T)` as `x[j][t − 1]`, or `None` when empty.
pub fn solve_k(inst: &Instance, horizon: usize) -> Result<Option<Vec<Vec<Q>>>, LpError> {
    let k = build_k_with(
        inst,
        horizon,
        &KOptions {
            prune_windows: true,
            aggregates: false,
            capacity: None,
        },
    );
    Ok(match solve_feasibility(&k.model)? {
        LpOutcome::Feasible(p) | LpOutcome::Unbounded(p) => Some(k.unpack(&p)),
        LpOutcome::Infeasible(_) => None,
    })
}

/// Membership of `x[j][t − 1]` in `K(T)`, checked exactly against the unpruned model.
pub fn k_contains(inst: &Instance, horizon: usize, x: &[Vec<Q>]) -> bool {
    let k = build_k(inst, horizon);
    match k.pack(x) {
        Some(p) => crate::lpcore::check_point(&k.model, &p).is_ok(),
        None => false,
    }
}

/// Least `T ∈ lo..=hi` with `K(T) ≠ ∅`, by binary search.
pub fn min_feasible_t(inst: &Instance, lo: usize, hi: usize) -> Result<usize, RelaxError> {
    if lo > hi {
        return Err(RelaxError::EmptyRange { lo, hi });
    }
    if solve_k(inst, hi)?.is_none() {
        return Err(RelaxError::InfeasibleUpperEnd { hi });
    }
    let (mut lo, mut hi) = (lo, hi);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if solve_k(inst, mid)?.is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}

/// `min_feasible_t` over the natural range `max(1, ⌈n/m⌉, chain) ..= max(1, n)`.
pub fn lp_horizon(inst: &Instance) -> Result<usize, RelaxError> {
    let n = inst.n();
    let lo = n.div_ceil(inst.m()).max(inst.longest_chain()).max(1);
    min_feasible_t(inst, lo, n.max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gap_instance, random_dag};
    use crate::lpcore::{check_point, qr, verify_certificate};

    fn chain(n: usize, m: usize) -> Instance {
        let edges: Vec<_> = (1..n).map(|j| (j - 1, j)).collect();
        Instance::new(n, m, &edges).unwrap()
    }

    #[test]
    fn row_and_column_counts() {
        let inst = Instance::new(2, 1, &[]).unwrap();
        let k = build_k(&inst, 2);
        assert_eq!(k.base_vars(), 4);
        assert_eq!((k.job_rows, k.capacity_rows), (2, 2));
        // one aggregate per job for the root [1, 2]
        assert_eq!(k.aggregates.len(), 2);
        assert_eq!(k.model.num_constraints(), 2 + 2 + 2);
    }

    #[test]
    fn chain_of_two_in_two_slots() {
        let inst = chain(2, 1);
        let x = solve_k(&inst, 2).unwrap().unwrap();
        assert_eq!(x[0], vec![q(1), q(0)]);
        assert_eq!(x[1], vec![q(0), q(1)]);
        assert!(solve_k(&inst, 1).unwrap().is_none());
    }

    #[test]
    fn laminar_family() {
        assert_eq!(laminar_intervals(4), vec![(1, 4), (1, 2), (3, 4)]);
        assert_eq!(laminar_intervals(1), vec![]);
        assert_eq!(
            laminar_intervals(6),
            vec![(1, 6), (1, 4), (5, 6), (1, 2), (3, 4)]
        );
    }

    #[test]
    fn gap_horizons() {
        let g2 = gap_instance(3, 2);
        assert!(solve_k(&g2, 3).unwrap().is_some());
        assert_eq!(min_feasible_t(&g2, 1, 8).unwrap(), 3);
        let g3 = gap_instance(3, 3);
        assert_eq!(min_feasible_t(&g3, 1, 12).unwrap(), 4);
        assert_eq!(lp_horizon(&gap_instance(3, 4)).unwrap(), 6);
    }

    #[test]
    fn gap_infeasibility_is_certified() {
        let k = build_k(&gap_instance(3, 3), 3);
        let LpOutcome::Infeasible(cert) = solve_feasibility(&k.model).unwrap() else {
            panic!("K(3) of the 3-block gap instance must be empty");
        };
        assert!(verify_certificate(&k.model, &cert));
    }

    /// Blocks processed one after another, every job at rate `m/(m+1)`.
    #[test]
    fn fluid_witness_for_three_blocks() {
        let g = gap_instance(3, 3);
        let per_block = [
            vec![qr(3, 4), qr(1, 4), q(0), q(0)],
            vec![q(0), qr(1, 2), qr(1, 2), q(0)],
            vec![q(0), q(0), qr(1, 4), qr(3, 4)],
        ];
        let x: Vec<Vec<Q>> = (0..g.n()).map(|j| per_block[j / 4].clone()).collect();
        assert!(k_contains(&g, 4, &x));
        let k = build_k(&g, 4);
        assert_eq!(check_point(&k.model, &k.pack(&x).unwrap()), Ok(()));
        // one unit too early for the last block breaks precedence
        let mut bad = x.clone();
        for row in bad.iter_mut().skip(8) {
            *row = vec![q(0), qr(1, 4), qr(3, 4), q(0)];
        }
        assert!(!k_contains(&g, 4, &bad));
    }

    #[test]
    fn simple_horizons() {
        assert_eq!(lp_horizon(&Instance::new(6, 2, &[]).unwrap()).unwrap(), 3);
        assert_eq!(lp_horizon(&chain(5, 2)).unwrap(), 5);
        assert_eq!(
            min_feasible_t(&chain(3, 1), 1, 2),
            Err(RelaxError::InfeasibleUpperEnd { hi: 2 })
        );
    }

    #[test]
    fn pruned_and_full_models_agree() {
        for seed in 0..25 {
            let inst = random_dag(7, 2, 0.3, seed);
            for t in 1..=7 {
                let full = solve_feasibility(&build_k(&inst, t).model)
                    .unwrap()
                    .is_feasible();
                assert_eq!(
                    full,
                    solve_k(&inst, t).unwrap().is_some(),
                    "seed {seed} T {t}"
                );
            }
        }
    }

    #[test]
    fn feasibility_is_monotone_in_t() {
        for seed in 0..40 {
            let inst = random_dag(8, 1 + (seed as usize % 3), 0.3, seed);
            let verdicts: Vec<bool> = (1..=8)
                .map(|t| solve_k(&inst, t).unwrap().is_some())
                .collect();
            let first = verdicts.iter().position(|&v| v).unwrap();
            assert!(
                verdicts[first..].iter().all(|&v| v),
                "seed {seed}: {verdicts:?}"
            );
        }
    }

    #[test]
    fn optimum_horizon_is_feasible() {
        for seed in 0..25 {
            let inst = random_dag(9, 2 + (seed as usize % 2), 0.3, seed);
            let (opt, sched) = crate::exact::optimal_makespan(&inst, 1_000_000).unwrap();
            // the optimal schedule itself is an integral point of K(OPT)
            let x: Vec<Vec<Q>> = (0..inst.n())
                .map(|j| {
                    (1..=opt)
                        .map(|t| if sched.slot(j) == Some(t) { q(1) } else { q(0) })
                        .collect()
                })
                .collect();
            assert!(k_contains(&inst, opt, &x));
            assert!(lp_horizon(&inst).unwrap() <= opt);
        }
    }
}
