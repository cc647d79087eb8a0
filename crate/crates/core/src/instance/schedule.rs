use super::Instance;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placement {
    Unassigned,
    /// 1-based slot.
    Slot(usize),
    Discarded,
}

/// Assignment `σ : jobs → 1..=horizon` with an explicit discarded set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSchedule {
    horizon: usize,
    placement: Vec<Placement>,
}

impl PartialSchedule {
    pub fn new(n: usize, horizon: usize) -> Self {
        PartialSchedule {
            horizon,
            placement: vec![Placement::Unassigned; n],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn set_horizon(&mut self, horizon: usize) {
        self.horizon = horizon;
    }

    pub fn n(&self) -> usize {
        self.placement.len()
    }

    pub fn placement(&self, j: usize) -> Placement {
        self.placement[j]
    }

    pub fn slot(&self, j: usize) -> Option<usize> {
        match self.placement[j] {
            Placement::Slot(t) => Some(t),
            _ => None,
        }
    }

    pub fn assign(&mut self, j: usize, slot: usize) {
        self.placement[j] = Placement::Slot(slot);
    }

    pub fn discard(&mut self, j: usize) {
        self.placement[j] = Placement::Discarded;
    }

    pub fn unassign(&mut self, j: usize) {
        self.placement[j] = Placement::Unassigned;
    }

    pub fn is_discarded(&self, j: usize) -> bool {
        self.placement[j] == Placement::Discarded
    }

    pub fn discarded(&self) -> Vec<usize> {
        (0..self.n()).filter(|&j| self.is_discarded(j)).collect()
    }

    pub fn scheduled(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.placement
            .iter()
            .enumerate()
            .filter_map(|(j, p)| match p {
                Placement::Slot(t) => Some((j, *t)),
                _ => None,
            })
    }

    /// Every job has a slot.
    pub fn is_complete(&self) -> bool {
        self.placement
            .iter()
            .all(|p| matches!(p, Placement::Slot(_)))
    }

    /// Latest occupied slot, 0 when nothing is scheduled.
    pub fn makespan(&self) -> usize {
        self.scheduled().map(|(_, t)| t).max().unwrap_or(0)
    }

    /// Jobs per slot, index 0 unused.
    pub fn occupancy(&self) -> Vec<usize> {
        let top = self.horizon.max(self.makespan());
        let mut occ = vec![0; top + 1];
        for (_, t) in self.scheduled() {
            occ[t] += 1;
        }
        occ
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    JobCountMismatch {
        expected: usize,
        found: usize,
    },
    SlotOutOfRange {
        job: usize,
        slot: usize,
        horizon: usize,
    },
    Capacity {
        slot: usize,
        load: usize,
        machines: usize,
    },
    Precedence {
        before: usize,
        after: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::JobCountMismatch { expected, found } => {
                write!(f, "schedule covers {found} jobs, instance has {expected}")
            }
            Violation::SlotOutOfRange { job, slot, horizon } => {
                write!(f, "job {job} at slot {slot} outside 1..={horizon}")
            }
            Violation::Capacity {
                slot,
                load,
                machines,
            } => {
                write!(f, "slot {slot} holds {load} jobs on {machines} machines")
            }
            Violation::Precedence { before, after } => {
                write!(f, "job {before} must precede job {after}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub violations: Vec<Violation>,
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks slot range, machine capacity and precedence among non-discarded
/// jobs. Unassigned jobs are not an error here; use
/// [`PartialSchedule::is_complete`] for completeness.
pub fn validate_schedule(inst: &Instance, sched: &PartialSchedule) -> Verdict {
    let mut violations = Vec::new();
    if sched.n() != inst.n() {
        violations.push(Violation::JobCountMismatch {
            expected: inst.n(),
            found: sched.n(),
        });
        return Verdict { violations };
    }
    let h = sched.horizon();
    let mut load = vec![0usize; h + 1];
    for (j, t) in sched.scheduled() {
        if t == 0 || t > h {
            violations.push(Violation::SlotOutOfRange {
                job: j,
                slot: t,
                horizon: h,
            });
        } else {
            load[t] += 1;
        }
    }
    if !violations.is_empty() {
        return Verdict { violations };
    }
    for (slot, &l) in load.iter().enumerate().skip(1) {
        if l > inst.m() {
            violations.push(Violation::Capacity {
                slot,
                load: l,
                machines: inst.m(),
            });
        }
    }
    for (u, tu) in sched.scheduled() {
        for v in inst.successors(u).iter() {
            if let Some(tv) = sched.slot(v) {
                if tu >= tv {
                    violations.push(Violation::Precedence {
                        before: u,
                        after: v,
                    });
                }
            }
        }
    }
    Verdict { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_jobs_share_a_slot() {
        let inst = Instance::new(2, 2, &[]).unwrap();
        let mut s = PartialSchedule::new(2, 1);
        s.assign(0, 1);
        s.assign(1, 1);
        assert!(validate_schedule(&inst, &s).is_ok());
    }

    #[test]
    fn precedence_witness() {
        let inst = Instance::new(2, 2, &[(0, 1)]).unwrap();
        let mut s = PartialSchedule::new(2, 1);
        s.assign(0, 1);
        s.assign(1, 1);
        assert_eq!(
            validate_schedule(&inst, &s).violations,
            vec![Violation::Precedence {
                before: 0,
                after: 1
            }]
        );
    }

    #[test]
    fn capacity_witness() {
        let inst = Instance::new(2, 1, &[]).unwrap();
        let mut s = PartialSchedule::new(2, 3);
        s.assign(0, 3);
        s.assign(1, 3);
        assert_eq!(
            validate_schedule(&inst, &s).violations,
            vec![Violation::Capacity {
                slot: 3,
                load: 2,
                machines: 1
            }]
        );
    }

    #[test]
    fn out_of_range_and_discards() {
        let inst = Instance::new(3, 1, &[(0, 1), (1, 2)]).unwrap();
        let mut s = PartialSchedule::new(3, 2);
        s.assign(0, 3);
        assert!(matches!(
            validate_schedule(&inst, &s).violations[0],
            Violation::SlotOutOfRange {
                job: 0,
                slot: 3,
                ..
            }
        ));
        let mut s = PartialSchedule::new(3, 2);
        s.assign(2, 1);
        s.discard(1);
        s.assign(0, 2);
        // 0 ≺ 2 still applies through the closure even with 1 discarded
        assert!(!validate_schedule(&inst, &s).is_ok());
        s.discard(0);
        assert!(validate_schedule(&inst, &s).is_ok());
    }
}
