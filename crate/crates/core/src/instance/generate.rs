use super::Instance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `k` blocks of `m + 1` jobs; every job of block `i` precedes every job of block `i + 1`.
pub fn gap_instance(m: usize, k: usize) -> Instance {
    let b = m + 1;
    let mut edges = Vec::with_capacity(k.saturating_sub(1) * b * b);
    for blk in 0..k.saturating_sub(1) {
        for u in blk * b..(blk + 1) * b {
            for v in (blk + 1) * b..(blk + 2) * b {
                edges.push((u, v));
            }
        }
    }
    Instance::new(k * b, m, &edges).expect("block order is acyclic")
}

/// Random DAG: pairs that are increasing in a random permutation of the jobs
/// become edges independently with probability `edge_prob`.
pub fn random_dag(n: usize, m: usize, edge_prob: f64, seed: u64) -> Instance {
    let p = edge_prob.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.push((perm[a], perm[b]));
            }
        }
    }
    Instance::new(n, m, &edges).expect("permutation order is acyclic")
}

/// `layers` layers of `width` jobs; each job of layer `i + 1` depends on each
/// job of layer `i` independently with probability `edge_prob`.
pub fn layered_dag(layers: usize, width: usize, m: usize, edge_prob: f64, seed: u64) -> Instance {
    let p = edge_prob.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for l in 0..layers.saturating_sub(1) {
        for u in l * width..(l + 1) * width {
            for v in (l + 1) * width..(l + 2) * width {
                if rng.gen_bool(p) {
                    edges.push((u, v));
                }
            }
        }
    }
    Instance::new(layers * width, m, &edges).expect("layer order is acyclic")
}

/// Pads the horizon to the next power of two `2^z ≥ T`, adding `m·(2^z − T)`
/// dummy jobs that each depend on every original job. Dummies get ids `n..`.
pub fn pad_to_power_of_two(inst: &Instance, horizon: usize) -> (Instance, usize) {
    assert!(horizon >= 1, "horizon must be positive");
    let padded = horizon.next_power_of_two();
    if padded == horizon {
        return (inst.clone(), horizon);
    }
    let n = inst.n();
    let extra = inst.m() * (padded - horizon);
    let mut edges = inst.edges().to_vec();
    for d in n..n + extra {
        edges.extend((0..n).map(|u| (u, d)));
    }
    let out = Instance::new(n + extra, inst.m(), &edges).expect("dummies only add sinks");
    (out, padded)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_sizes() {
        let g = gap_instance(3, 2);
        assert_eq!(g.n(), 8);
        assert_eq!(g.longest_chain(), 2);
        assert_eq!(gap_instance(3, 4).n(), 16);
        assert!(g.precedes(0, 7));
        assert!(!g.precedes(0, 3));
    }

    #[test]
    fn random_dag_edge_cases() {
        let empty = random_dag(0, 2, 0.5, 1);
        assert_eq!(empty.n(), 0);
        let anti = random_dag(9, 2, 0.0, 3);
        assert!(anti.edges().is_empty());
        let total = random_dag(10, 2, 1.0, 5);
        assert_eq!(total.longest_chain(), 10);
    }

    #[test]
    fn random_dag_is_seeded() {
        assert_eq!(random_dag(10, 3, 0.3, 7), random_dag(10, 3, 0.3, 7));
        assert_ne!(
            random_dag(10, 3, 0.3, 7).edges(),
            random_dag(10, 3, 0.3, 8).edges()
        );
    }

    #[test]
    fn padding() {
        let inst = random_dag(5, 2, 0.3, 1);
        let (same, t) = pad_to_power_of_two(&inst, 8);
        assert_eq!((same.n(), t), (5, 8));
        let (padded, t) = pad_to_power_of_two(&inst, 6);
        assert_eq!((padded.n(), t), (9, 8));
        for d in 5..9 {
            for u in 0..5 {
                assert!(padded.precedes(u, d));
            }
        }
        let (one, t) = pad_to_power_of_two(&inst, 1);
        assert_eq!((one.n(), t), (5, 1));
    }
}
