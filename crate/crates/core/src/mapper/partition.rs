//! Initial qubit placement: recursive min-cut bisection of the interaction
//! graph onto the data regions, late-used qubits parked in memory.

use super::MapError;
use crate::circuit::{Circuit, QubitId};
use crate::datapath::RegionLayout;
use crate::graph::InteractionGraph;
use serde::{Deserialize, Serialize};

const PARTITION_PASSES: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Region of each qubit at time zero.
    pub region: Vec<usize>,
    /// Weight of interaction edges between qubits in different regions.
    pub cut: u64,
}

pub fn partition(c: &Circuit, layout: &RegionLayout) -> Result<Assignment, MapError> {
    let n = c.num_qubits();
    let available = layout.capacity();
    if available < n {
        return Err(MapError::Capacity { needed: n, available });
    }
    let data: Vec<usize> = layout.data_regions().map(|r| r.id).collect();
    let mem: Vec<usize> = layout.memory_regions().map(|r| r.id).collect();
    let data_cap: usize = data.iter().map(|&r| layout.regions[r].slots).sum();
    let mem_cap: usize = mem.iter().map(|&r| layout.regions[r].slots).sum();

    // Data regions start half full unless memory cannot hold the rest.
    let half: usize = data.iter().map(|&r| layout.regions[r].slots.div_ceil(2)).sum();
    let in_data = n.min(half).max(n.saturating_sub(mem_cap)).min(data_cap);

    // Earliest first use goes to compute.
    let mut first_use = vec![usize::MAX; n];
    for (i, g) in c.gates().iter().enumerate() {
        for &q in &g.operands {
            first_use[q as usize] = first_use[q as usize].min(i);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&q| (first_use[q], q));
    let (hot, cold) = order.split_at(in_data);

    let g = InteractionGraph::from_circuit(c);
    let mut region = vec![usize::MAX; n];
    let mut hot_sorted = hot.to_vec();
    hot_sorted.sort_unstable();
    let mut data_sorted = data.clone();
    data_sorted.sort_by_key(|&r| layout.regions[r].pos);
    split(&g, layout, &hot_sorted, &data_sorted, &mut region);

    // Memory fills in grid order, nearest the data first.
    let mut free: Vec<(usize, usize)> = mem.iter().map(|&r| (r, layout.regions[r].slots)).collect();
    let mut k = 0;
    for &q in cold {
        while free[k].1 == 0 {
            k += 1;
        }
        region[q] = free[k].0;
        free[k].1 -= 1;
    }
    let side: Vec<usize> = region.clone();
    let mut cut = 0;
    for v in 0..n {
        for &(u, w) in g.neighbors(v) {
            if u > v && side[u] != side[v] {
                cut += w as u64;
            }
        }
    }
    debug_assert!(region.iter().all(|&r| r != usize::MAX));
    Ok(Assignment { region, cut })
}

/// Quota of each region: qubits spread in proportion to capacity, each
/// region receiving at most its slot count.
fn quotas(layout: &RegionLayout, regions: &[usize], n: usize) -> Vec<usize> {
    let caps: Vec<usize> = regions.iter().map(|&r| layout.regions[r].slots).collect();
    let total: usize = caps.iter().sum();
    let mut q: Vec<usize> = caps.iter().map(|&c| n * c / total.max(1)).collect();
    let mut left = n - q.iter().sum::<usize>();
    let mut i = 0;
    while left > 0 {
        if q[i] < caps[i] {
            q[i] += 1;
            left -= 1;
        }
        i = (i + 1) % q.len();
    }
    q
}

fn split(g: &InteractionGraph, layout: &RegionLayout, qubits: &[usize], regions: &[usize], out: &mut [usize]) {
    if regions.len() == 1 {
        for &q in qubits {
            out[q] = regions[0];
        }
        return;
    }
    // Cut the region set across its longer grid extent.
    let mut rs = regions.to_vec();
    let (xs, ys): (Vec<usize>, Vec<usize>) = rs.iter().map(|&r| layout.regions[r].pos).unzip();
    let spread = |v: &[usize]| v.iter().max().unwrap() - v.iter().min().unwrap();
    if spread(&xs) >= spread(&ys) {
        rs.sort_by_key(|&r| (layout.regions[r].pos.0, layout.regions[r].pos.1));
    } else {
        rs.sort_by_key(|&r| (layout.regions[r].pos.1, layout.regions[r].pos.0));
    }
    let (ra, rb) = rs.split_at(rs.len() / 2);
    let q = quotas(layout, &rs, qubits.len());
    let left: usize = q[..ra.len()].iter().sum();
    let (qa, qb) = g.bisect(qubits, left, PARTITION_PASSES);
    split(g, layout, &qa, ra, out);
    split(g, layout, &qb, rb, out);
}

/// Qubits assigned to each region.
pub fn residents(a: &Assignment, layout: &RegionLayout) -> Vec<Vec<QubitId>> {
    let mut out = vec![Vec::new(); layout.regions.len()];
    for (q, &r) in a.region.iter().enumerate() {
        out[r].push(q as QubitId);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, GateKind, QubitKind};
    use crate::datapath::{instantiate, DatapathConfig, DatapathKind};
    use crate::randgen::{gen_random, RandSpec};
    use crate::tech::Tech;

    fn qalypso(d: usize, m: usize, dq: usize) -> RegionLayout {
        let mut cfg = DatapathConfig::preset(DatapathKind::Qalypso, d, m);
        cfg.dq = dq;
        instantiate(&cfg, &Tech::set1()).unwrap()
    }

    #[test]
    fn disjoint_cliques_zero_cut() {
        let mut b = CircuitBuilder::new();
        let q = b.register("q", 8, QubitKind::Data);
        for grp in [[0, 3, 4, 7], [1, 2, 5, 6]] {
            for i in 0..4 {
                for j in i + 1..4 {
                    b.gate(GateKind::Cnot, &[q[grp[i]], q[grp[j]]]);
                }
            }
        }
        let c = b.build().unwrap();
        let a = partition(&c, &qalypso(2, 0, 8)).unwrap();
        assert_eq!(a.cut, 0);
    }

    #[test]
    fn single_region_takes_all() {
        let c = gen_random(&RandSpec {
            gates: 50,
            qubits: 6,
            rent_r: 0.5,
            seed: 1,
        })
        .unwrap();
        let a = partition(&c, &qalypso(1, 0, 8)).unwrap();
        assert!(a.region.iter().all(|&r| r == 0));
        assert_eq!(a.cut, 0);
    }

    #[test]
    fn insufficient_capacity() {
        let c = gen_random(&RandSpec {
            gates: 50,
            qubits: 20,
            rent_r: 0.5,
            seed: 1,
        })
        .unwrap();
        assert_eq!(
            partition(&c, &qalypso(1, 0, 8)),
            Err(MapError::Capacity {
                needed: 20,
                available: 8
            })
        );
    }

    #[test]
    fn memory_takes_overflow() {
        let c = gen_random(&RandSpec {
            gates: 300,
            qubits: 40,
            rent_r: 0.5,
            seed: 2,
        })
        .unwrap();
        let l = qalypso(2, 1, 16);
        let a = partition(&c, &l).unwrap();
        let res = residents(&a, &l);
        for r in &l.regions {
            assert!(res[r.id].len() <= r.slots);
        }
        assert_eq!(res.iter().map(Vec::len).sum::<usize>(), 40);
    }

    #[test]
    fn higher_rent_larger_cut() {
        let l = qalypso(8, 0, 32);
        let mut wins = 0;
        for seed in 0..5 {
            let lo = gen_random(&RandSpec {
                gates: 2000,
                qubits: 128,
                rent_r: 0.5,
                seed,
            })
            .unwrap();
            let hi = gen_random(&RandSpec {
                gates: 2000,
                qubits: 128,
                rent_r: 0.9,
                seed,
            })
            .unwrap();
            if partition(&hi, &l).unwrap().cut >= partition(&lo, &l).unwrap().cut {
                wins += 1;
            }
        }
        assert_eq!(wins, 5);
    }
}
