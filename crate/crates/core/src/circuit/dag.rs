use super::{Circuit, CircuitError, GateId, QubitId};
use std::collections::VecDeque;

/// Dependence graph between gates that share a qubit.
#[derive(Clone, Debug)]
pub struct Dag {
    chains: Vec<Vec<GateId>>,
    /// One edge per consecutive pair on a qubit chain: (from, to, qubit).
    edges: Vec<(GateId, GateId, QubitId)>,
    preds: Vec<Vec<GateId>>,
    succs: Vec<Vec<GateId>>,
    order: Vec<GateId>,
}

impl Dag {
    pub fn build(c: &Circuit) -> Result<Dag, CircuitError> {
        let n = c.num_gates();
        let mut chains: Vec<Vec<GateId>> = vec![Vec::new(); c.num_qubits()];
        let mut edges = Vec::new();
        let mut preds: Vec<Vec<GateId>> = vec![Vec::new(); n];
        let mut succs: Vec<Vec<GateId>> = vec![Vec::new(); n];
        for g in c.gates() {
            for &q in &g.operands {
                let chain = &mut chains[q as usize];
                if let Some(&prev) = chain.last() {
                    edges.push((prev, g.id, q));
                    if !preds[g.id as usize].contains(&prev) {
                        preds[g.id as usize].push(prev);
                        succs[prev as usize].push(g.id);
                    }
                }
                chain.push(g.id);
            }
        }

        // Kahn's algorithm; ties resolved by gate id so the order is stable.
        let mut indeg: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut ready: VecDeque<GateId> = (0..n as GateId).filter(|&g| indeg[g as usize] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(g) = ready.pop_front() {
            order.push(g);
            for &s in &succs[g as usize] {
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    ready.push_back(s);
                }
            }
        }
        if order.len() != n {
            let stuck = (0..n).find(|&g| indeg[g] > 0).unwrap_or(0);
            return Err(CircuitError::Cycle(stuck as GateId));
        }
        Ok(Dag {
            chains,
            edges,
            preds,
            succs,
            order,
        })
    }

    pub fn num_gates(&self) -> usize {
        self.preds.len()
    }

    /// Gates acting on `q`, in program order.
    pub fn chain(&self, q: QubitId) -> &[GateId] {
        &self.chains[q as usize]
    }

    pub fn chains(&self) -> &[Vec<GateId>] {
        &self.chains
    }

    pub fn edges(&self) -> &[(GateId, GateId, QubitId)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn preds(&self, g: GateId) -> &[GateId] {
        &self.preds[g as usize]
    }

    pub fn succs(&self, g: GateId) -> &[GateId] {
        &self.succs[g as usize]
    }

    pub fn topo_order(&self) -> &[GateId] {
        &self.order
    }

    /// ASAP level of each gate, starting at 1.
    pub fn levels(&self) -> Vec<usize> {
        let mut lvl = vec![0usize; self.num_gates()];
        for &g in &self.order {
            let l = self.preds[g as usize]
                .iter()
                .map(|&p| lvl[p as usize])
                .max()
                .unwrap_or(0);
            lvl[g as usize] = l + 1;
        }
        lvl
    }

    /// Number of gates on the longest dependence path.
    pub fn depth(&self) -> usize {
        self.levels().into_iter().max().unwrap_or(0)
    }

    /// Longest path weight ending at each gate, with per-gate weights.
    pub fn longest_to(&self, weight: impl Fn(GateId) -> f64) -> Vec<f64> {
        let mut d = vec![0.0; self.num_gates()];
        for &g in &self.order {
            let best = self.preds[g as usize]
                .iter()
                .map(|&p| d[p as usize])
                .fold(0.0, f64::max);
            d[g as usize] = best + weight(g);
        }
        d
    }

    /// Longest path weight starting at each gate (inclusive), with per-gate weights.
    pub fn longest_from(&self, weight: impl Fn(GateId) -> f64) -> Vec<f64> {
        let mut d = vec![0.0; self.num_gates()];
        for &g in self.order.iter().rev() {
            let best = self.succs[g as usize]
                .iter()
                .map(|&s| d[s as usize])
                .fold(0.0, f64::max);
            d[g as usize] = best + weight(g);
        }
        d
    }

    /// Weakly connected components over gates; each is sorted by gate id.
    pub fn components(&self) -> Vec<Vec<GateId>> {
        let n = self.num_gates();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b, _) in &self.edges {
            let (ra, rb) = (find(&mut parent, a as usize), find(&mut parent, b as usize));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut groups: Vec<Vec<GateId>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for g in 0..n {
            let r = find(&mut parent, g);
            if slot[r] == usize::MAX {
                slot[r] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[r]].push(g as GateId);
        }
        groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;

    #[test]
    fn chain_depth() {
        let c = parse_netlist("qubit a\nx a\nz a\nh a\ns a").unwrap();
        let d = Dag::build(&c).unwrap();
        assert_eq!(d.depth(), 4);
        assert_eq!(d.edge_count(), 3);
    }

    #[test]
    fn independent_chains_are_separate_components() {
        let c = parse_netlist("qubit a\nqubit b\nx a\nx b\nh a\nh b").unwrap();
        let d = Dag::build(&c).unwrap();
        assert_eq!(d.components().len(), 2);
        assert_eq!(d.depth(), 2);
    }

    #[test]
    fn cnot_joining_two_chains() {
        let c = parse_netlist("qubit a\nqubit b\nx a\nx a\nx a\nh b\nh b\nh b\ncnot a,b").unwrap();
        let d = Dag::build(&c).unwrap();
        assert_eq!(d.depth(), 4);
        assert_eq!(d.components().len(), 1);
    }

    #[test]
    fn parallel_edges_counted_per_qubit() {
        let c = parse_netlist("qubit a\nqubit b\ncnot a,b\ncnot b,a").unwrap();
        let d = Dag::build(&c).unwrap();
        assert_eq!(d.edge_count(), 2);
        assert_eq!(d.preds(1), &[0]);
    }
}
