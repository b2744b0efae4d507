//! Qubit interaction graph and balanced min-cut bisection.

use crate::circuit::Circuit;

/// Undirected weighted graph; weight = number of multi-qubit gates coupling
/// the two qubits.
#[derive(Clone, Debug)]
pub struct InteractionGraph {
    adj: Vec<Vec<(usize, u32)>>,
}

impl InteractionGraph {
    pub fn from_circuit(c: &Circuit) -> Self {
        let n = c.num_qubits();
        let mut w: Vec<std::collections::BTreeMap<usize, u32>> = vec![Default::default(); n];
        for g in c.gates() {
            let ops = &g.operands;
            for i in 0..ops.len() {
                for j in i + 1..ops.len() {
                    let (a, b) = (ops[i] as usize, ops[j] as usize);
                    *w[a].entry(b).or_default() += 1;
                    *w[b].entry(a).or_default() += 1;
                }
            }
        }
        InteractionGraph {
            adj: w.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, u32)] {
        &self.adj[v]
    }

    /// Total weight of edges with exactly one endpoint in `inside`.
    pub fn external(&self, members: &[usize], inside: &[bool]) -> u64 {
        members
            .iter()
            .flat_map(|&v| self.adj[v].iter())
            .filter(|&&(u, _)| !inside[u])
            .map(|&(_, w)| w as u64)
            .sum()
    }

    /// Total weight of edges between the two sides of a labeling.
    pub fn cut(&self, side: &[u8]) -> u64 {
        let mut total = 0;
        for (v, nb) in self.adj.iter().enumerate() {
            for &(u, w) in nb {
                if u > v && side[u] != side[v] {
                    total += w as u64;
                }
            }
        }
        total
    }

    /// Splits `verts` into a left part of exactly `left_size` vertices and
    /// the rest, minimizing edges between them (edges leaving `verts` are
    /// ignored). Starts from the order given and improves with
    /// Fiduccia–Mattheyses passes; deterministic.
    pub fn bisect(&self, verts: &[usize], left_size: usize, passes: usize) -> (Vec<usize>, Vec<usize>) {
        let n = verts.len();
        let left_size = left_size.min(n);
        if n < 2 || left_size == 0 || left_size == n {
            return (verts[..left_size].to_vec(), verts[left_size..].to_vec());
        }
        let mut local = vec![usize::MAX; self.adj.len()];
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
        let nbrs: Vec<Vec<(usize, i64)>> = verts
            .iter()
            .map(|&v| {
                self.adj[v]
                    .iter()
                    .filter(|&&(u, _)| local[u] != usize::MAX)
                    .map(|&(u, w)| (local[u], w as i64))
                    .collect()
            })
            .collect();
        let mut side: Vec<bool> = (0..n).map(|i| i >= left_size).collect();

        for _ in 0..passes {
            // gain(v) = external - internal weight of v under current sides.
            let mut gain: Vec<i64> = (0..n)
                .map(|v| {
                    nbrs[v]
                        .iter()
                        .map(|&(u, w)| if side[u] != side[v] { w } else { -w })
                        .sum()
                })
                .collect();
            let mut locked = vec![false; n];
            let mut moves: Vec<usize> = Vec::with_capacity(n);
            let (mut running, mut best, mut best_len) = (0i64, 0i64, 0usize);
            let mut left = left_size;
            // Alternate sides so balance is restored after every pair.
            for step in 0..n {
                let from_right = if step % 2 == 0 {
                    left <= left_size
                } else {
                    left < left_size
                };
                let cand = (0..n)
                    .filter(|&v| !locked[v] && side[v] == from_right)
                    .max_by(|&a, &b| gain[a].cmp(&gain[b]).then(b.cmp(&a)));
                let Some(v) = cand else { break };
                running += gain[v];
                locked[v] = true;
                side[v] = !side[v];
                if side[v] {
                    left -= 1;
                } else {
                    left += 1;
                }
                gain[v] = -gain[v];
                for &(u, w) in &nbrs[v] {
                    // v switched: edges to u flip between internal and external.
                    gain[u] += if side[u] == side[v] { -2 * w } else { 2 * w };
                }
                moves.push(v);
                if left == left_size && running > best {
                    best = running;
                    best_len = moves.len();
                }
            }
            for &v in &moves[best_len..] {
                side[v] = !side[v];
            }
            if best == 0 {
                break;
            }
        }
        let mut a = Vec::with_capacity(left_size);
        let mut b = Vec::with_capacity(n - left_size);
        for (i, &v) in verts.iter().enumerate() {
            if side[i] {
                b.push(v);
            } else {
                a.push(v);
            }
        }
        (a, b)
    }
}
