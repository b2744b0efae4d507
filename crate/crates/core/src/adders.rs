//! Ripple-carry and carry-lookahead adder generators, plus a bit-level
//! simulator for classical reversible circuits used to verify them.

use crate::circuit::{Circuit, CircuitBuilder, GateKind, QubitId, QubitKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdderKind {
    Qrca,
    Qcla,
}

impl AdderKind {
    pub fn name(self) -> &'static str {
        match self {
            AdderKind::Qrca => "qrca",
            AdderKind::Qcla => "qcla",
        }
    }
}

impl std::str::FromStr for AdderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "qrca" => Ok(AdderKind::Qrca),
            "qcla" => Ok(AdderKind::Qcla),
            _ => Err(format!("unknown adder `{s}` (expected qrca or qcla)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderSpec {
    pub kind: AdderKind,
    /// Operand width in bits.
    pub n: usize,
    /// Sub-adder width (ripple) or block size (lookahead).
    pub m: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AdderError {
    #[error("adder needs 1 <= m <= n, got n = {n}, m = {m}")]
    BadWidth { n: usize, m: usize },
}

/// A generated adder and the roles of its qubits.
#[derive(Clone, Debug)]
pub struct Adder {
    pub spec: AdderSpec,
    pub circuit: Circuit,
    pub a: Vec<QubitId>,
    pub b: Vec<QubitId>,
    /// Low n bits of a + b after the circuit runs.
    pub sum: Vec<QubitId>,
    pub carry_out: QubitId,
    /// Work qubits that must return to zero.
    pub ancillas: Vec<QubitId>,
}

impl Adder {
    /// Runs the adder on integer inputs and returns (sum mod 2^n, carry).
    pub fn eval(&self, a: u64, b: u64) -> Result<(u64, bool, bool), SimError> {
        let mut bits = vec![false; self.circuit.num_qubits()];
        for i in 0..self.spec.n {
            bits[self.a[i] as usize] = (a >> i) & 1 == 1;
            bits[self.b[i] as usize] = (b >> i) & 1 == 1;
        }
        let out = classical_sim(&self.circuit, &bits)?;
        let sum = self
            .sum
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &q)| acc | ((out[q as usize] as u64) << i));
        let clean = self.ancillas.iter().all(|&q| !out[q as usize]);
        Ok((sum, out[self.carry_out as usize], clean))
    }
}

pub fn gen_adder(spec: AdderSpec) -> Result<Adder, AdderError> {
    match spec.kind {
        AdderKind::Qrca => gen_qrca(spec.n, spec.m),
        AdderKind::Qcla => gen_qcla(spec.n, spec.m),
    }
}

fn check_width(n: usize, m: usize) -> Result<(), AdderError> {
    if m == 0 || n == 0 || m > n {
        return Err(AdderError::BadWidth { n, m });
    }
    Ok(())
}

/// Block boundaries: bit ranges of width m, the last one possibly shorter.
fn blocks(n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..n).step_by(m).map(|lo| (lo, (lo + m).min(n))).collect()
}

/// Ripple-carry adder computing b <- a + b (mod 2^n) with the carry out in
/// a separate qubit. The n bits are processed as n/m blocks that reuse one
/// m-qubit carry register: a forward pass finds each block's carry out and
/// stores it on a carry chain, then a backward pass forms the sums block by
/// block and clears the chain.
pub fn gen_qrca(n: usize, m: usize) -> Result<Adder, AdderError> {
    check_width(n, m)?;
    let bl = blocks(n, m);
    let mut cb = CircuitBuilder::new();
    let a = cb.register("a", n, QubitKind::Data);
    let b = cb.register("b", n, QubitKind::Data);
    let r = cb.register("r", m, QubitKind::ZeroAncilla);
    let x = cb.register("x", bl.len() + 1, QubitKind::ZeroAncilla);

    // carry(i): carries c_i -> c_{i+1} for bit i of a block.
    let carry = |cb: &mut CircuitBuilder, c: QubitId, ai: QubitId, bi: QubitId, c1: QubitId| {
        cb.gate(GateKind::Toffoli, &[ai, bi, c1]);
        cb.gate(GateKind::Cnot, &[ai, bi]);
        cb.gate(GateKind::Toffoli, &[c, bi, c1]);
    };
    let carry_inv = |cb: &mut CircuitBuilder, c: QubitId, ai: QubitId, bi: QubitId, c1: QubitId| {
        cb.gate(GateKind::Toffoli, &[c, bi, c1]);
        cb.gate(GateKind::Cnot, &[ai, bi]);
        cb.gate(GateKind::Toffoli, &[ai, bi, c1]);
    };
    // Carry qubit feeding bit `lo + i` of block k.
    let cin = |k: usize, i: usize| if i == 0 { x[k] } else { r[i - 1] };

    cb.set_tag(Some("carry-pass"));
    for (k, &(lo, hi)) in bl.iter().enumerate() {
        let w = hi - lo;
        for i in 0..w {
            carry(&mut cb, cin(k, i), a[lo + i], b[lo + i], r[i]);
        }
        cb.gate(GateKind::Cnot, &[r[w - 1], x[k + 1]]);
        for i in (0..w).rev() {
            carry_inv(&mut cb, cin(k, i), a[lo + i], b[lo + i], r[i]);
        }
    }
    cb.set_tag(Some("sum-pass"));
    for (k, &(lo, hi)) in bl.iter().enumerate().rev() {
        let w = hi - lo;
        for i in 0..w {
            carry(&mut cb, cin(k, i), a[lo + i], b[lo + i], r[i]);
        }
        if k + 1 < bl.len() {
            cb.gate(GateKind::Cnot, &[r[w - 1], x[k + 1]]);
        }
        for i in (0..w).rev() {
            carry_inv(&mut cb, cin(k, i), a[lo + i], b[lo + i], r[i]);
            cb.gate(GateKind::Cnot, &[a[lo + i], b[lo + i]]);
            cb.gate(GateKind::Cnot, &[cin(k, i), b[lo + i]]);
        }
    }
    let carry_out = x[bl.len()];
    let mut ancillas = r.clone();
    ancillas.extend_from_slice(&x[..bl.len()]);
    Ok(Adder {
        spec: AdderSpec {
            kind: AdderKind::Qrca,
            n,
            m,
        },
        circuit: cb.build().expect("ripple adder is valid"),
        sum: b.clone(),
        a,
        b,
        carry_out,
        ancillas,
    })
}

/// Gate list that can be replayed backwards to uncompute.
struct Tape {
    ops: Vec<(GateKind, Vec<QubitId>)>,
}

impl Tape {
    fn cnot(&mut self, c: QubitId, t: QubitId) {
        self.ops.push((GateKind::Cnot, vec![c, t]));
    }
    fn toffoli(&mut self, a: QubitId, b: QubitId, t: QubitId) {
        self.ops.push((GateKind::Toffoli, vec![a, b, t]));
    }
}

/// Out-of-place carry-lookahead adder: s <- a + b with a and b preserved.
/// Bitwise propagate/generate, ripple group signals inside blocks of m bits,
/// a Kogge-Stone prefix over blocks, in-block carries, then the sum; all
/// work qubits are uncomputed by replaying the compute phase in reverse.
pub fn gen_qcla(n: usize, m: usize) -> Result<Adder, AdderError> {
    check_width(n, m)?;
    let bl = blocks(n, m);
    let nb = bl.len();
    let mut cb = CircuitBuilder::new();
    let a = cb.register("a", n, QubitKind::Data);
    let b = cb.register("b", n, QubitKind::Data);
    let s = cb.register("s", n + 1, QubitKind::Data);
    let mut anc: Vec<QubitId> = Vec::new();
    let mut fresh = |cb: &mut CircuitBuilder, name: String| {
        let q = cb.qubit(name, QubitKind::ZeroAncilla);
        anc.push(q);
        q
    };
    let mut t = Tape { ops: Vec::new() };

    let p: Vec<QubitId> = (0..n).map(|i| fresh(&mut cb, format!("p{i}"))).collect();
    let g: Vec<QubitId> = (0..n).map(|i| fresh(&mut cb, format!("g{i}"))).collect();
    for i in 0..n {
        t.toffoli(a[i], b[i], g[i]);
        t.cnot(a[i], p[i]);
        t.cnot(b[i], p[i]);
    }

    // Running group generate/propagate from the block's low bit to bit i.
    let mut gg: Vec<QubitId> = g.clone();
    let mut pp: Vec<QubitId> = p.clone();
    for (j, &(lo, hi)) in bl.iter().enumerate() {
        for i in lo + 1..hi {
            let y = fresh(&mut cb, format!("gg{j}_{i}"));
            t.cnot(g[i], y);
            t.toffoli(p[i], gg[i - 1], y);
            gg[i] = y;
            let z = fresh(&mut cb, format!("pp{j}_{i}"));
            t.toffoli(p[i], pp[i - 1], z);
            pp[i] = z;
        }
    }

    // Kogge-Stone prefix over block (G, P); afterwards big_g[j] is the carry
    // out of block j.
    let mut big_g: Vec<QubitId> = bl.iter().map(|&(_, hi)| gg[hi - 1]).collect();
    let mut big_p: Vec<QubitId> = bl.iter().map(|&(_, hi)| pp[hi - 1]).collect();
    let mut d = 1;
    while d < nb {
        let (prev_g, prev_p) = (big_g.clone(), big_p.clone());
        // Element j reads j and j-d; alternating strides of d keep the
        // reads of one level disjoint so the level has constant depth.
        let order: Vec<usize> = (d..nb)
            .filter(|j| (j / d) % 2 == 0)
            .chain((d..nb).filter(|j| (j / d) % 2 == 1))
            .collect();
        for j in order {
            let y = fresh(&mut cb, format!("G{d}_{j}"));
            t.cnot(prev_g[j], y);
            t.toffoli(prev_p[j], prev_g[j - d], y);
            big_g[j] = y;
            if 2 * d < nb && j >= 2 * d {
                let z = fresh(&mut cb, format!("P{d}_{j}"));
                t.toffoli(prev_p[j], prev_p[j - d], z);
                big_p[j] = z;
            }
        }
        d *= 2;
    }

    // Carry into every bit; carry into bit 0 is zero.
    let mut carry: Vec<Option<QubitId>> = vec![None; n];
    for (j, &(lo, hi)) in bl.iter().enumerate() {
        let cin = if j == 0 { None } else { Some(big_g[j - 1]) };
        carry[lo] = cin;
        for i in lo + 1..hi {
            let y = fresh(&mut cb, format!("c{i}"));
            t.cnot(gg[i - 1], y);
            if let Some(c) = cin {
                t.toffoli(pp[i - 1], c, y);
            }
            carry[i] = Some(y);
        }
    }

    cb.set_tag(Some("lookahead"));
    for (k, ops) in &t.ops {
        cb.gate(*k, ops);
    }
    cb.set_tag(Some("sum"));
    for i in 0..n {
        cb.gate(GateKind::Cnot, &[p[i], s[i]]);
        if let Some(c) = carry[i] {
            cb.gate(GateKind::Cnot, &[c, s[i]]);
        }
    }
    cb.gate(GateKind::Cnot, &[big_g[nb - 1], s[n]]);
    cb.set_tag(Some("uncompute"));
    for (k, ops) in t.ops.iter().rev() {
        cb.gate(*k, ops);
    }

    Ok(Adder {
        spec: AdderSpec {
            kind: AdderKind::Qcla,
            n,
            m,
        },
        circuit: cb.build().expect("lookahead adder is valid"),
        sum: s[..n].to_vec(),
        carry_out: s[n],
        a,
        b,
        ancillas: anc,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("gate {gate} ({kind}) is not classical reversible")]
    NonClassical { gate: u32, kind: GateKind },
    #[error("input has {found} bits, circuit has {expected} qubits")]
    Width { expected: usize, found: usize },
}

/// Evaluates a circuit of X/CNOT/Toffoli (plus bit-preserving diagonal gates,
/// measurement, correction and reset) on a basis state.
pub fn classical_sim(c: &Circuit, input: &[bool]) -> Result<Vec<bool>, SimError> {
    let lanes: Vec<u64> = input.iter().map(|&b| b as u64).collect();
    Ok(classical_sim_lanes(c, &lanes)?
        .into_iter()
        .map(|w| w & 1 == 1)
        .collect())
}

/// Bit-sliced variant: bit k of every word is an independent input vector,
/// so 64 basis states are evaluated per pass.
pub fn classical_sim_lanes(c: &Circuit, input: &[u64]) -> Result<Vec<u64>, SimError> {
    if input.len() != c.num_qubits() {
        return Err(SimError::Width {
            expected: c.num_qubits(),
            found: input.len(),
        });
    }
    let mut s = input.to_vec();
    for g in c.gates() {
        let o = &g.operands;
        match g.kind {
            GateKind::X => s[o[0] as usize] = !s[o[0] as usize],
            GateKind::Cnot => s[o[1] as usize] ^= s[o[0] as usize],
            GateKind::Toffoli => s[o[2] as usize] ^= s[o[0] as usize] & s[o[1] as usize],
            GateKind::PrepZ => s[o[0] as usize] = 0,
            GateKind::Z | GateKind::S | GateKind::T | GateKind::Measure | GateKind::Correct => {}
            GateKind::H => {
                return Err(SimError::NonClassical {
                    gate: g.id,
                    kind: g.kind,
                })
            }
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Dag;

    #[test]
    fn single_gates() {
        let mut b = CircuitBuilder::new();
        let q = b.register("q", 2, QubitKind::Data);
        b.gate(GateKind::X, &[q[0]]);
        let c = b.build().unwrap();
        assert_eq!(classical_sim(&c, &[false, false]).unwrap(), vec![true, false]);

        let mut b = CircuitBuilder::new();
        let q = b.register("q", 2, QubitKind::Data);
        b.gate(GateKind::Cnot, &[q[0], q[1]]);
        let c = b.build().unwrap();
        assert_eq!(classical_sim(&c, &[true, false]).unwrap(), vec![true, true]);
    }

    #[test]
    fn toffoli_truth_table() {
        let mut b = CircuitBuilder::new();
        let q = b.register("q", 3, QubitKind::Data);
        b.gate(GateKind::Toffoli, &[q[0], q[1], q[2]]);
        let c = b.build().unwrap();
        for x in 0..8u32 {
            let input: Vec<bool> = (0..3).map(|i| (x >> i) & 1 == 1).collect();
            let out = classical_sim(&c, &input).unwrap();
            assert_eq!(out[0], input[0]);
            assert_eq!(out[1], input[1]);
            assert_eq!(out[2], input[2] ^ (input[0] && input[1]));
        }
    }

    #[test]
    fn hadamard_rejected() {
        let mut b = CircuitBuilder::new();
        let q = b.qubit("q", QubitKind::Data);
        b.gate(GateKind::H, &[q]);
        let c = b.build().unwrap();
        assert!(matches!(
            classical_sim(&c, &[false]),
            Err(SimError::NonClassical { .. })
        ));
    }

    #[test]
    fn qrca_uses_one_carry_register() {
        let add = gen_qrca(8, 4).unwrap();
        let r = add
            .circuit
            .qubits()
            .iter()
            .filter(|q| q.label().starts_with('r'))
            .count();
        assert_eq!(r, 4);
        // two blocks -> chain of three qubits x0..x2
        let x = add
            .circuit
            .qubits()
            .iter()
            .filter(|q| q.label().starts_with('x'))
            .count();
        assert_eq!(x, 3);
    }

    #[test]
    fn small_exhaustive() {
        for (n, m) in [(1, 1), (3, 2), (4, 4), (5, 2), (6, 4)] {
            for kind in [AdderKind::Qrca, AdderKind::Qcla] {
                let add = gen_adder(AdderSpec { kind, n, m }).unwrap();
                for a in 0..1u64 << n {
                    for b in 0..1u64 << n {
                        let (s, c, clean) = add.eval(a, b).unwrap();
                        let full = a + b;
                        assert_eq!(s, full & ((1 << n) - 1), "{kind:?} n={n} m={m} {a}+{b}");
                        assert_eq!(c, full >> n == 1);
                        assert!(clean);
                    }
                }
            }
        }
    }

    #[test]
    fn qcla_single_block() {
        let add = gen_qcla(4, 4).unwrap();
        assert!(!add.circuit.qubits().iter().any(|q| q.label().starts_with('G')));
    }

    #[test]
    fn lookahead_is_shallower() {
        let d = |a: &Adder| Dag::build(&a.circuit).unwrap().depth();
        assert!(d(&gen_qcla(64, 4).unwrap()) < d(&gen_qrca(64, 4).unwrap()));
    }

    #[test]
    fn bad_width() {
        assert!(gen_qrca(4, 5).is_err());
        assert!(gen_qcla(4, 0).is_err());
    }
}
