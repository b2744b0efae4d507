//! Random circuits with a target Rent exponent, and a Rent exponent
//! estimator based on recursive min-cut bisection.

use crate::circuit::{Circuit, CircuitBuilder, GateKind, QubitKind};
use crate::graph::InteractionGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandSpec {
    pub gates: usize,
    pub qubits: usize,
    pub rent_r: f64,
    pub seed: u64,
}

#[derive(Debug, Error, PartialEq)]
pub enum RandError {
    #[error("need gates >= 1, qubits >= 2 and 0 <= r <= 1 (got {gates} gates, {qubits} qubits, r = {r})")]
    InvalidSpec { gates: usize, qubits: usize, r: f64 },
    #[error("Rent fit needs at least {min} qubits, circuit has {found}")]
    TooSmall { min: usize, found: usize },
}

const ONE_QUBIT: [GateKind; 5] = [GateKind::X, GateKind::Z, GateKind::H, GateKind::S, GateKind::T];

/// Number of levels in the binary partition tree over `n` leaves.
fn tree_levels(n: usize) -> u32 {
    usize::BITS - (n - 1).leading_zeros()
}

/// Cumulative weights for sampling a tree level. Level l (subtree of 2^l
/// leaves) has weight proportional to 2^(l(r-1)); the geometric tail beyond
/// the root is folded into the root level so that the expected number of
/// edges leaving a subtree of size S scales as S^r at every level.
fn level_weights(levels: u32, r: f64) -> Vec<f64> {
    let q = 2f64.powf(r - 1.0);
    let mut w: Vec<f64> = (1..=levels).map(|l| q.powi(l as i32 - 1) * (1.0 - q)).collect();
    if let Some(top) = w.last_mut() {
        *top = q.powi(levels as i32 - 1);
    }
    let mut acc = 0.0;
    w.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

/// Walks the midpoint-split tree over `0..n` down `depth` levels toward leaf
/// `a` and returns the half of that subtree not containing `a`, or `None`
/// when the subtree is a single leaf.
fn subtree_halves(n: usize, a: usize, depth: u32) -> Option<(usize, usize)> {
    let (mut lo, mut hi) = (0, n);
    for _ in 0..depth {
        let mid = (lo + hi) / 2;
        if a < mid {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 2 {
            return None;
        }
    }
    let mid = (lo + hi) / 2;
    Some(if a < mid { (mid, hi) } else { (lo, mid) })
}

pub fn gen_random(spec: &RandSpec) -> Result<Circuit, RandError> {
    if spec.gates < 1 || spec.qubits < 2 || !(0.0..=1.0).contains(&spec.rent_r) {
        return Err(RandError::InvalidSpec {
            gates: spec.gates,
            qubits: spec.qubits,
            r: spec.rent_r,
        });
    }
    let n = spec.qubits;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let levels = tree_levels(n);
    let cum = level_weights(levels, spec.rent_r);
    let total = *cum.last().unwrap();

    let mut b = CircuitBuilder::new();
    let qs = b.register("q", n, QubitKind::Data);
    for _ in 0..spec.gates {
        let a = rng.random_range(0..n);
        if rng.random_bool(0.5) {
            let k = ONE_QUBIT[rng.random_range(0..ONE_QUBIT.len())];
            b.gate(k, &[qs[a]]);
            continue;
        }
        // Partner from the opposite half of a's subtree at the sampled level.
        let partner = loop {
            let x = rng.random_range(0.0..total);
            let l = cum.iter().position(|&c| x < c).unwrap_or(cum.len() - 1) as u32 + 1;
            if let Some((lo, hi)) = subtree_halves(n, a, levels - l) {
                break rng.random_range(lo..hi);
            }
        };
        let (c, t) = if rng.random_bool(0.5) {
            (a, partner)
        } else {
            (partner, a)
        };
        b.gate(GateKind::Cnot, &[qs[c], qs[t]]);
    }
    Ok(b.build().expect("generated circuit is valid"))
}

pub const RENT_MIN_QUBITS: usize = 64;
const FM_PASSES: usize = 1;

/// Per-level bisection statistics: (mean block size, mean external edges).
pub fn rent_levels(c: &Circuit) -> Vec<(f64, f64)> {
    let g = InteractionGraph::from_circuit(c);
    let n = c.num_qubits();
    let mut blocks: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut out = Vec::new();
    while blocks.iter().all(|b| b.len() >= 4) {
        let mut next = Vec::with_capacity(blocks.len() * 2);
        for b in &blocks {
            let (l, r) = g.bisect(b, b.len() / 2, FM_PASSES);
            next.push(l);
            next.push(r);
        }
        blocks = next;
        let mut inside = vec![false; n];
        let (mut size, mut ext) = (0.0, 0.0);
        for b in &blocks {
            for &v in b {
                inside[v] = true;
            }
            size += b.len() as f64;
            ext += g.external(b, &inside) as f64;
            for &v in b {
                inside[v] = false;
            }
        }
        let k = blocks.len() as f64;
        out.push((size / k, ext / k));
    }
    out
}

/// Least-squares slope of log(external edges) against log(block size).
/// The topmost split is dropped when enough levels remain, since blocks
/// comparable to the whole circuit fall off the power law.
pub fn measure_rent(c: &Circuit) -> Result<f64, RandError> {
    if c.num_qubits() < RENT_MIN_QUBITS {
        return Err(RandError::TooSmall {
            min: RENT_MIN_QUBITS,
            found: c.num_qubits(),
        });
    }
    let levels = rent_levels(c);
    let mut pts: Vec<(f64, f64)> = levels
        .iter()
        .filter(|&&(_, t)| t > 0.0)
        .map(|&(s, t)| (s.ln(), t.ln()))
        .collect();
    if pts.len() > 3 && levels[0].1 > 0.0 {
        pts.remove(0);
    }
    if pts.len() < 2 {
        return Ok(0.0);
    }
    Ok(slope(&pts))
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
