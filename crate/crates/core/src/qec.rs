//! Selective error-correction placement.
//!
//! Error accumulation is tracked with an integer "EDist" count per qubit: a
//! gate leaves each of its operands at one more than the largest incoming
//! count, and a correction resets a qubit to a base value. Corrections are
//! placed so that no count ever exceeds a threshold.

use crate::circuit::{Circuit, CircuitBuilder, Dag, Gate, GateId, GateKind, QubitId};
use crate::par;
use crate::tech::GateCostTable;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EDistConfig {
    pub threshold: u32,
    /// Count a qubit is left at after a correction.
    pub base: u32,
    /// Count of a qubit before its first gate.
    pub fresh: u32,
}

impl EDistConfig {
    pub fn new(threshold: u32) -> Self {
        EDistConfig {
            threshold,
            ..Default::default()
        }
    }

    pub fn with_base(self, base: u32) -> Self {
        EDistConfig { base, ..self }
    }

    pub fn with_threshold(self, threshold: u32) -> Self {
        EDistConfig { threshold, ..self }
    }

    pub fn validate(&self) -> Result<(), QecError> {
        if self.base >= self.threshold || self.fresh > self.threshold {
            return Err(QecError::Config(*self));
        }
        Ok(())
    }
}

impl Default for EDistConfig {
    fn default() -> Self {
        EDistConfig {
            threshold: 6,
            base: 1,
            fresh: 0,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QecError {
    #[error("invalid EDist configuration {0:?}: need base < threshold and fresh <= threshold")]
    Config(EDistConfig),
    #[error("gate {gate} cannot meet threshold {threshold} even with all operands corrected")]
    Infeasible { gate: GateId, threshold: u32 },
    #[error("exhaustive search limited to {max_gates} gates and {max_qubits} qubits")]
    TooLarge { max_gates: usize, max_qubits: usize },
    #[error("correction point ({0}, q{1}) does not name a gate operand")]
    BadPoint(GateId, QubitId),
}

/// Set of `(gate, qubit)` points; each means "correct `qubit` right after `gate`".
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionPlacement {
    pub points: BTreeSet<(GateId, QubitId)>,
}

impl CorrectionPlacement {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, g: GateId, q: QubitId) -> bool {
        self.points.contains(&(g, q))
    }

    pub fn check(&self, c: &Circuit) -> Result<(), QecError> {
        for &(g, q) in &self.points {
            let ok = c.gates().get(g as usize).is_some_and(|gate| gate.operands.contains(&q));
            if !ok {
                return Err(QecError::BadPoint(g, q));
            }
        }
        Ok(())
    }
}

impl FromIterator<(GateId, QubitId)> for CorrectionPlacement {
    fn from_iter<I: IntoIterator<Item = (GateId, QubitId)>>(iter: I) -> Self {
        CorrectionPlacement {
            points: iter.into_iter().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EDistReport {
    /// Count of each operand right after each gate, before any correction.
    pub after: Vec<Vec<u32>>,
    pub max: u32,
}

fn gate_output(g: &Gate, counts: &[u32], fresh: u32, base: u32) -> u32 {
    match g.kind {
        GateKind::PrepZ => fresh + 1,
        GateKind::Correct => base,
        _ => 1 + g.operands.iter().map(|&q| counts[q as usize]).max().unwrap_or(0),
    }
}

/// Forward EDist pass over the circuit.
pub fn compute_edist(c: &Circuit, p: &CorrectionPlacement, cfg: &EDistConfig) -> EDistReport {
    let mut counts = vec![cfg.fresh; c.num_qubits()];
    let mut after = Vec::with_capacity(c.num_gates());
    let mut max = 0;
    for g in c.gates() {
        let out = gate_output(g, &counts, cfg.fresh, cfg.base);
        max = max.max(out);
        after.push(vec![out; g.operands.len()]);
        for &q in &g.operands {
            counts[q as usize] = if p.contains(g.id, q) { cfg.base } else { out };
        }
    }
    EDistReport { after, max }
}

/// One correction per gate operand.
pub fn every_gate_placement(c: &Circuit) -> CorrectionPlacement {
    c.gates()
        .iter()
        .flat_map(|g| g.operands.iter().map(move |&q| (g.id, q)))
        .collect()
}

/// Lazy placement: walk gates in order and, when a gate would push a count
/// over the threshold, correct its largest-count operands first (lowest id on
/// ties) until it fits.
pub fn greedy_corrections(c: &Circuit, cfg: &EDistConfig) -> Result<CorrectionPlacement, QecError> {
    cfg.validate()?;
    let mut counts = vec![cfg.fresh; c.num_qubits()];
    let mut last: Vec<Option<GateId>> = vec![None; c.num_qubits()];
    let mut placement = CorrectionPlacement::default();
    for g in c.gates() {
        if !matches!(g.kind, GateKind::PrepZ | GateKind::Correct) {
            let mut ops: Vec<QubitId> = g.operands.clone();
            ops.sort_by_key(|&q| (std::cmp::Reverse(counts[q as usize]), q));
            for &q in &ops {
                if g.operands.iter().map(|&o| counts[o as usize]).max().unwrap_or(0) < cfg.threshold {
                    break;
                }
                if counts[q as usize] > cfg.base {
                    if let Some(prev) = last[q as usize] {
                        placement.points.insert((prev, q));
                        counts[q as usize] = cfg.base;
                    }
                }
            }
        }
        let out = gate_output(g, &counts, cfg.fresh, cfg.base);
        if out > cfg.threshold {
            return Err(QecError::Infeasible {
                gate: g.id,
                threshold: cfg.threshold,
            });
        }
        for &q in &g.operands {
            counts[q as usize] = out;
            last[q as usize] = Some(g.id);
        }
    }
    Ok(placement)
}

struct Trail {
    point: (GateId, QubitId),
    parent: Option<Rc<Trail>>,
}

#[derive(Clone)]
struct State {
    counts: Vec<u32>,
    cost: usize,
    trail: Option<Rc<Trail>>,
}

/// Frontier states × gates × qubits the search may touch.
const SEARCH_BUDGET: usize = 20_000_000;

/// Default frontier width for [`insert_corrections`].
pub const DEFAULT_BEAM: usize = 4096;

/// Minimum-size placement search. Runs a frontier search over per-qubit count
/// vectors (exact while the frontier stays under the beam width) and falls
/// back to the lazy greedy placement whenever that is at least as small.
pub fn insert_corrections(c: &Circuit, cfg: &EDistConfig) -> Result<CorrectionPlacement, QecError> {
    insert_corrections_with_beam(c, cfg, DEFAULT_BEAM)
}

pub fn insert_corrections_with_beam(
    c: &Circuit,
    cfg: &EDistConfig,
    beam: usize,
) -> Result<CorrectionPlacement, QecError> {
    let greedy = greedy_corrections(c, cfg)?;
    if greedy.is_empty() {
        return Ok(greedy);
    }
    // Keep the work bounded on large circuits by shrinking the frontier.
    let work = (c.num_gates() * c.num_qubits().max(1) * 8).max(1);
    if work > 5 * SEARCH_BUDGET {
        // A frontier this narrow rarely beats the greedy placement.
        return Ok(greedy);
    }
    let width = beam.min((SEARCH_BUDGET / work).max(4));
    match frontier_search(c, cfg, width) {
        Some(p) if p.len() < greedy.len() => Ok(p),
        _ => Ok(greedy),
    }
}

fn frontier_search(c: &Circuit, cfg: &EDistConfig, width: usize) -> Option<CorrectionPlacement> {
    let nq = c.num_qubits();
    let dag = Dag::build(c).ok()?;
    let last_use: Vec<Option<GateId>> = (0..nq as QubitId).map(|q| dag.chain(q).last().copied()).collect();
    let mut prev: Vec<Option<GateId>> = vec![None; nq];
    let mut frontier = vec![State {
        counts: vec![cfg.fresh; nq],
        cost: 0,
        trail: None,
    }];

    for g in c.gates() {
        let mut next: Vec<State> = Vec::new();
        let mut seen: HashMap<Vec<u32>, usize> = HashMap::new();
        let resettable: Vec<QubitId> = if matches!(g.kind, GateKind::PrepZ | GateKind::Correct) {
            Vec::new()
        } else {
            g.operands
                .iter()
                .copied()
                .filter(|&q| prev[q as usize].is_some())
                .collect()
        };
        for st in &frontier {
            for mask in 0u32..(1 << resettable.len()) {
                let mut counts = st.counts.clone();
                let mut trail = st.trail.clone();
                let mut useful = true;
                for (i, &q) in resettable.iter().enumerate() {
                    if mask & (1 << i) != 0 {
                        if counts[q as usize] <= cfg.base {
                            useful = false;
                            break;
                        }
                        counts[q as usize] = cfg.base;
                        trail = Some(Rc::new(Trail {
                            point: (prev[q as usize].unwrap(), q),
                            parent: trail,
                        }));
                    }
                }
                if !useful {
                    continue;
                }
                let out = gate_output(g, &counts, cfg.fresh, cfg.base);
                if out > cfg.threshold {
                    continue;
                }
                for &q in &g.operands {
                    // Dead qubits no longer matter; zeroing them merges states.
                    counts[q as usize] = if last_use[q as usize] == Some(g.id) { 0 } else { out };
                }
                let cost = st.cost + mask.count_ones() as usize;
                match seen.get(&counts) {
                    Some(&i) if next[i].cost <= cost => {}
                    Some(&i) => {
                        next[i] = State { counts, cost, trail };
                    }
                    None => {
                        seen.insert(counts.clone(), next.len());
                        next.push(State { counts, cost, trail });
                    }
                }
            }
        }
        if next.is_empty() {
            return None;
        }
        if next.len() <= 2048 {
            next = prune_dominated(next);
        }
        if next.len() > width {
            next.sort_by_key(|s| {
                (
                    s.cost,
                    s.counts.iter().copied().max().unwrap_or(0),
                    s.counts.iter().map(|&x| x as u64).sum::<u64>(),
                )
            });
            next.truncate(width);
        }
        for &q in &g.operands {
            prev[q as usize] = Some(g.id);
        }
        frontier = next;
    }

    let best_cost = frontier.iter().map(|s| s.cost).min()?;
    frontier
        .iter()
        .filter(|s| s.cost == best_cost)
        .map(|s| {
            let mut pts = Vec::new();
            let mut t = s.trail.as_ref();
            while let Some(node) = t {
                pts.push(node.point);
                t = node.parent.as_ref();
            }
            pts.into_iter().collect::<CorrectionPlacement>()
        })
        // Prefer the latest corrections, matching the lazy greedy style.
        .max_by(|a, b| {
            let ka: u64 = a.points.iter().map(|p| p.0 as u64).sum();
            let kb: u64 = b.points.iter().map(|p| p.0 as u64).sum();
            ka.cmp(&kb).then_with(|| a.points.cmp(&b.points))
        })
}

fn prune_dominated(mut states: Vec<State>) -> Vec<State> {
    states.sort_by_key(|s| (s.cost, s.counts.iter().map(|&x| x as u64).sum::<u64>()));
    let mut kept: Vec<State> = Vec::with_capacity(states.len());
    for s in states {
        let dominated = kept
            .iter()
            .any(|k| k.cost <= s.cost && k.counts.iter().zip(&s.counts).all(|(a, b)| a <= b));
        if !dominated {
            kept.push(s);
        }
    }
    kept
}

pub const ORACLE_MAX_GATES: usize = 8;
pub const ORACLE_MAX_QUBITS: usize = 6;

/// Exhaustive minimum number of corrections, by increasing placement size.
/// Returns `None` when no placement satisfies the threshold.
pub fn min_corrections_oracle(c: &Circuit, cfg: &EDistConfig) -> Result<Option<usize>, QecError> {
    if c.num_gates() > ORACLE_MAX_GATES || c.num_qubits() > ORACLE_MAX_QUBITS {
        return Err(QecError::TooLarge {
            max_gates: ORACLE_MAX_GATES,
            max_qubits: ORACLE_MAX_QUBITS,
        });
    }
    cfg.validate()?;
    let candidates: Vec<(GateId, QubitId)> = every_gate_placement(c).points.into_iter().collect();
    let n = candidates.len();
    for k in 0..=n {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let p: CorrectionPlacement = idx.iter().map(|&i| candidates[i]).collect();
            if compute_edist(c, &p, cfg).max <= cfg.threshold {
                return Ok(Some(k));
            }
            // Next k-combination in lexicographic order.
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if idx[i] < n - k + i {
                    idx[i] += 1;
                    for j in i + 1..k {
                        idx[j] = idx[j - 1] + 1;
                    }
                    i = usize::MAX;
                    break;
                }
            }
            if i != usize::MAX {
                break;
            }
        }
    }
    Ok(None)
}

/// Inserts a `correct` gate after each placement point, in operand order.
pub fn apply_placement(c: &Circuit, p: &CorrectionPlacement) -> Circuit {
    let mut b = CircuitBuilder::new();
    for q in c.qubits() {
        b.qubit(q.label(), q.kind);
    }
    for g in c.gates() {
        b.set_tag(g.tag.as_deref());
        b.push(g.kind, g.inverse, &g.operands);
        for &q in &g.operands {
            if p.contains(g.id, q) {
                b.set_tag(Some("qec"));
                b.gate(GateKind::Correct, &[q]);
            }
        }
    }
    b.build().expect("inserting corrections keeps the circuit valid")
}

/// Operation count in the style of the selective-correction tables: every
/// logical gate counts once, every correction counts its full physical
/// bundle.
pub fn table_op_count(c: &Circuit, p: &CorrectionPlacement, costs: &GateCostTable) -> u64 {
    c.num_gates() as u64 + p.len() as u64 * costs.correction().total()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMode {
    MaxSuccess,
    /// Largest threshold within 5% of the every-gate success probability.
    MaxTWithin5pct,
    /// Best success with at most this many corrections.
    Budget(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TunePoint {
    pub threshold: u32,
    pub corrections: usize,
    pub p_success: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    /// `None` means the every-gate placement was returned.
    pub threshold: Option<u32>,
    pub placement: CorrectionPlacement,
    pub p_success: f64,
    pub every_gate_p: f64,
    /// Set when no threshold met the mode's constraint.
    pub warning: bool,
    pub evaluated: Vec<TunePoint>,
}

/// Chooses a threshold for `c`. `base` supplies b and f; `eval` maps a
/// placement to a success probability and must be deterministic.
pub fn tune_threshold<E>(c: &Circuit, base: &EDistConfig, mode: TuneMode, eval: E) -> Result<TuneResult, QecError>
where
    E: Fn(&CorrectionPlacement) -> f64 + Sync + Send,
{
    let depth = Dag::build(c).map(|d| d.depth()).unwrap_or(0) as u32;
    let lo = (base.base + 1).max(base.fresh).max(1);
    let hi = (depth + base.fresh).max(lo);
    let every = every_gate_placement(c);
    let every_p = eval(&every);
    let mut evaluated: Vec<TunePoint> = Vec::new();
    let mut cache: HashMap<u32, (CorrectionPlacement, f64)> = HashMap::new();

    // Evaluates a batch of thresholds in parallel and records them.
    let probe = |ts: &[u32],
                 cache: &mut HashMap<u32, (CorrectionPlacement, f64)>,
                 evaluated: &mut Vec<TunePoint>|
     -> Result<(), QecError> {
        let todo: Vec<u32> = ts.iter().copied().filter(|t| !cache.contains_key(t)).collect();
        let placed: Vec<Result<(u32, CorrectionPlacement), QecError>> = par::map(&todo, |&t| {
            insert_corrections(c, &base.with_threshold(t)).map(|p| (t, p))
        });
        let placed: Vec<(u32, CorrectionPlacement)> = placed.into_iter().collect::<Result<_, _>>()?;
        let ps: Vec<f64> = par::map(&placed, |(_, p)| eval(p));
        for ((t, p), pr) in placed.into_iter().zip(ps) {
            evaluated.push(TunePoint {
                threshold: t,
                corrections: p.len(),
                p_success: pr,
            });
            cache.insert(t, (p, pr));
        }
        Ok(())
    };

    let chosen: Option<u32> = match mode {
        TuneMode::MaxSuccess => {
            let ts: Vec<u32> = candidate_thresholds(lo, hi);
            probe(&ts, &mut cache, &mut evaluated)?;
            ts.iter().copied().max_by(|a, b| {
                let (pa, pb) = (cache[a].1, cache[b].1);
                pa.total_cmp(&pb).then(b.cmp(a))
            })
        }
        TuneMode::MaxTWithin5pct => search_largest(lo, hi, |ts| {
            probe(ts, &mut cache, &mut evaluated)?;
            Ok(ts.iter().map(|t| cache[t].1 >= 0.95 * every_p).collect())
        })?,
        // Placement size is non-increasing in T, so the smallest T that fits
        // the budget has the most corrections and the best success.
        TuneMode::Budget(n) => search_smallest(lo, hi, |ts| {
            probe(ts, &mut cache, &mut evaluated)?;
            Ok(ts.iter().map(|t| cache[t].0.len() <= n).collect())
        })?,
    };

    evaluated.sort_by_key(|p| p.threshold);
    evaluated.dedup_by_key(|p| p.threshold);
    Ok(match chosen {
        Some(t) => {
            let (placement, p) = cache.remove(&t).expect("chosen threshold was evaluated");
            TuneResult {
                threshold: Some(t),
                placement,
                p_success: p,
                every_gate_p: every_p,
                warning: false,
                evaluated,
            }
        }
        None => TuneResult {
            threshold: None,
            placement: every,
            p_success: every_p,
            every_gate_p: every_p,
            warning: true,
            evaluated,
        },
    })
}

fn candidate_thresholds(lo: u32, hi: u32) -> Vec<u32> {
    if hi - lo <= 48 {
        return (lo..=hi).collect();
    }
    let mut ts: Vec<u32> = (lo..lo + 16).collect();
    let mut t = (lo + 16) as f64;
    while (t as u32) < hi {
        ts.push(t as u32);
        t *= 1.25;
    }
    ts.push(hi);
    ts.dedup();
    ts
}

const PROBES: i64 = 4;

/// Evenly spaced probe points strictly inside (a, b).
fn probe_points(a: i64, b: i64) -> Vec<u32> {
    let span = b - a - 1;
    if span <= PROBES {
        return (a + 1..b).map(|t| t as u32).collect();
    }
    let mut ts: Vec<u32> = (1..=PROBES)
        .map(|i| (a + i * (span + 1) / (PROBES + 1)) as u32)
        .collect();
    ts.dedup();
    ts
}

/// Largest t in [lo, hi] with pred(t) true, assuming pred is true up to some
/// point and false after. Probes several points per round.
fn search_largest<F>(lo: u32, hi: u32, mut pred: F) -> Result<Option<u32>, QecError>
where
    F: FnMut(&[u32]) -> Result<Vec<bool>, QecError>,
{
    let (mut good, mut bad) = (lo as i64 - 1, hi as i64 + 1);
    while good + 1 < bad {
        let ts = probe_points(good, bad);
        let res = pred(&ts)?;
        for (&t, &ok) in ts.iter().zip(&res) {
            if ok {
                good = good.max(t as i64);
            } else {
                bad = bad.min(t as i64);
            }
        }
        good = good.min(bad - 1);
    }
    Ok((good >= lo as i64).then_some(good as u32))
}

/// Smallest t in [lo, hi] with pred(t) true, assuming pred is false up to
/// some point and true after.
fn search_smallest<F>(lo: u32, hi: u32, mut pred: F) -> Result<Option<u32>, QecError>
where
    F: FnMut(&[u32]) -> Result<Vec<bool>, QecError>,
{
    let (mut bad, mut good) = (lo as i64 - 1, hi as i64 + 1);
    while bad + 1 < good {
        let ts = probe_points(bad, good);
        let res = pred(&ts)?;
        for (&t, &ok) in ts.iter().zip(&res) {
            if ok {
                good = good.min(t as i64);
            } else {
                bad = bad.max(t as i64);
            }
        }
        bad = bad.min(good - 1);
    }
    Ok((good <= hi as i64).then_some(good as u32))
}
