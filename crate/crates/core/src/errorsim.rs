//! Error-event traces and Monte Carlo estimation of the probability that a
//! mapped circuit completes without an uncorrectable logical error.
//!
//! Every logical qubit carries a Pauli frame: one 7-bit X mask and one
//! 7-bit Z mask over its code block. Transversal gates propagate the masks,
//! fired error events flip bits, and at each correction the block fails if
//! either mask has weight two or more; otherwise it is cleared.

use crate::circuit::{Circuit, Gate, GateKind, QubitId};
use crate::datapath::DatapathConfig;
use crate::datapath::RegionLayout;
use crate::mapper::{map, MapError, MappedSchedule};
use crate::par;
use crate::qec::{apply_placement, CorrectionPlacement};
use crate::tech::{channel_errors, FactoryKind, OpBundle, PhysOp, Tech, CODE_BLOCK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Gate,
    Move,
    Idle,
    TeleportChannel,
    BallisticChannel,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// One code position of one block.
    Position { qubit: QubitId, pos: u8 },
    /// The same position of two blocks (a transversal two-qubit gate).
    Pair { a: QubitId, b: QubitId, pos: u8 },
    /// A uniformly random position of the block.
    Block { qubit: QubitId },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub target: Target,
    pub kind: EventKind,
    pub p: f64,
    /// Independent copies of the event.
    pub multiplicity: u32,
    pub time: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceItem {
    Event(ErrorEvent),
    Cnot {
        control: QubitId,
        target: QubitId,
    },
    Hadamard(QubitId),
    Phase(QubitId),
    /// Fresh block: earlier errors are discarded.
    Reset(QubitId),
    /// Syndrome window boundary: the block is checked and cleared.
    Correct(QubitId),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorTrace {
    pub qubits: usize,
    pub items: Vec<TraceItem>,
}

impl ErrorTrace {
    pub fn new(qubits: usize) -> Self {
        ErrorTrace {
            qubits,
            items: Vec::new(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &ErrorEvent> {
        self.items.iter().filter_map(|i| match i {
            TraceItem::Event(e) => Some(e),
            _ => None,
        })
    }

    /// Total elementary error opportunities (events times multiplicity).
    pub fn opportunities(&self) -> u64 {
        self.events().map(|e| e.multiplicity as u64).sum()
    }

    pub fn push_event(&mut self, target: Target, kind: EventKind, p: f64, multiplicity: u32, time: f64) {
        if p > 0.0 && multiplicity > 0 {
            self.items.push(TraceItem::Event(ErrorEvent {
                target,
                kind,
                p: p.min(1.0),
                multiplicity,
                time,
            }));
        }
    }
}

/// Error probabilities of ancilla blocks delivered to a datapath.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AncillaQuality {
    pub zero: f64,
    pub t: f64,
}

impl AncillaQuality {
    pub fn for_datapath(cfg: &DatapathConfig, tech: &Tech) -> Self {
        let es = &tech.error_set;
        let zero = tech.factories.get(cfg.factory).infidelity(es);
        let t = if cfg.kind.fixed_ancilla() {
            zero
        } else {
            tech.factories.t_factory.infidelity(es)
        };
        AncillaQuality { zero, t }
    }

    pub fn for_factory(kind: FactoryKind, tech: &Tech) -> Self {
        let es = &tech.error_set;
        AncillaQuality {
            zero: tech.factories.get(kind).infidelity(es),
            t: tech.factories.t_factory.infidelity(es),
        }
    }
}

/// Appends a bundle of physical ops on block `q`: op types whose count is
/// a multiple of the block size hit every position equally, the rest land
/// on random positions.
fn push_bundle(tr: &mut ErrorTrace, q: QubitId, b: &OpBundle, tech: &Tech, time: f64) {
    let es = &tech.error_set;
    for op in [PhysOp::OneQubit, PhysOp::TwoQubit, PhysOp::Prep, PhysOp::Measure] {
        let k = b.count(op);
        if k == 0 {
            continue;
        }
        let p = es.params(op).p;
        if k.is_multiple_of(CODE_BLOCK as u64) {
            for pos in 0..CODE_BLOCK as u8 {
                tr.push_event(
                    Target::Position { qubit: q, pos },
                    EventKind::Gate,
                    p,
                    (k / CODE_BLOCK as u64) as u32,
                    time,
                );
            }
        } else {
            tr.push_event(Target::Block { qubit: q }, EventKind::Gate, p, k as u32, time);
        }
    }
}

/// Data-side ops of a correction whose faults reach the block after the
/// syndrome is taken: one transversal two-qubit layer, the unit of error a
/// corrected block starts the next window with.
fn correction_residual() -> OpBundle {
    OpBundle::new(0, CODE_BLOCK as u64, 0, 0)
}

/// Gate errors, frame propagation and ancilla errors of one logical gate.
fn push_gate(tr: &mut ErrorTrace, g: &Gate, tech: &Tech, anc: AncillaQuality, time: f64) {
    let ops = &g.operands;
    match g.kind {
        GateKind::X | GateKind::Z => push_bundle(tr, ops[0], &tech.costs.data_ops(g.kind), tech, time),
        GateKind::H => {
            tr.items.push(TraceItem::Hadamard(ops[0]));
            push_bundle(tr, ops[0], &tech.costs.data_ops(g.kind), tech, time);
        }
        GateKind::S => {
            tr.items.push(TraceItem::Phase(ops[0]));
            push_bundle(tr, ops[0], &tech.costs.data_ops(g.kind), tech, time);
        }
        GateKind::Cnot => {
            tr.items.push(TraceItem::Cnot {
                control: ops[0],
                target: ops[1],
            });
            push_pairs(tr, ops[0], ops[1], &tech.costs.cnot, tech, time);
        }
        GateKind::T => {
            push_bundle(tr, ops[0], &tech.costs.t_gate, tech, time);
            tr.push_event(Target::Block { qubit: ops[0] }, EventKind::Gate, anc.t, 1, time);
        }
        GateKind::Toffoli => {
            // Propagates like two CNOTs onto the target; the seven T gates
            // draw seven T ancillas.
            for &c in &ops[..2] {
                tr.items.push(TraceItem::Cnot {
                    control: c,
                    target: ops[2],
                });
            }
            let per = tech.costs.data_ops(GateKind::Toffoli);
            let part = |n: u64, i: u64| n / 3 + u64::from(i < n % 3);
            for (i, &q) in ops.iter().enumerate() {
                let i = i as u64;
                let share = OpBundle::new(
                    part(per.one_qubit, i),
                    part(per.two_qubit, i),
                    part(per.prep, i),
                    part(per.measure, i),
                );
                push_bundle(tr, q, &share, tech, time);
                tr.push_event(
                    Target::Block { qubit: q },
                    EventKind::Gate,
                    anc.t,
                    if q == ops[2] { 3 } else { 2 },
                    time,
                );
            }
        }
        GateKind::PrepZ => {
            tr.items.push(TraceItem::Reset(ops[0]));
            push_bundle(tr, ops[0], &tech.costs.prepz, tech, time);
        }
        GateKind::Measure => {
            push_bundle(tr, ops[0], &tech.costs.measure, tech, time);
            tr.items.push(TraceItem::Correct(ops[0]));
        }
        GateKind::Correct => push_correction(tr, ops[0], tech, anc, time),
    }
}

fn push_pairs(tr: &mut ErrorTrace, a: QubitId, b: QubitId, bundle: &OpBundle, tech: &Tech, time: f64) {
    let k = bundle.two_qubit;
    let per = (k / CODE_BLOCK as u64) as u32;
    for pos in 0..CODE_BLOCK as u8 {
        tr.push_event(
            Target::Pair { a, b, pos },
            EventKind::Gate,
            tech.error_set.two_qubit.p,
            per,
            time,
        );
    }
    let rest = OpBundle {
        two_qubit: k % CODE_BLOCK as u64,
        ..*bundle
    };
    push_bundle(tr, a, &rest, tech, time);
}

/// Noisy correction: the residual extraction faults and the consumed
/// ancilla blocks' errors land before the window closes.
fn push_correction(tr: &mut ErrorTrace, q: QubitId, tech: &Tech, anc: AncillaQuality, time: f64) {
    push_bundle(tr, q, &correction_residual(), tech, time);
    tr.push_event(
        Target::Block { qubit: q },
        EventKind::Gate,
        anc.zero,
        tech.costs.blocks_per_correction as u32,
        time,
    );
    tr.items.push(TraceItem::Correct(q));
}

/// Gate-only trace of an unmapped circuit, in program order: no movement,
/// idle or network errors.
pub fn gate_trace(c: &Circuit, tech: &Tech, anc: AncillaQuality) -> ErrorTrace {
    let mut tr = ErrorTrace::new(c.num_qubits());
    for (i, g) in c.gates().iter().enumerate() {
        push_gate(&mut tr, g, tech, anc, i as f64);
    }
    tr
}

/// Per-position failure of a teleport whose EPR pair has fidelity `f`,
/// including the Bell measurement and fix-up ops.
pub fn teleport_event_p(f: f64, tech: &Tech) -> f64 {
    let per = tech.costs.teleport;
    let k = CODE_BLOCK as u64;
    let per_pos = OpBundle::new(per.one_qubit / k, per.two_qubit / k, per.prep / k, per.measure / k);
    ((1.0 - f) + per_pos.failure(&tech.error_set)).min(1.0)
}

#[derive(Clone, Copy)]
enum Busy {
    Gate,
    Move,
    Ec,
}

/// Builds the dataflow-ordered event list of a mapped schedule. Gates
/// expand through the cost table, the ballistic move into each gate site
/// becomes a channel event, teleports become per-position events from the
/// purified EPR fidelity, and every idle gap after a qubit's first use
/// becomes an idle event. Idle corrections in memory close windows like
/// Correct gates.
pub fn build_error_trace(c: &Circuit, s: &MappedSchedule, layout: &RegionLayout, tech: &Tech) -> ErrorTrace {
    let es = &tech.error_set;
    let anc = AncillaQuality::for_datapath(&layout.config, tech);
    let nq = c.num_qubits();
    let gates = c.gates();
    let move_in = channel_errors(tech.costs.move_in.0 as u64, tech.costs.move_in.1 as u64, 0.0, es);
    let f = tech.router.purified_fidelity(es);
    let tele_p = teleport_event_p(f, tech);

    // Per-qubit activity in time order.
    let mut busy: Vec<Vec<(f64, f64, Busy)>> = vec![Vec::new(); nq];
    for (i, g) in gates.iter().enumerate() {
        let slot = &s.gates[i];
        for &q in &g.operands {
            busy[q as usize].push((slot.start, slot.finish(), Busy::Gate));
        }
    }
    for m in &s.relocations {
        busy[m.qubit as usize].push((m.depart, m.arrive, Busy::Move));
    }
    for e in &s.corrections {
        if e.gate.is_none() {
            busy[e.qubit as usize].push((e.time, e.time, Busy::Ec));
        }
    }

    let mut keyed = Keyed::default();
    for (q, acts) in busy.iter_mut().enumerate() {
        acts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let qid = q as QubitId;
        let mut last = s.first_activity[q];
        if !last.is_finite() {
            continue;
        }
        for &(start, end, what) in acts.iter() {
            if start < last {
                // Moves and idle corrections before first use carry no state.
                continue;
            }
            keyed.idle(qid, last, start, es.idle_per_us);
            match what {
                Busy::Move => {
                    for pos in 0..CODE_BLOCK as u8 {
                        let ev = ErrorEvent {
                            target: Target::Position { qubit: qid, pos },
                            kind: EventKind::TeleportChannel,
                            p: tele_p,
                            multiplicity: 1,
                            time: end,
                        };
                        keyed.push(end, 0, TraceItem::Event(ev));
                    }
                }
                Busy::Ec => {
                    let mut tr = ErrorTrace::new(nq);
                    push_correction(&mut tr, qid, tech, anc, end);
                    for it in tr.items {
                        keyed.push(end, 0, it);
                    }
                }
                Busy::Gate => {}
            }
            last = end.max(last);
        }
        keyed.idle(qid, last, s.makespan, es.idle_per_us);
    }

    for (i, g) in gates.iter().enumerate() {
        let start = s.gates[i].start;
        for &q in &g.operands {
            let ev = ErrorEvent {
                target: Target::Block { qubit: q },
                kind: EventKind::BallisticChannel,
                p: move_in.p,
                multiplicity: CODE_BLOCK as u32,
                time: start,
            };
            keyed.push(start, 1, TraceItem::Event(ev));
        }
        let mut tr = ErrorTrace::new(nq);
        push_gate(&mut tr, g, tech, anc, start);
        for it in tr.items {
            keyed.push(start, 1, it);
        }
    }
    // Gates of one qubit never overlap, so time order is dataflow order;
    // at equal times idle, teleport and memory-correction items go first.
    let mut items = keyed.items;
    items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    ErrorTrace {
        qubits: nq,
        items: items.into_iter().map(|k| k.3).collect(),
    }
}

/// Trace items keyed by (time, phase, insertion order).
#[derive(Default)]
struct Keyed {
    items: Vec<(f64, u8, usize, TraceItem)>,
}

impl Keyed {
    fn push(&mut self, time: f64, phase: u8, item: TraceItem) {
        if matches!(item, TraceItem::Event(e) if e.p <= 0.0) {
            return;
        }
        let n = self.items.len();
        self.items.push((time, phase, n, item));
    }

    fn idle(&mut self, q: QubitId, from: f64, to: f64, rate: f64) {
        let d = to - from;
        if d <= 0.0 {
            return;
        }
        let ev = ErrorEvent {
            target: Target::Block { qubit: q },
            kind: EventKind::Idle,
            p: -((-rate).ln_1p() * d).exp_m1(),
            multiplicity: CODE_BLOCK as u32,
            time: to,
        };
        self.push(to, 0, TraceItem::Event(ev));
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub p_success: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub successes: u64,
}

/// Wilson score interval at 95%.
pub fn wilson(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054;
    let n = trials as f64;
    let p = successes as f64 / n;
    let d = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / d;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / d;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Trace compiled for sampling: events with cumulative hazards and the
/// frame operations between them.
struct Compiled {
    qubits: usize,
    ops: Vec<Op>,
    events: Vec<(Target, u32)>,
    /// Hazard of one copy of each event.
    unit: Vec<f64>,
    /// Cumulative hazard up to and including each event.
    cum: Vec<f64>,
}

#[derive(Clone, Copy)]
enum Op {
    Fire(u32),
    Cnot(u32, u32),
    H(u32),
    S(u32),
    Reset(u32),
    Correct(u32),
}

impl Compiled {
    fn new(t: &ErrorTrace) -> Self {
        let mut ops = Vec::with_capacity(t.items.len());
        let (mut events, mut unit, mut cum) = (Vec::new(), Vec::new(), Vec::new());
        let mut acc = 0.0;
        for it in &t.items {
            ops.push(match *it {
                TraceItem::Event(e) => {
                    // Certain events are capped just below 1 to keep hazards finite.
                    let h = -(-e.p.min(1.0 - 1e-15)).ln_1p();
                    acc += h * e.multiplicity as f64;
                    events.push((e.target, e.multiplicity));
                    unit.push(h);
                    cum.push(acc);
                    Op::Fire(events.len() as u32 - 1)
                }
                TraceItem::Cnot { control, target } => Op::Cnot(control, target),
                TraceItem::Hadamard(q) => Op::H(q),
                TraceItem::Phase(q) => Op::S(q),
                TraceItem::Reset(q) => Op::Reset(q),
                TraceItem::Correct(q) => Op::Correct(q),
            });
        }
        Compiled {
            qubits: t.qubits,
            ops,
            events,
            unit,
            cum,
        }
    }

    /// Fired (event, copies) pairs in trace order for one trial. Each copy
    /// of each event is an independent Bernoulli trial; the gap to the next
    /// firing copy is drawn from the cumulative hazard.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<(u32, u32)>) {
        out.clear();
        let total = self.cum.last().copied().unwrap_or(0.0);
        let mut h = 0.0;
        loop {
            let u: f64 = rng.random();
            h += -(1.0 - u).ln();
            if h >= total {
                break;
            }
            let e = self.cum.partition_point(|&c| c <= h);
            let before = if e == 0 { 0.0 } else { self.cum[e - 1] };
            let copy = (((h - before) / self.unit[e]) as u32).min(self.events[e].1 - 1);
            match out.last_mut() {
                Some(last) if last.0 == e as u32 => last.1 += 1,
                _ => out.push((e as u32, 1)),
            }
            // Restart just past the copy that fired.
            h = (before + (copy + 1) as f64 * self.unit[e]).min(self.cum[e]);
        }
    }

    fn run_trial(&self, seed: u64, trial: u64, scratch: &mut Scratch) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        self.sample(&mut rng, &mut scratch.fired);
        if scratch.fired.len() <= 1 && scratch.fired.first().is_none_or(|f| f.1 == 1) {
            // A single fault never exceeds weight one in any block.
            return true;
        }
        let (x, z) = (&mut scratch.x, &mut scratch.z);
        x.iter_mut().for_each(|m| *m = 0);
        z.iter_mut().for_each(|m| *m = 0);
        let mut next = 0usize;
        for op in &self.ops {
            match *op {
                Op::Fire(e) => {
                    if next < scratch.fired.len() && scratch.fired[next].0 == e {
                        let copies = scratch.fired[next].1;
                        next += 1;
                        let (target, _) = self.events[e as usize];
                        for _ in 0..copies {
                            apply(target, x, z, &mut rng);
                        }
                    }
                }
                Op::Cnot(c, t) => {
                    let (c, t) = (c as usize, t as usize);
                    x[t] ^= x[c];
                    z[c] ^= z[t];
                }
                Op::H(q) => {
                    let q = q as usize;
                    std::mem::swap(&mut x[q], &mut z[q]);
                }
                Op::S(q) => {
                    let q = q as usize;
                    z[q] ^= x[q];
                }
                Op::Reset(q) => {
                    x[q as usize] = 0;
                    z[q as usize] = 0;
                }
                Op::Correct(q) => {
                    let q = q as usize;
                    if x[q].count_ones() >= 2 || z[q].count_ones() >= 2 {
                        return false;
                    }
                    x[q] = 0;
                    z[q] = 0;
                }
            }
        }
        (0..self.qubits).all(|q| x[q].count_ones() < 2 && z[q].count_ones() < 2)
    }
}

struct Scratch {
    fired: Vec<(u32, u32)>,
    x: Vec<u8>,
    z: Vec<u8>,
}

fn pauli(x: &mut u8, z: &mut u8, pos: u8, rng: &mut ChaCha8Rng) {
    let bit = 1u8 << pos;
    match rng.random_range(0..3u8) {
        0 => *x ^= bit,
        1 => *z ^= bit,
        _ => {
            *x ^= bit;
            *z ^= bit;
        }
    }
}

fn apply(t: Target, x: &mut [u8], z: &mut [u8], rng: &mut ChaCha8Rng) {
    match t {
        Target::Position { qubit, pos } => {
            let q = qubit as usize;
            pauli(&mut x[q], &mut z[q], pos, rng);
        }
        Target::Pair { a, b, pos } => {
            for q in [a as usize, b as usize] {
                pauli(&mut x[q], &mut z[q], pos, rng);
            }
        }
        Target::Block { qubit } => {
            let q = qubit as usize;
            let pos = rng.random_range(0..CODE_BLOCK as u8);
            pauli(&mut x[q], &mut z[q], pos, rng);
        }
    }
}

/// Chunk of trials run per scratch allocation.
const CHUNK: u64 = 256;

/// Monte Carlo success probability. Trial `i` draws from ChaCha8 stream
/// `i` of `seed`, so the count is identical however trials are split
/// across threads.
pub fn mc_run(t: &ErrorTrace, trials: u64, seed: u64) -> McResult {
    let trials = trials.max(1);
    let prog = Compiled::new(t);
    let chunks = trials.div_ceil(CHUNK);
    let successes = par::sum_range(chunks, |ch| {
        let mut scratch = Scratch {
            fired: Vec::new(),
            x: vec![0; prog.qubits],
            z: vec![0; prog.qubits],
        };
        let lo = ch * CHUNK;
        let hi = (lo + CHUNK).min(trials);
        (lo..hi).filter(|&i| prog.run_trial(seed, i, &mut scratch)).count() as u64
    });
    let (ci_low, ci_high) = wilson(successes, trials);
    McResult {
        p_success: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        trials,
        successes,
    }
}

/// Serial reference run, for checking that parallel execution does not
/// change the count.
pub fn mc_run_serial(t: &ErrorTrace, trials: u64, seed: u64) -> McResult {
    let trials = trials.max(1);
    let prog = Compiled::new(t);
    let mut scratch = Scratch {
        fired: Vec::new(),
        x: vec![0; prog.qubits],
        z: vec![0; prog.qubits],
    };
    let successes = (0..trials).filter(|&i| prog.run_trial(seed, i, &mut scratch)).count() as u64;
    let (ci_low, ci_high) = wilson(successes, trials);
    McResult {
        p_success: successes as f64 / trials as f64,
        ci_low,
        ci_high,
        trials,
        successes,
    }
}

/// Places corrections, maps onto the datapath and simulates.
pub fn success_evaluator(
    c: &Circuit,
    placement: &CorrectionPlacement,
    cfg: &DatapathConfig,
    tech: &Tech,
    trials: u64,
    seed: u64,
) -> Result<McResult, MapError> {
    let corrected = apply_placement(c, placement);
    let m = map(&corrected, cfg, tech)?;
    let tr = build_error_trace(&corrected, &m.schedule, &m.layout, tech);
    Ok(mc_run(&tr, trials, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::parse_netlist;

    const CLEAN: AncillaQuality = AncillaQuality { zero: 0.0, t: 0.0 };

    fn block(q: QubitId, p: f64, multiplicity: u32) -> TraceItem {
        TraceItem::Event(ErrorEvent {
            target: Target::Block { qubit: q },
            kind: EventKind::Gate,
            p,
            multiplicity,
            time: 0.0,
        })
    }

    fn position(q: QubitId, pos: u8, p: f64) -> TraceItem {
        TraceItem::Event(ErrorEvent {
            target: Target::Position { qubit: q, pos },
            kind: EventKind::Gate,
            p,
            multiplicity: 1,
            time: 0.0,
        })
    }

    /// Exact success probability of a single-block trace without frame
    /// operations, by dynamic programming over (X mask, Z mask).
    fn dp_oracle(items: &[TraceItem]) -> f64 {
        let mut dist = vec![0.0f64; 1 << 14];
        dist[0] = 1.0;
        let ok = |s: usize| (s & 0x7f).count_ones() < 2 && (s >> 7).count_ones() < 2;
        let mut failed = 0.0;
        for it in items {
            let (positions, p, copies): (Vec<u8>, f64, u32) = match *it {
                TraceItem::Event(e) => match e.target {
                    Target::Position { pos, .. } => (vec![pos], e.p, e.multiplicity),
                    Target::Block { .. } => ((0..7).collect(), e.p, e.multiplicity),
                    Target::Pair { .. } => unreachable!(),
                },
                TraceItem::Correct(_) => {
                    for (s, w) in dist.iter_mut().enumerate() {
                        if !ok(s) {
                            failed += *w;
                        }
                        *w = 0.0;
                    }
                    dist[0] = 1.0 - failed;
                    continue;
                }
                _ => unreachable!(),
            };
            for _ in 0..copies {
                let mut next: Vec<f64> = dist.iter().map(|w| w * (1.0 - p)).collect();
                let share = p / (3 * positions.len()) as f64;
                for (s, &w) in dist.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for &pos in &positions {
                        for flip in [1usize, 1 << 7, 1 | 1 << 7] {
                            next[s ^ (flip << pos)] += w * share;
                        }
                    }
                }
                dist = next;
            }
        }
        dist.iter().enumerate().filter(|(s, _)| ok(*s)).map(|(_, w)| w).sum()
    }

    fn within_3_sigma(r: &McResult, expect: f64) -> bool {
        let sigma = (expect * (1.0 - expect) / r.trials as f64).sqrt().max(1e-12);
        (r.p_success - expect).abs() <= 3.0 * sigma
    }

    #[test]
    fn empty_trace_always_succeeds() {
        let r = mc_run(&ErrorTrace::new(3), 1000, 1);
        assert_eq!(r.p_success, 1.0);
        assert_eq!(r.successes, 1000);
        let tech = Tech::set2();
        let c = parse_netlist("qubit a\n").unwrap();
        assert!(gate_trace(&c, &tech, CLEAN).items.is_empty());
    }

    #[test]
    fn cnot_expands_to_seven_pair_events() {
        let tech = Tech::set2();
        let c = parse_netlist("qubit a\nqubit b\ncnot a,b\n").unwrap();
        let t = gate_trace(&c, &tech, CLEAN);
        let ev: Vec<_> = t.events().collect();
        assert_eq!(ev.len(), 7);
        for (i, e) in ev.iter().enumerate() {
            assert_eq!(
                e.target,
                Target::Pair {
                    a: 0,
                    b: 1,
                    pos: i as u8
                }
            );
            assert_eq!(e.p, tech.error_set.two_qubit.p);
            assert_eq!(e.multiplicity, 1);
        }
    }

    #[test]
    fn teleport_probability_composes() {
        let tech = Tech::set2();
        let p = tech.error_set.two_qubit.p;
        // Per position: one 1q gate, one 2q gate, two measurements.
        let bundle = 1.0 - (1.0 - p).powi(4);
        assert!((teleport_event_p(0.99, &tech) - (0.01 + bundle)).abs() < 1e-12);
    }

    #[test]
    fn event_count_matches_cost_table() {
        let tech = Tech::set2();
        let c = parse_netlist(
            "qubit a\nqubit b\nqubit c\nx a\nh b\ns c\ncnot a,b\nt c\ntoffoli a,b,c\nprepz a\nmeasure b\n",
        )
        .unwrap();
        let t = gate_trace(&c, &tech, CLEAN);
        let expect: u64 = c.gates().iter().map(|g| tech.costs.data_ops(g.kind).total()).sum();
        assert_eq!(t.opportunities(), expect);
    }

    #[test]
    fn single_fault_is_corrected() {
        let mut t = ErrorTrace::new(1);
        t.items.push(position(0, 3, 1.0));
        t.items.push(TraceItem::Correct(0));
        assert_eq!(mc_run(&t, 500, 2).p_success, 1.0);
    }

    #[test]
    fn two_copies_on_one_block() {
        // Two faults fail only on distinct positions (6/7) with overlapping
        // error types (7/9).
        let p = 0.3;
        let mut t = ErrorTrace::new(1);
        t.items.push(block(0, p, 2));
        let expect = 1.0 - p * p * 2.0 / 3.0;
        assert!((dp_oracle(&t.items) - expect).abs() < 1e-12);
        let r = mc_run(&t, 20_000, 3);
        assert!(within_3_sigma(&r, expect), "{} vs {expect}", r.p_success);
    }

    #[test]
    fn binomial_oracle() {
        for (k, p) in [(2usize, 0.05), (5, 0.02), (7, 0.1)] {
            let mut t = ErrorTrace::new(1);
            for pos in 0..k {
                t.items.push(position(0, pos as u8, p));
            }
            let q = 1.0 - p;
            let kf = k as f64;
            let expect = q.powi(k as i32)
                + kf * p * q.powi(k as i32 - 1)
                + kf * (kf - 1.0) / 2.0 * p * p * q.powi(k as i32 - 2) * 2.0 / 9.0;
            assert!((dp_oracle(&t.items) - expect).abs() < 1e-12);
            let r = mc_run(&t, 20_000, k as u64);
            assert!(within_3_sigma(&r, expect), "k={k} p={p}: {} vs {expect}", r.p_success);
        }
    }

    #[test]
    fn ten_events_one_window() {
        let mut t = ErrorTrace::new(1);
        t.items.push(block(0, 0.01, 10));
        let expect = dp_oracle(&t.items);
        assert!(expect > 0.996 && expect < 0.998);
        let r = mc_run(&t, 100_000, 4);
        assert!(within_3_sigma(&r, expect), "{} vs {expect}", r.p_success);
    }

    #[test]
    fn correction_marker_helps() {
        let mut open = ErrorTrace::new(1);
        for pos in 0..6 {
            open.items.push(position(0, pos, 0.05));
        }
        let mut split = open.clone();
        split.items.insert(3, TraceItem::Correct(0));
        // Same events and seeds, so every failure of `split` also fails `open`.
        let (a, b) = (mc_run(&open, 20_000, 5), mc_run(&split, 20_000, 5));
        assert!(b.successes > a.successes);
        assert!((dp_oracle(&split.items) - b.p_success).abs() < 0.01);
    }

    #[test]
    fn cnot_spreads_errors() {
        // One X on the control plus one on the target at another position:
        // after the CNOT the target holds two X errors.
        let mut t = ErrorTrace::new(2);
        t.items.push(position(0, 0, 1.0));
        t.items.push(TraceItem::Cnot { control: 0, target: 1 });
        t.items.push(position(1, 1, 1.0));
        let r = mc_run(&t, 4000, 6);
        // Fails when both faults carry an X component: 4/9.
        assert!(within_3_sigma(&r, 5.0 / 9.0), "{}", r.p_success);
    }

    #[test]
    fn extra_events_do_not_help() {
        let tech = Tech::set2();
        let c = parse_netlist("qubit a\nqubit b\ncnot a,b\nh a\ncnot b,a\nt b\n").unwrap();
        let base = gate_trace(&c, &tech, AncillaQuality { zero: 0.01, t: 0.01 });
        let mut more = base.clone();
        more.items.push(block(0, 0.02, 7));
        let (a, b) = (mc_run(&base, 50_000, 8), mc_run(&more, 50_000, 8));
        let sigma = (a.p_success * (1.0 - a.p_success) / 50_000.0).sqrt();
        assert!(b.p_success <= a.p_success + 3.0 * sigma);
    }

    #[test]
    fn serial_matches_parallel() {
        let mut t = ErrorTrace::new(2);
        t.items.push(block(0, 0.1, 7));
        t.items.push(TraceItem::Cnot { control: 0, target: 1 });
        t.items.push(block(1, 0.1, 7));
        for trials in [1, 255, 257, 5000] {
            assert_eq!(mc_run(&t, trials, 9), mc_run_serial(&t, trials, 9));
        }
        assert_ne!(mc_run(&t, 5000, 9).successes, mc_run(&t, 5000, 10).successes);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo, hi) = wilson(100, 100);
        assert!(lo > 0.95 && hi == 1.0);
    }
}
