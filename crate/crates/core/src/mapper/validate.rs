//! Independent checks of a schedule's structural invariants.

use super::{MapError, MappedSchedule};
use crate::circuit::{Circuit, Dag};
use crate::datapath::RegionLayout;

const EPS: f64 = 1e-9;

fn fail<T>(msg: String) -> Result<T, MapError> {
    Err(MapError::Invalid(msg))
}

/// Checks DAG order, co-location of operands, that no qubit is in two
/// places at once, and that no region ever holds more qubits than slots
/// (a qubit in transit already occupies its destination).
pub fn validate(c: &Circuit, layout: &RegionLayout, s: &MappedSchedule) -> Result<(), MapError> {
    if s.gates.len() != c.num_gates() {
        return fail(format!("{} gate slots for {} gates", s.gates.len(), c.num_gates()));
    }
    let dag = Dag::build(c)?;
    for &(a, b, q) in dag.edges() {
        let (ga, gb) = (&s.gates[a as usize], &s.gates[b as usize]);
        if gb.start + EPS < ga.finish() {
            return fail(format!("gate {b} starts before gate {a} finishes on qubit {q}"));
        }
    }

    let nq = c.num_qubits();
    let mut per_qubit: Vec<Vec<_>> = vec![Vec::new(); nq];
    for r in &s.residency {
        if r.to + EPS < r.from {
            return fail(format!("qubit {} has a negative residency", r.qubit));
        }
        per_qubit[r.qubit as usize].push(*r);
    }
    let mut moves: Vec<Vec<_>> = vec![Vec::new(); nq];
    for m in &s.relocations {
        moves[m.qubit as usize].push(m);
    }
    for q in 0..nq {
        let res = &mut per_qubit[q];
        res.sort_by(|a, b| a.from.total_cmp(&b.from).then(a.to.total_cmp(&b.to)));
        let mv = &mut moves[q];
        mv.sort_by(|a, b| a.depart.total_cmp(&b.depart));
        if res.len() != mv.len() + 1 {
            return fail(format!("qubit {q}: {} residencies for {} moves", res.len(), mv.len()));
        }
        for (i, m) in mv.iter().enumerate() {
            let (before, after) = (&res[i], &res[i + 1]);
            if before.region != m.from
                || after.region != m.to
                || (before.to - m.depart).abs() > EPS
                || (after.from - m.arrive).abs() > EPS
            {
                return fail(format!("qubit {q}: move at {} does not join its residencies", m.depart));
            }
        }
    }

    for (g, slot) in s.gates.iter().enumerate() {
        if layout.regions[slot.region].kind != crate::datapath::RegionKind::Data {
            return fail(format!("gate {g} placed in a memory region"));
        }
        for &q in &c.gates()[g].operands {
            let ok = per_qubit[q as usize]
                .iter()
                .any(|r| r.region == slot.region && r.from <= slot.start + EPS && r.to + EPS >= slot.finish());
            if !ok {
                return fail(format!(
                    "gate {g}: qubit {q} not resident in region {} while it runs",
                    slot.region
                ));
            }
        }
    }

    let mut events: Vec<Vec<(f64, i32)>> = vec![Vec::new(); layout.regions.len()];
    for r in &s.residency {
        events[r.region].push((r.from, 1));
        events[r.region].push((r.to, -1));
    }
    for m in &s.relocations {
        events[m.to].push((m.depart, 1));
        events[m.to].push((m.arrive, -1));
    }
    for (rid, mut ev) in events.into_iter().enumerate() {
        ev.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut cur = 0;
        for (t, d) in ev {
            cur += d;
            if cur > layout.regions[rid].slots as i32 {
                return fail(format!("region {rid} holds {cur} qubits at t = {t}"));
            }
        }
    }
    Ok(())
}
