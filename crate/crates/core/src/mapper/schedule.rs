//! Event-driven list scheduler.
//!
//! Ready gates are started in order of their longest latency-weighted path
//! to the end of the circuit (ties by gate id). A gate runs in a data
//! region holding all of its operands; missing operands are moved in
//! by teleport and idle
//! residents are evicted when the region is full. Fixed-ancilla datapaths
//! draw blocks from a per-region generator pool and stall when it runs dry.

use super::*;
use crate::circuit::{Dag, GateKind};
use crate::datapath::{DatapathKind, RegionKind, TPolicy};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// Non-negative times ordered through their bit patterns.
fn key(t: f64) -> u64 {
    debug_assert!(t >= 0.0);
    t.to_bits()
}

/// Idle time, in average gate latencies, after which a qubit is parked in
/// memory.
const IDLE_FACTOR: f64 = 4.0;

/// Data regions tried when no region already holding an operand can host
/// the gate.
const SPILL_CANDIDATES: usize = 4;

pub fn schedule(c: &Circuit, layout: &RegionLayout, a: &Assignment, tech: &Tech) -> Result<MappedSchedule, MapError> {
    run(c, layout, a, tech, false)
}

struct Plan {
    region: usize,
    start: f64,
    stall: f64,
    evict: usize,
}

struct State<'a> {
    layout: &'a RegionLayout,
    tech: &'a Tech,
    unlimited: bool,
    loc: Vec<usize>,
    free_at: Vec<f64>,
    since: Vec<f64>,
    residents: Vec<BTreeSet<QubitId>>,
    sites: Vec<Vec<f64>>,
    t_sites: Vec<Vec<f64>>,
    stock: Vec<f64>,
    stock_t: Vec<f64>,
    rate: Vec<f64>,
    active: Vec<(f64, Vec<usize>)>,
    wake: BinaryHeap<Reverse<u64>>,
    out: MappedSchedule,
}

fn blocks(kind: GateKind, tech: &Tech) -> (u32, u32) {
    match kind {
        GateKind::Correct => (tech.costs.blocks_per_correction as u32, 0),
        GateKind::T => (0, 1),
        GateKind::Toffoli => (0, 7),
        _ => (0, 0),
    }
}

impl State<'_> {
    fn cap(&self, r: usize) -> usize {
        self.layout.regions[r].slots
    }

    fn is_data(&self, r: usize) -> bool {
        self.layout.regions[r].kind == RegionKind::Data
    }

    fn router_load(&self, r: usize, t: f64) -> u32 {
        self.active
            .iter()
            .filter(|(end, path)| *end > t && path.contains(&r))
            .count() as u32
    }

    /// Teleport latency from `from` to `to` starting at `t`: EPR setup is
    /// hidden unless a router on the route is saturated.
    fn transit(&self, from: usize, to: usize, t: f64) -> f64 {
        let path = self.layout.route(from, to);
        let mut lat = self.tech.teleport_latency();
        if !self.unlimited {
            for &r in &path {
                if self.router_load(r, t) >= self.layout.regions[r].router_capacity {
                    lat += self.tech.router.epr_latency_us;
                }
            }
        }
        lat
    }

    fn move_qubit(&mut self, q: QubitId, to: usize, t: f64, reason: MoveReason) -> f64 {
        let qi = q as usize;
        let from = self.loc[qi];
        let lat = self.transit(from, to, t);
        self.active.retain(|(end, _)| *end > t);
        let routers = self.layout.route(from, to);
        self.active.push((t + lat, routers.clone()));
        self.out.connections.push(Connection {
            from,
            to,
            start: t,
            end: t + lat,
            routers,
        });
        self.out.residency.push(Residency {
            qubit: q,
            region: from,
            from: self.since[qi],
            to: t,
        });
        self.out.relocations.push(Relocation {
            qubit: q,
            from,
            to,
            depart: t,
            arrive: t + lat,
            reason,
            hops: self.layout.hops(from, to),
        });
        self.residents[from].remove(&q);
        self.residents[to].insert(q);
        self.loc[qi] = to;
        self.since[qi] = t + lat;
        self.free_at[qi] = t + lat;
        self.wake.push(Reverse(key(t + lat)));
        t + lat
    }

    /// Nearest region other than `not` with a free slot; memory first.
    fn parking(&self, from: usize, not: usize, memory_only: bool) -> Option<usize> {
        self.layout
            .regions
            .iter()
            .filter(|r| r.id != not && self.residents[r.id].len() < r.slots)
            .filter(|r| !memory_only || r.kind == RegionKind::Memory)
            .min_by_key(|r| (r.kind == RegionKind::Data, self.layout.hops(from, r.id), r.id))
            .map(|r| r.id)
    }

    /// Start time for `blocks` ancilla at region `r` no earlier than `s`.
    fn ancilla_ready(&self, r: usize, s: f64, blocks: u32) -> f64 {
        if blocks == 0 {
            return s;
        }
        let s = s.max(self.stock_t[r]);
        let gens = self.layout.regions[r].gens as f64;
        let avail = (self.stock[r] + self.rate[r] * (s - self.stock_t[r])).min(gens.max(1.0));
        let b = blocks as f64;
        if avail >= b {
            s
        } else if self.rate[r] > 0.0 {
            s + (b - avail) / self.rate[r]
        } else {
            f64::INFINITY
        }
    }

    fn consume(&mut self, r: usize, start: f64, blocks: u32) {
        if blocks == 0 {
            return;
        }
        let s = start.max(self.stock_t[r]);
        let gens = self.layout.regions[r].gens as f64;
        let avail = (self.stock[r] + self.rate[r] * (s - self.stock_t[r])).min(gens.max(1.0));
        self.stock[r] = (avail - blocks as f64).max(0.0);
        self.stock_t[r] = s;
    }
}

pub(crate) fn run(
    c: &Circuit,
    layout: &RegionLayout,
    a: &Assignment,
    tech: &Tech,
    unlimited: bool,
) -> Result<MappedSchedule, MapError> {
    let dag = Dag::build(c)?;
    let gates = c.gates();
    let (ng, nq, nr) = (gates.len(), c.num_qubits(), layout.regions.len());
    let cfg = &layout.config;
    let lat: Vec<f64> = gates.iter().map(|g| tech.logical_latency(g.kind)).collect();
    let prio = dag.longest_from(|g| lat[g as usize]);
    let est_finish = dag.longest_to(|g| lat[g as usize]);
    let avg = if ng == 0 {
        1.0
    } else {
        lat.iter().sum::<f64>() / ng as f64
    };
    let idle_threshold = IDLE_FACTOR * avg;
    let has_memory = layout.memory_regions().next().is_some();
    let fixed = cfg.kind.fixed_ancilla();
    let designated = cfg.t_policy == TPolicy::DesignatedSites;
    let single_site = matches!(cfg.kind, DatapathKind::Qla | DatapathKind::Lqla);
    let factory = tech.factories.get(cfg.factory);

    let mut st = State {
        layout,
        tech,
        unlimited,
        loc: a.region.clone(),
        free_at: vec![0.0; nq],
        since: vec![0.0; nq],
        residents: residents(a, layout)
            .into_iter()
            .map(|v| v.into_iter().collect())
            .collect(),
        sites: layout
            .regions
            .iter()
            .map(|r| {
                let n = match r.kind {
                    RegionKind::Memory => 0,
                    RegionKind::Data if single_site => 1,
                    RegionKind::Data => (r.slots / 2).max(1),
                };
                vec![0.0; n]
            })
            .collect(),
        t_sites: layout
            .regions
            .iter()
            .map(|r| vec![0.0; if designated { r.t_factories } else { 0 }])
            .collect(),
        stock: layout.regions.iter().map(|r| r.gens as f64).collect(),
        stock_t: vec![0.0; nr],
        rate: layout
            .regions
            .iter()
            .map(|r| r.gens as f64 * factory.throughput_per_us)
            .collect(),
        active: Vec::new(),
        wake: BinaryHeap::new(),
        out: MappedSchedule {
            gates: vec![
                GateSlot {
                    region: 0,
                    start: 0.0,
                    duration: 0.0,
                    stall: 0.0
                };
                ng
            ],
            zero_demand: vec![Vec::new(); nr],
            t_demand: vec![Vec::new(); nr],
            first_activity: vec![f64::INFINITY; nq],
            ..Default::default()
        },
    };

    let mut waiting: Vec<usize> = (0..ng).map(|g| dag.preds(g as GateId).len()).collect();
    let mut ready: BTreeSet<(Reverse<u64>, GateId)> = BTreeSet::new();
    for g in 0..ng {
        if waiting[g] == 0 {
            ready.insert((Reverse(key(prio[g])), g as GateId));
        }
    }
    let mut chain_pos = vec![0usize; nq];
    let mut finishing: BinaryHeap<Reverse<(u64, GateId)>> = BinaryHeap::new();
    let mut done = 0usize;
    let mut t = 0.0f64;

    while done < ng {
        // Retire gates finishing by now.
        while let Some(&Reverse((k, g))) = finishing.peek() {
            if k > key(t) {
                break;
            }
            finishing.pop();
            done += 1;
            let gi = g as usize;
            for &s in dag.succs(g) {
                waiting[s as usize] -= 1;
                if waiting[s as usize] == 0 {
                    ready.insert((Reverse(key(prio[s as usize])), s));
                }
            }
            for &q in &gates[gi].operands {
                let qi = q as usize;
                chain_pos[qi] += 1;
                if !has_memory || !st.is_data(st.loc[qi]) {
                    continue;
                }
                let slack = match dag.chain(q).get(chain_pos[qi]) {
                    Some(&n) => est_finish[n as usize] - lat[n as usize] - est_finish[gi],
                    None => f64::INFINITY,
                };
                if slack >= idle_threshold {
                    if let Some(m) = st.parking(st.loc[qi], usize::MAX, true) {
                        st.move_qubit(q, m, t, MoveReason::Idle);
                    }
                }
            }
        }
        while st.wake.peek().is_some_and(|Reverse(k)| *k <= key(t)) {
            st.wake.pop();
        }

        // Start whatever can start now, highest priority first.
        let candidates: Vec<(Reverse<u64>, GateId)> = ready.iter().copied().collect();
        for entry in candidates {
            let g = entry.1;
            let gi = g as usize;
            let gate = &gates[gi];
            if gate.operands.iter().any(|&q| st.free_at[q as usize] > t) {
                continue;
            }
            let (zero, tanc) = blocks(gate.kind, tech);
            let uses_t_site = designated && tanc > 0;
            let Some(plan) = plan_gate(&st, gate, t, zero + if fixed { tanc } else { 0 }, uses_t_site, fixed) else {
                continue;
            };
            ready.remove(&entry);
            let r = plan.region;
            // Incoming operands leave first so their slots can take evictees.
            // Earlier moves in this commit may have congested the network,
            // so the start is recomputed from the actual arrivals.
            let mut in_place = t;
            for &q in &gate.operands {
                if st.loc[q as usize] != r {
                    in_place = in_place.max(st.move_qubit(q, r, t, MoveReason::Operand));
                }
            }
            let start = if fixed {
                st.ancilla_ready(r, in_place, zero + tanc)
            } else {
                in_place
            };
            let plan = Plan {
                start,
                stall: start - in_place,
                ..plan
            };
            if plan.evict > 0 {
                let mut victims: Vec<QubitId> = st.residents[r]
                    .iter()
                    .copied()
                    .filter(|q| st.free_at[*q as usize] <= t && !gate.operands.contains(q))
                    .collect();
                let next_use = |q: QubitId| match dag.chain(q).get(chain_pos[q as usize]) {
                    Some(&n) => est_finish[n as usize],
                    None => f64::INFINITY,
                };
                victims.sort_by(|&x, &y| next_use(y).total_cmp(&next_use(x)).then(x.cmp(&y)));
                for &v in victims.iter().take(plan.evict) {
                    let dest = st.parking(r, r, false).ok_or(MapError::Deadlock {
                        time_us: t,
                        pending: ng - done,
                    })?;
                    st.move_qubit(v, dest, t, MoveReason::Evict);
                }
            }
            let finish = plan.start + lat[gi];
            let site_list = if uses_t_site {
                &mut st.t_sites[r]
            } else {
                &mut st.sites[r]
            };
            let site = (0..site_list.len())
                .min_by(|&x, &y| site_list[x].total_cmp(&site_list[y]))
                .expect("planned region has a site");
            site_list[site] = finish;
            if fixed {
                st.consume(r, plan.start, zero + tanc);
            }
            if zero > 0 {
                st.out.zero_demand[r].push(Demand {
                    time: plan.start,
                    blocks: zero,
                });
            }
            if tanc > 0 {
                st.out.t_demand[r].push(Demand {
                    time: plan.start,
                    blocks: tanc,
                });
            }
            for &q in &gate.operands {
                let qi = q as usize;
                st.free_at[qi] = finish;
                st.out.first_activity[qi] = st.out.first_activity[qi].min(plan.start);
            }
            if gate.kind == GateKind::Correct {
                st.out.corrections.push(CorrectionEvent {
                    qubit: gate.operands[0],
                    region: r,
                    time: finish,
                    gate: Some(g),
                });
            }
            st.out.stall_us += plan.stall;
            st.out.gates[gi] = GateSlot {
                region: r,
                start: plan.start,
                duration: lat[gi],
                stall: plan.stall,
            };
            finishing.push(Reverse((key(finish), g)));
        }

        if done == ng && finishing.is_empty() {
            break;
        }
        let next_finish = finishing.peek().map(|Reverse((k, _))| *k);
        let next_wake = st.wake.peek().map(|Reverse(k)| *k);
        let next = match (next_finish, next_wake) {
            (Some(x), Some(y)) => x.min(y),
            (Some(x), None) | (None, Some(x)) => x,
            (None, None) => {
                if done < ng {
                    return Err(MapError::Deadlock {
                        time_us: t,
                        pending: ng - done,
                    });
                }
                break;
            }
        };
        t = f64::from_bits(next);
    }

    let mut makespan = st.out.gates.iter().map(GateSlot::finish).fold(0.0, f64::max);
    makespan = st.out.relocations.iter().map(|m| m.arrive).fold(makespan, f64::max);
    for q in 0..nq {
        st.out.residency.push(Residency {
            qubit: q as QubitId,
            region: st.loc[q],
            from: st.since[q],
            to: makespan.max(st.since[q]),
        });
    }
    st.out.makespan = makespan;
    memory_corrections(&mut st.out, layout, tech);
    Ok(st.out)
}

/// Chooses where and when `gate` runs if it can be committed at `t`.
fn plan_gate(
    st: &State<'_>,
    gate: &crate::circuit::Gate,
    t: f64,
    ancilla: u32,
    t_site: bool,
    fixed: bool,
) -> Option<Plan> {
    let layout = st.layout;
    let mut cands: Vec<usize> = Vec::new();
    for &q in &gate.operands {
        let r = st.loc[q as usize];
        if st.is_data(r) && !cands.contains(&r) {
            cands.push(r);
        }
    }
    let total_free: usize = layout.regions.iter().map(|r| r.slots - st.residents[r.id].len()).sum();
    let evaluate = |r: usize| -> Option<Plan> {
        let sites = if t_site { &st.t_sites[r] } else { &st.sites[r] };
        if sites.is_empty() || sites.iter().all(|&s| s > t) {
            return None;
        }
        let incoming: Vec<QubitId> = gate
            .operands
            .iter()
            .copied()
            .filter(|&q| st.loc[q as usize] != r)
            .collect();
        if gate.operands.len() > st.cap(r) {
            return None;
        }
        let free = st.cap(r) - st.residents[r].len();
        let evict = incoming.len().saturating_sub(free);
        if evict > 0 {
            let evictable = st.residents[r]
                .iter()
                .filter(|q| st.free_at[**q as usize] <= t && !gate.operands.contains(q))
                .count();
            // Slots elsewhere, counting those the incoming operands vacate.
            let elsewhere = total_free - free + incoming.len();
            if evictable < evict || elsewhere < evict {
                return None;
            }
        }
        let mut ready = t;
        for &q in &incoming {
            ready = ready.max(t + st.transit(st.loc[q as usize], r, t));
        }
        let start = if fixed {
            st.ancilla_ready(r, ready, ancilla)
        } else {
            ready
        };
        if !start.is_finite() {
            return None;
        }
        Some(Plan {
            region: r,
            start,
            stall: start - ready,
            evict,
        })
    };
    let better = |p: &Plan, q: &Plan| (p.start, p.evict, p.region) < (q.start, q.evict, q.region);
    let mut best: Option<Plan> = None;
    for &r in &cands {
        if let Some(p) = evaluate(r) {
            if best.as_ref().is_none_or(|b| better(&p, b)) {
                best = Some(p);
            }
        }
    }
    if best.is_some() {
        return best;
    }
    // Nothing already holding an operand works: try the nearest regions,
    // those with room for every operand first.
    let from = st.loc[gate.operands[0] as usize];
    let arity = gate.operands.len();
    let mut spill: Vec<usize> = layout
        .data_regions()
        .map(|r| r.id)
        .filter(|r| !cands.contains(r))
        .collect();
    spill.sort_by_key(|&r| (st.cap(r) - st.residents[r].len() < arity, layout.hops(from, r), r));
    for r in spill.into_iter().take(SPILL_CANDIDATES) {
        if let Some(p) = evaluate(r) {
            if best.as_ref().is_none_or(|b| better(&p, b)) {
                best = Some(p);
            }
        }
    }
    best
}

/// Idle corrections for qubits parked in memory: one every time the
/// accumulated idle error reaches a two-qubit gate error.
fn memory_corrections(s: &mut MappedSchedule, layout: &RegionLayout, tech: &Tech) {
    let es = &tech.error_set;
    if es.idle_per_us <= 0.0 {
        return;
    }
    let interval = es.two_qubit.p / es.idle_per_us;
    let per = tech.costs.blocks_per_correction as u32;
    let mut extra = Vec::new();
    for res in &s.residency {
        if layout.regions[res.region].kind != RegionKind::Memory {
            continue;
        }
        let from = res.from.max(s.first_activity[res.qubit as usize]);
        if !from.is_finite() || res.to <= from {
            continue;
        }
        let k = ((res.to - from) / interval + 1e-9).floor() as usize;
        for i in 1..=k {
            extra.push(CorrectionEvent {
                qubit: res.qubit,
                region: res.region,
                time: from + i as f64 * interval,
                gate: None,
            });
        }
    }
    for e in extra {
        s.zero_demand[e.region].push(Demand {
            time: e.time,
            blocks: per,
        });
        s.corrections.push(e);
    }
}
