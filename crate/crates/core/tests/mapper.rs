use qcad_core::circuit::parse_netlist;
use qcad_core::datapath::{instantiate, DatapathConfig, DatapathKind, RegionKind};
use qcad_core::mapper::{self, map, partition, schedule, validate, MoveReason};
use qcad_core::qec::{apply_placement, insert_corrections, EDistConfig};
use qcad_core::randgen::{gen_random, RandSpec};
use qcad_core::tech::Tech;
use qcad_core::GateKind;

#[test]
fn one_region_serializes() {
    let tech = Tech::set1();
    let c = parse_netlist("qubit a\nqubit b\nx a\nx b\n").unwrap();
    let l = instantiate(&DatapathConfig::preset(DatapathKind::Qla, 1, 0), &tech).unwrap();
    let a = partition(&c, &l).unwrap();
    let s = schedule(&c, &l, &a, &tech).unwrap();
    validate(&c, &l, &s).unwrap();
    assert_eq!(s.makespan, 2.0 * tech.logical_latency(GateKind::X));
}

#[test]
fn two_regions_run_in_parallel() {
    let tech = Tech::set1();
    let c = parse_netlist("qubit a\nqubit b\nx a\nx b\n").unwrap();
    let l = instantiate(&DatapathConfig::preset(DatapathKind::Qla, 2, 0), &tech).unwrap();
    let a = partition(&c, &l).unwrap();
    assert_ne!(a.region[0], a.region[1]);
    let s = schedule(&c, &l, &a, &tech).unwrap();
    validate(&c, &l, &s).unwrap();
    assert_eq!(s.makespan, tech.logical_latency(GateKind::X));
    assert!(s.relocations.is_empty());
}

#[test]
fn cross_region_gate_moves_once() {
    let tech = Tech::set1();
    let c = parse_netlist("qubit a\nqubit b\ncnot a,b\n").unwrap();
    let l = instantiate(&DatapathConfig::preset(DatapathKind::Qla, 2, 0), &tech).unwrap();
    let a = partition(&c, &l).unwrap();
    let s = schedule(&c, &l, &a, &tech).unwrap();
    validate(&c, &l, &s).unwrap();
    assert_eq!(s.relocations.len(), 1);
    assert_eq!(s.connections.len(), 1);
    let m = &s.relocations[0];
    assert!(m.arrive <= s.gates[0].start);
    assert_eq!(
        s.makespan,
        tech.teleport_latency() + tech.logical_latency(GateKind::Cnot)
    );
}

fn corrected(gates: usize, qubits: usize, seed: u64) -> qcad_core::Circuit {
    let c = gen_random(&RandSpec {
        gates,
        qubits,
        rent_r: 0.5,
        seed,
    })
    .unwrap();
    let p = insert_corrections(&c, &EDistConfig::new(3)).unwrap();
    apply_placement(&c, &p)
}

#[test]
fn invariants_hold_on_every_datapath() {
    let tech = Tech::set2();
    let c = corrected(600, 60, 4);
    for kind in DatapathKind::ALL {
        for d in [1, 2, 4] {
            let cfg = DatapathConfig::for_qubits(kind, c.num_qubits(), d);
            let m = map(&c, &cfg, &tech).unwrap_or_else(|e| panic!("{kind} D={d}: {e}"));
            validate(&c, &m.layout, &m.schedule).unwrap_or_else(|e| panic!("{kind} D={d}: {e}"));
            if cfg.m == 0 {
                assert!(m.schedule.relocations.iter().all(|r| r.reason != MoveReason::Idle));
                assert!(m.layout.regions.iter().all(|r| r.kind == RegionKind::Data));
            }
            if kind == DatapathKind::Qalypso {
                assert_eq!(m.schedule.stall_us, 0.0);
                for r in m.layout.regions.iter().filter(|r| m.network.peak[r.id] > 0) {
                    assert!(r.router_capacity >= 1);
                }
            }
        }
    }
}

#[test]
fn deterministic() {
    let tech = Tech::set2();
    let c = corrected(400, 40, 9);
    let cfg = DatapathConfig::for_qubits(DatapathKind::CqlaPlus, 40, 1);
    assert_eq!(map(&c, &cfg, &tech).unwrap(), map(&c, &cfg, &tech).unwrap());
}

#[test]
fn fixed_datapath_stalls_on_ancilla() {
    let tech = Tech::set1();
    let c = corrected(300, 8, 1);
    let m = map(&c, &DatapathConfig::for_qubits(DatapathKind::Qla, 8, 1), &tech).unwrap();
    assert!(m.schedule.stall_us > 0.0);
    let q = map(&c, &DatapathConfig::for_qubits(DatapathKind::Qalypso, 8, 1), &tech).unwrap();
    assert_eq!(q.schedule.stall_us, 0.0);
    assert!(q.layout.regions[0].gens >= 1);
}

#[test]
fn memory_idle_corrections() {
    // One qubit used once and then parked for a long time while another
    // works: the parked qubit collects idle corrections in memory.
    let mut src = String::from("qubit a\nqubit b\nx a\n");
    for _ in 0..400 {
        src += "h b\n";
    }
    let c = parse_netlist(&src).unwrap();
    let tech = Tech::set1();
    let mut cfg = DatapathConfig::preset(DatapathKind::Qalypso, 1, 1);
    cfg.dq = 2;
    cfg.mq = 2;
    let m = map(&c, &cfg, &tech).unwrap();
    validate(&c, &m.layout, &m.schedule).unwrap();
    let idle_ecs = m.schedule.corrections.iter().filter(|e| e.gate.is_none()).count();
    let interval = tech.error_set.two_qubit.p / tech.error_set.idle_per_us;
    let parked: f64 = m
        .schedule
        .residency
        .iter()
        .filter(|r| r.qubit == 0 && m.layout.regions[r.region].kind == RegionKind::Memory)
        .map(|r| r.to - r.from)
        .sum();
    assert!(parked > 0.0);
    assert_eq!(idle_ecs, (parked / interval + 1e-9).floor() as usize);
}

#[test]
fn too_few_slots() {
    let c = corrected(100, 40, 2);
    let mut cfg = DatapathConfig::preset(DatapathKind::Qalypso, 1, 0);
    cfg.dq = 16;
    assert!(matches!(
        map(&c, &cfg, &Tech::set1()),
        Err(mapper::MapError::Capacity { .. })
    ));
}
