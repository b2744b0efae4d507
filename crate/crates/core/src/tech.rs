//! Ion-trap technology model: physical error rates and latencies, logical
//! gate expansion, ancilla factories, routers and layout geometry.
//!
//! Everything here is plain data with serde derives so a TOML technology
//! file can override any field (see [`Tech::from_toml`]).

use crate::circuit::GateKind;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Physical qubits per logical qubit (Steane [[7,1,3]], one level).
pub const CODE_BLOCK: usize = 7;

#[derive(Debug, Error)]
pub enum TechError {
    #[error("purification needs fidelity above 1/2, got {0}")]
    FidelityTooLow(f64),
    #[error("unknown error set `{0}` (expected 1 or 2)")]
    UnknownErrorSet(String),
    #[error("reading technology file: {0}")]
    Io(#[from] std::io::Error),
    #[error("technology file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid technology value: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpParams {
    pub p: f64,
    pub latency_us: f64,
}

/// Failure probabilities and latencies of the physical operations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSet {
    pub name: String,
    pub one_qubit: OpParams,
    pub two_qubit: OpParams,
    pub measure: OpParams,
    pub prep: OpParams,
    /// One straight macroblock segment (about 30 µm).
    pub straight: OpParams,
    pub turn: OpParams,
    /// Failure probability per µs of storage.
    pub idle_per_us: f64,
}

impl ErrorSet {
    fn with_rates(name: &str, gate: f64, mv: f64, idle: f64) -> Self {
        ErrorSet {
            name: name.to_owned(),
            one_qubit: OpParams {
                p: gate,
                latency_us: 1.0,
            },
            two_qubit: OpParams {
                p: gate,
                latency_us: 10.0,
            },
            measure: OpParams {
                p: gate,
                latency_us: 50.0,
            },
            prep: OpParams {
                p: gate,
                latency_us: 51.0,
            },
            straight: OpParams { p: mv, latency_us: 1.0 },
            turn: OpParams {
                p: mv,
                latency_us: 10.0,
            },
            idle_per_us: idle,
        }
    }

    /// Optimistic rates.
    pub fn set1() -> Self {
        Self::with_rates("set1", 1e-6, 1e-8, 1e-10)
    }

    /// Pessimistic rates used to stress error correction.
    pub fn set2() -> Self {
        Self::with_rates("set2", 1e-4, 1e-6, 1e-8)
    }

    pub fn by_name(s: &str) -> Result<Self, TechError> {
        match s {
            "1" | "set1" => Ok(Self::set1()),
            "2" | "set2" => Ok(Self::set2()),
            other => Err(TechError::UnknownErrorSet(other.to_owned())),
        }
    }

    pub fn params(&self, op: PhysOp) -> OpParams {
        match op {
            PhysOp::OneQubit => self.one_qubit,
            PhysOp::TwoQubit => self.two_qubit,
            PhysOp::Measure => self.measure,
            PhysOp::Prep => self.prep,
        }
    }

    fn validate(&self) -> Result<(), TechError> {
        let rows = [
            ("one_qubit", self.one_qubit),
            ("two_qubit", self.two_qubit),
            ("measure", self.measure),
            ("prep", self.prep),
            ("straight", self.straight),
            ("turn", self.turn),
        ];
        for (name, r) in rows {
            if !(0.0..=1.0).contains(&r.p) {
                return Err(TechError::Invalid(format!("{name}.p = {}", r.p)));
            }
            if r.latency_us.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
                return Err(TechError::Invalid(format!("{name}.latency_us = {}", r.latency_us)));
            }
        }
        if !(0.0..=1.0).contains(&self.idle_per_us) {
            return Err(TechError::Invalid(format!("idle_per_us = {}", self.idle_per_us)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhysOp {
    OneQubit,
    TwoQubit,
    Measure,
    Prep,
}

/// Counts of physical operations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpBundle {
    pub one_qubit: u64,
    pub two_qubit: u64,
    pub prep: u64,
    pub measure: u64,
}

impl OpBundle {
    pub const fn new(one_qubit: u64, two_qubit: u64, prep: u64, measure: u64) -> Self {
        OpBundle {
            one_qubit,
            two_qubit,
            prep,
            measure,
        }
    }

    pub fn total(&self) -> u64 {
        self.one_qubit + self.two_qubit + self.prep + self.measure
    }

    pub fn count(&self, op: PhysOp) -> u64 {
        match op {
            PhysOp::OneQubit => self.one_qubit,
            PhysOp::TwoQubit => self.two_qubit,
            PhysOp::Measure => self.measure,
            PhysOp::Prep => self.prep,
        }
    }

    pub fn scaled(&self, k: u64) -> Self {
        OpBundle::new(self.one_qubit * k, self.two_qubit * k, self.prep * k, self.measure * k)
    }

    /// Probability that at least one op in the bundle fails.
    pub fn failure(&self, es: &ErrorSet) -> f64 {
        let log_ok: f64 = [PhysOp::OneQubit, PhysOp::TwoQubit, PhysOp::Measure, PhysOp::Prep]
            .iter()
            .map(|&op| self.count(op) as f64 * (-es.params(op).p).ln_1p())
            .sum();
        -log_ok.exp_m1()
    }
}

impl std::ops::Add for OpBundle {
    type Output = OpBundle;
    fn add(self, o: OpBundle) -> OpBundle {
        OpBundle::new(
            self.one_qubit + o.one_qubit,
            self.two_qubit + o.two_qubit,
            self.prep + o.prep,
            self.measure + o.measure,
        )
    }
}

impl std::ops::AddAssign for OpBundle {
    fn add_assign(&mut self, o: OpBundle) {
        *self = *self + o;
    }
}

/// Logical gate to physical operation expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCostTable {
    /// Transversal one-qubit gate (X, Z, H, S).
    pub one_qubit: OpBundle,
    pub cnot: OpBundle,
    /// Data-side work of a T gate: ancilla interaction, measurement, fix-up.
    pub t_gate: OpBundle,
    /// Preparing and verifying one encoded T ancilla.
    pub t_ancilla: OpBundle,
    pub prepz: OpBundle,
    pub measure: OpBundle,
    /// Preparing and verifying one encoded zero block inside a factory.
    pub zero_block: OpBundle,
    /// Zero blocks consumed per correction (one per syndrome type).
    pub blocks_per_correction: u64,
    /// Data-side work of a correction: syndrome CNOTs and measurements.
    pub correction_data: OpBundle,
    /// Bell measurement and Pauli fix-up of one logical teleport.
    pub teleport: OpBundle,
    /// Ballistic move into a gate location: straights and turns.
    pub move_in: (u32, u32),
}

impl Default for GateCostTable {
    fn default() -> Self {
        let b = CODE_BLOCK as u64;
        GateCostTable {
            one_qubit: OpBundle::new(b, 0, 0, 0),
            cnot: OpBundle::new(0, b, 0, 0),
            t_gate: OpBundle::new(b, b, 0, b),
            t_ancilla: OpBundle::new(52, 1284, 56, 130),
            prepz: OpBundle::new(3, 9, b, 0),
            measure: OpBundle::new(0, 0, 0, b),
            // Sized so one correction costs ~3030 physical ops in total.
            zero_block: OpBundle::new(45, 1156, 105, 195),
            blocks_per_correction: 2,
            correction_data: OpBundle::new(0, 2 * b, 0, 2 * b),
            teleport: OpBundle::new(b, b, 0, 2 * b),
            move_in: (4, 2),
        }
    }
}

impl GateCostTable {
    pub fn correction(&self) -> OpBundle {
        self.zero_block.scaled(self.blocks_per_correction) + self.correction_data
    }

    /// Physical ops executed on the data blocks (ancilla preparation excluded).
    pub fn data_ops(&self, kind: GateKind) -> OpBundle {
        match kind {
            GateKind::X | GateKind::Z | GateKind::H | GateKind::S => self.one_qubit,
            GateKind::Cnot => self.cnot,
            GateKind::T => self.t_gate,
            GateKind::Toffoli => self.cnot.scaled(6) + self.one_qubit.scaled(2) + self.t_gate.scaled(7),
            GateKind::PrepZ => self.prepz,
            GateKind::Measure => self.measure,
            GateKind::Correct => self.correction_data,
        }
    }

    /// Ancilla preparation work a gate consumes from factories.
    pub fn ancilla_ops(&self, kind: GateKind) -> OpBundle {
        match kind {
            GateKind::T => self.t_ancilla,
            GateKind::Toffoli => self.t_ancilla.scaled(7),
            GateKind::Correct => self.zero_block.scaled(self.blocks_per_correction),
            _ => OpBundle::default(),
        }
    }

    /// Serial latency of a logical gate including the move into the gate
    /// location; ancilla are assumed ready.
    pub fn latency_us(&self, kind: GateKind, es: &ErrorSet) -> f64 {
        let mv = self.move_in.0 as f64 * es.straight.latency_us + self.move_in.1 as f64 * es.turn.latency_us;
        let one = es.one_qubit.latency_us;
        let two = es.two_qubit.latency_us;
        let meas = es.measure.latency_us;
        let body = match kind {
            GateKind::X | GateKind::Z | GateKind::H | GateKind::S => one,
            GateKind::Cnot => two,
            GateKind::T => two + meas + one,
            GateKind::Toffoli => 6.0 * two + 2.0 * one + 7.0 * (two + meas + one),
            GateKind::PrepZ => es.prep.latency_us,
            GateKind::Measure => meas,
            GateKind::Correct => 2.0 * (two + meas),
        };
        mv + body
    }
}

/// Full physical expansion of a logical gate (data plus ancilla work).
pub fn physical_cost(kind: GateKind, t: &GateCostTable) -> OpBundle {
    t.data_ops(kind) + t.ancilla_ops(kind)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactoryKind {
    QlaBasic,
    LqlaOptimized,
    QalypsoPipelined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AncillaFactory {
    pub kind: FactoryKind,
    pub area_mb: f64,
    pub latency_us: f64,
    /// Blocks per µs in steady state.
    pub throughput_per_us: f64,
    /// Output block infidelity as a multiple of the two-qubit gate error.
    pub infidelity_factor: f64,
}

impl AncillaFactory {
    pub fn infidelity(&self, es: &ErrorSet) -> f64 {
        (self.infidelity_factor * es.two_qubit.p).min(1.0)
    }

    /// Mean interval between blocks from one factory.
    pub fn interval_us(&self) -> f64 {
        1.0 / self.throughput_per_us
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Factories {
    /// Gate-time unit the default factory latencies are expressed in.
    pub gate_time_us: f64,
    pub qla_basic: AncillaFactory,
    pub lqla_optimized: AncillaFactory,
    pub qalypso_pipelined: AncillaFactory,
    /// Dedicated T-ancilla factory used at designated T sites.
    pub t_factory: AncillaFactory,
}

impl Default for Factories {
    fn default() -> Self {
        let gt = 50.0;
        Factories {
            gate_time_us: gt,
            qla_basic: AncillaFactory {
                kind: FactoryKind::QlaBasic,
                area_mb: 49.0,
                latency_us: 6.0 * gt,
                throughput_per_us: 1.0 / (6.0 * gt),
                infidelity_factor: 10.0,
            },
            lqla_optimized: AncillaFactory {
                kind: FactoryKind::LqlaOptimized,
                area_mb: 49.0,
                latency_us: 4.5 * gt,
                throughput_per_us: 1.0 / (4.5 * gt),
                infidelity_factor: 5.0,
            },
            qalypso_pipelined: AncillaFactory {
                kind: FactoryKind::QalypsoPipelined,
                area_mb: 147.0,
                latency_us: 6.0 * gt,
                throughput_per_us: 1.0 / gt,
                infidelity_factor: 3.0,
            },
            t_factory: AncillaFactory {
                kind: FactoryKind::QalypsoPipelined,
                area_mb: 196.0,
                latency_us: 8.0 * gt,
                throughput_per_us: 1.0 / (2.0 * gt),
                infidelity_factor: 5.0,
            },
        }
    }
}

impl Factories {
    pub fn get(&self, kind: FactoryKind) -> &AncillaFactory {
        match kind {
            FactoryKind::QlaBasic => &self.qla_basic,
            FactoryKind::LqlaOptimized => &self.lqla_optimized,
            FactoryKind::QalypsoPipelined => &self.qalypso_pipelined,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouterModel {
    pub base_area_mb: f64,
    pub per_load_area_mb: f64,
    /// Provisioned load of routers in fixed-ancilla datapaths.
    pub fixed_capacity: u32,
    pub purification_rounds: u32,
    /// Raw EPR infidelity as a multiple of the two-qubit gate error.
    pub epr_infidelity_factor: f64,
    pub epr_latency_us: f64,
}

impl Default for RouterModel {
    fn default() -> Self {
        RouterModel {
            base_area_mb: 24.0,
            per_load_area_mb: 12.0,
            fixed_capacity: 2,
            purification_rounds: 2,
            epr_infidelity_factor: 100.0,
            epr_latency_us: 61.0,
        }
    }
}

impl RouterModel {
    pub fn area(&self, peak_load: u32) -> f64 {
        self.base_area_mb + self.per_load_area_mb * peak_load as f64
    }

    pub fn raw_epr_fidelity(&self, es: &ErrorSet) -> f64 {
        1.0 - (self.epr_infidelity_factor * es.two_qubit.p).min(0.5)
    }

    pub fn purified_fidelity(&self, es: &ErrorSet) -> f64 {
        purify(self.raw_epr_fidelity(es), self.purification_rounds).unwrap_or(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Macroblocks per logical qubit slot (3×3 per physical qubit plus access).
    pub slot_area_mb: f64,
    pub pitch_um: f64,
    /// Published area of one QLA element, used as a cross-check.
    pub qla_element_mb: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            slot_area_mb: 63.0,
            pitch_um: 90.0,
            qla_element_mb: 272.0,
        }
    }
}

impl Geometry {
    pub fn mm2(&self, mb: f64) -> f64 {
        let side_mm = self.pitch_um / 1000.0;
        mb * side_mm * side_mm
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MacroblockKind {
    Straight,
    Turn,
    Tee,
    Cross,
    GateLocation,
    PortCap,
}

/// One grid cell of the trap layout. Ports are N, E, S, W.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Macroblock {
    pub kind: MacroblockKind,
    pub ports: [bool; 4],
}

impl Macroblock {
    pub fn new(kind: MacroblockKind) -> Self {
        let ports = match kind {
            MacroblockKind::Straight => [true, false, true, false],
            MacroblockKind::Turn => [true, true, false, false],
            MacroblockKind::Tee => [true, true, true, false],
            MacroblockKind::Cross => [true; 4],
            MacroblockKind::GateLocation => [true, false, true, false],
            MacroblockKind::PortCap => [true, false, false, false],
        };
        Macroblock { kind, ports }
    }

    pub fn allows_gate(&self) -> bool {
        self.kind == MacroblockKind::GateLocation
    }

    /// Rotates the port set clockwise by quarter turns.
    pub fn rotated(mut self, quarter_turns: usize) -> Self {
        self.ports.rotate_right(quarter_turns % 4);
        self
    }
}

/// Aggregate error and delay of a ballistic channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelEvent {
    pub p: f64,
    pub latency_us: f64,
}

impl ChannelEvent {
    /// Composition of two channel segments traversed in sequence.
    pub fn then(self, o: ChannelEvent) -> ChannelEvent {
        ChannelEvent {
            p: self.p + o.p - self.p * o.p,
            latency_us: self.latency_us + o.latency_us,
        }
    }
}

pub fn channel_errors(straights: u64, turns: u64, idle_us: f64, es: &ErrorSet) -> ChannelEvent {
    let idle_steps = idle_us.max(0.0).ceil();
    let log_ok = straights as f64 * (-es.straight.p).ln_1p()
        + turns as f64 * (-es.turn.p).ln_1p()
        + idle_steps * (-es.idle_per_us).ln_1p();
    ChannelEvent {
        p: -log_ok.exp_m1(),
        latency_us: straights as f64 * es.straight.latency_us + turns as f64 * es.turn.latency_us,
    }
}

/// Entanglement purification: each round maps F to F²/(F²+(1−F)²).
pub fn purify(f: f64, rounds: u32) -> Result<f64, TechError> {
    if f <= 0.5 || f.is_nan() || f > 1.0 {
        return Err(TechError::FidelityTooLow(f));
    }
    let mut f = f;
    for _ in 0..rounds {
        let a = f * f;
        let b = (1.0 - f) * (1.0 - f);
        f = a / (a + b);
    }
    Ok(f)
}

/// Complete technology description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tech {
    pub error_set: ErrorSet,
    pub costs: GateCostTable,
    pub factories: Factories,
    pub router: RouterModel,
    pub geometry: Geometry,
}

impl Tech {
    pub fn new(error_set: ErrorSet) -> Self {
        Tech {
            error_set,
            costs: GateCostTable::default(),
            factories: Factories::default(),
            router: RouterModel::default(),
            geometry: Geometry::default(),
        }
    }

    pub fn set1() -> Self {
        Self::new(ErrorSet::set1())
    }

    pub fn set2() -> Self {
        Self::new(ErrorSet::set2())
    }

    /// Applies a TOML override document on top of `self`. Keys absent from
    /// the document keep their current values.
    pub fn from_toml(&self, text: &str) -> Result<Tech, TechError> {
        let overrides: toml::Table = toml::from_str(text)?;
        let base = toml::Table::try_from(self).map_err(|e| TechError::Invalid(e.to_string()))?;
        let mut merged = toml::Value::Table(base);
        merge(&mut merged, toml::Value::Table(overrides));
        let tech: Tech = merged.try_into()?;
        tech.error_set.validate()?;
        Ok(tech)
    }

    pub fn load_file(&self, path: &Path) -> Result<Tech, TechError> {
        let text = std::fs::read_to_string(path)?;
        self.from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("technology model serializes")
    }

    pub fn logical_latency(&self, kind: GateKind) -> f64 {
        self.costs.latency_us(kind, &self.error_set)
    }

    /// Bell measurement plus fix-up; EPR pairs are assumed pre-distributed.
    pub fn teleport_latency(&self) -> f64 {
        let es = &self.error_set;
        es.two_qubit.latency_us + es.measure.latency_us + es.one_qubit.latency_us
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
