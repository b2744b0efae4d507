//! Mapping an encoded circuit onto a datapath: initial placement, list
//! scheduling with relocation, ancilla and network sizing, and the sweep
//! for the ADCR-optimal configuration.

mod partition;
mod schedule;
mod search;
mod sizing;
mod validate;

pub use partition::{partition, residents, Assignment};
pub use schedule::schedule;
pub use search::{adcr_search, d_sweep, SearchResult, SweepRow};
pub use sizing::{peak_rate, size_ancilla, size_network, AncillaSizing, NetworkSizing};
pub use validate::validate;

use crate::circuit::{Circuit, CircuitError, GateId, QubitId};
use crate::datapath::{instantiate, DatapathConfig, DatapathError, RegionLayout};
use crate::tech::Tech;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("circuit needs {needed} qubit slots, datapath has {available}")]
    Capacity { needed: usize, available: usize },
    #[error("scheduler deadlocked at t = {time_us} µs with {pending} gates pending")]
    Deadlock { time_us: f64, pending: usize },
    #[error(transparent)]
    Datapath(#[from] DatapathError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid schedule: {0}")]
    Invalid(String),
    #[error("no sweep point could be mapped")]
    AllFailed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSlot {
    pub region: usize,
    pub start: f64,
    pub duration: f64,
    /// Time spent waiting for ancilla after operands were in place.
    pub stall: f64,
}

impl GateSlot {
    pub fn finish(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveReason {
    /// Brought to the region of a gate using it.
    Operand,
    /// Pushed out to make room for a gate's operands.
    Evict,
    /// Parked in memory while idle.
    Idle,
}

/// Teleport of a qubit between regions. Movement inside a region is
/// ballistic and folded into the gate that triggers it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relocation {
    pub qubit: QubitId,
    pub from: usize,
    pub to: usize,
    pub depart: f64,
    pub arrive: f64,
    pub reason: MoveReason,
    pub hops: usize,
}

/// Interval a qubit physically sits in a region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residency {
    pub qubit: QubitId,
    pub region: usize,
    pub from: f64,
    pub to: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionEvent {
    pub qubit: QubitId,
    pub region: usize,
    pub time: f64,
    /// The Correct gate, or `None` for an idle correction in memory.
    pub gate: Option<GateId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: usize,
    pub to: usize,
    pub start: f64,
    pub end: f64,
    /// Routers occupied, endpoints included.
    pub routers: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub time: f64,
    pub blocks: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MappedSchedule {
    /// Indexed by gate id.
    pub gates: Vec<GateSlot>,
    pub residency: Vec<Residency>,
    pub relocations: Vec<Relocation>,
    pub corrections: Vec<CorrectionEvent>,
    pub connections: Vec<Connection>,
    /// Zero-ancilla blocks consumed, per region.
    pub zero_demand: Vec<Vec<Demand>>,
    /// T ancillas consumed, per region.
    pub t_demand: Vec<Vec<Demand>>,
    pub stall_us: f64,
    pub makespan: f64,
    /// Start of the first gate on each qubit (infinite if never used).
    pub first_activity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mapped {
    pub layout: RegionLayout,
    pub assignment: Assignment,
    pub schedule: MappedSchedule,
    pub network: NetworkSizing,
}

/// Full mapping flow for one configuration. Fixed datapaths are scheduled
/// once. Qalypso is first scheduled with an unconstrained network, routers
/// are provisioned at `net_aggressiveness` × the observed peak, the circuit
/// is rescheduled under those limits and generators are sized to demand.
pub fn map(c: &Circuit, cfg: &DatapathConfig, tech: &Tech) -> Result<Mapped, MapError> {
    let mut layout = instantiate(cfg, tech)?;
    let assignment = partition(c, &layout)?;
    if cfg.kind.fixed_ancilla() {
        let s = schedule::run(c, &layout, &assignment, tech, false)?;
        let network = size_network(&s, &layout, tech);
        return Ok(Mapped {
            layout,
            assignment,
            schedule: s,
            network,
        });
    }
    let free = schedule::run(c, &layout, &assignment, tech, true)?;
    let probe = size_network(&free, &layout, tech);
    for r in &mut layout.regions {
        r.router_capacity = sizing::provision(probe.peak[r.id], cfg.net_aggressiveness);
    }
    let s = schedule::run(c, &layout, &assignment, tech, false)?;
    let anc = size_ancilla(&s, &layout, tech);
    for r in &mut layout.regions {
        r.gens = anc.gens[r.id];
        r.t_factories = anc.t_factories[r.id];
    }
    layout.refresh(tech);
    let network = size_network(&s, &layout, tech);
    Ok(Mapped {
        layout,
        assignment,
        schedule: s,
        network,
    })
}
