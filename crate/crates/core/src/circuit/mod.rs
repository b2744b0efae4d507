//! Logical circuit IR: qubits, gates, optional module hierarchy.

mod dag;
mod netlist;
mod transform;

pub use dag::Dag;
pub use netlist::{emit_netlist, parse_netlist, ParseError, ParseErrorKind};
pub use transform::{decompose_toffoli, flatten};

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub type QubitId = u32;
pub type GateId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QubitKind {
    Data,
    ZeroAncilla,
    TAncilla,
}

impl QubitKind {
    pub fn keyword(self) -> &'static str {
        match self {
            QubitKind::Data => "data",
            QubitKind::ZeroAncilla => "zero",
            QubitKind::TAncilla => "tanc",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "data" => Some(QubitKind::Data),
            "zero" => Some(QubitKind::ZeroAncilla),
            "tanc" => Some(QubitKind::TAncilla),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qubit {
    pub id: QubitId,
    pub kind: QubitKind,
    pub name: Option<String>,
}

impl Qubit {
    /// Name used in netlist text; unnamed qubits print as `q<id>`.
    pub fn label(&self) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("q{}", self.id),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateKind {
    X,
    Z,
    H,
    S,
    T,
    Cnot,
    Toffoli,
    PrepZ,
    Measure,
    Correct,
}

impl GateKind {
    pub const ALL: [GateKind; 10] = [
        GateKind::X,
        GateKind::Z,
        GateKind::H,
        GateKind::S,
        GateKind::T,
        GateKind::Cnot,
        GateKind::Toffoli,
        GateKind::PrepZ,
        GateKind::Measure,
        GateKind::Correct,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Cnot => 2,
            GateKind::Toffoli => 3,
            _ => 1,
        }
    }

    /// Encoded gates that act bitwise across the code block.
    pub fn is_transversal(self) -> bool {
        !matches!(self, GateKind::T | GateKind::Toffoli)
    }

    pub fn mnemonic(self, inverse: bool) -> &'static str {
        match self {
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::H => "h",
            GateKind::S => "s",
            GateKind::T if inverse => "tdag",
            GateKind::T => "t",
            GateKind::Cnot => "cnot",
            GateKind::Toffoli => "toffoli",
            GateKind::PrepZ => "prepz",
            GateKind::Measure => "measure",
            GateKind::Correct => "correct",
        }
    }

    /// Parses a lowercase mnemonic; the bool is the T-inverse flag.
    pub fn from_mnemonic(s: &str) -> Option<(GateKind, bool)> {
        Some(match s {
            "x" => (GateKind::X, false),
            "z" => (GateKind::Z, false),
            "h" => (GateKind::H, false),
            "s" => (GateKind::S, false),
            "t" => (GateKind::T, false),
            "tdag" => (GateKind::T, true),
            "cnot" => (GateKind::Cnot, false),
            "toffoli" => (GateKind::Toffoli, false),
            "prepz" => (GateKind::PrepZ, false),
            "measure" => (GateKind::Measure, false),
            "correct" => (GateKind::Correct, false),
            _ => return None,
        })
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic(false))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gate {
    pub id: GateId,
    pub kind: GateKind,
    /// Only meaningful for `T` (T-dagger).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inverse: bool,
    pub operands: Vec<QubitId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

/// A statement inside the hierarchy. Operand indices refer to circuit
/// qubits at top level and to ports inside a module body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Gate {
        kind: GateKind,
        inverse: bool,
        operands: Vec<usize>,
        tag: Option<String>,
    },
    Inst {
        module: String,
        args: Vec<usize>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDef {
    pub name: String,
    pub ports: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Hierarchy {
    pub modules: Vec<ModuleDef>,
    pub top: Vec<Stmt>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CircuitError {
    #[error("gate {gate}: {kind} expects {expected} operands, got {found}")]
    Arity {
        gate: GateId,
        kind: GateKind,
        expected: usize,
        found: usize,
    },
    #[error("gate {gate}: operand q{qubit} does not exist")]
    UnknownQubit { gate: GateId, qubit: QubitId },
    #[error("gate {gate}: repeated operand q{qubit}")]
    RepeatedOperand { gate: GateId, qubit: QubitId },
    #[error("qubit ids must be dense; found id {found} at position {index}")]
    QubitIds { index: usize, found: QubitId },
    #[error("gate ids must be dense; found id {found} at position {index}")]
    GateIds { index: usize, found: GateId },
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("module `{0}` instantiates itself")]
    RecursiveModule(String),
    #[error("module `{module}` expects {expected} arguments, got {found}")]
    PortCount {
        module: String,
        expected: usize,
        found: usize,
    },
    #[error("dependence cycle through gate {0}")]
    Cycle(GateId),
}

/// A validated circuit. `gates` is always the flat execution sequence; when
/// the circuit came from a hierarchical source the hierarchy is kept for
/// re-emission.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Circuit {
    qubits: Vec<Qubit>,
    gates: Vec<Gate>,
    hierarchy: Option<Hierarchy>,
}

impl Circuit {
    pub fn new(qubits: Vec<Qubit>, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        let c = Circuit {
            qubits,
            gates,
            hierarchy: None,
        };
        c.validate()?;
        Ok(c)
    }

    /// Expands `hierarchy` into the flat gate list, tagging each gate with
    /// the module path it came from.
    pub fn from_hierarchy(qubits: Vec<Qubit>, hierarchy: Hierarchy) -> Result<Self, CircuitError> {
        let gates = transform::expand(&hierarchy)?;
        let c = Circuit {
            qubits,
            gates,
            hierarchy: Some(hierarchy),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn qubits(&self) -> &[Qubit] {
        &self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn hierarchy(&self) -> Option<&Hierarchy> {
        self.hierarchy.as_ref()
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits.len()
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind == kind).count()
    }

    /// Sum of operand counts over all gates.
    pub fn operand_slots(&self) -> usize {
        self.gates.iter().map(|g| g.operands.len()).sum()
    }

    pub fn into_parts(self) -> (Vec<Qubit>, Vec<Gate>) {
        (self.qubits, self.gates)
    }

    /// Equality ignoring qubit names and gate tags.
    pub fn structurally_eq(&self, other: &Circuit) -> bool {
        self.qubits.len() == other.qubits.len()
            && self.gates.len() == other.gates.len()
            && self
                .qubits
                .iter()
                .zip(&other.qubits)
                .all(|(a, b)| a.id == b.id && a.kind == b.kind)
            && self
                .gates
                .iter()
                .zip(&other.gates)
                .all(|(a, b)| a.id == b.id && a.kind == b.kind && a.inverse == b.inverse && a.operands == b.operands)
    }

    pub(crate) fn drop_hierarchy(mut self) -> Self {
        self.hierarchy = None;
        self
    }

    fn validate(&self) -> Result<(), CircuitError> {
        for (i, q) in self.qubits.iter().enumerate() {
            if q.id as usize != i {
                return Err(CircuitError::QubitIds { index: i, found: q.id });
            }
        }
        let n = self.qubits.len() as QubitId;
        for (i, g) in self.gates.iter().enumerate() {
            if g.id as usize != i {
                return Err(CircuitError::GateIds { index: i, found: g.id });
            }
            if g.operands.len() != g.kind.arity() {
                return Err(CircuitError::Arity {
                    gate: g.id,
                    kind: g.kind,
                    expected: g.kind.arity(),
                    found: g.operands.len(),
                });
            }
            for (k, &q) in g.operands.iter().enumerate() {
                if q >= n {
                    return Err(CircuitError::UnknownQubit { gate: g.id, qubit: q });
                }
                if g.operands[..k].contains(&q) {
                    return Err(CircuitError::RepeatedOperand { gate: g.id, qubit: q });
                }
            }
        }
        Ok(())
    }
}

/// Incremental construction of flat circuits.
#[derive(Default, Debug, Clone)]
pub struct CircuitBuilder {
    qubits: Vec<Qubit>,
    gates: Vec<Gate>,
    tag: Option<String>,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn qubit(&mut self, name: impl Into<String>, kind: QubitKind) -> QubitId {
        let id = self.qubits.len() as QubitId;
        self.qubits.push(Qubit {
            id,
            kind,
            name: Some(name.into()),
        });
        id
    }

    pub fn register(&mut self, prefix: &str, len: usize, kind: QubitKind) -> Vec<QubitId> {
        (0..len).map(|i| self.qubit(format!("{prefix}{i}"), kind)).collect()
    }

    /// Tag applied to subsequently added gates.
    pub fn set_tag(&mut self, tag: Option<&str>) {
        self.tag = tag.map(str::to_owned);
    }

    pub fn gate(&mut self, kind: GateKind, operands: &[QubitId]) -> GateId {
        self.push(kind, false, operands)
    }

    pub fn tdag(&mut self, q: QubitId) -> GateId {
        self.push(GateKind::T, true, &[q])
    }

    pub fn push(&mut self, kind: GateKind, inverse: bool, operands: &[QubitId]) -> GateId {
        let id = self.gates.len() as GateId;
        self.gates.push(Gate {
            id,
            kind,
            inverse: inverse && kind == GateKind::T,
            operands: operands.to_vec(),
            tag: self.tag.clone(),
        });
        id
    }

    pub fn num_gates(&self) -> usize {
        self.gates.len()
    }

    pub fn build(self) -> Result<Circuit, CircuitError> {
        Circuit::new(self.qubits, self.gates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_is_checked() {
        let mut b = CircuitBuilder::new();
        let a = b.qubit("a", QubitKind::Data);
        b.gate(GateKind::Cnot, &[a]);
        assert!(matches!(b.build(), Err(CircuitError::Arity { expected: 2, .. })));
    }

    #[test]
    fn repeated_operand_rejected() {
        let mut b = CircuitBuilder::new();
        let a = b.qubit("a", QubitKind::Data);
        b.gate(GateKind::Cnot, &[a, a]);
        assert!(matches!(b.build(), Err(CircuitError::RepeatedOperand { .. })));
    }

    #[test]
    fn mnemonics_round_trip() {
        for k in GateKind::ALL {
            assert_eq!(GateKind::from_mnemonic(k.mnemonic(false)), Some((k, false)));
        }
        assert_eq!(GateKind::from_mnemonic("tdag"), Some((GateKind::T, true)));
    }
}
