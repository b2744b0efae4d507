use super::{Circuit, CircuitError, Gate, GateKind, Hierarchy, ModuleDef, QubitId, Stmt};
use std::collections::HashMap;

/// Expands a module hierarchy depth-first in statement order.
pub(crate) fn expand(h: &Hierarchy) -> Result<Vec<Gate>, CircuitError> {
    let defs: HashMap<&str, &ModuleDef> = h.modules.iter().map(|m| (m.name.as_str(), m)).collect();
    let mut out = Vec::new();
    let mut stack = Vec::new();
    expand_body(&h.top, None, "", &defs, &mut stack, &mut out)?;
    Ok(out)
}

fn expand_body(
    body: &[Stmt],
    binding: Option<&[QubitId]>,
    path: &str,
    defs: &HashMap<&str, &ModuleDef>,
    stack: &mut Vec<String>,
    out: &mut Vec<Gate>,
) -> Result<(), CircuitError> {
    let map = |i: usize| -> QubitId {
        match binding {
            Some(b) => b[i],
            None => i as QubitId,
        }
    };
    for s in body {
        match s {
            Stmt::Gate {
                kind,
                inverse,
                operands,
                tag,
            } => {
                let tag = match (path.is_empty(), tag) {
                    (true, t) => t.clone(),
                    (false, None) => Some(path.to_owned()),
                    (false, Some(t)) => Some(format!("{path}/{t}")),
                };
                out.push(Gate {
                    id: out.len() as u32,
                    kind: *kind,
                    inverse: *inverse,
                    operands: operands.iter().map(|&i| map(i)).collect(),
                    tag,
                });
            }
            Stmt::Inst { module, args } => {
                let def = defs
                    .get(module.as_str())
                    .ok_or_else(|| CircuitError::UnknownModule(module.clone()))?;
                if def.ports.len() != args.len() {
                    return Err(CircuitError::PortCount {
                        module: module.clone(),
                        expected: def.ports.len(),
                        found: args.len(),
                    });
                }
                if stack.iter().any(|m| m == module) {
                    return Err(CircuitError::RecursiveModule(module.clone()));
                }
                let bound: Vec<QubitId> = args.iter().map(|&i| map(i)).collect();
                let sub = if path.is_empty() {
                    module.clone()
                } else {
                    format!("{path}/{module}")
                };
                stack.push(module.clone());
                expand_body(&def.body, Some(&bound), &sub, defs, stack, out)?;
                stack.pop();
            }
        }
    }
    Ok(())
}

/// Drops the module hierarchy, keeping the flat gate sequence and its
/// provenance tags.
pub fn flatten(c: &Circuit) -> Circuit {
    c.clone().drop_hierarchy()
}

/// Replaces every Toffoli with the standard 15-gate Clifford+T network.
pub fn decompose_toffoli(c: &Circuit) -> Circuit {
    if c.count(GateKind::Toffoli) == 0 {
        return flatten(c);
    }
    let (qubits, gates) = c.clone().into_parts();
    let mut out: Vec<Gate> = Vec::with_capacity(gates.len() + 14 * c.count(GateKind::Toffoli));
    for g in gates {
        if g.kind != GateKind::Toffoli {
            out.push(Gate {
                id: out.len() as u32,
                ..g
            });
            continue;
        }
        let (a, b, t) = (g.operands[0], g.operands[1], g.operands[2]);
        use GateKind::{Cnot, H, T};
        let seq: [(GateKind, bool, &[QubitId]); 15] = [
            (H, false, &[t]),
            (Cnot, false, &[b, t]),
            (T, true, &[t]),
            (Cnot, false, &[a, t]),
            (T, false, &[t]),
            (Cnot, false, &[b, t]),
            (T, true, &[t]),
            (Cnot, false, &[a, t]),
            (T, false, &[b]),
            (T, false, &[t]),
            (H, false, &[t]),
            (Cnot, false, &[a, b]),
            (T, false, &[a]),
            (T, true, &[b]),
            (Cnot, false, &[a, b]),
        ];
        for (kind, inverse, ops) in seq {
            out.push(Gate {
                id: out.len() as u32,
                kind,
                inverse,
                operands: ops.to_vec(),
                tag: g.tag.clone(),
            });
        }
    }
    Circuit::new(qubits, out).expect("decomposition preserves validity")
}
