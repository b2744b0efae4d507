//! Line-oriented netlist text format.
//!
//! ```text
//! # comment
//! qubit a            # data qubit
//! qubit c0 zero      # optional kind: data | zero | tanc
//! module maj (x, y, z) {
//!   cnot z,y
//!   toffoli x,y,z
//! }
//! cnot a,b @stage1   # optional provenance tag
//! inst maj (a, b, c0)
//! ```

use super::{Circuit, CircuitError, Gate, GateKind, Hierarchy, ModuleDef, Qubit, QubitKind, Stmt};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

const HEADER: &str = "# qcad netlist v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown gate kind `{0}`")]
    UnknownGate(String),
    #[error("`{gate}` takes {expected} operand(s), found {found}")]
    Arity {
        gate: String,
        expected: usize,
        found: usize,
    },
    #[error("undeclared qubit `{0}`")]
    UndeclaredQubit(String),
    #[error("duplicate qubit declaration `{0}`")]
    DuplicateQubit(String),
    #[error("repeated operand `{0}`")]
    RepeatedOperand(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("duplicate module `{0}`")]
    DuplicateModule(String),
    #[error("module `{module}` has {expected} port(s), found {found} argument(s)")]
    PortCount {
        module: String,
        expected: usize,
        found: usize,
    },
    #[error("recursive instantiation of module `{0}`")]
    RecursiveModule(String),
    #[error("{0}")]
    Circuit(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

fn err(line: usize, col: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, col, kind }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']'))
}

/// Column (1-based) of `needle` within `line`, where `needle` is a subslice.
fn col_of(line: &str, needle: &str) -> usize {
    let base = line.as_ptr() as usize;
    let p = needle.as_ptr() as usize;
    if p >= base && p <= base + line.len() {
        p - base + 1
    } else {
        1
    }
}

struct OpenModule {
    def: ModuleDef,
    line: usize,
}

struct PendingInst {
    line: usize,
    col: usize,
    module: String,
    nargs: usize,
}

/// Parses netlist text into a validated circuit.
pub fn parse_netlist(text: &str) -> Result<Circuit, ParseError> {
    let mut qubits: Vec<Qubit> = Vec::new();
    let mut qubit_ids: HashMap<String, usize> = HashMap::new();
    let mut modules: Vec<ModuleDef> = Vec::new();
    let mut module_lines: HashMap<String, usize> = HashMap::new();
    let mut top: Vec<Stmt> = Vec::new();
    let mut open: Option<OpenModule> = None;
    let mut insts: Vec<PendingInst> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        last_line = lineno;
        let body = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let stmt = body.trim();
        if stmt.is_empty() {
            continue;
        }
        let first_col = col_of(raw, stmt);
        let (head, rest) = match stmt.find(char::is_whitespace) {
            Some(p) => (&stmt[..p], stmt[p..].trim()),
            None => (stmt, ""),
        };

        match head {
            "}" => {
                if !rest.is_empty() {
                    return Err(err(
                        lineno,
                        col_of(raw, rest),
                        ParseErrorKind::Syntax("unexpected text after `}`".into()),
                    ));
                }
                let m = open.take().ok_or_else(|| {
                    err(
                        lineno,
                        first_col,
                        ParseErrorKind::Syntax("`}` without open module".into()),
                    )
                })?;
                modules.push(m.def);
            }
            "qubit" => {
                if open.is_some() {
                    return Err(err(
                        lineno,
                        first_col,
                        ParseErrorKind::Syntax("qubit declarations are not allowed inside modules".into()),
                    ));
                }
                let mut parts = rest.split_whitespace();
                let name = parts
                    .next()
                    .ok_or_else(|| err(lineno, first_col, ParseErrorKind::Syntax("expected qubit name".into())))?;
                if !is_ident(name) {
                    return Err(err(
                        lineno,
                        col_of(raw, name),
                        ParseErrorKind::Syntax(format!("invalid identifier `{name}`")),
                    ));
                }
                let kind = match parts.next() {
                    None => QubitKind::Data,
                    Some(k) => QubitKind::from_keyword(k).ok_or_else(|| {
                        err(
                            lineno,
                            col_of(raw, k),
                            ParseErrorKind::Syntax(format!("unknown qubit kind `{k}`")),
                        )
                    })?,
                };
                if let Some(extra) = parts.next() {
                    return Err(err(
                        lineno,
                        col_of(raw, extra),
                        ParseErrorKind::Syntax("unexpected token".into()),
                    ));
                }
                if qubit_ids.contains_key(name) {
                    return Err(err(
                        lineno,
                        col_of(raw, name),
                        ParseErrorKind::DuplicateQubit(name.into()),
                    ));
                }
                qubit_ids.insert(name.to_owned(), qubits.len());
                qubits.push(Qubit {
                    id: qubits.len() as u32,
                    kind,
                    name: Some(name.to_owned()),
                });
            }
            "module" => {
                if open.is_some() {
                    return Err(err(
                        lineno,
                        first_col,
                        ParseErrorKind::Syntax("nested module definitions are not allowed".into()),
                    ));
                }
                let (name, ports, tail) = parse_call(raw, rest, lineno)?;
                if tail != "{" {
                    return Err(err(
                        lineno,
                        col_of(raw, stmt) + stmt.len(),
                        ParseErrorKind::Syntax("expected `{` after module header".into()),
                    ));
                }
                if module_lines.contains_key(name) {
                    return Err(err(
                        lineno,
                        col_of(raw, name),
                        ParseErrorKind::DuplicateModule(name.into()),
                    ));
                }
                let mut seen = Vec::new();
                for p in &ports {
                    if seen.contains(p) {
                        return Err(err(
                            lineno,
                            col_of(raw, p),
                            ParseErrorKind::Syntax(format!("duplicate port `{p}`")),
                        ));
                    }
                    seen.push(*p);
                }
                module_lines.insert(name.to_owned(), lineno);
                open = Some(OpenModule {
                    def: ModuleDef {
                        name: name.to_owned(),
                        ports: ports.iter().map(|s| s.to_string()).collect(),
                        body: Vec::new(),
                    },
                    line: lineno,
                });
            }
            "inst" => {
                let (name, args, tail) = parse_call(raw, rest, lineno)?;
                if !tail.is_empty() {
                    return Err(err(
                        lineno,
                        col_of(raw, tail),
                        ParseErrorKind::Syntax("unexpected text after instance".into()),
                    ));
                }
                let resolved = resolve_operands(raw, lineno, &args, open.as_ref(), &qubit_ids)?;
                insts.push(PendingInst {
                    line: lineno,
                    col: col_of(raw, name),
                    module: name.to_owned(),
                    nargs: args.len(),
                });
                let s = Stmt::Inst {
                    module: name.to_owned(),
                    args: resolved,
                };
                match open.as_mut() {
                    Some(m) => m.def.body.push(s),
                    None => top.push(s),
                }
            }
            gate => {
                let (kind, inverse) = GateKind::from_mnemonic(gate)
                    .ok_or_else(|| err(lineno, first_col, ParseErrorKind::UnknownGate(gate.into())))?;
                let (ops_text, tag) = match rest.find('@') {
                    Some(p) => {
                        let t = rest[p + 1..].trim();
                        if t.is_empty() || t.contains(char::is_whitespace) {
                            return Err(err(
                                lineno,
                                col_of(raw, &rest[p..]),
                                ParseErrorKind::Syntax("malformed tag".into()),
                            ));
                        }
                        (rest[..p].trim(), Some(t.to_owned()))
                    }
                    None => (rest, None),
                };
                let ops: Vec<&str> = if ops_text.is_empty() {
                    Vec::new()
                } else {
                    ops_text.split(',').map(str::trim).collect()
                };
                if ops.len() != kind.arity() {
                    return Err(err(
                        lineno,
                        first_col,
                        ParseErrorKind::Arity {
                            gate: gate.into(),
                            expected: kind.arity(),
                            found: ops.len(),
                        },
                    ));
                }
                let operands = resolve_operands(raw, lineno, &ops, open.as_ref(), &qubit_ids)?;
                for (i, o) in operands.iter().enumerate() {
                    if operands[..i].contains(o) {
                        return Err(err(
                            lineno,
                            col_of(raw, ops[i]),
                            ParseErrorKind::RepeatedOperand(ops[i].into()),
                        ));
                    }
                }
                let s = Stmt::Gate {
                    kind,
                    inverse,
                    operands,
                    tag,
                };
                match open.as_mut() {
                    Some(m) => m.def.body.push(s),
                    None => top.push(s),
                }
            }
        }
    }

    if let Some(m) = open {
        return Err(err(
            m.line,
            1,
            ParseErrorKind::Syntax(format!("module `{}` is not closed", m.def.name)),
        ));
    }
    let _ = last_line;

    for inst in &insts {
        let Some(def) = modules.iter().find(|m| m.name == inst.module) else {
            return Err(err(
                inst.line,
                inst.col,
                ParseErrorKind::UnknownModule(inst.module.clone()),
            ));
        };
        if def.ports.len() != inst.nargs {
            return Err(err(
                inst.line,
                inst.col,
                ParseErrorKind::PortCount {
                    module: inst.module.clone(),
                    expected: def.ports.len(),
                    found: inst.nargs,
                },
            ));
        }
    }

    if insts.is_empty() && modules.is_empty() {
        let gates = top
            .into_iter()
            .enumerate()
            .map(|(i, s)| match s {
                Stmt::Gate {
                    kind,
                    inverse,
                    operands,
                    tag,
                } => Gate {
                    id: i as u32,
                    kind,
                    inverse,
                    operands: operands.into_iter().map(|q| q as u32).collect(),
                    tag,
                },
                Stmt::Inst { .. } => unreachable!("no instances present"),
            })
            .collect();
        return Circuit::new(qubits, gates).map_err(|e| err(1, 1, ParseErrorKind::Circuit(e.to_string())));
    }

    let hierarchy = Hierarchy { modules, top };
    Circuit::from_hierarchy(qubits, hierarchy).map_err(|e| match e {
        CircuitError::RecursiveModule(name) => {
            let line = module_lines.get(&name).copied().unwrap_or(1);
            err(line, 1, ParseErrorKind::RecursiveModule(name))
        }
        other => err(1, 1, ParseErrorKind::Circuit(other.to_string())),
    })
}

/// Splits `name (a, b, c) tail` into its parts.
fn parse_call<'a>(raw: &'a str, rest: &'a str, lineno: usize) -> Result<(&'a str, Vec<&'a str>, &'a str), ParseError> {
    let open = rest
        .find('(')
        .ok_or_else(|| err(lineno, col_of(raw, rest), ParseErrorKind::Syntax("expected `(`".into())))?;
    let close = rest.find(')').ok_or_else(|| {
        err(
            lineno,
            col_of(raw, rest) + rest.len(),
            ParseErrorKind::Syntax("expected `)`".into()),
        )
    })?;
    if close < open {
        return Err(err(
            lineno,
            col_of(raw, &rest[close..]),
            ParseErrorKind::Syntax("unbalanced parentheses".into()),
        ));
    }
    let name = rest[..open].trim();
    if !is_ident(name) {
        return Err(err(
            lineno,
            col_of(raw, rest),
            ParseErrorKind::Syntax(format!("invalid name `{name}`")),
        ));
    }
    let inner = rest[open + 1..close].trim();
    let items: Vec<&str> = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    for it in &items {
        if !is_ident(it) {
            return Err(err(
                lineno,
                col_of(raw, it),
                ParseErrorKind::Syntax(format!("invalid identifier `{it}`")),
            ));
        }
    }
    Ok((name, items, rest[close + 1..].trim()))
}

fn resolve_operands(
    raw: &str,
    lineno: usize,
    names: &[&str],
    open: Option<&OpenModule>,
    qubit_ids: &HashMap<String, usize>,
) -> Result<Vec<usize>, ParseError> {
    names
        .iter()
        .map(|n| {
            if n.is_empty() {
                return Err(err(
                    lineno,
                    col_of(raw, n),
                    ParseErrorKind::Syntax("empty operand".into()),
                ));
            }
            let found = match open {
                Some(m) => m.def.ports.iter().position(|p| p == n),
                None => qubit_ids.get(*n).copied(),
            };
            found.ok_or_else(|| err(lineno, col_of(raw, n), ParseErrorKind::UndeclaredQubit((*n).into())))
        })
        .collect()
}

/// Renders a circuit as netlist text. Hierarchical circuits keep their
/// module structure.
pub fn emit_netlist(c: &Circuit) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    let labels: Vec<String> = c.qubits().iter().map(Qubit::label).collect();
    for q in c.qubits() {
        match q.kind {
            QubitKind::Data => writeln!(out, "qubit {}", labels[q.id as usize]),
            k => writeln!(out, "qubit {} {}", labels[q.id as usize], k.keyword()),
        }
        .unwrap();
    }
    match c.hierarchy() {
        Some(h) => {
            for m in &h.modules {
                writeln!(out, "module {} ({}) {{", m.name, m.ports.join(", ")).unwrap();
                for s in &m.body {
                    out.push_str("  ");
                    emit_stmt(&mut out, s, &m.ports);
                }
                out.push_str("}\n");
            }
            for s in &h.top {
                emit_stmt(&mut out, s, &labels);
            }
        }
        None => {
            for g in c.gates() {
                let ops: Vec<&str> = g.operands.iter().map(|&q| labels[q as usize].as_str()).collect();
                write!(out, "{} {}", g.kind.mnemonic(g.inverse), ops.join(",")).unwrap();
                if let Some(t) = &g.tag {
                    write!(out, " @{t}").unwrap();
                }
                out.push('\n');
            }
        }
    }
    out
}

fn emit_stmt(out: &mut String, s: &Stmt, names: &[String]) {
    match s {
        Stmt::Gate {
            kind,
            inverse,
            operands,
            tag,
        } => {
            let ops: Vec<&str> = operands.iter().map(|&i| names[i].as_str()).collect();
            write!(out, "{} {}", kind.mnemonic(*inverse), ops.join(",")).unwrap();
            if let Some(t) = tag {
                write!(out, " @{t}").unwrap();
            }
            out.push('\n');
        }
        Stmt::Inst { module, args } => {
            let a: Vec<&str> = args.iter().map(|&i| names[i].as_str()).collect();
            writeln!(out, "inst {} ({})", module, a.join(", ")).unwrap();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Dag;

    #[test]
    fn minimal_program() {
        let c = parse_netlist("qubit a\nqubit b\ncnot a,b").unwrap();
        assert_eq!(c.num_qubits(), 2);
        assert_eq!(c.num_gates(), 1);
        assert_eq!(c.gates()[0].kind, GateKind::Cnot);
        assert_eq!(c.gates()[0].operands, vec![0, 1]);
    }

    #[test]
    fn three_gate_chain_has_depth_three() {
        let c = parse_netlist("qubit a\nh a\nh a\nh a").unwrap();
        assert_eq!(c.num_gates(), 3);
        assert_eq!(Dag::build(&c).unwrap().depth(), 3);
    }

    #[test]
    fn module_instantiated_twice_doubles_gate_count() {
        let src = "\
qubit a
qubit b
qubit c
module maj (x, y, z) {
  cnot z,y
  cnot z,x
  toffoli x,y,z
}
inst maj (a, b, c)
inst maj (c, a, b)
";
        let c = parse_netlist(src).unwrap();
        assert_eq!(c.num_gates(), 6);
        assert_eq!(c.gates()[3].operands, vec![1, 0]);
        assert_eq!(c.gates()[0].tag.as_deref(), Some("maj"));
    }

    #[test]
    fn comments_and_tags() {
        let c = parse_netlist("# header\nqubit a zero # ancilla\nx a @stage1\n").unwrap();
        assert_eq!(c.qubits()[0].kind, QubitKind::ZeroAncilla);
        assert_eq!(c.gates()[0].tag.as_deref(), Some("stage1"));
    }

    #[test]
    fn tdag_sets_inverse() {
        let c = parse_netlist("qubit a\ntdag a\nt a").unwrap();
        assert!(c.gates()[0].inverse);
        assert!(!c.gates()[1].inverse);
    }

    #[test]
    fn diagnostics_carry_positions() {
        let e = parse_netlist("qubit a\nfoo a").unwrap_err();
        assert_eq!((e.line, e.col), (2, 1));
        assert!(matches!(e.kind, ParseErrorKind::UnknownGate(_)));

        let e = parse_netlist("qubit a\nqubit b\n  cnot a,zz").unwrap_err();
        assert_eq!((e.line, e.col), (3, 10));
        assert_eq!(e.kind, ParseErrorKind::UndeclaredQubit("zz".into()));

        let e = parse_netlist("qubit a\ncnot a").unwrap_err();
        assert!(matches!(
            e.kind,
            ParseErrorKind::Arity {
                expected: 2,
                found: 1,
                ..
            }
        ));

        let e = parse_netlist("qubit a\nqubit a").unwrap_err();
        assert_eq!((e.line, e.col), (2, 7));
        assert_eq!(e.kind, ParseErrorKind::DuplicateQubit("a".into()));

        let e = parse_netlist("qubit a\ncnot a,a").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::RepeatedOperand(_)));

        let e = parse_netlist("qubit a\ninst nope (a)").unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::UnknownModule("nope".into()));

        let e = parse_netlist("qubit = a").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
    }

    #[test]
    fn recursive_module_is_rejected() {
        let src = "qubit a\nmodule r (x) {\n  x x\n  inst r (x)\n}\ninst r (a)\n";
        let e = parse_netlist(src).unwrap_err();
        assert_eq!(e.kind, ParseErrorKind::RecursiveModule("r".into()));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn unclosed_module() {
        let e = parse_netlist("qubit a\nmodule m (x) {\n x x\n").unwrap_err();
        assert!(matches!(e.kind, ParseErrorKind::Syntax(_)));
        assert_eq!(e.line, 2);
    }

    #[test]
    fn empty_circuit_emits_header_only() {
        let c = Circuit::default();
        assert_eq!(emit_netlist(&c), format!("{HEADER}\n"));
    }

    #[test]
    fn one_gate_circuit_emits_one_gate_line() {
        let c = parse_netlist("qubit a\nh a").unwrap();
        let text = emit_netlist(&c);
        let gate_lines = text.lines().filter(|l| l.starts_with("h ")).count();
        assert_eq!(gate_lines, 1);
        assert_eq!(parse_netlist(&text).unwrap(), c);
    }

    #[test]
    fn hierarchical_round_trip() {
        let src = "qubit a\nqubit b\nmodule m (x, y) {\n  cnot x,y\n  t y\n}\nh a\ninst m (a, b)\ninst m (b, a)\n";
        let c = parse_netlist(src).unwrap();
        let again = parse_netlist(&emit_netlist(&c)).unwrap();
        assert_eq!(c, again);
    }
}
