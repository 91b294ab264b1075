//! Fan-in-2 Boolean circuits: IR, the `.ckt` text format, evaluation and
//! constant restriction.
//!
//! Format, one declaration per line, `#` starts a comment:
//!
//! ```text
//! input x1
//! input x2
//! gate g1 XOR x1 x2
//! output g1
//! ```
//!
//! Inputs are numbered by declaration order. Gates may reference wires
//! declared later in the file; the parser sorts them topologically and
//! rejects cycles.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

pub mod universal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircuitError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: undefined wire `{name}`")]
    UndefinedWire { line: usize, name: String },
    #[error("line {line}: {op} takes {expected} operand(s), got {found}")]
    Arity {
        line: usize,
        op: GateOp,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: wire `{name}` is part of a cycle")]
    Cycle { line: usize, name: String },
    #[error("line {line}: wire `{name}` declared twice")]
    Duplicate { line: usize, name: String },
    #[error("circuit declares no output")]
    MissingOutput,
    #[error("circuit declares no inputs")]
    NoInputs,
    #[error("expected {expected} input bits, got {found}")]
    InputLength { expected: usize, found: usize },
    #[error("invalid bit string `{0}`")]
    BadBits(String),
    #[error("{0}")]
    Family(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GateOp {
    And,
    Or,
    Not,
    Xor,
    Nand,
}

impl GateOp {
    pub const ALL: [GateOp; 5] = [GateOp::And, GateOp::Or, GateOp::Not, GateOp::Xor, GateOp::Nand];

    pub fn arity(self) -> usize {
        match self {
            GateOp::Not => 1,
            _ => 2,
        }
    }

    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            GateOp::And => a & b,
            GateOp::Or => a | b,
            GateOp::Not => !a,
            GateOp::Xor => a ^ b,
            GateOp::Nand => !(a & b),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateOp::And => "AND",
            GateOp::Or => "OR",
            GateOp::Not => "NOT",
            GateOp::Xor => "XOR",
            GateOp::Nand => "NAND",
        }
    }
}

impl fmt::Display for GateOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateOp {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        GateOp::ALL.into_iter().find(|op| op.name() == s).ok_or(())
    }
}

/// A wire is either a circuit input or the output of an earlier gate.
/// Both indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Wire {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub name: String,
    pub op: GateOp,
    pub operands: Vec<Wire>,
}

/// Single-output Boolean circuit with gates in topological order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    inputs: Vec<String>,
    gates: Vec<Gate>,
    output: Wire,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Circuit {
    /// Assemble a circuit, checking arity and ordering invariants.
    pub fn new(inputs: Vec<String>, gates: Vec<Gate>, output: Wire) -> Result<Self, CircuitError> {
        if inputs.is_empty() {
            return Err(CircuitError::NoInputs);
        }
        let in_range = |w: Wire, limit: usize| match w {
            Wire::Input(i) => i < inputs.len(),
            Wire::Gate(g) => g < limit,
        };
        for (idx, gate) in gates.iter().enumerate() {
            if gate.operands.len() != gate.op.arity() {
                return Err(CircuitError::Arity {
                    line: idx + 1,
                    op: gate.op,
                    expected: gate.op.arity(),
                    found: gate.operands.len(),
                });
            }
            if let Some(bad) = gate.operands.iter().find(|w| !in_range(**w, idx)) {
                return Err(CircuitError::UndefinedWire {
                    line: idx + 1,
                    name: format!("{bad:?}"),
                });
            }
        }
        if !in_range(output, gates.len()) {
            return Err(CircuitError::MissingOutput);
        }
        Ok(Self { inputs, gates, output })
    }

    /// Convenience builder that names inputs `x1..xl` and gates `g1..gk`.
    pub fn from_ops(input_count: usize, ops: &[(GateOp, Vec<Wire>)], output: Wire) -> Result<Self, CircuitError> {
        let inputs = (1..=input_count).map(|i| format!("x{i}")).collect();
        let gates = ops
            .iter()
            .enumerate()
            .map(|(i, (op, operands))| Gate {
                name: format!("g{}", i + 1),
                op: *op,
                operands: operands.clone(),
            })
            .collect();
        Self::new(inputs, gates, output)
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn input_names(&self) -> &[String] {
        &self.inputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn output(&self) -> Wire {
        self.output
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    /// Longest input-to-output path, counted in gates.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.gates.len()];
        let wire_depth = |w: Wire, depth: &[usize]| match w {
            Wire::Input(_) => 0,
            Wire::Gate(g) => depth[g],
        };
        for (i, gate) in self.gates.iter().enumerate() {
            depth[i] = 1 + gate.operands.iter().map(|w| wire_depth(*w, &depth)).max().unwrap_or(0);
        }
        wire_depth(self.output, &depth)
    }

    pub fn eval(&self, x: &[bool]) -> Result<bool, CircuitError> {
        if x.len() != self.inputs.len() {
            return Err(CircuitError::InputLength {
                expected: self.inputs.len(),
                found: x.len(),
            });
        }
        let mut values = Vec::with_capacity(self.gates.len());
        let read = |w: Wire, values: &[bool]| match w {
            Wire::Input(i) => x[i],
            Wire::Gate(g) => values[g],
        };
        for gate in &self.gates {
            let a = read(gate.operands[0], &values);
            let b = gate.operands.get(1).is_some_and(|w| read(*w, &values));
            values.push(gate.op.apply(a, b));
        }
        Ok(read(self.output, &values))
    }

    /// Full truth table, index `k` holding the output on input bits of `k`
    /// (input 1 is the most significant bit).
    pub fn truth_table(&self) -> Vec<bool> {
        all_inputs(self.input_count())
            .map(|x| self.eval(&x).expect("arity matches"))
            .collect()
    }

    /// Depth-first rewrite into canonical text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for name in &self.inputs {
            out.push_str("input ");
            out.push_str(name);
            out.push('\n');
        }
        for gate in &self.gates {
            out.push_str("gate ");
            out.push_str(&gate.name);
            out.push(' ');
            out.push_str(gate.op.name());
            for w in &gate.operands {
                out.push(' ');
                out.push_str(self.wire_name(*w));
            }
            out.push('\n');
        }
        out.push_str("output ");
        out.push_str(self.wire_name(self.output));
        out.push('\n');
        out
    }

    pub fn wire_name(&self, w: Wire) -> &str {
        match w {
            Wire::Input(i) => &self.inputs[i],
            Wire::Gate(g) => &self.gates[g].name,
        }
    }

    /// Fix some inputs to constants and propagate. The remaining inputs keep
    /// their relative order. When the output folds to a constant, it is
    /// realised as `x AND NOT x` (or its negation) over the first free
    /// input; at least one input must stay free.
    pub fn restrict(&self, fixed: &[(usize, bool)]) -> Result<Circuit, CircuitError> {
        let mut assignment: Vec<Option<bool>> = vec![None; self.input_count()];
        for &(pos, bit) in fixed {
            if pos >= self.input_count() {
                return Err(CircuitError::InputLength {
                    expected: self.input_count(),
                    found: pos + 1,
                });
            }
            assignment[pos] = Some(bit);
        }
        let free: Vec<usize> = (0..self.input_count()).filter(|&i| assignment[i].is_none()).collect();
        if free.is_empty() {
            return Err(CircuitError::Family("restriction leaves no free input".into()));
        }
        let mut builder = Folder::new(free.iter().map(|&i| self.inputs[i].clone()).collect());
        let mut renumber = vec![usize::MAX; self.input_count()];
        for (new, &old) in free.iter().enumerate() {
            renumber[old] = new;
        }
        let mut gate_values: Vec<Folded> = Vec::with_capacity(self.gates.len());
        let lookup = |w: Wire, gate_values: &[Folded]| match w {
            Wire::Input(i) => match assignment[i] {
                Some(b) => Folded::Const(b),
                None => Folded::Wire(Wire::Input(renumber[i])),
            },
            Wire::Gate(g) => gate_values[g],
        };
        for gate in &self.gates {
            let a = lookup(gate.operands[0], &gate_values);
            let b = gate.operands.get(1).map(|w| lookup(*w, &gate_values));
            gate_values.push(builder.apply(gate.op, a, b));
        }
        let out = lookup(self.output, &gate_values);
        Ok(builder.finish(out))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Folded {
    Const(bool),
    Wire(Wire),
}

/// Incremental circuit builder with constant folding and structural hashing.
pub(crate) struct Folder {
    inputs: Vec<String>,
    gates: Vec<Gate>,
    seen: HashMap<(GateOp, Vec<Wire>), Wire>,
}

impl Folder {
    pub(crate) fn new(inputs: Vec<String>) -> Self {
        Self {
            inputs,
            gates: Vec::new(),
            seen: HashMap::new(),
        }
    }

    pub(crate) fn gate(&mut self, op: GateOp, operands: Vec<Wire>) -> Wire {
        if let Some(w) = self.seen.get(&(op, operands.clone())) {
            return *w;
        }
        let w = Wire::Gate(self.gates.len());
        self.gates.push(Gate {
            name: format!("g{}", self.gates.len() + 1),
            op,
            operands: operands.clone(),
        });
        self.seen.insert((op, operands), w);
        w
    }

    fn apply(&mut self, op: GateOp, a: Folded, b: Option<Folded>) -> Folded {
        use Folded::*;
        match (op, a, b) {
            (GateOp::Not, Const(x), _) => Const(!x),
            (GateOp::Not, Wire(w), _) => Wire(self.gate(GateOp::Not, vec![w])),
            (_, Const(x), Some(Const(y))) => Const(op.apply(x, y)),
            (_, Const(c), Some(Wire(w))) | (_, Wire(w), Some(Const(c))) => match (op, c) {
                (GateOp::And, false) => Const(false),
                (GateOp::And, true) => Wire(w),
                (GateOp::Or, true) => Const(true),
                (GateOp::Or, false) => Wire(w),
                (GateOp::Xor, false) => Wire(w),
                (GateOp::Nand, false) => Const(true),
                (GateOp::Xor, true) | (GateOp::Nand, true) => Wire(self.gate(GateOp::Not, vec![w])),
                (GateOp::Not, _) => unreachable!(),
            },
            (_, Wire(x), Some(Wire(y))) => Wire(self.gate(op, vec![x, y])),
            (_, _, None) => unreachable!("binary gate with one operand"),
        }
    }

    fn finish(mut self, out: Folded) -> Circuit {
        let output = match out {
            Folded::Wire(w) => w,
            Folded::Const(value) => {
                let x = Wire::Input(0);
                let not_x = self.gate(GateOp::Not, vec![x]);
                let op = if value { GateOp::Nand } else { GateOp::And };
                self.gate(op, vec![x, not_x])
            }
        };
        Circuit::new(self.inputs, self.gates, output).expect("folder output is well formed")
    }

    /// Copy the gates of `c` with its inputs bound to `inputs`.
    pub(crate) fn inline(&mut self, c: &Circuit, inputs: &[Wire]) -> Wire {
        let mut gate_wires = Vec::with_capacity(c.gates.len());
        let map = |w: Wire, gate_wires: &[Wire]| match w {
            Wire::Input(i) => inputs[i],
            Wire::Gate(g) => gate_wires[g],
        };
        for gate in &c.gates {
            let operands = gate.operands.iter().map(|w| map(*w, &gate_wires)).collect();
            let w = self.gate(gate.op, operands);
            gate_wires.push(w);
        }
        map(c.output, &gate_wires)
    }

    pub(crate) fn finish_wire(self, output: Wire) -> Circuit {
        Circuit::new(self.inputs, self.gates, output).expect("builder output is well formed")
    }
}

/// Iterate over `{0,1}^len` in counting order, first bit most significant.
pub fn all_inputs(len: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u64 << len).map(move |k| bits_of(k, len))
}

pub fn bits_of(k: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| (k >> (len - 1 - i)) & 1 == 1).collect()
}

pub fn parse_bits(text: &str) -> Result<Vec<bool>, CircuitError> {
    text.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => Err(CircuitError::BadBits(text.to_string())),
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

enum Decl<'a> {
    Input(&'a str),
    Gate {
        name: &'a str,
        op: GateOp,
        operands: Vec<(&'a str, usize)>,
    },
    Output(&'a str, usize),
}

fn column_of(line: &str, token: &str) -> usize {
    token.as_ptr() as usize - line.as_ptr() as usize + 1
}

pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut decls: Vec<(usize, Decl<'_>)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some(&keyword) = tokens.first() else {
            continue;
        };
        let syntax = |token: &str, message: String| CircuitError::Syntax {
            line: line_no,
            column: column_of(raw, token),
            message,
        };
        for tok in &tokens[1..] {
            if !valid_name(tok) && GateOp::from_str(tok).is_err() {
                return Err(syntax(tok, format!("invalid name `{tok}`")));
            }
        }
        let decl = match keyword {
            "input" => match tokens.as_slice() {
                [_, name] => Decl::Input(name),
                _ => return Err(syntax(keyword, "expected `input <name>`".into())),
            },
            "output" => match tokens.as_slice() {
                [_, name] => Decl::Output(name, column_of(raw, name)),
                _ => return Err(syntax(keyword, "expected `output <name>`".into())),
            },
            "gate" => {
                if tokens.len() < 3 {
                    return Err(syntax(keyword, "expected `gate <name> <OP> <wire> [<wire>]`".into()));
                }
                let op = GateOp::from_str(tokens[2])
                    .map_err(|_| syntax(tokens[2], format!("unknown gate `{}`", tokens[2])))?;
                let operands: Vec<(&str, usize)> = tokens[3..].iter().map(|t| (*t, column_of(raw, t))).collect();
                if operands.len() != op.arity() {
                    return Err(CircuitError::Arity {
                        line: line_no,
                        op,
                        expected: op.arity(),
                        found: operands.len(),
                    });
                }
                Decl::Gate {
                    name: tokens[1],
                    op,
                    operands,
                }
            }
            other => return Err(syntax(other, format!("unknown declaration `{other}`"))),
        };
        decls.push((line_no, decl));
    }

    // name -> (line, input index or gate declaration index)
    let mut inputs: Vec<String> = Vec::new();
    let mut names: HashMap<&str, (usize, Option<usize>)> = HashMap::new();
    let mut gate_decls: Vec<(usize, &str, GateOp, Vec<(&str, usize)>)> = Vec::new();
    let mut output: Option<(usize, &str)> = None;
    for (line, decl) in &decls {
        let declared = match decl {
            Decl::Input(name) | Decl::Gate { name, .. } => Some(*name),
            Decl::Output(..) => None,
        };
        if let Some(name) = declared {
            let slot = match decl {
                Decl::Gate { .. } => Some(gate_decls.len()),
                _ => None,
            };
            if names.insert(name, (*line, slot)).is_some() {
                return Err(CircuitError::Duplicate {
                    line: *line,
                    name: name.to_string(),
                });
            }
        }
        match decl {
            Decl::Input(name) => {
                inputs.push(name.to_string());
            }
            Decl::Gate { name, op, operands } => {
                gate_decls.push((*line, name, *op, operands.clone()));
            }
            Decl::Output(name, column) => {
                if output.is_some() {
                    return Err(CircuitError::Syntax {
                        line: *line,
                        column: *column,
                        message: "multiple outputs are not supported".into(),
                    });
                }
                output = Some((*line, name));
            }
        }
    }
    if inputs.is_empty() {
        return Err(CircuitError::NoInputs);
    }
    let (out_line, out_name) = output.ok_or(CircuitError::MissingOutput)?;

    let resolve = |name: &str, line: usize| -> Result<Result<usize, usize>, CircuitError> {
        match names.get(name) {
            None => Err(CircuitError::UndefinedWire {
                line,
                name: name.to_string(),
            }),
            Some((_, Some(gate))) => Ok(Err(*gate)),
            Some((_, None)) => Ok(Ok(inputs.iter().position(|n| n == name).expect("declared input"))),
        }
    };
    for (line, _, _, operands) in &gate_decls {
        for (name, _) in operands {
            let _ = resolve(name, *line)?;
        }
    }
    let out_ref = resolve(out_name, out_line)?;

    // Topological order, keeping declaration order where possible.
    const UNVISITED: u8 = 0;
    const ACTIVE: u8 = 1;
    const DONE: u8 = 2;
    let mut state = vec![UNVISITED; gate_decls.len()];
    let mut order: Vec<usize> = Vec::with_capacity(gate_decls.len());
    for root in 0..gate_decls.len() {
        if state[root] != UNVISITED {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = ACTIVE;
        while let Some((node, next)) = stack.pop() {
            let (line, _, _, operands) = &gate_decls[node];
            if let Some((name, _)) = operands.get(next) {
                stack.push((node, next + 1));
                if let Err(dep) = resolve(name, *line)? {
                    match state[dep] {
                        UNVISITED => {
                            state[dep] = ACTIVE;
                            stack.push((dep, 0));
                        }
                        ACTIVE => {
                            return Err(CircuitError::Cycle {
                                line: gate_decls[dep].0,
                                name: gate_decls[dep].1.to_string(),
                            })
                        }
                        _ => {}
                    }
                }
            } else {
                state[node] = DONE;
                order.push(node);
            }
        }
    }
    let mut position = vec![0usize; gate_decls.len()];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }
    let to_wire = |r: Result<usize, usize>| match r {
        Ok(i) => Wire::Input(i),
        Err(g) => Wire::Gate(position[g]),
    };
    let mut gates = Vec::with_capacity(order.len());
    for &idx in &order {
        let (line, name, op, operands) = &gate_decls[idx];
        let operands = operands
            .iter()
            .map(|(n, _)| resolve(n, *line).map(to_wire))
            .collect::<Result<Vec<_>, _>>()?;
        gates.push(Gate {
            name: name.to_string(),
            op: *op,
            operands,
        });
    }
    let _ = DONE;
    Circuit::new(inputs, gates, to_wire(out_ref))
}

impl FromStr for Circuit {
    type Err = CircuitError;

    fn from_str(s: &str) -> Result<Self, CircuitError> {
        parse_circuit(s)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Random circuit with `gates` gates over `inputs` inputs.
/// `inputs` must be at least 1.
pub fn random_circuit<R: Rng + ?Sized>(rng: &mut R, inputs: usize, gates: usize) -> Circuit {
    let mut ops = Vec::new();
    for g in 0..gates {
        let op = GateOp::ALL[rng.gen_range(0..5)];
        let pick = |rng: &mut R| {
            let k = rng.gen_range(0..inputs + g);
            if k < inputs {
                Wire::Input(k)
            } else {
                Wire::Gate(k - inputs)
            }
        };
        let operands = (0..op.arity()).map(|_| pick(rng)).collect();
        ops.push((op, operands));
    }
    let output = if gates == 0 {
        Wire::Input(0)
    } else {
        Wire::Gate(gates - 1)
    };
    Circuit::from_ops(inputs, &ops, output).expect("operands precede their gate")
}

/// Balanced tree over `2^depth` inputs, AND and XOR alternating by level.
/// Compiles to a branching program of length exactly `4^depth`.
pub fn balanced_tree(depth: usize) -> Circuit {
    let mut ops: Vec<(GateOp, Vec<Wire>)> = Vec::new();
    let mut layer: Vec<Wire> = (0..1usize << depth).map(Wire::Input).collect();
    for level in 0..depth {
        let op = if level % 2 == 0 { GateOp::And } else { GateOp::Xor };
        layer = layer
            .chunks(2)
            .map(|pair| {
                ops.push((op, pair.to_vec()));
                Wire::Gate(ops.len() - 1)
            })
            .collect();
    }
    Circuit::from_ops(1 << depth, &ops, layer[0]).expect("well formed")
}
