//! A toy universal circuit: a layered multiplexer interpreter for the family
//! of `g`-gate circuits over `l` inputs.
//!
//! Family `(g, l)`: exactly `g` gates, each one of AND, NAND, XOR, OR, whose
//! operands are inputs or earlier gates; the output is the last gate.
//!
//! Encoding, slot by slot: a 2-bit opcode (`00` AND, `01` NAND, `10` XOR,
//! `11` OR) followed by two operand selectors of `ceil(log2(l + k))` bits
//! each for slot `k` (0-based), most significant bit first. Selector value
//! `j < l` names input `j`, `l + i` names slot `i`. Total length is
//! `sum_k (2 + 2 * ceil(log2(l + k)))`; for `(2, 2)` that is 10 bits.

use super::{bits_of, Circuit, CircuitError, Folder, Gate, GateOp, Wire};

pub const MAX_GATES: usize = 16;
pub const MAX_INPUTS: usize = 8;

const OPCODES: [GateOp; 4] = [GateOp::And, GateOp::Nand, GateOp::Xor, GateOp::Or];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FamilyParams {
    pub gates: usize,
    pub inputs: usize,
}

impl FamilyParams {
    pub fn new(gates: usize, inputs: usize) -> Result<Self, CircuitError> {
        if !(1..=MAX_GATES).contains(&gates) || !(1..=MAX_INPUTS).contains(&inputs) {
            return Err(CircuitError::Family(format!(
                "family (g={gates}, l={inputs}) exceeds the supported bound g <= {MAX_GATES}, l <= {MAX_INPUTS}"
            )));
        }
        Ok(Self { gates, inputs })
    }

    fn selector_bits(self, slot: usize) -> usize {
        let sources = self.inputs + slot;
        (usize::BITS - (sources - 1).leading_zeros()) as usize
    }

    /// Number of bits in a circuit description.
    pub fn encoding_len(self) -> usize {
        (0..self.gates).map(|k| 2 + 2 * self.selector_bits(k)).sum()
    }

    /// Every member of the family, in encoding order.
    pub fn members(self) -> impl Iterator<Item = Circuit> {
        let len = self.encoding_len();
        (0..1u64 << len).filter_map(move |k| {
            let enc = CircuitEncoding {
                bits: bits_of(k, len),
                params: self,
            };
            decode_circuit(&enc).ok()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CircuitEncoding {
    pub bits: Vec<bool>,
    pub params: FamilyParams,
}

fn push_bits(out: &mut Vec<bool>, value: usize, width: usize) {
    out.extend((0..width).rev().map(|i| (value >> i) & 1 == 1));
}

fn read_bits(bits: &[bool]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | usize::from(b))
}

fn source_index(w: Wire, inputs: usize) -> usize {
    match w {
        Wire::Input(i) => i,
        Wire::Gate(g) => inputs + g,
    }
}

pub fn encode_circuit(c: &Circuit, params: FamilyParams) -> Result<CircuitEncoding, CircuitError> {
    let misfit = |why: &str| {
        CircuitError::Family(format!(
            "circuit is not in family (g={}, l={}): {why}",
            params.gates, params.inputs
        ))
    };
    if c.input_count() != params.inputs {
        return Err(misfit("input count differs"));
    }
    if c.size() != params.gates {
        return Err(misfit("gate count differs"));
    }
    if c.output() != Wire::Gate(params.gates - 1) {
        return Err(misfit("output is not the last gate"));
    }
    let mut bits = Vec::with_capacity(params.encoding_len());
    for (k, gate) in c.gates().iter().enumerate() {
        let opcode = OPCODES
            .iter()
            .position(|op| *op == gate.op)
            .ok_or_else(|| misfit("NOT gates are not family members; see fit_to_family"))?;
        push_bits(&mut bits, opcode, 2);
        for w in &gate.operands {
            push_bits(&mut bits, source_index(*w, params.inputs), params.selector_bits(k));
        }
    }
    Ok(CircuitEncoding { bits, params })
}

pub fn decode_circuit(enc: &CircuitEncoding) -> Result<Circuit, CircuitError> {
    let params = enc.params;
    if enc.bits.len() != params.encoding_len() {
        return Err(CircuitError::InputLength {
            expected: params.encoding_len(),
            found: enc.bits.len(),
        });
    }
    let mut cursor = 0;
    let mut take = |width: usize| {
        let v = read_bits(&enc.bits[cursor..cursor + width]);
        cursor += width;
        v
    };
    let mut ops = Vec::with_capacity(params.gates);
    for k in 0..params.gates {
        let op = OPCODES[take(2)];
        let mut operands = Vec::with_capacity(2);
        for _ in 0..2 {
            let idx = take(params.selector_bits(k));
            if idx >= params.inputs + k {
                return Err(CircuitError::Family(format!("slot {k} selects missing source {idx}")));
            }
            operands.push(if idx < params.inputs {
                Wire::Input(idx)
            } else {
                Wire::Gate(idx - params.inputs)
            });
        }
        ops.push((op, operands));
    }
    Circuit::from_ops(params.inputs, &ops, Wire::Gate(params.gates - 1))
}

/// Rewrite a small circuit into an equivalent family member: dead gates are
/// dropped, `NOT x` becomes `NAND x x`, and `AND out out` slots pad the gate
/// count.
pub fn fit_to_family(c: &Circuit, params: FamilyParams) -> Result<Circuit, CircuitError> {
    if c.input_count() != params.inputs {
        return Err(CircuitError::Family(format!(
            "circuit has {} inputs, family expects {}",
            c.input_count(),
            params.inputs
        )));
    }
    let mut live = vec![false; c.size()];
    if let Wire::Gate(g) = c.output() {
        live[g] = true;
    }
    for g in (0..c.size()).rev() {
        if live[g] {
            for w in &c.gates()[g].operands {
                if let Wire::Gate(h) = w {
                    live[*h] = true;
                }
            }
        }
    }
    let mut renumber = vec![usize::MAX; c.size()];
    let mut gates: Vec<Gate> = Vec::new();
    let map = |w: Wire, renumber: &[usize]| match w {
        Wire::Input(i) => Wire::Input(i),
        Wire::Gate(g) => Wire::Gate(renumber[g]),
    };
    for (g, gate) in c.gates().iter().enumerate() {
        if !live[g] {
            continue;
        }
        renumber[g] = gates.len();
        let a = map(gate.operands[0], &renumber);
        let (op, operands) = match gate.op {
            GateOp::Not => (GateOp::Nand, vec![a, a]),
            op => (op, vec![a, map(gate.operands[1], &renumber)]),
        };
        gates.push(Gate {
            name: format!("g{}", gates.len() + 1),
            op,
            operands,
        });
    }
    let mut output = map(c.output(), &renumber);
    if gates.len() > params.gates {
        return Err(CircuitError::Family(format!(
            "circuit needs {} gates, family allows {}",
            gates.len(),
            params.gates
        )));
    }
    while gates.len() < params.gates {
        gates.push(Gate {
            name: format!("g{}", gates.len() + 1),
            op: GateOp::And,
            operands: vec![output, output],
        });
        output = Wire::Gate(gates.len() - 1);
    }
    // live gates are all ancestors of the output, so it is the last one
    debug_assert_eq!(output, Wire::Gate(params.gates - 1));
    Circuit::new(c.input_names().to_vec(), gates, output)
}

fn mux(b: &mut Folder, select: Wire, if_zero: Wire, if_one: Wire) -> Wire {
    if if_zero == if_one {
        return if_zero;
    }
    let diff = b.gate(GateOp::Xor, vec![if_zero, if_one]);
    let pick = b.gate(GateOp::And, vec![select, diff]);
    b.gate(GateOp::Xor, vec![if_zero, pick])
}

/// Select `sources[index]` where `index` is given MSB-first by `select`;
/// indices past the end resolve to the last source.
fn select_source(b: &mut Folder, select: &[Wire], sources: &[Wire]) -> Wire {
    let Some((&top, rest)) = select.split_first() else {
        return sources[0];
    };
    let half = 1usize << rest.len();
    let low = select_source(b, rest, &sources[..half.min(sources.len())]);
    let high = if sources.len() > half {
        select_source(b, rest, &sources[half..])
    } else {
        *sources.last().expect("nonempty sources")
    };
    mux(b, top, low, high)
}

/// Build `U` with inputs `e1..eL` (the encoding) followed by `m1..ml`, so
/// that `U(encode(C) || m) = C(m)` for every family member `C`.
///
/// The generic layout is a multiplexer interpreter. When `U` has at most
/// three inputs it is replaced by a formula of minimal branching-program
/// length for the same truth table.
pub fn build_universal(params: FamilyParams) -> Circuit {
    let u = build_mux_universal(params);
    if u.input_count() <= SYNTH_MAX_VARS {
        synthesize(u.input_names().to_vec(), &u.truth_table())
    } else {
        u
    }
}

const SYNTH_MAX_VARS: usize = 3;

/// Shortest-BP formula for a circuit with at most three inputs.
pub fn shortest_formula(c: &Circuit) -> Option<Circuit> {
    (c.input_count() <= SYNTH_MAX_VARS).then(|| synthesize(c.input_names().to_vec(), &c.truth_table()))
}

#[derive(Debug, Clone, Copy)]
enum Recipe {
    Leaf(usize),
    Not(usize),
    Gate(GateOp, usize, usize),
}

/// Formula for `table` over `names.len() <= 3` inputs minimising the
/// Barrington length (inputs cost 1, NOT is free, AND/XOR cost twice the sum).
fn synthesize(names: Vec<String>, table: &[bool]) -> Circuit {
    let vars = names.len();
    let rows = 1usize << vars;
    let funcs = 1usize << rows;
    let mask = funcs - 1;
    let var_table = |i: usize| {
        (0..rows).fold(0usize, |t, k| {
            if (k >> (vars - 1 - i)) & 1 == 1 {
                t | (1 << k)
            } else {
                t
            }
        })
    };
    let mut cost = vec![usize::MAX; funcs];
    let mut recipe = vec![Recipe::Leaf(0); funcs];
    for i in 0..vars {
        let t = var_table(i);
        cost[t] = 1;
        recipe[t] = Recipe::Leaf(i);
    }
    let mut changed = true;
    while changed {
        changed = false;
        for t in 0..funcs {
            let n = !t & mask;
            if cost[t] < cost[n] {
                cost[n] = cost[t];
                recipe[n] = Recipe::Not(t);
                changed = true;
            }
        }
        for a in 0..funcs {
            if cost[a] == usize::MAX {
                continue;
            }
            for b in 0..funcs {
                if cost[b] == usize::MAX {
                    continue;
                }
                let c = 2 * (cost[a] + cost[b]);
                for (op, t) in [(GateOp::And, a & b), (GateOp::Xor, a ^ b)] {
                    if c < cost[t] {
                        cost[t] = c;
                        recipe[t] = Recipe::Gate(op, a, b);
                        changed = true;
                    }
                }
            }
        }
    }
    let target = table
        .iter()
        .enumerate()
        .fold(0usize, |t, (k, &bit)| if bit { t | (1 << k) } else { t });
    fn emit(t: usize, recipe: &[Recipe], b: &mut Folder, memo: &mut Vec<Option<Wire>>) -> Wire {
        if let Some(w) = memo[t] {
            return w;
        }
        let w = match recipe[t] {
            Recipe::Leaf(i) => Wire::Input(i),
            Recipe::Not(s) => {
                let inner = emit(s, recipe, b, memo);
                b.gate(GateOp::Not, vec![inner])
            }
            Recipe::Gate(op, x, y) => {
                let x = emit(x, recipe, b, memo);
                let y = emit(y, recipe, b, memo);
                b.gate(op, vec![x, y])
            }
        };
        memo[t] = Some(w);
        w
    }
    let mut b = Folder::new(names);
    let mut memo = vec![None; funcs];
    let out = emit(target, &recipe, &mut b, &mut memo);
    b.finish_wire(out)
}

fn build_mux_universal(params: FamilyParams) -> Circuit {
    let len = params.encoding_len();
    let names = (1..=len)
        .map(|i| format!("e{i}"))
        .chain((1..=params.inputs).map(|i| format!("m{i}")))
        .collect();
    let mut b = Folder::new(names);
    let enc = |i: usize| Wire::Input(i);
    let mut sources: Vec<Wire> = (0..params.inputs).map(|i| Wire::Input(len + i)).collect();
    let mut cursor = 0;
    for k in 0..params.gates {
        let (o1, o0) = (enc(cursor), enc(cursor + 1));
        cursor += 2;
        let width = params.selector_bits(k);
        let sel_a: Vec<Wire> = (cursor..cursor + width).map(enc).collect();
        cursor += width;
        let sel_b: Vec<Wire> = (cursor..cursor + width).map(enc).collect();
        cursor += width;
        let a = select_source(&mut b, &sel_a, &sources);
        let c = select_source(&mut b, &sel_b, &sources);
        let t_and = b.gate(GateOp::And, vec![a, c]);
        let t_xor = b.gate(GateOp::Xor, vec![a, c]);
        let base = mux(&mut b, o1, t_and, t_xor);
        // correction term: 1 when o1 = 0, t_and when o1 = 1
        let not_and = b.gate(GateOp::Not, vec![t_and]);
        let corr = b.gate(GateOp::Nand, vec![o1, not_and]);
        let flip = b.gate(GateOp::And, vec![o0, corr]);
        let out = b.gate(GateOp::Xor, vec![base, flip]);
        sources.push(out);
    }
    b.finish_wire(*sources.last().expect("at least one slot"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{all_inputs, parse_circuit};

    fn p22() -> FamilyParams {
        FamilyParams::new(2, 2).unwrap()
    }

    #[test]
    fn encoding_length_formula() {
        // slot 0: 2 + 2*1, slot 1: 2 + 2*2
        assert_eq!(p22().encoding_len(), 10);
        assert_eq!(FamilyParams::new(1, 1).unwrap().encoding_len(), 2);
        assert_eq!(FamilyParams::new(3, 2).unwrap().encoding_len(), 4 + 6 + 6);
        assert!(FamilyParams::new(17, 2).is_err());
        assert!(FamilyParams::new(2, 9).is_err());
        assert!(FamilyParams::new(0, 1).is_err());
    }

    #[test]
    fn family_size_and_injectivity() {
        let members: Vec<Circuit> = p22().members().collect();
        // slot 0: 4 ops * 2 * 2, slot 1: 4 ops * 3 * 3
        assert_eq!(members.len(), 16 * 36);
        let mut seen = std::collections::HashSet::new();
        for c in &members {
            let enc = encode_circuit(c, p22()).unwrap();
            assert_eq!(enc.bits.len(), 10);
            assert!(seen.insert(enc.bits.clone()));
            assert_eq!(&decode_circuit(&enc).unwrap(), c);
        }
    }

    #[test]
    fn universal_agrees_with_every_family_member() {
        for params in [
            p22(),
            FamilyParams::new(1, 1).unwrap(),
            FamilyParams::new(1, 2).unwrap(),
            FamilyParams::new(2, 1).unwrap(),
        ] {
            let u = build_universal(params);
            assert_eq!(u.input_count(), params.encoding_len() + params.inputs);
            for c in params.members() {
                let enc = encode_circuit(&c, params).unwrap();
                for m in all_inputs(params.inputs) {
                    let mut x = enc.bits.clone();
                    x.extend(&m);
                    assert_eq!(u.eval(&x).unwrap(), c.eval(&m).unwrap(), "{c}");
                }
            }
        }
    }

    #[test]
    fn tiny_family_uses_short_formula() {
        let params = FamilyParams::new(1, 1).unwrap();
        let u = build_universal(params);
        assert_eq!(u.truth_table(), build_mux_universal(params).truth_table());
        assert_eq!(crate::barrington::compiled_length(&u), 28);
    }

    #[test]
    fn universal_xor_and_constant_zero() {
        let u = build_universal(p22());
        let xor = fit_to_family(
            &parse_circuit("input x1\ninput x2\ngate g1 XOR x1 x2\noutput g1").unwrap(),
            p22(),
        )
        .unwrap();
        let mut x = encode_circuit(&xor, p22()).unwrap().bits;
        x.extend([false, true]);
        assert!(u.eval(&x).unwrap());

        let zero = parse_circuit("input x1\ninput x2\ngate n NOT x1\ngate z AND x1 n\noutput z").unwrap();
        let zero = fit_to_family(&zero, p22()).unwrap();
        let enc = encode_circuit(&zero, p22()).unwrap();
        for m in all_inputs(2) {
            let mut x = enc.bits.clone();
            x.extend(&m);
            assert!(!u.eval(&x).unwrap());
        }
    }

    #[test]
    fn fitting_preserves_function() {
        let c = parse_circuit("input a\ninput b\ngate dead OR a b\ngate n NOT a\noutput n").unwrap();
        let f = fit_to_family(&c, p22()).unwrap();
        assert_eq!(f.size(), 2);
        assert_eq!(f.truth_table(), c.truth_table());
        let pass = parse_circuit("input a\ninput b\noutput b").unwrap();
        assert_eq!(fit_to_family(&pass, p22()).unwrap().truth_table(), pass.truth_table());
        let big =
            parse_circuit("input a\ninput b\ngate g1 OR a b\ngate g2 AND g1 a\ngate g3 XOR g2 b\noutput g3").unwrap();
        assert!(fit_to_family(&big, p22()).is_err());
    }

    #[test]
    fn encode_rejects_non_members() {
        let not = parse_circuit("input a\ninput b\ngate g1 NOT a\ngate g2 AND g1 b\noutput g2").unwrap();
        assert!(encode_circuit(&not, p22()).is_err());
    }
}
