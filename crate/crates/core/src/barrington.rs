//! Width-`w` permutation branching programs and Barrington compilation of
//! circuits into width-5 programs.
//!
//! Permutations act on `0..w`. A permutation `p` is stored as its image list
//! and stands for the 0/1 matrix with a one at `(i, p[i])`. With that
//! convention the matrix product `A * B` is the permutation "apply `A`, then
//! `B`", which is what [`Perm::then`] computes.

use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

use crate::circuit::{Circuit, GateOp, Wire};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BpError {
    #[error("expected {expected} input bits, got {found}")]
    InputLength { expected: usize, found: usize },
    #[error("matrix is not a permutation matrix: {0}")]
    NotPermutation(String),
    #[error("width mismatch: {0}")]
    Width(String),
    #[error("accept matrices must differ")]
    SameAccept,
    #[error("step {step} reads input {inp}, program has {ell} inputs")]
    InputIndex { step: usize, inp: usize, ell: usize },
    #[error("cannot pad a length-{len} program down to {target}")]
    PadTooShort { len: usize, target: usize },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm(Vec<u8>);

impl Perm {
    pub fn identity(w: usize) -> Self {
        Perm((0..w as u8).collect())
    }

    pub fn from_images(images: Vec<u8>) -> Result<Self, BpError> {
        let mut seen = vec![false; images.len()];
        for &v in &images {
            if (v as usize) >= images.len() || std::mem::replace(&mut seen[v as usize], true) {
                return Err(BpError::NotPermutation(format!("{images:?}")));
            }
        }
        Ok(Perm(images))
    }

    /// Read a 0/1 matrix given as rows.
    pub fn from_matrix(rows: &[Vec<u8>]) -> Result<Self, BpError> {
        let w = rows.len();
        let mut images = Vec::with_capacity(w);
        for row in rows {
            if row.len() != w || row.iter().any(|&b| b > 1) || row.iter().filter(|&&b| b == 1).count() != 1 {
                return Err(BpError::NotPermutation(format!("row {row:?}")));
            }
            images.push(row.iter().position(|&b| b == 1).unwrap() as u8);
        }
        Self::from_images(images)
    }

    /// Cycle notation on `1..=w`, e.g. `cycle(5, &[1, 2, 3, 4, 5])`.
    pub fn cycle(w: usize, points: &[u8]) -> Self {
        let mut images: Vec<u8> = (0..w as u8).collect();
        for (i, &a) in points.iter().enumerate() {
            let b = points[(i + 1) % points.len()];
            images[a as usize - 1] = b - 1;
        }
        Perm(images)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn images(&self) -> &[u8] {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| i == v as usize)
    }

    /// `self` followed by `next`; the matrix product `self * next`.
    pub fn then(&self, next: &Perm) -> Perm {
        Perm(self.0.iter().map(|&i| next.0[i as usize]).collect())
    }

    pub fn inverse(&self) -> Perm {
        let mut out = vec![0u8; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            out[v as usize] = i as u8;
        }
        Perm(out)
    }

    pub fn is_even(&self) -> bool {
        let mut seen = vec![false; self.0.len()];
        let mut transpositions = 0;
        for start in 0..self.0.len() {
            let mut len = 0;
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                i = self.0[i] as usize;
                len += 1;
            }
            if len > 0 {
                transpositions += len - 1;
            }
        }
        transpositions % 2 == 0
    }

    /// Matrix entry at `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> u8 {
        u8::from(self.0[row] as usize == col)
    }

    pub fn to_matrix(&self) -> Vec<Vec<u8>> {
        let w = self.width();
        (0..w).map(|r| (0..w).map(|c| self.entry(r, c)).collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    /// Zero-based input index read by this step.
    pub inp: usize,
    pub on_zero: Perm,
    pub on_one: Perm,
}

impl Step {
    pub fn select(&self, bit: bool) -> &Perm {
        if bit {
            &self.on_one
        } else {
            &self.on_zero
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchingProgram {
    width: usize,
    input_count: usize,
    steps: Vec<Step>,
    accept_zero: Perm,
    accept_one: Perm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpOutput {
    Zero,
    One,
    Undef,
}

impl BpOutput {
    pub fn bit(self) -> Option<bool> {
        match self {
            BpOutput::Zero => Some(false),
            BpOutput::One => Some(true),
            BpOutput::Undef => None,
        }
    }
}

impl fmt::Display for BpOutput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BpOutput::Zero => "0",
            BpOutput::One => "1",
            BpOutput::Undef => "undef",
        })
    }
}

impl BranchingProgram {
    pub fn new(input_count: usize, steps: Vec<Step>, accept_zero: Perm, accept_one: Perm) -> Result<Self, BpError> {
        let width = accept_zero.width();
        if accept_one.width() != width {
            return Err(BpError::Width("accept matrices".into()));
        }
        if accept_zero == accept_one {
            return Err(BpError::SameAccept);
        }
        for (i, step) in steps.iter().enumerate() {
            if step.inp >= input_count {
                return Err(BpError::InputIndex {
                    step: i + 1,
                    inp: step.inp + 1,
                    ell: input_count,
                });
            }
            if step.on_zero.width() != width || step.on_one.width() != width {
                return Err(BpError::Width(format!("step {}", i + 1)));
            }
        }
        Ok(Self {
            width,
            input_count,
            steps,
            accept_zero,
            accept_one,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn accept_zero(&self) -> &Perm {
        &self.accept_zero
    }

    pub fn accept_one(&self) -> &Perm {
        &self.accept_one
    }

    /// Zero-based `inp` sequence.
    pub fn inp_sequence(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.inp).collect()
    }

    pub fn product(&self, x: &[bool]) -> Result<Perm, BpError> {
        if x.len() != self.input_count {
            return Err(BpError::InputLength {
                expected: self.input_count,
                found: x.len(),
            });
        }
        Ok(self
            .steps
            .iter()
            .fold(Perm::identity(self.width), |acc, s| acc.then(s.select(x[s.inp]))))
    }

    pub fn to_text(&self) -> String {
        fn push(out: &mut String, p: &Perm) {
            for row in p.to_matrix() {
                let cells: Vec<String> = row.iter().map(u8::to_string).collect();
                out.push_str(&cells.join(" "));
                out.push('\n');
            }
        }
        let mut out = format!("BP v1 {} {} {}\n", self.width, self.steps.len(), self.input_count);
        push(&mut out, &self.accept_zero);
        push(&mut out, &self.accept_one);
        for step in &self.steps {
            // inp is written one-based
            out.push_str(&format!("{}\n", step.inp + 1));
            push(&mut out, &step.on_zero);
            push(&mut out, &step.on_one);
        }
        out
    }
}

pub fn eval_bp(bp: &BranchingProgram, x: &[bool]) -> Result<BpOutput, BpError> {
    let p = bp.product(x)?;
    Ok(if p == bp.accept_zero {
        BpOutput::Zero
    } else if p == bp.accept_one {
        BpOutput::One
    } else {
        BpOutput::Undef
    })
}

/// `I_j`, zero-based: entry `j` lists the steps reading input `j`.
pub fn input_sets(bp: &BranchingProgram) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); bp.input_count];
    for (i, step) in bp.steps.iter().enumerate() {
        sets[step.inp].push(i);
    }
    sets
}

/// Append identity steps reading input 1 until the program has length `target`.
pub fn pad_to(bp: &BranchingProgram, target: usize) -> Result<BranchingProgram, BpError> {
    if target < bp.len() {
        return Err(BpError::PadTooShort { len: bp.len(), target });
    }
    let mut out = bp.clone();
    let id = Perm::identity(bp.width);
    out.steps.resize(
        target,
        Step {
            inp: 0,
            on_zero: id.clone(),
            on_one: id,
        },
    );
    Ok(out)
}

/// The reference 5-cycle `(1 2 3 4 5)`.
pub fn sigma() -> Perm {
    Perm::cycle(5, &[1, 2, 3, 4, 5])
}

struct Witnesses {
    elements: Vec<Perm>,
    /// index of target -> (alpha, beta) with alpha beta alpha^-1 beta^-1 = target
    commutator: Vec<Option<(Perm, Perm)>>,
    /// index of target -> (c1, c2, c3, c4) with c1 c3 = c2 c4 = target and c1 c2 c3 c4 = I
    xor: Vec<Option<[Perm; 4]>>,
}

fn permutations(w: usize) -> Vec<Vec<u8>> {
    if w == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(w - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, (w - 1) as u8);
            out.push(p);
        }
    }
    out
}

fn witnesses() -> &'static Witnesses {
    static TABLE: OnceLock<Witnesses> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut elements: Vec<Perm> = permutations(5).into_iter().map(Perm).filter(Perm::is_even).collect();
        elements.sort();
        let nontrivial: Vec<&Perm> = elements.iter().filter(|p| !p.is_identity()).collect();
        let mut commutator = Vec::with_capacity(elements.len());
        let mut xor = Vec::with_capacity(elements.len());
        for g in &elements {
            if g.is_identity() {
                commutator.push(None);
                xor.push(None);
                continue;
            }
            let comm = nontrivial.iter().find_map(|a| {
                nontrivial.iter().find_map(|b| {
                    let c = a.then(b).then(&a.inverse()).then(&b.inverse());
                    (c == *g).then(|| ((*a).clone(), (*b).clone()))
                })
            });
            let quad = nontrivial.iter().find_map(|c1| {
                let c3 = c1.inverse().then(g);
                if c3.is_identity() {
                    return None;
                }
                nontrivial.iter().find_map(|c2| {
                    let c4 = c2.inverse().then(g);
                    if c4.is_identity() {
                        return None;
                    }
                    c1.then(c2)
                        .then(&c3)
                        .then(&c4)
                        .is_identity()
                        .then(|| [(*c1).clone(), (*c2).clone(), c3.clone(), c4])
                })
            });
            commutator.push(comm);
            xor.push(quad);
        }
        Witnesses {
            elements,
            commutator,
            xor,
        }
    })
}

fn slot(g: &Perm) -> usize {
    witnesses().elements.binary_search(g).expect("element of A5")
}

/// Width-5 steps whose product is `target` when `w` is 1 and the identity
/// when it is 0.
fn subprogram(c: &Circuit, w: Wire, target: &Perm) -> Vec<Step> {
    let gate = match w {
        Wire::Input(i) => {
            return vec![Step {
                inp: i,
                on_zero: Perm::identity(5),
                on_one: target.clone(),
            }]
        }
        Wire::Gate(g) => &c.gates()[g],
    };
    let a = gate.operands[0];
    let b = gate.operands.get(1).copied();
    match gate.op {
        GateOp::Not => negate(subprogram(c, a, &target.inverse()), target),
        GateOp::And => and_program(c, a, b.unwrap(), false, false, target),
        // a OR b = NOT (NOT a AND NOT b)
        GateOp::Or => negate(and_program(c, a, b.unwrap(), true, true, &target.inverse()), target),
        GateOp::Nand => negate(and_program(c, a, b.unwrap(), false, false, &target.inverse()), target),
        GateOp::Xor => {
            let [c1, c2, c3, c4] = witnesses().xor[slot(target)].clone().expect("xor witness");
            let mut steps = subprogram(c, a, &c1);
            steps.extend(subprogram(c, b.unwrap(), &c2));
            steps.extend(subprogram(c, a, &c3));
            steps.extend(subprogram(c, b.unwrap(), &c4));
            steps
        }
    }
}

/// Turn a program computing `f` w.r.t. `target^-1` into one computing
/// `NOT f` w.r.t. `target`.
fn negate(mut steps: Vec<Step>, target: &Perm) -> Vec<Step> {
    let last = steps.last_mut().expect("nonempty program");
    last.on_zero = last.on_zero.then(target);
    last.on_one = last.on_one.then(target);
    steps
}

fn literal(c: &Circuit, w: Wire, negated: bool, target: &Perm) -> Vec<Step> {
    if negated {
        negate(subprogram(c, w, &target.inverse()), target)
    } else {
        subprogram(c, w, target)
    }
}

fn and_program(c: &Circuit, a: Wire, b: Wire, neg_a: bool, neg_b: bool, target: &Perm) -> Vec<Step> {
    let (alpha, beta) = witnesses().commutator[slot(target)]
        .clone()
        .expect("commutator witness");
    let mut steps = literal(c, a, neg_a, &alpha);
    steps.extend(literal(c, b, neg_b, &beta));
    steps.extend(literal(c, a, neg_a, &alpha.inverse()));
    steps.extend(literal(c, b, neg_b, &beta.inverse()));
    steps
}

/// Length of `compile(c)`, computed without building the program.
/// Saturates at `u128::MAX`.
pub fn compiled_length(c: &Circuit) -> u128 {
    let mut len: Vec<u128> = Vec::with_capacity(c.size());
    let of = |w: Wire, len: &[u128]| match w {
        Wire::Input(_) => 1,
        Wire::Gate(g) => len[g],
    };
    for gate in c.gates() {
        let a = of(gate.operands[0], &len);
        len.push(match gate.operands.get(1) {
            None => a,
            Some(b) => a.saturating_add(of(*b, &len)).saturating_mul(2),
        });
    }
    of(c.output(), &len)
}

/// Barrington: a width-5 program with `A_0 = I`, `A_1 = (1 2 3 4 5)` and
/// length at most `4^depth(c)`.
pub fn compile(c: &Circuit) -> BranchingProgram {
    let steps = subprogram(c, c.output(), &sigma());
    BranchingProgram::new(c.input_count(), steps, Perm::identity(5), sigma()).expect("compiled program is well formed")
}

fn format_err(line: usize, message: impl Into<String>) -> BpError {
    BpError::Format {
        line,
        message: message.into(),
    }
}

pub fn parse_bp(text: &str) -> Result<BranchingProgram, BpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let fields: Vec<&str> = header.split(' ').collect();
    if fields.len() != 5 || fields[0] != "BP" || fields[1] != "v1" {
        return Err(format_err(1, "expected header `BP v1 w n ell`"));
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(1, format!("bad number `{s}`")))
    };
    let (w, n, ell) = (num(fields[2])?, num(fields[3])?, num(fields[4])?);
    if w == 0 || w > 255 {
        return Err(format_err(1, "width out of range"));
    }
    let matrix = |lines: &mut dyn Iterator<Item = (usize, &str)>| -> Result<Perm, BpError> {
        let mut rows = Vec::with_capacity(w);
        let mut first = 0;
        for r in 0..w {
            let (no, line) = lines.next().ok_or_else(|| format_err(0, "unexpected end of file"))?;
            if r == 0 {
                first = no;
            }
            let row: Result<Vec<u8>, _> = line
                .split(' ')
                .map(|t| match t {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    _ => Err(format_err(no, format!("bad matrix entry `{t}`"))),
                })
                .collect();
            rows.push(row?);
        }
        Perm::from_matrix(&rows).map_err(|e| format_err(first, e.to_string()))
    };
    let accept_zero = matrix(&mut lines)?;
    let accept_one = matrix(&mut lines)?;
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let (no, line) = lines.next().ok_or_else(|| format_err(0, "unexpected end of file"))?;
        let inp: usize = line
            .parse()
            .map_err(|_| format_err(no, format!("bad input index `{line}`")))?;
        if inp == 0 || inp > ell {
            return Err(format_err(no, format!("input index {inp} outside 1..={ell}")));
        }
        let on_zero = matrix(&mut lines)?;
        let on_one = matrix(&mut lines)?;
        steps.push(Step {
            inp: inp - 1,
            on_zero,
            on_one,
        });
    }
    if let Some((no, _)) = lines.next() {
        return Err(format_err(no, "trailing content"));
    }
    BranchingProgram::new(ell, steps, accept_zero, accept_one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::tests::random_circuit;
    use crate::circuit::{all_inputs, balanced_tree, parse_circuit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn swap2() -> Perm {
        Perm::from_matrix(&[vec![0, 1], vec![1, 0]]).unwrap()
    }

    fn xor_example() -> BranchingProgram {
        let id = Perm::from_matrix(&[vec![1, 0], vec![0, 1]]).unwrap();
        let steps = vec![
            Step {
                inp: 0,
                on_zero: id.clone(),
                on_one: swap2(),
            },
            Step {
                inp: 1,
                on_zero: id.clone(),
                on_one: swap2(),
            },
        ];
        BranchingProgram::new(2, steps, id, swap2()).unwrap()
    }

    #[test]
    fn width_two_xor_example() {
        let bp = xor_example();
        for x in all_inputs(2) {
            let want = if x[0] ^ x[1] { BpOutput::One } else { BpOutput::Zero };
            assert_eq!(eval_bp(&bp, &x).unwrap(), want, "{x:?}");
        }
        assert_eq!(input_sets(&bp), vec![vec![0], vec![1]]);
    }

    #[test]
    fn undef_when_product_matches_neither() {
        let c3 = Perm::cycle(3, &[1, 2, 3]);
        let t = Perm::cycle(3, &[1, 2]);
        let bp = BranchingProgram::new(
            1,
            vec![Step {
                inp: 0,
                on_zero: Perm::identity(3),
                on_one: c3,
            }],
            Perm::identity(3),
            t,
        )
        .unwrap();
        assert_eq!(eval_bp(&bp, &[true]).unwrap(), BpOutput::Undef);
        assert_eq!(eval_bp(&bp, &[false]).unwrap(), BpOutput::Zero);
        assert!(eval_bp(&bp, &[true, false]).is_err());
    }

    #[test]
    fn witness_tables_cover_a5() {
        let w = witnesses();
        assert_eq!(w.elements.len(), 60);
        for (g, (comm, quad)) in w.elements.iter().zip(w.commutator.iter().zip(&w.xor)) {
            if g.is_identity() {
                continue;
            }
            let (a, b) = comm.as_ref().unwrap();
            assert_eq!(&a.then(b).then(&a.inverse()).then(&b.inverse()), g);
            let [c1, c2, c3, c4] = quad.as_ref().unwrap();
            assert_eq!(&c1.then(c3), g);
            assert_eq!(&c2.then(c4), g);
            assert!(c1.then(c2).then(c3).then(c4).is_identity());
        }
    }

    #[test]
    fn constant_zero_circuit_multiplies_to_identity() {
        let c = parse_circuit("input x\ngate n NOT x\ngate z AND x n\noutput z\n").unwrap();
        let bp = compile(&c);
        for x in all_inputs(1) {
            assert!(bp.product(&x).unwrap().is_identity());
        }
    }

    #[test]
    fn xor_gate_length_four() {
        let c = parse_circuit("input a\ninput b\ngate g XOR a b\noutput g\n").unwrap();
        let bp = compile(&c);
        assert_eq!(bp.len(), 4);
        assert_eq!(bp.inp_sequence(), vec![0, 1, 0, 1]);
    }

    fn check(c: &Circuit) {
        let bp = compile(c);
        assert_eq!(compiled_length(c), bp.len() as u128);
        assert!(
            bp.len() <= 4usize.pow(c.depth() as u32),
            "length {} depth {}",
            bp.len(),
            c.depth()
        );
        for x in all_inputs(c.input_count()) {
            let want = c.eval(&x).unwrap();
            assert_eq!(eval_bp(&bp, &x).unwrap().bit(), Some(want), "{}", c.to_text());
        }
        for step in bp.steps() {
            assert!(step.on_zero.is_even() && step.on_one.is_even());
        }
        let sets = input_sets(&bp);
        let mut all: Vec<usize> = sets.concat();
        all.sort();
        assert_eq!(all, (0..bp.len()).collect::<Vec<_>>());
    }

    #[test]
    fn exhaustive_small_circuits() {
        // every circuit with <= 2 gates on <= 2 inputs, all ops and wirings
        for inputs in 1..=2 {
            for gates in 1..=2 {
                let mut stack = vec![Vec::<(GateOp, Vec<Wire>)>::new()];
                while let Some(ops) = stack.pop() {
                    if ops.len() == gates {
                        let c = Circuit::from_ops(inputs, &ops, Wire::Gate(gates - 1)).unwrap();
                        check(&c);
                        continue;
                    }
                    let sources: Vec<Wire> = (0..inputs)
                        .map(Wire::Input)
                        .chain((0..ops.len()).map(Wire::Gate))
                        .collect();
                    for op in GateOp::ALL {
                        for &a in &sources {
                            if op.arity() == 1 {
                                let mut next = ops.clone();
                                next.push((op, vec![a]));
                                stack.push(next);
                                continue;
                            }
                            for &b in &sources {
                                let mut next = ops.clone();
                                next.push((op, vec![a, b]));
                                stack.push(next);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn random_circuits_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for _ in 0..100 {
            let c = random_circuit(&mut rng, 4, 6);
            check(&c);
        }
    }

    #[test]
    fn inp_sequence_is_oblivious() {
        let a = parse_circuit("input a\ninput b\ninput c\ngate g AND a b\ngate h OR g c\noutput h\n").unwrap();
        let b = parse_circuit("input a\ninput b\ninput c\ngate g XOR a b\ngate h NAND g c\noutput h\n").unwrap();
        assert_eq!(compile(&a).inp_sequence(), compile(&b).inp_sequence());
    }

    #[test]
    fn padding_and_text_round_trip() {
        let c = parse_circuit("input a\ninput b\ngate g AND a b\noutput g\n").unwrap();
        let bp = compile(&c);
        let padded = pad_to(&bp, 16).unwrap();
        assert_eq!(padded.len(), 16);
        for x in all_inputs(2) {
            assert_eq!(eval_bp(&padded, &x).unwrap(), eval_bp(&bp, &x).unwrap());
        }
        assert!(pad_to(&padded, 3).is_err());
        let text = padded.to_text();
        assert!(text.starts_with("BP v1 5 16 2\n1 0 0 0 0\n"));
        assert_eq!(parse_bp(&text).unwrap(), padded);
        assert_eq!(parse_bp(&xor_example().to_text()).unwrap(), xor_example());
    }

    #[test]
    fn balanced_tree_hits_the_bound() {
        for depth in 0..4 {
            let c = balanced_tree(depth);
            assert_eq!(c.depth(), depth);
            check(&c);
            assert_eq!(compiled_length(&c), 4u128.pow(depth as u32));
        }
    }

    #[test]
    fn parse_rejects_bad_input() {
        let good = xor_example().to_text();
        assert!(parse_bp(&good.replacen("BP v1", "BP v2", 1)).is_err());
        let not_perm = good.replacen("0 1\n1 0\n", "1 1\n1 0\n", 1);
        assert!(matches!(parse_bp(&not_perm), Err(BpError::Format { .. })));
        assert!(parse_bp(&format!("{good}extra\n")).is_err());
        assert!(parse_bp(&good.replace("\n2\n", "\n3\n")).is_err());
    }
}
