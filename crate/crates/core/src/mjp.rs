//! Multilinear jigsaw puzzles: specifiers, multilinear forms, the generator
//! and verifier, and a transparent encoding backend.
//!
//! Index sets are subsets of `[k] = {1, ..., k}` with `k <= MAX_K`.

use std::collections::HashMap;
use std::fmt;

use rand::RngCore;
use thiserror::Error;

use crate::zmod::{gen_prime, PrimeModulus, ZmodError};

/// Largest supported multilinearity parameter.
pub const MAX_K: usize = 128;
const WORDS: usize = MAX_K / 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MjpError {
    #[error("index set element {0} outside 1..={MAX_K}")]
    IndexRange(usize),
    #[error("set {set} is not a subset of [{k}]")]
    NotSubset { set: IndexSet, k: usize },
    #[error("value {value} is not reduced mod {p}")]
    ValueRange { value: u128, p: u128 },
    #[error("multilinearity k = {0} outside 1..={MAX_K}")]
    BadK(usize),
    #[error("form is not compatible with the specifier output")]
    Incompatible,
    #[error("invalid form: {0}")]
    Invalid(Violation),
    #[error("specifier produced {found} pairs, expected {expected}")]
    SpecifierArity { expected: usize, found: usize },
    #[error("puzzle was produced by backend `{found}`, not `{expected}`")]
    Backend { expected: String, found: String },
    #[error(transparent)]
    Field(#[from] ZmodError),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Subset of `[k]`, stored as a bitset with element `i` at bit `i - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct IndexSet([u64; WORDS]);

impl IndexSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn singleton(i: usize) -> Result<Self, MjpError> {
        let mut s = Self::empty();
        s.insert(i)?;
        Ok(s)
    }

    /// `{lo, ..., hi}`.
    pub fn range(lo: usize, hi: usize) -> Result<Self, MjpError> {
        let mut s = Self::empty();
        for i in lo..=hi {
            s.insert(i)?;
        }
        Ok(s)
    }

    pub fn full(k: usize) -> Result<Self, MjpError> {
        Self::range(1, k)
    }

    pub fn from_indices(indices: &[usize]) -> Result<Self, MjpError> {
        let mut s = Self::empty();
        for &i in indices {
            s.insert(i)?;
        }
        Ok(s)
    }

    pub fn insert(&mut self, i: usize) -> Result<(), MjpError> {
        if i == 0 || i > MAX_K {
            return Err(MjpError::IndexRange(i));
        }
        self.0[(i - 1) / 64] |= 1 << ((i - 1) % 64);
        Ok(())
    }

    pub fn contains(&self, i: usize) -> bool {
        (1..=MAX_K).contains(&i) && self.0[(i - 1) / 64] >> ((i - 1) % 64) & 1 == 1
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn max(&self) -> Option<usize> {
        let (i, w) = self.0.iter().enumerate().rev().find(|(_, w)| **w != 0)?;
        Some(i * 64 + 64 - w.leading_zeros() as usize)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & b == 0)
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.0.iter_mut().zip(&other.0) {
            *a |= b;
        }
        out
    }

    pub fn is_subset_of_k(&self, k: usize) -> bool {
        self.max().is_none_or(|m| m <= k)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (1..=MAX_K).filter(move |&i| self.contains(i))
    }

    /// Sorted comma list, `-` for the empty set.
    pub fn to_text(&self) -> String {
        if self.is_empty() {
            return "-".into();
        }
        self.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        if text == "-" {
            return Ok(Self::empty());
        }
        let mut s = Self::empty();
        let mut last = 0;
        for part in text.split(',') {
            let i: usize = part.parse().map_err(|_| format!("bad index `{part}`"))?;
            if i <= last {
                return Err(format!("set `{text}` is not strictly increasing"));
            }
            last = i;
            s.insert(i).map_err(|e| e.to_string())?;
        }
        Ok(s)
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_text())
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.to_text())
    }
}

/// `X = (p, (S_1, a_1), ..., (S_l, a_l))`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecifierOutput {
    pub p: PrimeModulus,
    pub pairs: Vec<(IndexSet, u128)>,
}

/// A jigsaw specifier: given the prime, emit `ell` level/value pairs.
pub trait JigsawSpecifier {
    fn k(&self) -> usize;
    fn ell(&self) -> usize;
    fn specify(&self, p: PrimeModulus, rng: &mut dyn RngCore) -> Result<SpecifierOutput, MjpError>;
}

/// Specifier built from a closure.
pub struct FnSpecifier<F> {
    k: usize,
    ell: usize,
    f: F,
}

impl<F> FnSpecifier<F>
where
    F: Fn(PrimeModulus, &mut dyn RngCore) -> Vec<(IndexSet, u128)>,
{
    pub fn new(k: usize, ell: usize, f: F) -> Self {
        Self { k, ell, f }
    }
}

impl<F> JigsawSpecifier for FnSpecifier<F>
where
    F: Fn(PrimeModulus, &mut dyn RngCore) -> Vec<(IndexSet, u128)>,
{
    fn k(&self) -> usize {
        self.k
    }

    fn ell(&self) -> usize {
        self.ell
    }

    fn specify(&self, p: PrimeModulus, rng: &mut dyn RngCore) -> Result<SpecifierOutput, MjpError> {
        let pairs = (self.f)(p, rng);
        check_pairs(self.k, self.ell, p, &pairs)?;
        Ok(SpecifierOutput { p, pairs })
    }
}

fn check_pairs(k: usize, ell: usize, p: PrimeModulus, pairs: &[(IndexSet, u128)]) -> Result<(), MjpError> {
    if pairs.len() != ell {
        return Err(MjpError::SpecifierArity {
            expected: ell,
            found: pairs.len(),
        });
    }
    for (s, a) in pairs {
        if !s.is_subset_of_k(k) {
            return Err(MjpError::NotSubset { set: *s, k });
        }
        if *a >= p.value() {
            return Err(MjpError::ValueRange {
                value: *a,
                p: p.value(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    Add,
    Mul,
    Neg,
    Ignore,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::Add | GateKind::Mul => 2,
            GateKind::Neg | GateKind::Ignore => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Add => "ADD",
            GateKind::Mul => "MUL",
            GateKind::Neg => "NEG",
            GateKind::Ignore => "IGN",
        }
    }
}

const NO_WIRE: u32 = u32::MAX;

/// One gate of a form. Wire ids: inputs are `0..ell`, gate `g` drives
/// wire `ell + g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormGate {
    pub kind: GateKind,
    pub a: u32,
    pub b: u32,
}

impl FormGate {
    pub fn operands(&self) -> impl Iterator<Item = u32> {
        [self.a, self.b].into_iter().filter(|w| *w != NO_WIRE)
    }
}

/// Arithmetic circuit over `ell` inputs with an index set assigned to every
/// wire. Sets are interned; `wire_level[w]` indexes `levels`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultilinearForm {
    k: usize,
    ell: usize,
    levels: Vec<IndexSet>,
    wire_level: Vec<u32>,
    gates: Vec<FormGate>,
    output: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    /// An ADD or NEG gate whose wires do not all share one set.
    SameSet,
    /// A MUL gate whose inputs overlap or whose output is not their union.
    DisjointUnion,
    /// An IGN gate whose output is consumed.
    IgnoreFanout,
    /// The output wire is not assigned `[k]`.
    OutputLevel,
    /// More gates than the bound allows.
    SizeBound,
    /// Dangling wire ids, wrong operand counts and similar.
    Malformed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Zero-based gate index, when one gate is at fault.
    pub gate: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            ViolationKind::SameSet => "same-set",
            ViolationKind::DisjointUnion => "disjoint-union",
            ViolationKind::IgnoreFanout => "ignore-fanout",
            ViolationKind::OutputLevel => "output-level",
            ViolationKind::SizeBound => "size-bound",
            ViolationKind::Malformed => "malformed",
        };
        match self.gate {
            Some(g) => write!(f, "{name} at gate {g}: {}", self.detail),
            None => write!(f, "{name}: {}", self.detail),
        }
    }
}

impl MultilinearForm {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn gates(&self) -> &[FormGate] {
        &self.gates
    }

    pub fn size(&self) -> usize {
        self.gates.len()
    }

    pub fn output(&self) -> u32 {
        self.output
    }

    pub fn wire_count(&self) -> usize {
        self.wire_level.len()
    }

    pub fn level(&self, wire: u32) -> IndexSet {
        self.levels[self.wire_level[wire as usize] as usize]
    }

    pub fn input_levels(&self) -> impl Iterator<Item = IndexSet> + '_ {
        (0..self.ell as u32).map(|w| self.level(w))
    }

    /// Assemble a form from explicit parts; nothing is checked beyond
    /// bounds of `k`. Use [`validate_form`] for the structural constraints.
    pub fn from_parts(
        k: usize,
        input_levels: Vec<IndexSet>,
        gates: Vec<(GateKind, Vec<u32>, IndexSet)>,
        output: u32,
    ) -> Result<Self, MjpError> {
        if k == 0 || k > MAX_K {
            return Err(MjpError::BadK(k));
        }
        let ell = input_levels.len();
        let mut interner = Interner::default();
        let mut wire_level: Vec<u32> = input_levels.iter().map(|s| interner.id(*s)).collect();
        let mut out_gates = Vec::with_capacity(gates.len());
        for (kind, operands, level) in gates {
            let a = operands.first().copied().unwrap_or(NO_WIRE);
            let b = operands.get(1).copied().unwrap_or(NO_WIRE);
            let b = if operands.len() > 2 { NO_WIRE - 1 } else { b };
            out_gates.push(FormGate { kind, a, b });
            wire_level.push(interner.id(level));
        }
        Ok(Self {
            k,
            ell,
            levels: interner.levels,
            wire_level,
            gates: out_gates,
            output,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("MF v1 {} {}\n", self.k, self.ell);
        for w in 0..self.ell as u32 {
            out.push_str(&format!("{w} IN {}\n", self.level(w).to_text()));
        }
        for (g, gate) in self.gates.iter().enumerate() {
            let id = self.ell + g;
            out.push_str(&format!("{id} {}", gate.kind.name()));
            for w in gate.operands() {
                out.push_str(&format!(" {w}"));
            }
            out.push_str(&format!(" {}\n", self.level(id as u32).to_text()));
        }
        out.push_str(&format!("out {}\n", self.output));
        out
    }

    pub fn parse(text: &str) -> Result<Self, MjpError> {
        let err = |line: usize, message: String| MjpError::Format { line, message };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty form".into()))?;
        let h: Vec<&str> = header.split(' ').collect();
        if h.len() != 4 || h[0] != "MF" || h[1] != "v1" {
            return Err(err(1, "expected header `MF v1 k ell`".into()));
        }
        let k: usize = h[2].parse().map_err(|_| err(1, "bad k".into()))?;
        let ell: usize = h[3].parse().map_err(|_| err(1, "bad ell".into()))?;
        let mut inputs = Vec::with_capacity(ell);
        let mut gates = Vec::new();
        let mut output = None;
        for (no, line) in lines {
            let t: Vec<&str> = line.split(' ').collect();
            if t[0] == "out" {
                if t.len() != 2 || output.is_some() {
                    return Err(err(no, "bad output line".into()));
                }
                output = Some(t[1].parse::<u32>().map_err(|_| err(no, "bad output wire".into()))?);
                continue;
            }
            if output.is_some() {
                return Err(err(no, "content after output line".into()));
            }
            let id: usize = t[0].parse().map_err(|_| err(no, format!("bad wire id `{}`", t[0])))?;
            if t.len() < 3 {
                return Err(err(no, "truncated line".into()));
            }
            let level = IndexSet::parse(t[t.len() - 1]).map_err(|m| err(no, m))?;
            let operands: Result<Vec<u32>, _> = t[2..t.len() - 1]
                .iter()
                .map(|s| s.parse::<u32>().map_err(|_| err(no, format!("bad operand `{s}`"))))
                .collect();
            let operands = operands?;
            if t[1] == "IN" {
                if id != inputs.len() || !gates.is_empty() || !operands.is_empty() {
                    return Err(err(no, "input wires must come first, numbered from 0".into()));
                }
                inputs.push(level);
                continue;
            }
            let kind = match t[1] {
                "ADD" => GateKind::Add,
                "MUL" => GateKind::Mul,
                "NEG" => GateKind::Neg,
                "IGN" => GateKind::Ignore,
                other => return Err(err(no, format!("unknown gate kind `{other}`"))),
            };
            if id != ell + gates.len() {
                return Err(err(no, format!("expected wire id {}", ell + gates.len())));
            }
            if operands.len() != kind.arity() {
                return Err(err(no, format!("{} takes {} operand(s)", kind.name(), kind.arity())));
            }
            gates.push((kind, operands, level));
        }
        if inputs.len() != ell {
            return Err(err(0, format!("expected {ell} input wires, found {}", inputs.len())));
        }
        let output = output.ok_or_else(|| err(0, "missing output line".into()))?;
        Self::from_parts(k, inputs, gates, output)
    }
}

#[derive(Default)]
struct Interner {
    levels: Vec<IndexSet>,
    ids: HashMap<IndexSet, u32>,
    last: Option<(IndexSet, u32)>,
}

impl Interner {
    fn id(&mut self, s: IndexSet) -> u32 {
        if let Some((last, id)) = self.last {
            if last == s {
                return id;
            }
        }
        let id = *self.ids.entry(s).or_insert_with(|| {
            self.levels.push(s);
            (self.levels.len() - 1) as u32
        });
        self.last = Some((s, id));
        id
    }
}

/// Incremental form construction; each new wire's set follows the gate rules.
pub struct FormBuilder {
    k: usize,
    ell: usize,
    interner: Interner,
    wire_level: Vec<u32>,
    gates: Vec<FormGate>,
    union_cache: HashMap<(u32, u32), u32>,
    last_union: ((u32, u32), u32),
}

impl FormBuilder {
    pub fn new(k: usize, input_levels: impl IntoIterator<Item = IndexSet>) -> Result<Self, MjpError> {
        if k == 0 || k > MAX_K {
            return Err(MjpError::BadK(k));
        }
        let mut interner = Interner::default();
        let wire_level: Vec<u32> = input_levels.into_iter().map(|s| interner.id(s)).collect();
        Ok(Self {
            k,
            ell: wire_level.len(),
            interner,
            wire_level,
            gates: Vec::new(),
            union_cache: HashMap::new(),
            last_union: ((NO_WIRE, NO_WIRE), NO_WIRE),
        })
    }

    pub fn input(&self, i: usize) -> u32 {
        assert!(i < self.ell, "input {i} out of range");
        i as u32
    }

    pub fn level(&self, w: u32) -> IndexSet {
        self.interner.levels[self.wire_level[w as usize] as usize]
    }

    fn push(&mut self, kind: GateKind, a: u32, b: u32, level: u32) -> u32 {
        self.gates.push(FormGate { kind, a, b });
        self.wire_level.push(level);
        (self.wire_level.len() - 1) as u32
    }

    pub fn add(&mut self, a: u32, b: u32) -> u32 {
        let level = self.wire_level[a as usize];
        self.push(GateKind::Add, a, b, level)
    }

    pub fn mul(&mut self, a: u32, b: u32) -> u32 {
        let (la, lb) = (self.wire_level[a as usize], self.wire_level[b as usize]);
        let level = match self.union_cache.get(&(la, lb)) {
            _ if self.last_union.0 == (la, lb) => self.last_union.1,
            Some(l) => *l,
            None => {
                let u = self.interner.levels[la as usize].union(&self.interner.levels[lb as usize]);
                let l = self.interner.id(u);
                self.union_cache.insert((la, lb), l);
                l
            }
        };
        self.last_union = ((la, lb), level);
        self.push(GateKind::Mul, a, b, level)
    }

    pub fn neg(&mut self, a: u32) -> u32 {
        let level = self.wire_level[a as usize];
        self.push(GateKind::Neg, a, NO_WIRE, level)
    }

    pub fn ignore(&mut self, a: u32) -> u32 {
        let level = self.wire_level[a as usize];
        self.push(GateKind::Ignore, a, NO_WIRE, level)
    }

    /// Sum of a nonempty list of wires, as a balanced tree.
    pub fn sum(&mut self, wires: &[u32]) -> u32 {
        assert!(!wires.is_empty(), "empty sum");
        let mut layer = wires.to_vec();
        while layer.len() > 1 {
            layer = layer
                .chunks(2)
                .map(|c| if c.len() == 2 { self.add(c[0], c[1]) } else { c[0] })
                .collect();
        }
        layer[0]
    }

    /// Route every input wire that no gate reads into an IGN gate.
    pub fn ignore_unused_inputs(&mut self) {
        let mut used = vec![false; self.ell];
        for g in &self.gates {
            for w in g.operands() {
                if (w as usize) < self.ell {
                    used[w as usize] = true;
                }
            }
        }
        for (i, u) in used.into_iter().enumerate() {
            if !u {
                self.ignore(i as u32);
            }
        }
    }

    pub fn finish(self, output: u32) -> MultilinearForm {
        MultilinearForm {
            k: self.k,
            ell: self.ell,
            levels: self.interner.levels,
            wire_level: self.wire_level,
            gates: self.gates,
            output,
        }
    }
}

/// Check the four structural constraints and the size bound `alpha`.
/// Returns the first violation found, scanning gates in order.
pub fn validate_form(f: &MultilinearForm, alpha: usize) -> Result<(), Violation> {
    let bad = |kind, gate: Option<usize>, detail: String| Violation { kind, gate, detail };
    let wires = f.ell + f.gates.len();
    if f.levels.iter().any(|s| !s.is_subset_of_k(f.k)) {
        return Err(bad(
            ViolationKind::Malformed,
            None,
            format!("a wire set is not inside [{}]", f.k),
        ));
    }
    let mut ignored = vec![false; wires];
    // (left, right) level ids already checked to multiply into the given id
    let mut union_ok: HashMap<(u32, u32), u32> = HashMap::new();
    let mut last_union = (NO_WIRE, NO_WIRE, NO_WIRE);
    for (g, gate) in f.gates.iter().enumerate() {
        let id = f.ell + g;
        let mut buf = [NO_WIRE; 2];
        let mut count = 0;
        for w in gate.operands() {
            buf[count] = w;
            count += 1;
        }
        let operands = &buf[..count];
        if count != gate.kind.arity() || gate.b == NO_WIRE - 1 {
            return Err(bad(
                ViolationKind::Malformed,
                Some(g),
                format!("{} needs {} operand(s)", gate.kind.name(), gate.kind.arity()),
            ));
        }
        if let Some(w) = operands.iter().find(|&&w| w as usize >= id) {
            return Err(bad(
                ViolationKind::Malformed,
                Some(g),
                format!("operand wire {w} is not an earlier wire"),
            ));
        }
        if let Some(w) = operands.iter().find(|&&w| ignored[w as usize]) {
            return Err(bad(
                ViolationKind::IgnoreFanout,
                Some(g),
                format!("reads wire {w}, the output of an IGN gate"),
            ));
        }
        let out = f.wire_level[id];
        match gate.kind {
            GateKind::Add | GateKind::Neg => {
                if operands.iter().any(|&w| f.wire_level[w as usize] != out) {
                    let sets: Vec<String> = operands.iter().map(|&w| f.level(w).to_string()).collect();
                    return Err(bad(
                        ViolationKind::SameSet,
                        Some(g),
                        format!(
                            "inputs {} and output {} must share one set",
                            sets.join(", "),
                            f.level(id as u32)
                        ),
                    ));
                }
            }
            GateKind::Mul => {
                let (la, lb) = (f.wire_level[operands[0] as usize], f.wire_level[operands[1] as usize]);
                if last_union == (la, lb, out) || union_ok.get(&(la, lb)) == Some(&out) {
                    last_union = (la, lb, out);
                    continue;
                }
                let (a, b) = (f.level(operands[0]), f.level(operands[1]));
                if !a.is_disjoint(&b) {
                    return Err(bad(
                        ViolationKind::DisjointUnion,
                        Some(g),
                        format!("input sets {a} and {b} overlap"),
                    ));
                }
                if a.union(&b) != f.level(id as u32) {
                    return Err(bad(
                        ViolationKind::DisjointUnion,
                        Some(g),
                        format!("output set {} is not {}", f.level(id as u32), a.union(&b)),
                    ));
                }
                union_ok.insert((la, lb), out);
                last_union = (la, lb, out);
            }
            GateKind::Ignore => ignored[id] = true,
        }
    }
    if f.output as usize >= wires {
        return Err(bad(
            ViolationKind::Malformed,
            None,
            format!("output wire {} does not exist", f.output),
        ));
    }
    if ignored[f.output as usize] {
        return Err(bad(
            ViolationKind::IgnoreFanout,
            None,
            "the output is an IGN gate".into(),
        ));
    }
    let full = IndexSet::full(f.k).expect("k checked at construction");
    if f.level(f.output) != full {
        return Err(bad(
            ViolationKind::OutputLevel,
            None,
            format!("output set {} is not [{}]", f.level(f.output), f.k),
        ));
    }
    if f.gates.len() > alpha {
        return Err(bad(
            ViolationKind::SizeBound,
            None,
            format!("{} gates exceed the bound {alpha}", f.gates.len()),
        ));
    }
    Ok(())
}

/// Same `k`, same `ell`, and input sets equal `S_1..S_ell` in order.
pub fn compatible(f: &MultilinearForm, x: &SpecifierOutput, k: usize) -> bool {
    f.k == k && f.ell == x.pairs.len() && f.input_levels().zip(&x.pairs).all(|(l, (s, _))| l == *s)
}

fn eval_values(f: &MultilinearForm, p: PrimeModulus, inputs: impl Iterator<Item = u128>) -> u128 {
    let mut values: Vec<u128> = Vec::with_capacity(f.ell + f.gates.len());
    values.extend(inputs);
    for gate in &f.gates {
        let v = match gate.kind {
            GateKind::Add => p.add(values[gate.a as usize], values[gate.b as usize]),
            GateKind::Mul => p.mul(values[gate.a as usize], values[gate.b as usize]),
            GateKind::Neg => p.neg(values[gate.a as usize]),
            GateKind::Ignore => 0,
        };
        values.push(v);
    }
    values[f.output as usize]
}

/// Evaluate a valid, compatible form on `X`; returns the output pair.
pub fn eval_form(f: &MultilinearForm, x: &SpecifierOutput, k: usize) -> Result<(IndexSet, u128), MjpError> {
    if !compatible(f, x, k) {
        return Err(MjpError::Incompatible);
    }
    validate_form(f, usize::MAX).map_err(MjpError::Invalid)?;
    let value = eval_values(f, x.p, x.pairs.iter().map(|(_, a)| *a));
    Ok((f.level(f.output), value))
}

/// Public parameters of an instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Params {
    pub backend: String,
    pub k: usize,
    /// The prime, when the backend publishes it.
    pub p: Option<PrimeModulus>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub level: IndexSet,
    pub payload: u128,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Puzzle {
    pub prms: Params,
    pub encodings: Vec<Encoding>,
}

/// Backend-specific secret state handed from instance generation to encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenSecret {
    pub p: PrimeModulus,
}

/// Outcome of the verifier: `accept` is the bit, `diagnostic` is set when
/// the form was rejected before evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub accept: bool,
    pub diagnostic: Option<String>,
}

/// Encoding backend for jigsaw puzzles.
///
/// Contract for a secure backend: puzzles generated from two polynomial-size
/// families of specifiers that no compatible valid form can tell apart must
/// be computationally indistinguishable. The transparent backend below makes
/// no such claim; its payloads are the plaintexts.
pub trait EncodingBackend {
    fn id(&self) -> &'static str;
    fn inst_gen(
        &self,
        lambda: u32,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(PrimeModulus, Params, GenSecret), MjpError>;
    /// Instance generation with a caller-chosen prime.
    fn inst_gen_with_prime(&self, p: PrimeModulus, k: usize) -> Result<(Params, GenSecret), MjpError>;
    fn encode(&self, prms: &Params, secret: &GenSecret, level: IndexSet, a: u128) -> Result<Encoding, MjpError>;
    fn jver(&self, puzzle: &Puzzle, f: &MultilinearForm) -> Verdict;
}

/// Payload equals plaintext. Correct, and offers no hiding at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransparentBackend;

impl TransparentBackend {
    pub fn decode(&self, e: &Encoding) -> u128 {
        e.payload
    }
}

impl EncodingBackend for TransparentBackend {
    fn id(&self) -> &'static str {
        "transparent"
    }

    fn inst_gen(
        &self,
        lambda: u32,
        k: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(PrimeModulus, Params, GenSecret), MjpError> {
        let p = gen_prime(lambda, rng)?;
        let (prms, secret) = self.inst_gen_with_prime(p, k)?;
        Ok((p, prms, secret))
    }

    fn inst_gen_with_prime(&self, p: PrimeModulus, k: usize) -> Result<(Params, GenSecret), MjpError> {
        if k == 0 || k > MAX_K {
            return Err(MjpError::BadK(k));
        }
        Ok((
            Params {
                backend: self.id().into(),
                k,
                p: Some(p),
            },
            GenSecret { p },
        ))
    }

    fn encode(&self, prms: &Params, secret: &GenSecret, level: IndexSet, a: u128) -> Result<Encoding, MjpError> {
        if !level.is_subset_of_k(prms.k) {
            return Err(MjpError::NotSubset { set: level, k: prms.k });
        }
        if a >= secret.p.value() {
            return Err(MjpError::ValueRange {
                value: a,
                p: secret.p.value(),
            });
        }
        Ok(Encoding { level, payload: a })
    }

    fn jver(&self, puzzle: &Puzzle, f: &MultilinearForm) -> Verdict {
        let reject = |why: String| Verdict {
            accept: false,
            diagnostic: Some(why),
        };
        if puzzle.prms.backend != self.id() {
            return reject(format!("puzzle backend `{}`", puzzle.prms.backend));
        }
        let Some(p) = puzzle.prms.p else {
            return reject("puzzle does not carry its prime".into());
        };
        if f.k != puzzle.prms.k
            || f.ell != puzzle.encodings.len()
            || !f.input_levels().zip(&puzzle.encodings).all(|(l, e)| l == e.level)
        {
            return reject("form is not compatible with the puzzle".into());
        }
        if let Err(v) = validate_form(f, usize::MAX) {
            return reject(v.to_string());
        }
        let value = eval_values(f, p, puzzle.encodings.iter().map(|e| self.decode(e)));
        Verdict {
            accept: value == 0,
            diagnostic: None,
        }
    }
}

/// Run instance generation, the specifier and the encoder. Returns the
/// prime, the private output `X` and the public puzzle.
pub fn jgen<B: EncodingBackend + ?Sized>(
    backend: &B,
    lambda: u32,
    spec: &dyn JigsawSpecifier,
    rng: &mut dyn RngCore,
) -> Result<(PrimeModulus, SpecifierOutput, Puzzle), MjpError> {
    let (p, prms, secret) = backend.inst_gen(lambda, spec.k(), rng)?;
    let (x, puzzle) = jgen_finish(backend, p, prms, secret, spec, rng)?;
    Ok((p, x, puzzle))
}

/// As [`jgen`] with a fixed prime.
pub fn jgen_with_prime<B: EncodingBackend + ?Sized>(
    backend: &B,
    p: PrimeModulus,
    spec: &dyn JigsawSpecifier,
    rng: &mut dyn RngCore,
) -> Result<(SpecifierOutput, Puzzle), MjpError> {
    let (prms, secret) = backend.inst_gen_with_prime(p, spec.k())?;
    jgen_finish(backend, p, prms, secret, spec, rng)
}

fn jgen_finish<B: EncodingBackend + ?Sized>(
    backend: &B,
    p: PrimeModulus,
    prms: Params,
    secret: GenSecret,
    spec: &dyn JigsawSpecifier,
    rng: &mut dyn RngCore,
) -> Result<(SpecifierOutput, Puzzle), MjpError> {
    let x = spec.specify(p, rng)?;
    check_pairs(spec.k(), spec.ell(), p, &x.pairs)?;
    let encodings = x
        .pairs
        .iter()
        .map(|(s, a)| backend.encode(&prms, &secret, *s, *a))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((x, Puzzle { prms, encodings }))
}

impl Puzzle {
    pub fn to_text(&self) -> String {
        let p = self.prms.p.map_or(0, |p| p.value());
        let mut out = format!(
            "PUZZLE v1 {} {} {} {}\n",
            self.prms.backend,
            self.prms.k,
            self.encodings.len(),
            p
        );
        for e in &self.encodings {
            out.push_str(&e.level.to_text());
            out.push(' ');
            out.push_str(&e.payload.to_string());
            out.push('\n');
        }
        out
    }

    /// Parse from an iterator of numbered lines, leaving the rest unread.
    pub(crate) fn parse_lines<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Self, MjpError> {
        let err = |line: usize, message: String| MjpError::Format { line, message };
        let (no, header) = lines.next().ok_or_else(|| err(0, "missing puzzle header".into()))?;
        let h: Vec<&str> = header.split(' ').collect();
        if h.len() != 6 || h[0] != "PUZZLE" || h[1] != "v1" {
            return Err(err(no, "expected header `PUZZLE v1 backend k ell p`".into()));
        }
        let k: usize = h[3].parse().map_err(|_| err(no, "bad k".into()))?;
        let ell: usize = h[4].parse().map_err(|_| err(no, "bad ell".into()))?;
        let p: u128 = h[5].parse().map_err(|_| err(no, "bad prime".into()))?;
        if k == 0 || k > MAX_K {
            return Err(err(no, format!("k = {k} out of range")));
        }
        let p = if p == 0 {
            None
        } else {
            Some(PrimeModulus::new(p).map_err(|e| err(no, e.to_string()))?)
        };
        let mut encodings = Vec::with_capacity(ell);
        for _ in 0..ell {
            let (no, line) = lines.next().ok_or_else(|| err(0, "unexpected end of puzzle".into()))?;
            let (set, payload) = line
                .split_once(' ')
                .ok_or_else(|| err(no, "expected `<set> <payload>`".into()))?;
            let level = IndexSet::parse(set).map_err(|m| err(no, m))?;
            if !level.is_subset_of_k(k) {
                return Err(err(no, format!("set {level} outside [{k}]")));
            }
            let payload: u128 = payload
                .parse()
                .map_err(|_| err(no, format!("bad payload `{payload}`")))?;
            if p.is_some_and(|p| payload >= p.value()) {
                return Err(err(no, "payload not reduced".into()));
            }
            encodings.push(Encoding { level, payload });
        }
        Ok(Puzzle {
            prms: Params {
                backend: h[2].to_string(),
                k,
                p,
            },
            encodings,
        })
    }

    pub fn parse(text: &str) -> Result<Self, MjpError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let puzzle = Self::parse_lines(&mut lines)?;
        if let Some((no, _)) = lines.next() {
            return Err(MjpError::Format {
                line: no,
                message: "trailing content".into(),
            });
        }
        Ok(puzzle)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn set(ix: &[usize]) -> IndexSet {
        IndexSet::from_indices(ix).unwrap()
    }

    fn prime(p: u128) -> PrimeModulus {
        PrimeModulus::new(p).unwrap()
    }

    fn x_of(p: u128, pairs: &[(&[usize], u128)]) -> SpecifierOutput {
        SpecifierOutput {
            p: prime(p),
            pairs: pairs.iter().map(|(s, a)| (set(s), *a)).collect(),
        }
    }

    #[test]
    fn smallest_valid_form() {
        let f = FormBuilder::new(1, [set(&[1])]).unwrap().finish(0);
        assert_eq!(validate_form(&f, 0), Ok(()));
        let x = x_of(5, &[(&[1], 3)]);
        assert_eq!(eval_form(&f, &x, 1).unwrap(), (set(&[1]), 3));
    }

    #[test]
    fn gate_semantics_by_hand() {
        let mut b = FormBuilder::new(1, [set(&[1]), set(&[1])]).unwrap();
        let s = b.add(0, 1);
        let f = b.finish(s);
        assert_eq!(
            eval_form(&f, &x_of(5, &[(&[1], 2), (&[1], 3)]), 1).unwrap(),
            (set(&[1]), 0)
        );

        let mut b = FormBuilder::new(2, [set(&[2])]).unwrap();
        let n = b.neg(0);
        let f = b.finish(n);
        // a lone negation cannot reach [k], so check the gate value directly
        assert_eq!(validate_form(&f, 9).unwrap_err().kind, ViolationKind::OutputLevel);
        assert_eq!(f.level(n), set(&[2]));
        assert_eq!(eval_values(&f, prime(7), [3].into_iter()), 4);

        let mut b = FormBuilder::new(2, [set(&[1]), set(&[2])]).unwrap();
        let m = b.mul(0, 1);
        let f = b.finish(m);
        assert_eq!(
            eval_form(&f, &x_of(5, &[(&[1], 2), (&[2], 3)]), 2).unwrap(),
            (set(&[1, 2]), 1)
        );
    }

    #[test]
    fn violations_are_named() {
        let f = MultilinearForm::from_parts(
            3,
            vec![set(&[1, 2]), set(&[2, 3])],
            vec![(GateKind::Mul, vec![0, 1], set(&[1, 2, 3]))],
            2,
        )
        .unwrap();
        assert_eq!(validate_form(&f, 10).unwrap_err().kind, ViolationKind::DisjointUnion);

        let f = MultilinearForm::from_parts(
            2,
            vec![set(&[1]), set(&[2])],
            vec![(GateKind::Add, vec![0, 1], set(&[1]))],
            2,
        )
        .unwrap();
        assert_eq!(validate_form(&f, 10).unwrap_err().kind, ViolationKind::SameSet);

        let f = MultilinearForm::from_parts(
            1,
            vec![set(&[1])],
            vec![
                (GateKind::Ignore, vec![0], set(&[1])),
                (GateKind::Neg, vec![1], set(&[1])),
            ],
            2,
        )
        .unwrap();
        assert_eq!(validate_form(&f, 10).unwrap_err().kind, ViolationKind::IgnoreFanout);

        let f = FormBuilder::new(2, [set(&[1])]).unwrap().finish(0);
        assert_eq!(validate_form(&f, 10).unwrap_err().kind, ViolationKind::OutputLevel);

        let mut b = FormBuilder::new(1, [set(&[1])]).unwrap();
        let n = b.neg(0);
        let n = b.neg(n);
        let f = b.finish(n);
        assert_eq!(validate_form(&f, 1).unwrap_err().kind, ViolationKind::SizeBound);
        assert_eq!(validate_form(&f, 2), Ok(()));
    }

    #[test]
    fn compatibility_is_ordered() {
        let mut b = FormBuilder::new(2, [set(&[1]), set(&[2])]).unwrap();
        let m = b.mul(0, 1);
        let f = b.finish(m);
        assert!(compatible(&f, &x_of(5, &[(&[1], 1), (&[2], 1)]), 2));
        assert!(!compatible(&f, &x_of(5, &[(&[2], 1), (&[1], 1)]), 2));
        assert!(!compatible(&f, &x_of(5, &[(&[1], 1)]), 2));
        assert!(!compatible(&f, &x_of(5, &[(&[1], 1), (&[2], 1)]), 3));
    }

    #[test]
    fn inst_gen_range_and_determinism() {
        let be = TransparentBackend;
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (p, prms, _) = be.inst_gen(8, 3, &mut rng).unwrap();
        assert!(p.value() <= 256);
        assert_eq!(prms.k, 3);
        let a = be.inst_gen(20, 2, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        let b = be.inst_gen(20, 2, &mut ChaCha20Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        for _ in 0..100 {
            let (p, _, _) = be.inst_gen(16, 1, &mut rng).unwrap();
            let p = p.value();
            assert!((2..).take_while(|d| d * d <= p).all(|d| p % d != 0));
        }
    }

    #[test]
    fn encode_round_trip_and_range() {
        let be = TransparentBackend;
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (p, prms, secret) = be.inst_gen(30, 3, &mut rng).unwrap();
        assert_eq!(be.encode(&prms, &secret, set(&[1]), 0).unwrap().payload, 0);
        for _ in 0..100 {
            let a = p.random(&mut rng);
            let e = be.encode(&prms, &secret, set(&[2, 3]), a).unwrap();
            assert_eq!(be.decode(&e), a);
        }
        assert!(be.encode(&prms, &secret, set(&[1]), p.value()).is_err());
        assert!(be.encode(&prms, &secret, set(&[4]), 1).is_err());
    }

    #[test]
    fn jgen_shapes() {
        let be = TransparentBackend;
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let empty = FnSpecifier::new(2, 0, |_, _| Vec::new());
        let (_, x, puzzle) = jgen(&be, 16, &empty, &mut rng).unwrap();
        assert!(x.pairs.is_empty() && puzzle.encodings.is_empty());
        assert_eq!(puzzle.prms.k, 2);
        for _ in 0..50 {
            let ell = rng.gen_range(0..10);
            let spec = FnSpecifier::new(4, ell, move |p, r| {
                (0..ell)
                    .map(|_| (IndexSet::singleton(r.gen_range(1..=4)).unwrap(), p.random(r)))
                    .collect()
            });
            let (_, x, puzzle) = jgen(&be, 16, &spec, &mut rng).unwrap();
            assert_eq!(puzzle.encodings.len(), ell);
            assert!(puzzle.encodings.iter().zip(&x.pairs).all(|(e, (s, _))| e.level == *s));
        }
        let wrong = FnSpecifier::new(2, 3, |_, _| Vec::new());
        assert!(jgen(&be, 16, &wrong, &mut rng).is_err());
    }

    #[test]
    fn jver_zero_annihilates_and_nonzero_rejects() {
        let be = TransparentBackend;
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let zeros = FnSpecifier::new(2, 2, |_, _| vec![(set(&[1]), 0), (set(&[2]), 0)]);
        let (_, _, puzzle) = jgen(&be, 16, &zeros, &mut rng).unwrap();
        let mut b = FormBuilder::new(2, [set(&[1]), set(&[2])]).unwrap();
        let m = b.mul(0, 1);
        let f = b.finish(m);
        assert!(be.jver(&puzzle, &f).accept);

        let p = prime(7);
        let threes = FnSpecifier::new(2, 2, |_, _| vec![(set(&[1]), 1), (set(&[2]), 3)]);
        let (x, puzzle) = jgen_with_prime(&be, p, &threes, &mut rng).unwrap();
        assert_eq!(eval_form(&f, &x, 2).unwrap(), (set(&[1, 2]), 3));
        let v = be.jver(&puzzle, &f);
        assert!(!v.accept && v.diagnostic.is_none());

        let bad = FormBuilder::new(2, [set(&[1]), set(&[2])]).unwrap().finish(0);
        let v = be.jver(&puzzle, &bad);
        assert!(!v.accept && v.diagnostic.unwrap().starts_with("output-level"));
    }

    #[test]
    fn text_round_trips() {
        let mut b = FormBuilder::new(3, [set(&[1]), set(&[2, 3]), set(&[1])]).unwrap();
        let m = b.mul(0, 1);
        let n = b.neg(m);
        b.ignore_unused_inputs();
        let f = b.finish(n);
        let text = f.to_text();
        assert_eq!(
            text,
            "MF v1 3 3\n0 IN 1\n1 IN 2,3\n2 IN 1\n3 MUL 0 1 1,2,3\n4 NEG 3 1,2,3\n5 IGN 2 1\nout 4\n"
        );
        assert_eq!(MultilinearForm::parse(&text).unwrap(), f);
        assert!(MultilinearForm::parse(&text.replace("NEG 3", "NEG 3 3")).is_err());

        let puzzle = Puzzle {
            prms: Params {
                backend: "transparent".into(),
                k: 3,
                p: Some(prime(11)),
            },
            encodings: vec![
                Encoding {
                    level: set(&[1]),
                    payload: 4,
                },
                Encoding {
                    level: set(&[2, 3]),
                    payload: 10,
                },
            ],
        };
        let text = puzzle.to_text();
        assert_eq!(text, "PUZZLE v1 transparent 3 2 11\n1 4\n2,3 10\n");
        assert_eq!(Puzzle::parse(&text).unwrap(), puzzle);
        assert!(Puzzle::parse(&text.replace("10\n", "11\n")).is_err());
    }
}
