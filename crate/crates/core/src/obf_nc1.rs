//! Randomised branching programs over `Z_p`, their jigsaw encoding, the
//! zero-test form `F_chi`, input-fixing garbling and the NC1 obfuscator.
//!
//! Layout of a randomised program of length `n`: `m = 2n + 5`, dimension
//! `d = 2m + 5`. Each step matrix is block diagonal, `2m` random nonzero
//! diagonal entries followed by a scaled 5x5 permutation block. The dummy
//! program uses identity blocks. Bookends are zero on complementary halves
//! of the diagonal part, so only the 5x5 blocks reach the output:
//!
//! ```text
//! s = (0_m, v, s*)      t = (w, 0_m, t*)
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::barrington::{compile, compiled_length, input_sets, BpError, BranchingProgram, Perm};
use crate::circuit::universal::{build_universal, encode_circuit, fit_to_family, FamilyParams};
use crate::circuit::{Circuit, CircuitError};
use crate::mjp::{
    jgen_with_prime, EncodingBackend, FnSpecifier, FormBuilder, IndexSet, MjpError, MultilinearForm, Puzzle,
    TransparentBackend, MAX_K,
};
use crate::zmod::{gen_prime, sample_invertible, FieldMatrix, FieldVector, PrimeModulus, ZmodError};

/// Default bit length of the prime.
pub const DEFAULT_LAMBDA: u32 = 61;
/// Default cap on the branching-program length accepted by the obfuscator.
pub const DEFAULT_MAX_LEN: usize = 64;
/// Largest free-input count for exhaustive equivalence checks.
pub const MAX_FREE_BITS: usize = 20;

#[derive(Debug, Error)]
pub enum ObfError {
    #[error("program must have width 5 and accept_zero = I")]
    BadProgram,
    #[error(transparent)]
    Bp(#[from] BpError),
    #[error(transparent)]
    Mjp(#[from] MjpError),
    #[error(transparent)]
    Field(#[from] ZmodError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("{0}")]
    Limit(String),
    #[error("expected {expected} input bits, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("partial assignment: {0}")]
    Assignment(String),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Zero pattern of the bookend vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BookendPattern {
    /// `s = (0, v, s*)`, `t = (w, 0, t*)`.
    #[default]
    Complementary,
    /// `s = (0, v, s*)`, `t = (0, w, t*)`. Kept only to show that it breaks
    /// the zero test.
    SamePattern,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomizedBp {
    pub p: PrimeModulus,
    pub n: usize,
    pub ell: usize,
    pub m: usize,
    pub d: usize,
    /// Zero-based input read by each step.
    pub inp: Vec<usize>,
    /// `alpha[i][b]`, main program.
    pub alpha: Vec<[u128; 2]>,
    /// `alpha'[i][b]`, dummy program.
    pub alpha_dummy: Vec<[u128; 2]>,
    pub s: FieldVector,
    pub t: FieldVector,
    pub s_dummy: FieldVector,
    pub t_dummy: FieldVector,
    pub steps: Vec<[FieldMatrix; 2]>,
    pub dummy_steps: Vec<[FieldMatrix; 2]>,
}

pub fn dims(n: usize) -> (usize, usize) {
    let m = 2 * n + 5;
    (m, 2 * m + 5)
}

/// Randomise with the default bookend pattern. The Kilian matrices come
/// from a stream seeded off `rng` after everything else is drawn.
pub fn randomize<R: Rng + ?Sized>(
    bp: &BranchingProgram,
    p: PrimeModulus,
    rng: &mut R,
) -> Result<RandomizedBp, ObfError> {
    randomize_with(bp, p, BookendPattern::Complementary, rng)
}

pub fn randomize_with<R: Rng + ?Sized>(
    bp: &BranchingProgram,
    p: PrimeModulus,
    pattern: BookendPattern,
    rng: &mut R,
) -> Result<RandomizedBp, ObfError> {
    let plain = sample_plain(bp, p, pattern, rng)?;
    let mut kilian = ChaCha20Rng::from_seed(rng.gen());
    Ok(apply_kilian(bp, plain, &mut kilian))
}

/// Randomise drawing scalars, diagonals and bookends from `plain` and the
/// Kilian matrices `R_i`, `R'_i` from `kilian`.
pub fn randomize_split<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    bp: &BranchingProgram,
    p: PrimeModulus,
    pattern: BookendPattern,
    plain: &mut R1,
    kilian: &mut R2,
) -> Result<RandomizedBp, ObfError> {
    let plain = sample_plain(bp, p, pattern, plain)?;
    Ok(apply_kilian(bp, plain, kilian))
}

struct Plain {
    p: PrimeModulus,
    m: usize,
    d: usize,
    alpha: Vec<[u128; 2]>,
    alpha_dummy: Vec<[u128; 2]>,
    diag: Vec<[Vec<u128>; 2]>,
    diag_dummy: Vec<[Vec<u128>; 2]>,
    s: Vec<u128>,
    t: Vec<u128>,
    s_dummy: Vec<u128>,
    t_dummy: Vec<u128>,
}

fn sample_plain<R: Rng + ?Sized>(
    bp: &BranchingProgram,
    p: PrimeModulus,
    pattern: BookendPattern,
    rng: &mut R,
) -> Result<Plain, ObfError> {
    if bp.width() != 5 || !bp.accept_zero().is_identity() {
        return Err(ObfError::BadProgram);
    }
    let n = bp.len();
    let (m, d) = dims(n);

    let mut alpha = vec![[0u128; 2]; n];
    let mut alpha_dummy = vec![[0u128; 2]; n];
    for set in input_sets(bp) {
        let Some((&last, rest)) = set.split_last() else {
            continue;
        };
        for b in 0..2 {
            let mut target = 1;
            for &i in &set {
                alpha_dummy[i][b] = p.random_nonzero(rng);
                target = p.mul(target, alpha_dummy[i][b]);
            }
            let mut partial = 1;
            for &i in rest {
                alpha[i][b] = p.random_nonzero(rng);
                partial = p.mul(partial, alpha[i][b]);
            }
            alpha[last][b] = p.mul(target, p.inv(partial).expect("nonzero product"));
        }
    }

    let mut diag_draw = || -> [Vec<u128>; 2] { [0, 1].map(|_| (0..2 * m).map(|_| p.random_nonzero(rng)).collect()) };
    let diag: Vec<_> = (0..n).map(|_| diag_draw()).collect();
    let diag_dummy: Vec<_> = (0..n).map(|_| diag_draw()).collect();

    let mut uniform = |len: usize| -> Vec<u128> { (0..len).map(|_| p.random(rng)).collect() };
    let (v, v_dummy, w, w_dummy) = (uniform(m), uniform(m), uniform(m), uniform(m));
    let s_star = uniform(5);
    let t_star = uniform(5);
    let mut s_star_dummy = uniform(5);
    while s_star_dummy[4] == 0 {
        s_star_dummy = uniform(5);
    }
    let mut t_star_dummy = uniform(4);
    let target = p.dot(s_star.iter().zip(&t_star));
    let partial = p.dot(s_star_dummy[..4].iter().zip(&t_star_dummy));
    t_star_dummy.push(p.mul(p.sub(target, partial), p.inv(s_star_dummy[4]).expect("nonzero")));

    let zeros = vec![0u128; m];
    let left = |mid: &[u128], star: &[u128]| [&zeros[..], mid, star].concat();
    let right = |mid: &[u128], star: &[u128]| match pattern {
        BookendPattern::Complementary => [mid, &zeros[..], star].concat(),
        BookendPattern::SamePattern => [&zeros[..], mid, star].concat(),
    };
    Ok(Plain {
        p,
        m,
        d,
        alpha,
        alpha_dummy,
        diag,
        diag_dummy,
        s: left(&v, &s_star),
        t: right(&w, &t_star),
        s_dummy: left(&v_dummy, &s_star_dummy),
        t_dummy: right(&w_dummy, &t_star_dummy),
    })
}

/// `R_prev * D * R_next_inv` where `D` is `diag` followed by `scale * block`.
fn conjugate(r_prev: &FieldMatrix, diag: &[u128], scale: u128, block: &Perm, r_next_inv: &FieldMatrix) -> FieldMatrix {
    let p = r_prev.modulus();
    let d = r_prev.rows();
    let split = diag.len();
    let mut rd = vec![0u128; d * d];
    for r in 0..d {
        let row = r_prev.row(r);
        let out = &mut rd[r * d..(r + 1) * d];
        for c in 0..split {
            out[c] = p.mul(row[c], diag[c]);
        }
        for (k, &target) in block.images().iter().enumerate() {
            out[split + target as usize] = p.mul(row[split + k], scale);
        }
    }
    let rd = FieldMatrix::from_entries(p, d, d, rd).expect("square");
    rd.mul(r_next_inv).expect("same field and shape")
}

fn apply_kilian<R: Rng + ?Sized>(bp: &BranchingProgram, plain: Plain, rng: &mut R) -> RandomizedBp {
    let p = plain.p;
    let n = bp.len();
    let d = plain.d;
    let chain =
        |rng: &mut R| -> Vec<(FieldMatrix, FieldMatrix)> { (0..=n).map(|_| sample_invertible(p, d, rng)).collect() };
    let r = chain(rng);
    let r_dummy = chain(rng);
    let id5 = Perm::identity(5);
    let mut steps = Vec::with_capacity(n);
    let mut dummy_steps = Vec::with_capacity(n);
    for (i, step) in bp.steps().iter().enumerate() {
        steps.push([0, 1].map(|b| {
            let perm = if b == 0 { &step.on_zero } else { &step.on_one };
            conjugate(&r[i].0, &plain.diag[i][b], plain.alpha[i][b], perm, &r[i + 1].1)
        }));
        dummy_steps.push([0, 1].map(|b| {
            conjugate(
                &r_dummy[i].0,
                &plain.diag_dummy[i][b],
                plain.alpha_dummy[i][b],
                &id5,
                &r_dummy[i + 1].1,
            )
        }));
    }
    let vec = |v: Vec<u128>| FieldVector::from_values(p, v);
    let s = r[0].1.left_mul_vec(&vec(plain.s)).expect("shape");
    let t = r[n].0.mul_vec(&vec(plain.t)).expect("shape");
    let s_dummy = r_dummy[0].1.left_mul_vec(&vec(plain.s_dummy)).expect("shape");
    let t_dummy = r_dummy[n].0.mul_vec(&vec(plain.t_dummy)).expect("shape");
    RandomizedBp {
        p,
        n,
        ell: bp.input_count(),
        m: plain.m,
        d,
        inp: bp.inp_sequence(),
        alpha: plain.alpha,
        alpha_dummy: plain.alpha_dummy,
        s,
        t,
        s_dummy,
        t_dummy,
        steps,
        dummy_steps,
    }
}

/// Row vector times matrix without transposing.
fn vec_mat(p: PrimeModulus, v: &[u128], m: &FieldMatrix) -> Vec<u128> {
    let cols = m.cols();
    let data = m.entries();
    (0..cols)
        .map(|c| p.dot(v.iter().enumerate().map(|(r, x)| (x, &data[r * cols + c]))))
        .collect()
}

/// `F_chi` computed directly over `Z_p`.
pub fn f_chi(rbp: &RandomizedBp, chi: &[bool]) -> Result<u128, ObfError> {
    if chi.len() != rbp.ell {
        return Err(ObfError::Arity {
            expected: rbp.ell,
            found: chi.len(),
        });
    }
    let p = rbp.p;
    let run = |s: &FieldVector, steps: &[[FieldMatrix; 2]], t: &FieldVector| {
        let mut v = s.entries().to_vec();
        for (i, pair) in steps.iter().enumerate() {
            v = vec_mat(p, &v, &pair[usize::from(chi[rbp.inp[i]])]);
        }
        p.dot(v.iter().zip(t.entries()))
    };
    let main = run(&rbp.s, &rbp.steps, &rbp.t);
    let dummy = run(&rbp.s_dummy, &rbp.dummy_steps, &rbp.t_dummy);
    Ok(p.sub(main, dummy))
}

/// `J` and `sigma: J -> {0,1}`, positions zero-based and sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PartialAssignment {
    fixed: Vec<(usize, bool)>,
}

impl PartialAssignment {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut fixed: Vec<(usize, bool)>) -> Result<Self, ObfError> {
        fixed.sort();
        if fixed.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(ObfError::Assignment("position fixed twice".into()));
        }
        Ok(Self { fixed })
    }

    /// Fix positions `start..start + bits.len()` to `bits`.
    pub fn prefix(start: usize, bits: &[bool]) -> Self {
        Self {
            fixed: bits.iter().enumerate().map(|(i, &b)| (start + i, b)).collect(),
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.fixed.iter().map(|(j, _)| *j)
    }

    pub fn pairs(&self) -> &[(usize, bool)] {
        &self.fixed
    }

    pub fn get(&self, j: usize) -> Option<bool> {
        self.fixed.iter().find(|(i, _)| *i == j).map(|(_, b)| *b)
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn free_positions(&self, ell: usize) -> Vec<usize> {
        (0..ell).filter(|j| self.get(*j).is_none()).collect()
    }

    /// Full input from the fixed bits and `free` in order of free positions.
    pub fn merge(&self, ell: usize, free: &[bool]) -> Result<Vec<bool>, ObfError> {
        let positions = self.free_positions(ell);
        if free.len() != positions.len() {
            return Err(ObfError::Arity {
                expected: positions.len(),
                found: free.len(),
            });
        }
        let mut chi = vec![false; ell];
        for &(j, b) in &self.fixed {
            chi[j] = b;
        }
        for (&j, &b) in positions.iter().zip(free) {
            chi[j] = b;
        }
        Ok(chi)
    }
}

/// Do `F|sigma0` and `F|sigma1` agree on every free input?
pub fn functionally_equivalent(
    pa0: &PartialAssignment,
    pa1: &PartialAssignment,
    ell: usize,
    f: &dyn Fn(&[bool]) -> bool,
) -> Result<bool, ObfError> {
    if !pa0.positions().eq(pa1.positions()) {
        return Err(ObfError::Assignment("assignments fix different positions".into()));
    }
    if pa0.positions().any(|j| j >= ell) {
        return Err(ObfError::Assignment(format!("position outside 0..{ell}")));
    }
    let free = ell - pa0.len();
    if free > MAX_FREE_BITS {
        return Err(ObfError::Limit(format!(
            "{free} free inputs exceed the exhaustive bound {MAX_FREE_BITS}"
        )));
    }
    for x in crate::circuit::all_inputs(free) {
        if f(&pa0.merge(ell, &x)?) != f(&pa1.merge(ell, &x)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Shape of an encoded or garbled program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramLayout {
    pub n: usize,
    pub ell: usize,
    pub d: usize,
    pub inp: Vec<usize>,
    /// Which of `b = 0, 1` still has its matrices at each step.
    pub retained: Vec<[bool; 2]>,
    /// Input positions fixed by garbling.
    pub fixed: Vec<Option<bool>>,
}

impl ProgramLayout {
    pub fn k(&self) -> usize {
        self.n + 2
    }

    pub fn free_positions(&self) -> Vec<usize> {
        (0..self.ell).filter(|&j| self.fixed[j].is_none()).collect()
    }

    pub fn encoding_count(&self) -> usize {
        let mats: usize = self.retained.iter().map(|r| r.iter().filter(|b| **b).count()).sum();
        4 * self.d + 2 * mats * self.d * self.d
    }

    /// Puzzle offsets: `(s, s', per-step [main, dummy] start per bit, t, t')`.
    fn offsets(&self) -> Offsets {
        let d = self.d;
        let mut cursor = 2 * d;
        let mut steps = Vec::with_capacity(self.n);
        for r in &self.retained {
            let mut entry = [None, None];
            for b in 0..2 {
                if r[b] {
                    entry[b] = Some((cursor, cursor + d * d));
                    cursor += 2 * d * d;
                }
            }
            steps.push(entry);
        }
        Offsets {
            s: 0,
            s_dummy: d,
            steps,
            t: cursor,
            t_dummy: cursor + d,
        }
    }
}

struct Offsets {
    s: usize,
    s_dummy: usize,
    steps: Vec<[Option<(usize, usize)>; 2]>,
    t: usize,
    t_dummy: usize,
}

/// Encoded program; an encoded program is a garbled program with nothing
/// fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledProgram {
    pub layout: ProgramLayout,
    pub puzzle: Puzzle,
}

pub type EncodedBp = GarbledProgram;

impl GarbledProgram {
    pub fn p(&self) -> Option<PrimeModulus> {
        self.puzzle.prms.p
    }
}

fn level_of(layout_n: usize, position: Position) -> IndexSet {
    let i = match position {
        Position::Left => 1,
        Position::Step(i) => i + 2,
        Position::Right => layout_n + 2,
    };
    IndexSet::singleton(i).expect("k checked against MAX_K")
}

#[derive(Clone, Copy)]
enum Position {
    Left,
    /// Zero-based step.
    Step(usize),
    Right,
}

/// Level-ordered `(set, value)` list of a randomised program.
pub fn level_plan(rbp: &RandomizedBp) -> Vec<(IndexSet, u128)> {
    let n = rbp.n;
    let mut out = Vec::with_capacity(4 * rbp.d + 4 * n * rbp.d * rbp.d);
    let left = level_of(n, Position::Left);
    out.extend(rbp.s.entries().iter().chain(rbp.s_dummy.entries()).map(|&a| (left, a)));
    for i in 0..n {
        let level = level_of(n, Position::Step(i));
        for b in 0..2 {
            out.extend(rbp.steps[i][b].entries().iter().map(|&a| (level, a)));
            out.extend(rbp.dummy_steps[i][b].entries().iter().map(|&a| (level, a)));
        }
    }
    let right = level_of(n, Position::Right);
    out.extend(rbp.t.entries().iter().chain(rbp.t_dummy.entries()).map(|&a| (right, a)));
    out
}

/// Encode every entry at its level (`{1}` for the left bookends, `{i+1}`
/// for step `i`, `{n+2}` for the right bookends) through the generator.
pub fn encode_bp<B: EncodingBackend + ?Sized>(rbp: &RandomizedBp, backend: &B) -> Result<EncodedBp, ObfError> {
    let k = rbp.n + 2;
    if k > MAX_K {
        return Err(ObfError::Limit(format!(
            "program length {} needs k = {k} > {MAX_K}",
            rbp.n
        )));
    }
    let plan = level_plan(rbp);
    let count = plan.len();
    let cell = std::cell::Cell::new(Some(plan));
    let spec = FnSpecifier::new(k, count, move |_, _| cell.take().unwrap_or_default());
    // the specifier is deterministic; the generator draws nothing else
    let mut no_rng = rand::rngs::mock::StepRng::new(0, 0);
    let (_, puzzle) = jgen_with_prime(backend, rbp.p, &spec, &mut no_rng)?;
    Ok(GarbledProgram {
        layout: ProgramLayout {
            n: rbp.n,
            ell: rbp.ell,
            d: rbp.d,
            inp: rbp.inp.clone(),
            retained: vec![[true; 2]; rbp.n],
            fixed: vec![None; rbp.ell],
        },
        puzzle,
    })
}

/// Remove the matrices inconsistent with `pa`. Garbling a garbled program
/// fixes further inputs; fixing an input to a conflicting value fails.
pub fn garble(ebp: &GarbledProgram, pa: &PartialAssignment) -> Result<GarbledProgram, ObfError> {
    let layout = &ebp.layout;
    let mut fixed = layout.fixed.clone();
    for &(j, b) in pa.pairs() {
        if j >= layout.ell {
            return Err(ObfError::Assignment(format!(
                "position {} outside 1..={}",
                j + 1,
                layout.ell
            )));
        }
        if fixed[j].is_some_and(|old| old != b) {
            return Err(ObfError::Assignment(format!(
                "input {} is already fixed to the other value",
                j + 1
            )));
        }
        fixed[j] = Some(b);
    }
    let offsets = layout.offsets();
    let d = layout.d;
    let enc = &ebp.puzzle.encodings;
    let mut encodings = Vec::with_capacity(enc.len());
    encodings.extend_from_slice(&enc[offsets.s..offsets.s + 2 * d]);
    let mut retained = layout.retained.clone();
    for (i, slots) in offsets.steps.iter().enumerate() {
        if let Some(b) = fixed[layout.inp[i]] {
            retained[i][usize::from(!b)] = false;
        }
        for b in 0..2 {
            if let (true, Some((start, _))) = (retained[i][b], slots[b]) {
                encodings.extend_from_slice(&enc[start..start + 2 * d * d]);
            }
        }
    }
    encodings.extend_from_slice(&enc[offsets.t..offsets.t + 2 * d]);
    Ok(GarbledProgram {
        layout: ProgramLayout {
            retained,
            fixed,
            ..layout.clone()
        },
        puzzle: Puzzle {
            prms: ebp.puzzle.prms.clone(),
            encodings,
        },
    })
}

/// The form `F_chi` over the encodings retained in `layout`, in puzzle
/// order. Unused encodings feed IGN gates.
pub fn build_form(chi: &[bool], layout: &ProgramLayout) -> Result<MultilinearForm, ObfError> {
    if chi.len() != layout.ell {
        return Err(ObfError::Arity {
            expected: layout.ell,
            found: chi.len(),
        });
    }
    let n = layout.n;
    let d = layout.d;
    let offsets = layout.offsets();
    let mut levels = Vec::with_capacity(layout.encoding_count());
    levels.extend(std::iter::repeat_n(level_of(n, Position::Left), 2 * d));
    for (i, slots) in offsets.steps.iter().enumerate() {
        let count = slots.iter().flatten().count();
        levels.extend(std::iter::repeat_n(level_of(n, Position::Step(i)), count * 2 * d * d));
    }
    levels.extend(std::iter::repeat_n(level_of(n, Position::Right), 2 * d));
    let mut f = FormBuilder::new(layout.k(), levels)?;

    let mut chains = [0u32; 2];
    for (which, chain) in chains.iter_mut().enumerate() {
        let (s_start, t_start) = if which == 0 {
            (offsets.s, offsets.t)
        } else {
            (offsets.s_dummy, offsets.t_dummy)
        };
        let mut v: Vec<u32> = (0..d).map(|j| (s_start + j) as u32).collect();
        for (i, slots) in offsets.steps.iter().enumerate() {
            let b = usize::from(chi[layout.inp[i]]);
            let (main, dummy) = slots[b].ok_or_else(|| {
                ObfError::Assignment(format!("step {} has no matrix for bit {b}; input is fixed", i + 1))
            })?;
            let base = if which == 0 { main } else { dummy };
            let mut next = Vec::with_capacity(d);
            let mut terms = Vec::with_capacity(d);
            for c in 0..d {
                terms.clear();
                for (r, &vr) in v.iter().enumerate() {
                    terms.push(f.mul(vr, (base + r * d + c) as u32));
                }
                next.push(f.sum(&terms));
            }
            v = next;
        }
        let terms: Vec<u32> = v
            .iter()
            .enumerate()
            .map(|(j, &vj)| f.mul(vj, (t_start + j) as u32))
            .collect();
        *chain = f.sum(&terms);
    }
    let neg = f.neg(chains[1]);
    let out = f.add(chains[0], neg);
    f.ignore_unused_inputs();
    Ok(f.finish(out))
}

/// Evaluate on the free inputs, in order. Returns `false` when the verifier
/// accepts the zero test.
pub fn eval_obf(gp: &GarbledProgram, x: &[bool]) -> Result<bool, ObfError> {
    eval_obf_with(gp, x, &TransparentBackend)
}

pub fn eval_obf_with<B: EncodingBackend + ?Sized>(
    gp: &GarbledProgram,
    x: &[bool],
    backend: &B,
) -> Result<bool, ObfError> {
    let free = gp.layout.free_positions();
    if x.len() != free.len() {
        return Err(ObfError::Arity {
            expected: free.len(),
            found: x.len(),
        });
    }
    let mut chi: Vec<bool> = gp.layout.fixed.iter().map(|b| b.unwrap_or(false)).collect();
    for (&j, &bit) in free.iter().zip(x) {
        chi[j] = bit;
    }
    let form = build_form(&chi, &gp.layout)?;
    let verdict = backend.jver(&gp.puzzle, &form);
    if let Some(why) = verdict.diagnostic {
        return Err(ObfError::Format {
            line: 0,
            message: format!("verifier rejected the form: {why}"),
        });
    }
    Ok(!verdict.accept)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Compile the circuit itself; nothing is fixed.
    Direct,
    /// Compile the universal circuit of a family and fix the description bits.
    Universal(FamilyParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObfParams {
    pub mode: Mode,
    /// Use this prime instead of sampling one.
    pub prime: Option<PrimeModulus>,
    pub max_len: usize,
    pub pattern: BookendPattern,
}

impl Default for ObfParams {
    fn default() -> Self {
        Self {
            mode: Mode::Direct,
            prime: None,
            max_len: DEFAULT_MAX_LEN,
            pattern: BookendPattern::Complementary,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Direct => f.write_str("direct"),
            Mode::Universal(fam) => write!(f, "universal(g={}, l={})", fam.gates, fam.inputs),
        }
    }
}

fn check_length(len: u128, max_len: usize, what: &str) -> Result<(), ObfError> {
    if len > max_len as u128 {
        return Err(ObfError::Limit(format!(
            "{what} compiles to a branching program of length {len}, above the limit {max_len} (matrix dimension would be {})",
            len.saturating_mul(4).saturating_add(15)
        )));
    }
    Ok(())
}

/// Obfuscate `c`: compile, randomise, encode, garble.
pub fn obfuscate_nc1<R: Rng + ?Sized>(
    lambda: u32,
    c: &Circuit,
    params: &ObfParams,
    rng: &mut R,
) -> Result<GarbledProgram, ObfError> {
    let (bp, assignment) = match params.mode {
        Mode::Direct => {
            check_length(compiled_length(c), params.max_len, "the circuit")?;
            (compile(c), PartialAssignment::empty())
        }
        Mode::Universal(family) => {
            let member = fit_to_family(c, family)?;
            let description = encode_circuit(&member, family)?;
            let u = build_universal(family);
            check_length(
                compiled_length(&u),
                params.max_len,
                &format!(
                    "the universal circuit of family (g={}, l={})",
                    family.gates, family.inputs
                ),
            )?;
            (compile(&u), PartialAssignment::prefix(0, &description.bits))
        }
    };
    let p = match params.prime {
        Some(p) => p,
        None => gen_prime(lambda, rng)?,
    };
    let rbp = randomize_with(&bp, p, params.pattern, rng)?;
    let ebp = encode_bp(&rbp, &TransparentBackend)?;
    garble(&ebp, &assignment)
}

fn format_err(line: usize, message: impl Into<String>) -> ObfError {
    ObfError::Format {
        line,
        message: message.into(),
    }
}

impl GarbledProgram {
    pub fn to_text(&self) -> String {
        let l = &self.layout;
        let p = self.p().map_or(0, |p| p.value());
        let mut out = format!("GP v1 {p} {} {} {} {}\n", l.n, l.ell, l.k(), l.d);
        let inp: Vec<String> = l.inp.iter().map(|j| (j + 1).to_string()).collect();
        out.push_str(&format!("inp {}\n", inp.join(" ")).replace("inp \n", "inp\n"));
        let retained: Vec<&str> = l
            .retained
            .iter()
            .map(|r| match r {
                [true, true] => "01",
                [true, false] => "0",
                [false, true] => "1",
                [false, false] => "-",
            })
            .collect();
        out.push_str(&format!("retained {}\n", retained.join(" ")).replace("retained \n", "retained\n"));
        let fixed: String = l
            .fixed
            .iter()
            .map(|b| match b {
                None => '-',
                Some(false) => '0',
                Some(true) => '1',
            })
            .collect();
        out.push_str(&format!("fixed {fixed}\n"));
        out.push_str(&self.puzzle.to_text());
        out
    }

    pub fn parse(text: &str) -> Result<Self, ObfError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (_, header) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
        let h: Vec<&str> = header.split(' ').collect();
        if h.len() != 7 || h[0] != "GP" || h[1] != "v1" {
            return Err(format_err(1, "expected header `GP v1 p n ell k d`"));
        }
        let num = |s: &str| {
            s.parse::<u128>()
                .map_err(|_| format_err(1, format!("bad number `{s}`")))
        };
        let (p, n, ell, k, d) = (
            num(h[2])?,
            num(h[3])? as usize,
            num(h[4])? as usize,
            num(h[5])? as usize,
            num(h[6])? as usize,
        );
        if k != n + 2 || d != dims(n).1 || k > MAX_K {
            return Err(format_err(1, "inconsistent n, k, d"));
        }
        let mut field = |name: &str| -> Result<(usize, Vec<String>), ObfError> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| format_err(0, format!("missing `{name}` line")))?;
            let mut t = line.split(' ');
            if t.next() != Some(name) {
                return Err(format_err(no, format!("expected `{name}` line")));
            }
            Ok((no, t.map(str::to_string).collect()))
        };
        let (no, inp) = field("inp")?;
        if inp.len() != n {
            return Err(format_err(no, format!("expected {n} input indices")));
        }
        let inp = inp
            .iter()
            .map(|s| match s.parse::<usize>() {
                Ok(j) if (1..=ell).contains(&j) => Ok(j - 1),
                _ => Err(format_err(no, format!("bad input index `{s}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (no, retained) = field("retained")?;
        if retained.len() != n {
            return Err(format_err(no, format!("expected {n} retained entries")));
        }
        let retained = retained
            .iter()
            .map(|s| match s.as_str() {
                "01" => Ok([true, true]),
                "0" => Ok([true, false]),
                "1" => Ok([false, true]),
                "-" => Ok([false, false]),
                _ => Err(format_err(no, format!("bad retained entry `{s}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let (no, fixed) = field("fixed")?;
        let fixed: Vec<Option<bool>> = match fixed.as_slice() {
            [f] if f.len() == ell => f
                .chars()
                .map(|c| match c {
                    '-' => Ok(None),
                    '0' => Ok(Some(false)),
                    '1' => Ok(Some(true)),
                    _ => Err(format_err(no, format!("bad fixed entry `{c}`"))),
                })
                .collect::<Result<_, _>>()?,
            _ => return Err(format_err(no, format!("expected {ell} fixed entries"))),
        };
        for (i, r) in retained.iter().enumerate() {
            let want = match fixed[inp[i]] {
                None => [true, true],
                Some(b) => [!b, b],
            };
            if *r != want {
                return Err(format_err(
                    no,
                    format!("step {} retains matrices inconsistent with the fixed inputs", i + 1),
                ));
            }
        }
        let layout = ProgramLayout {
            n,
            ell,
            d,
            inp,
            retained,
            fixed,
        };
        let puzzle = Puzzle::parse_lines(&mut lines).map_err(|e| match e {
            MjpError::Format { line, message } => format_err(line, message),
            other => ObfError::Mjp(other),
        })?;
        if let Some((no, _)) = lines.next() {
            return Err(format_err(no, "trailing content"));
        }
        if puzzle.prms.k != k || puzzle.prms.p.map_or(0, |q| q.value()) != p {
            return Err(format_err(0, "puzzle header disagrees with program header"));
        }
        if puzzle.encodings.len() != layout.encoding_count() {
            return Err(format_err(
                0,
                format!(
                    "expected {} encodings, found {}",
                    layout.encoding_count(),
                    puzzle.encodings.len()
                ),
            ));
        }
        Ok(GarbledProgram { layout, puzzle })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrington::{eval_bp, BpOutput};
    use crate::circuit::tests::random_circuit;
    use crate::circuit::{all_inputs, parse_circuit};
    use crate::mjp::{validate_form, SpecifierOutput};

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn prime(p: u128) -> PrimeModulus {
        PrimeModulus::new(p).unwrap()
    }

    const XOR: &str = "input a\ninput b\ngate g XOR a b\noutput g\n";
    const AND: &str = "input a\ninput b\ngate g AND a b\noutput g\n";

    #[test]
    fn dimensions_follow_length() {
        assert_eq!(dims(2), (9, 23));
        let c = parse_circuit("input a\ninput b\ngate n NOT a\noutput n\n").unwrap();
        let bp = compile(&c);
        let bp = crate::barrington::pad_to(&bp, 2).unwrap();
        let rbp = randomize(&bp, prime(101), &mut rng(1)).unwrap();
        assert_eq!((rbp.m, rbp.d), (9, 23));
        for pair in rbp.steps.iter().chain(&rbp.dummy_steps) {
            for mat in pair {
                assert_eq!((mat.rows(), mat.cols()), (23, 23));
            }
        }
        assert_eq!(rbp.s.dim(), 23);
    }

    #[test]
    fn alpha_products_match_per_input() {
        let bp = compile(&parse_circuit(AND).unwrap());
        let p = prime(13);
        let mut r = rng(2);
        for _ in 0..50 {
            let rbp = randomize(&bp, p, &mut r).unwrap();
            for set in input_sets(&bp) {
                for b in 0..2 {
                    let lhs = set.iter().fold(1, |acc, &i| p.mul(acc, rbp.alpha[i][b]));
                    let rhs = set.iter().fold(1, |acc, &i| p.mul(acc, rbp.alpha_dummy[i][b]));
                    assert_eq!(lhs, rhs);
                    assert!(set.iter().all(|&i| rbp.alpha[i][b] != 0));
                }
            }
        }
    }

    #[test]
    fn zero_case_is_exact_and_one_case_is_not() {
        let c = parse_circuit(XOR).unwrap();
        let bp = compile(&c);
        let p = prime((1 << 61) - 1);
        let mut r = rng(3);
        for _ in 0..20 {
            let rbp = randomize(&bp, p, &mut r).unwrap();
            for x in all_inputs(2) {
                let f = f_chi(&rbp, &x).unwrap();
                match eval_bp(&bp, &x).unwrap() {
                    BpOutput::Zero => assert_eq!(f, 0),
                    _ => assert_ne!(f, 0),
                }
            }
        }
    }

    #[test]
    fn same_pattern_bookends_break_the_zero_test() {
        let bp = compile(&parse_circuit(XOR).unwrap());
        let p = prime(1_000_003);
        let mut r = rng(4);
        let nonzero = (0..20)
            .filter(|_| {
                let rbp = randomize_with(&bp, p, BookendPattern::SamePattern, &mut r).unwrap();
                f_chi(&rbp, &[false, false]).unwrap() != 0
            })
            .count();
        assert!(nonzero >= 19);
    }

    #[test]
    fn kilian_matrices_do_not_change_f_chi() {
        let bp = compile(&parse_circuit(AND).unwrap());
        let p = prime(1_000_003);
        let a = randomize_split(&bp, p, BookendPattern::Complementary, &mut rng(5), &mut rng(100)).unwrap();
        let b = randomize_split(&bp, p, BookendPattern::Complementary, &mut rng(5), &mut rng(200)).unwrap();
        assert_ne!(a.steps, b.steps);
        for x in all_inputs(2) {
            assert_eq!(f_chi(&a, &x).unwrap(), f_chi(&b, &x).unwrap());
        }
    }

    #[test]
    fn encoding_levels_and_counts() {
        let bp = compile(&parse_circuit(AND).unwrap());
        let rbp = randomize(&bp, prime(101), &mut rng(6)).unwrap();
        let ebp = encode_bp(&rbp, &TransparentBackend).unwrap();
        let (n, d) = (rbp.n, rbp.d);
        assert_eq!(n, 4);
        assert_eq!(ebp.puzzle.encodings.len(), 4 * d + 4 * n * d * d);
        assert_eq!(ebp.layout.k(), n + 2);
        let offsets = ebp.layout.offsets();
        let (start, dummy) = offsets.steps[2][1].unwrap();
        for e in &ebp.puzzle.encodings[start..dummy + d * d] {
            assert_eq!(e.level, IndexSet::singleton(4).unwrap());
        }
        let plan = level_plan(&rbp);
        assert!(ebp
            .puzzle
            .encodings
            .iter()
            .zip(&plan)
            .all(|(e, (s, a))| e.level == *s && e.payload == *a));
        assert_eq!(
            ebp.puzzle.encodings[offsets.t].level,
            IndexSet::singleton(n + 2).unwrap()
        );
    }

    #[test]
    fn form_validates_and_matches_direct_computation() {
        let mut r = rng(7);
        let p = prime(1_000_003);
        for c in [
            parse_circuit(XOR).unwrap(),
            parse_circuit("input a\noutput a\n").unwrap(),
        ] {
            let bp = compile(&c);
            let rbp = randomize(&bp, p, &mut r).unwrap();
            let ebp = encode_bp(&rbp, &TransparentBackend).unwrap();
            let x = SpecifierOutput {
                p,
                pairs: level_plan(&rbp),
            };
            for chi in all_inputs(c.input_count()) {
                let form = build_form(&chi, &ebp.layout).unwrap();
                assert_eq!(validate_form(&form, usize::MAX), Ok(()));
                let (set, value) = crate::mjp::eval_form(&form, &x, ebp.layout.k()).unwrap();
                assert_eq!(set, IndexSet::full(rbp.n + 2).unwrap());
                assert_eq!(value, f_chi(&rbp, &chi).unwrap());
            }
        }
    }

    #[test]
    fn garble_matches_restriction() {
        let mut r = rng(8);
        for _ in 0..6 {
            let c = random_circuit(&mut r, 3, 2);
            if compiled_length(&c) > 16 {
                continue;
            }
            let params = ObfParams::default();
            let ebp = obfuscate_nc1(DEFAULT_LAMBDA, &c, &params, &mut r).unwrap();
            assert_eq!(garble(&ebp, &PartialAssignment::empty()).unwrap(), ebp);
            let pa = PartialAssignment::new(vec![(1, true)]).unwrap();
            let gp = garble(&ebp, &pa).unwrap();
            assert!(gp
                .layout
                .retained
                .iter()
                .zip(&gp.layout.inp)
                .all(|(ret, &j)| j != 1 || *ret == [false, true]));
            for x in all_inputs(2) {
                let chi = pa.merge(3, &x).unwrap();
                let want = c.eval(&chi).unwrap();
                assert_eq!(eval_obf(&gp, &x).unwrap(), want);
                assert_eq!(eval_obf(&ebp, &chi).unwrap(), want);
            }
            let full = PartialAssignment::new(vec![(0, false), (1, true), (2, true)]).unwrap();
            let gp = garble(&ebp, &full).unwrap();
            assert!(gp.layout.retained.iter().all(|r| r.iter().filter(|b| **b).count() == 1));
            assert_eq!(eval_obf(&gp, &[]).unwrap(), c.eval(&[false, true, true]).unwrap());
        }
    }

    #[test]
    fn equivalence_of_assignments() {
        let xor = parse_circuit(XOR).unwrap();
        let f = |x: &[bool]| xor.eval(x).unwrap();
        let a = PartialAssignment::new(vec![(0, false)]).unwrap();
        let b = PartialAssignment::new(vec![(0, true)]).unwrap();
        assert!(functionally_equivalent(&a, &a, 2, &f).unwrap());
        assert!(!functionally_equivalent(&a, &b, 2, &f).unwrap());
        let dead = parse_circuit("input a\ninput b\ngate n NOT a\noutput n\n").unwrap();
        let g = |x: &[bool]| dead.eval(x).unwrap();
        let a = PartialAssignment::new(vec![(1, false)]).unwrap();
        let b = PartialAssignment::new(vec![(1, true)]).unwrap();
        assert!(functionally_equivalent(&a, &b, 2, &g).unwrap());
        let c = PartialAssignment::new(vec![(0, true)]).unwrap();
        assert!(functionally_equivalent(&a, &c, 2, &g).is_err());
    }

    #[test]
    fn direct_xor_and_text_round_trip() {
        let c = parse_circuit(XOR).unwrap();
        let gp = obfuscate_nc1(DEFAULT_LAMBDA, &c, &ObfParams::default(), &mut rng(9)).unwrap();
        for x in all_inputs(2) {
            assert_eq!(eval_obf(&gp, &x).unwrap(), x[0] ^ x[1]);
        }
        assert!(matches!(eval_obf(&gp, &[true]), Err(ObfError::Arity { .. })));
        let text = gp.to_text();
        assert!(text.starts_with(&format!(
            "GP v1 {} 4 2 6 31\ninp 1 2 1 2\nretained 01 01 01 01\nfixed --\nPUZZLE v1 transparent 6 ",
            gp.p().unwrap()
        )));
        assert_eq!(GarbledProgram::parse(&text).unwrap(), gp);
        let again = obfuscate_nc1(DEFAULT_LAMBDA, &c, &ObfParams::default(), &mut rng(9)).unwrap();
        assert_eq!(again.to_text(), text);
        assert!(GarbledProgram::parse(&text.replacen("retained 01", "retained 0", 1)).is_err());
        let short = &text[..text.trim_end().rfind('\n').unwrap() + 1];
        assert!(GarbledProgram::parse(short).is_err());
    }

    #[test]
    fn universal_mode_tiny_family() {
        let fam = FamilyParams::new(1, 1).unwrap();
        let params = ObfParams {
            mode: Mode::Universal(fam),
            ..ObfParams::default()
        };
        let mut r = rng(10);
        let mut shapes = Vec::new();
        for c in fam.members() {
            let gp = obfuscate_nc1(DEFAULT_LAMBDA, &c, &params, &mut r).unwrap();
            assert_eq!(gp.layout.free_positions(), vec![2]);
            for m in all_inputs(1) {
                assert_eq!(eval_obf(&gp, &m).unwrap(), c.eval(&m).unwrap(), "{c}");
            }
            shapes.push((
                gp.layout.n,
                gp.layout.k(),
                gp.layout.inp.clone(),
                gp.puzzle.encodings.len(),
            ));
        }
        assert!(shapes.windows(2).all(|w| w[0] == w[1]));

        let big = ObfParams {
            mode: Mode::Universal(FamilyParams::new(2, 2).unwrap()),
            ..ObfParams::default()
        };
        let xor = parse_circuit(XOR).unwrap();
        assert!(matches!(
            obfuscate_nc1(DEFAULT_LAMBDA, &xor, &big, &mut r),
            Err(ObfError::Limit(_))
        ));
    }
}
