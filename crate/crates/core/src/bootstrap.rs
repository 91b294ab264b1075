//! From NC1 to polynomial-size circuits: an FHE interface, a proof-system
//! interface, the two-track programs P1/P2, the Obfuscate/Evaluate pipeline
//! and the five-step hybrid chain.
//!
//! The reference FHE and proof system here are plumbing. They are exactly
//! correct and perfectly sound, and they hide nothing.

use std::fmt;

use rand::{Rng, RngCore};
use thiserror::Error;

use crate::circuit::universal::{build_universal, encode_circuit, fit_to_family, shortest_formula, FamilyParams};
use crate::circuit::{Circuit, CircuitError, Folder, GateOp, Wire};
use crate::obf_nc1::{
    eval_obf, obfuscate_nc1, GarbledProgram, Mode, ObfError, ObfParams, DEFAULT_LAMBDA, DEFAULT_MAX_LEN,
};
use crate::zmod::PrimeModulus;

#[derive(Debug, Error)]
pub enum BootError {
    #[error("ciphertext was not produced under this key")]
    KeyMismatch,
    #[error("expected {expected} bits, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("circuits are not functionally equivalent")]
    NotEquivalent,
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Obf(#[from] ObfError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

fn format_err(line: usize, message: impl Into<String>) -> BootError {
    BootError::Format {
        line,
        message: message.into(),
    }
}

/// Fully homomorphic encryption over bit strings. `eval` must be
/// deterministic so that evaluations can be recomputed by a verifier.
pub trait FheScheme: Clone + fmt::Debug + PartialEq {
    type PublicKey: Clone + fmt::Debug + PartialEq;
    type SecretKey: Clone + fmt::Debug + PartialEq;
    type Ciphertext: Clone + fmt::Debug + PartialEq;

    fn id(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn is_secure(&self) -> bool;
    fn keygen(&self, lambda: u32, rng: &mut dyn RngCore) -> (Self::PublicKey, Self::SecretKey);
    fn enc(&self, pk: &Self::PublicKey, m: &[bool], rng: &mut dyn RngCore) -> Self::Ciphertext;
    fn dec(&self, sk: &Self::SecretKey, ct: &Self::Ciphertext) -> Result<Vec<bool>, BootError>;
    /// Encryption of `f` applied to the concatenated plaintexts of `cts`.
    fn eval(&self, pk: &Self::PublicKey, f: &Circuit, cts: &[Self::Ciphertext]) -> Result<Self::Ciphertext, BootError>;
    /// Canonical bit string of a ciphertext, as fed to circuits.
    fn ciphertext_bits(&self, ct: &Self::Ciphertext) -> Vec<bool>;

    fn pk_to_text(&self, pk: &Self::PublicKey) -> String;
    fn pk_from_text(&self, text: &str) -> Result<Self::PublicKey, BootError>;
    fn sk_to_text(&self, sk: &Self::SecretKey) -> String;
    fn sk_from_text(&self, text: &str) -> Result<Self::SecretKey, BootError>;
    fn ct_to_text(&self, ct: &Self::Ciphertext) -> String;
    fn ct_from_text(&self, text: &str) -> Result<Self::Ciphertext, BootError>;
}

/// Transparent reference scheme: a key is a random tag, a ciphertext is the
/// tag next to the plaintext. Correct and deterministic, with no secrecy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefFhe {
    tag_bits: u32,
}

pub const DEFAULT_TAG_BITS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefKey {
    pub tag: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefCiphertext {
    pub tag: u64,
    pub bits: Vec<bool>,
}

impl Default for RefFhe {
    fn default() -> Self {
        Self::new(DEFAULT_TAG_BITS)
    }
}

impl RefFhe {
    /// `tag_bits` is at most 64. Zero gives a scheme whose keys all match,
    /// which keeps the decryption circuit tiny.
    pub fn new(tag_bits: u32) -> Self {
        Self {
            tag_bits: tag_bits.min(64),
        }
    }

    pub fn tag_bits(&self) -> u32 {
        self.tag_bits
    }

    fn mask(&self) -> u64 {
        match self.tag_bits {
            64 => u64::MAX,
            b => (1u64 << b) - 1,
        }
    }

    fn parse_key(&self, text: &str) -> Result<RefKey, BootError> {
        let tag = text
            .trim()
            .parse::<u64>()
            .map_err(|_| format_err(0, format!("bad key `{}`", text.trim())))?;
        if tag & !self.mask() != 0 {
            return Err(format_err(0, "key tag wider than the scheme's tag"));
        }
        Ok(RefKey { tag })
    }
}

impl FheScheme for RefFhe {
    type PublicKey = RefKey;
    type SecretKey = RefKey;
    type Ciphertext = RefCiphertext;

    fn id(&self) -> &'static str {
        "ref"
    }

    fn description(&self) -> &'static str {
        "transparent reference FHE: ciphertexts carry their plaintext in the clear; INSECURE, for functional testing only"
    }

    fn is_secure(&self) -> bool {
        false
    }

    fn keygen(&self, _lambda: u32, rng: &mut dyn RngCore) -> (RefKey, RefKey) {
        let tag = rng.next_u64() & self.mask();
        (RefKey { tag }, RefKey { tag })
    }

    fn enc(&self, pk: &RefKey, m: &[bool], _rng: &mut dyn RngCore) -> RefCiphertext {
        RefCiphertext {
            tag: pk.tag,
            bits: m.to_vec(),
        }
    }

    fn dec(&self, sk: &RefKey, ct: &RefCiphertext) -> Result<Vec<bool>, BootError> {
        if ct.tag != sk.tag {
            return Err(BootError::KeyMismatch);
        }
        Ok(ct.bits.clone())
    }

    fn eval(&self, pk: &RefKey, f: &Circuit, cts: &[RefCiphertext]) -> Result<RefCiphertext, BootError> {
        if cts.iter().any(|ct| ct.tag != pk.tag) {
            return Err(BootError::KeyMismatch);
        }
        let x: Vec<bool> = cts.iter().flat_map(|ct| ct.bits.iter().copied()).collect();
        if x.len() != f.input_count() {
            return Err(BootError::Arity {
                expected: f.input_count(),
                found: x.len(),
            });
        }
        Ok(RefCiphertext {
            tag: pk.tag,
            bits: vec![f.eval(&x)?],
        })
    }

    fn ciphertext_bits(&self, ct: &RefCiphertext) -> Vec<bool> {
        let mut out: Vec<bool> = (0..self.tag_bits).rev().map(|i| (ct.tag >> i) & 1 == 1).collect();
        out.extend(&ct.bits);
        out
    }

    fn pk_to_text(&self, pk: &RefKey) -> String {
        pk.tag.to_string()
    }

    fn pk_from_text(&self, text: &str) -> Result<RefKey, BootError> {
        self.parse_key(text)
    }

    fn sk_to_text(&self, sk: &RefKey) -> String {
        sk.tag.to_string()
    }

    fn sk_from_text(&self, text: &str) -> Result<RefKey, BootError> {
        self.parse_key(text)
    }

    fn ct_to_text(&self, ct: &RefCiphertext) -> String {
        let bits: String = ct.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        format!("{} {}", ct.tag, if bits.is_empty() { "-".into() } else { bits })
    }

    fn ct_from_text(&self, text: &str) -> Result<RefCiphertext, BootError> {
        let (tag, bits) = text
            .trim()
            .split_once(' ')
            .ok_or_else(|| format_err(0, "ciphertext needs `tag bits`"))?;
        let tag = self.parse_key(tag)?.tag;
        let bits = match bits {
            "-" => Vec::new(),
            s => crate::circuit::parse_bits(s).map_err(|e| format_err(0, e.to_string()))?,
        };
        Ok(RefCiphertext { tag, bits })
    }
}

/// Adversary in the left-or-right CPA game.
pub trait CpaAdversary<F: FheScheme> {
    fn choose(&mut self, pk: &F::PublicKey, rng: &mut dyn RngCore) -> (Vec<bool>, Vec<bool>);
    fn guess(&mut self, pk: &F::PublicKey, ct: &F::Ciphertext, rng: &mut dyn RngCore) -> bool;
}

/// Guesses a coin flip.
pub struct RandomGuess;

impl<F: FheScheme> CpaAdversary<F> for RandomGuess {
    fn choose(&mut self, _pk: &F::PublicKey, _rng: &mut dyn RngCore) -> (Vec<bool>, Vec<bool>) {
        (vec![false], vec![true])
    }

    fn guess(&mut self, _pk: &F::PublicKey, _ct: &F::Ciphertext, rng: &mut dyn RngCore) -> bool {
        rng.gen()
    }
}

/// Reads the plaintext straight out of a reference ciphertext.
pub struct PlaintextReader;

impl CpaAdversary<RefFhe> for PlaintextReader {
    fn choose(&mut self, _pk: &RefKey, _rng: &mut dyn RngCore) -> (Vec<bool>, Vec<bool>) {
        (vec![false], vec![true])
    }

    fn guess(&mut self, _pk: &RefKey, ct: &RefCiphertext, _rng: &mut dyn RngCore) -> bool {
        ct.bits.first().copied().unwrap_or(false)
    }
}

/// `|Pr[win] - 1/2|` over `trials` games, each with fresh keys and a fresh
/// hidden bit.
pub fn ind_cpa_game<F: FheScheme>(
    scheme: &F,
    adversary: &mut dyn CpaAdversary<F>,
    trials: usize,
    rng: &mut dyn RngCore,
) -> Result<f64, BootError> {
    if trials == 0 {
        return Err(BootError::Protocol("at least one trial is needed".into()));
    }
    let mut wins = 0usize;
    for _ in 0..trials {
        let (pk, _sk) = scheme.keygen(DEFAULT_LAMBDA, rng);
        let (m0, m1) = adversary.choose(&pk, rng);
        if m0.len() != m1.len() {
            return Err(BootError::Protocol("challenge messages differ in length".into()));
        }
        let b: bool = rng.gen();
        let ct = scheme.enc(&pk, if b { &m1 } else { &m0 }, rng);
        if adversary.guess(&pk, &ct, rng) == b {
            wins += 1;
        }
    }
    Ok((wins as f64 / trials as f64 - 0.5).abs())
}

/// `U(., m)`: the universal circuit of `family` with the data inputs fixed,
/// leaving the description bits free.
pub fn universal_at(family: FamilyParams, m: &[bool]) -> Result<Circuit, BootError> {
    if m.len() != family.inputs {
        return Err(BootError::Arity {
            expected: family.inputs,
            found: m.len(),
        });
    }
    let len = family.encoding_len();
    let fixed: Vec<(usize, bool)> = m.iter().enumerate().map(|(i, &b)| (len + i, b)).collect();
    Ok(build_universal(family).restrict(&fixed)?)
}

/// `U(g, .)`: the universal circuit with the description fixed.
fn universal_with(family: FamilyParams, description: &[bool]) -> Result<Circuit, BootError> {
    if description.len() != family.encoding_len() {
        return Err(BootError::Arity {
            expected: family.encoding_len(),
            found: description.len(),
        });
    }
    let fixed: Vec<(usize, bool)> = description.iter().enumerate().map(|(i, &b)| (i, b)).collect();
    Ok(build_universal(family).restrict(&fixed)?)
}

/// Claim: `e1 = Eval(pk1, U(., m), g1)` and `e2 = Eval(pk2, U(., m), g2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStatement<F: FheScheme> {
    pub m: Vec<bool>,
    pub e1: F::Ciphertext,
    pub e2: F::Ciphertext,
    pub g1: F::Ciphertext,
    pub g2: F::Ciphertext,
    pub pk1: F::PublicKey,
    pub pk2: F::PublicKey,
    pub family: FamilyParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Proof(pub Vec<u8>);

pub trait ProofSystem<F: FheScheme> {
    fn id(&self) -> &'static str;
    /// The statement is decidable from public data, so no separate witness
    /// is taken.
    fn prove(&self, st: &EvalStatement<F>) -> Proof;
    fn verify(&self, st: &EvalStatement<F>, proof: &Proof) -> bool;
}

/// Empty proofs; the verifier recomputes both evaluations. Perfectly sound
/// because `eval` is deterministic. Not witness-indistinguishable.
#[derive(Debug, Clone)]
pub struct RecomputeProofs<F> {
    fhe: F,
}

impl<F: FheScheme> RecomputeProofs<F> {
    pub fn new(fhe: F) -> Self {
        Self { fhe }
    }
}

impl<F: FheScheme> ProofSystem<F> for RecomputeProofs<F> {
    fn id(&self) -> &'static str {
        "recompute"
    }

    fn prove(&self, _st: &EvalStatement<F>) -> Proof {
        Proof::default()
    }

    fn verify(&self, st: &EvalStatement<F>, proof: &Proof) -> bool {
        if !proof.0.is_empty() {
            return false;
        }
        let Ok(u) = universal_at(st.family, &st.m) else {
            return false;
        };
        let check = |pk: &F::PublicKey, g: &F::Ciphertext, e: &F::Ciphertext| {
            self.fhe
                .eval(pk, &u, std::slice::from_ref(g))
                .is_ok_and(|want| want == *e)
        };
        check(&st.pk1, &st.g1, &st.e1) && check(&st.pk2, &st.g2, &st.e2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub fn number(self) -> u8 {
        match self {
            Branch::One => 1,
            Branch::Two => 2,
        }
    }
}

/// `P1` or `P2`: verify the proof, then decrypt `e1` (branch one) or `e2`
/// (branch two) with the embedded secret key.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramP<F: FheScheme> {
    pub branch: Branch,
    pub sk: F::SecretKey,
    pub pk1: F::PublicKey,
    pub pk2: F::PublicKey,
    pub g1: F::Ciphertext,
    pub g2: F::Ciphertext,
    pub family: FamilyParams,
}

pub fn program_p<F: FheScheme>(
    branch: Branch,
    sk: F::SecretKey,
    pk1: F::PublicKey,
    pk2: F::PublicKey,
    g1: F::Ciphertext,
    g2: F::Ciphertext,
    family: FamilyParams,
) -> ProgramP<F> {
    ProgramP {
        branch,
        sk,
        pk1,
        pk2,
        g1,
        g2,
        family,
    }
}

/// Output of `P` on `(m, e1, e2, phi)`; `false` doubles as the rejection value.
pub fn run_p<F: FheScheme>(
    fhe: &F,
    proofs: &dyn ProofSystem<F>,
    p: &ProgramP<F>,
    m: &[bool],
    e1: &F::Ciphertext,
    e2: &F::Ciphertext,
    phi: &Proof,
) -> bool {
    let st = EvalStatement {
        m: m.to_vec(),
        e1: e1.clone(),
        e2: e2.clone(),
        g1: p.g1.clone(),
        g2: p.g2.clone(),
        pk1: p.pk1.clone(),
        pk2: p.pk2.clone(),
        family: p.family,
    };
    if !proofs.verify(&st, phi) {
        return false;
    }
    let e = match p.branch {
        Branch::One => e1,
        Branch::Two => e2,
    };
    matches!(fhe.dec(&p.sk, e).as_deref(), Ok([true]))
}

/// Schemes whose verification and decryption can be written as a circuit
/// over the bits of `(m, e1, e2)`.
pub trait FheCircuits: FheScheme {
    fn program_circuit(&self, p: &ProgramP<Self>) -> Result<Circuit, BootError>
    where
        Self: Sized;
}

impl FheCircuits for RefFhe {
    /// Inputs `m`, then `bits(e1)`, then `bits(e2)`; the reference proof is
    /// empty so it contributes no inputs. With at most three inputs the
    /// circuit is replaced by the shortest equivalent formula.
    fn program_circuit(&self, p: &ProgramP<Self>) -> Result<Circuit, BootError> {
        let family = p.family;
        let l = family.inputs;
        let tb = self.tag_bits as usize;
        let names: Vec<String> = (1..=l)
            .map(|i| format!("m{i}"))
            .chain((1..=tb + 1).map(|i| format!("a{i}")))
            .chain((1..=tb + 1).map(|i| format!("b{i}")))
            .collect();
        let mut f = Folder::new(names);
        let m: Vec<Wire> = (0..l).map(Wire::Input).collect();
        let mut checks = Vec::new();
        let mut values = Vec::new();
        let mut honest = true;
        for (k, (pk, g)) in [(&p.pk1, &p.g1), (&p.pk2, &p.g2)].into_iter().enumerate() {
            let base = l + k * (tb + 1);
            honest &= g.tag == pk.tag && g.bits.len() == family.encoding_len();
            for i in 0..tb {
                let bit = (pk.tag >> (tb - 1 - i)) & 1 == 1;
                let w = Wire::Input(base + i);
                checks.push(if bit { w } else { f.gate(GateOp::Not, vec![w]) });
            }
            let value = Wire::Input(base + tb);
            values.push(value);
            if honest {
                let u = universal_with(family, &g.bits)?;
                let want = f.inline(&u, &m);
                let diff = f.gate(GateOp::Xor, vec![value, want]);
                checks.push(f.gate(GateOp::Not, vec![diff]));
            }
        }
        let branch = values[usize::from(p.branch == Branch::Two)];
        let key_ok = p.sk.tag == [p.pk1.tag, p.pk2.tag][usize::from(p.branch == Branch::Two)];
        let out = if honest && key_ok {
            checks.push(branch);
            let mut acc = checks[0];
            for &w in &checks[1..] {
                acc = f.gate(GateOp::And, vec![acc, w]);
            }
            acc
        } else {
            let x = Wire::Input(0);
            let not_x = f.gate(GateOp::Not, vec![x]);
            f.gate(GateOp::And, vec![x, not_x])
        };
        let c = f.finish_wire(out);
        Ok(shortest_formula(&c).unwrap_or(c))
    }
}

/// `P` after the NC1 obfuscator.
#[derive(Debug, Clone, PartialEq)]
pub enum ObfuscatedP<F: FheScheme> {
    /// The identity obfuscator: `P` itself.
    Plain(ProgramP<F>),
    Garbled(GarbledP),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledP {
    pub branch: Branch,
    pub program: GarbledProgram,
}

impl<F: FheScheme> ObfuscatedP<F> {
    pub fn branch(&self) -> Branch {
        match self {
            ObfuscatedP::Plain(p) => p.branch,
            ObfuscatedP::Garbled(g) => g.branch,
        }
    }

    pub fn run(
        &self,
        fhe: &F,
        proofs: &dyn ProofSystem<F>,
        m: &[bool],
        e1: &F::Ciphertext,
        e2: &F::Ciphertext,
        phi: &Proof,
    ) -> bool {
        match self {
            ObfuscatedP::Plain(p) => run_p(fhe, proofs, p, m, e1, e2, phi),
            ObfuscatedP::Garbled(g) => {
                if !phi.0.is_empty() {
                    return false;
                }
                let mut x = m.to_vec();
                x.extend(fhe.ciphertext_bits(e1));
                x.extend(fhe.ciphertext_bits(e2));
                // wrong-length inputs cannot come from an honest evaluation
                eval_obf(&g.program, &x).unwrap_or(false)
            }
        }
    }
}

/// An obfuscator for the NC1 programs `P1`, `P2`.
pub trait Nc1Obfuscator<F: FheScheme> {
    fn id(&self) -> &'static str;
    fn obfuscate(&self, fhe: &F, p: &ProgramP<F>, rng: &mut dyn RngCore) -> Result<ObfuscatedP<F>, BootError>;
}

/// Pass-through; lets the pipeline run at sizes the garbled obfuscator
/// cannot reach.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityNc1;

impl<F: FheScheme> Nc1Obfuscator<F> for IdentityNc1 {
    fn id(&self) -> &'static str {
        "identity"
    }

    fn obfuscate(&self, _fhe: &F, p: &ProgramP<F>, _rng: &mut dyn RngCore) -> Result<ObfuscatedP<F>, BootError> {
        Ok(ObfuscatedP::Plain(p.clone()))
    }
}

/// Compile `P` to a circuit and run the branching-program obfuscator on it
/// in direct mode.
#[derive(Debug, Clone, Copy)]
pub struct GarbledNc1 {
    pub lambda: u32,
    pub prime: Option<PrimeModulus>,
    pub max_len: usize,
}

impl Default for GarbledNc1 {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            prime: None,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl<F: FheCircuits> Nc1Obfuscator<F> for GarbledNc1 {
    fn id(&self) -> &'static str {
        "garbled"
    }

    fn obfuscate(&self, fhe: &F, p: &ProgramP<F>, rng: &mut dyn RngCore) -> Result<ObfuscatedP<F>, BootError> {
        let c = fhe.program_circuit(p)?;
        let params = ObfParams {
            mode: Mode::Direct,
            prime: self.prime,
            max_len: self.max_len,
            ..ObfParams::default()
        };
        let program = obfuscate_nc1(self.lambda, &c, &params, rng)?;
        Ok(ObfuscatedP::Garbled(GarbledP {
            branch: p.branch,
            program,
        }))
    }
}

/// `(P, pk1, pk2, g1, g2)` plus the family that fixes `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObfuscationBundle<F: FheScheme> {
    pub p: ObfuscatedP<F>,
    pub pk1: F::PublicKey,
    pub pk2: F::PublicKey,
    pub g1: F::Ciphertext,
    pub g2: F::Ciphertext,
    pub family: FamilyParams,
}

/// Smallest family holding `c`: its gate count (at least one) over its inputs.
pub fn family_for(c: &Circuit) -> Result<FamilyParams, BootError> {
    Ok(FamilyParams::new(c.size().max(1), c.input_count())?)
}

fn description(c: &Circuit, family: FamilyParams) -> Result<Vec<bool>, BootError> {
    Ok(encode_circuit(&fit_to_family(c, family)?, family)?.bits)
}

struct Keys<F: FheScheme> {
    pk1: F::PublicKey,
    sk1: F::SecretKey,
    pk2: F::PublicKey,
    sk2: F::SecretKey,
}

fn keys<F: FheScheme>(fhe: &F, lambda: u32, rng: &mut dyn RngCore) -> Keys<F> {
    let (pk1, sk1) = fhe.keygen(lambda, rng);
    let (pk2, sk2) = fhe.keygen(lambda, rng);
    Keys { pk1, sk1, pk2, sk2 }
}

/// Assemble a bundle from explicit plaintexts and branch.
fn assemble<F: FheScheme>(
    fhe: &F,
    io: &dyn Nc1Obfuscator<F>,
    k: &Keys<F>,
    family: FamilyParams,
    plain1: &[bool],
    plain2: &[bool],
    branch: Branch,
    rng: &mut dyn RngCore,
) -> Result<ObfuscationBundle<F>, BootError> {
    let g1 = fhe.enc(&k.pk1, plain1, rng);
    let g2 = fhe.enc(&k.pk2, plain2, rng);
    let sk = match branch {
        Branch::One => k.sk1.clone(),
        Branch::Two => k.sk2.clone(),
    };
    let p = program_p(branch, sk, k.pk1.clone(), k.pk2.clone(), g1.clone(), g2.clone(), family);
    Ok(ObfuscationBundle {
        p: io.obfuscate(fhe, &p, rng)?,
        pk1: k.pk1.clone(),
        pk2: k.pk2.clone(),
        g1,
        g2,
        family,
    })
}

/// Two key pairs, `g_i = Enc(pk_i, c)`, `P = iO(P1)`.
pub fn obfuscate_polysize<F: FheScheme>(
    lambda: u32,
    c: &Circuit,
    io: &dyn Nc1Obfuscator<F>,
    fhe: &F,
    rng: &mut dyn RngCore,
) -> Result<ObfuscationBundle<F>, BootError> {
    let family = family_for(c)?;
    let bits = description(c, family)?;
    let k = keys(fhe, lambda, rng);
    assemble(fhe, io, &k, family, &bits, &bits, Branch::One, rng)
}

/// Homomorphically run `U(., m)` on both ciphertexts, prove, and run `P`.
pub fn evaluate<F: FheScheme>(
    bundle: &ObfuscationBundle<F>,
    m: &[bool],
    fhe: &F,
    proofs: &dyn ProofSystem<F>,
) -> Result<bool, BootError> {
    let u = universal_at(bundle.family, m)?;
    let e1 = fhe.eval(&bundle.pk1, &u, std::slice::from_ref(&bundle.g1))?;
    let e2 = fhe.eval(&bundle.pk2, &u, std::slice::from_ref(&bundle.g2))?;
    let st = EvalStatement {
        m: m.to_vec(),
        e1: e1.clone(),
        e2: e2.clone(),
        g1: bundle.g1.clone(),
        g2: bundle.g2.clone(),
        pk1: bundle.pk1.clone(),
        pk2: bundle.pk2.clone(),
        family: bundle.family,
    };
    let phi = proofs.prove(&st);
    Ok(bundle.p.run(fhe, proofs, m, &e1, &e2, &phi))
}

/// The five bundles `Hyb0..Hyb4` between `c0` and `c1`, sharing keys:
///
/// | | g1 | g2 | P |
/// |---|---|---|---|
/// | 0 | c0 | c0 | P1 |
/// | 1 | c0 | c1 | P1 |
/// | 2 | c0 | c1 | P2 |
/// | 3 | c1 | c1 | P2 |
/// | 4 | c1 | c1 | P1 |
pub fn hybrid_chain<F: FheScheme>(
    c0: &Circuit,
    c1: &Circuit,
    io: &dyn Nc1Obfuscator<F>,
    fhe: &F,
    rng: &mut dyn RngCore,
) -> Result<Vec<ObfuscationBundle<F>>, BootError> {
    if c0.input_count() != c1.input_count() || c0.truth_table() != c1.truth_table() {
        return Err(BootError::NotEquivalent);
    }
    let family = FamilyParams::new(c0.size().max(c1.size()).max(1), c0.input_count())?;
    let d0 = description(c0, family)?;
    let d1 = description(c1, family)?;
    let k = keys(fhe, DEFAULT_LAMBDA, rng);
    let plan = [
        (&d0, &d0, Branch::One),
        (&d0, &d1, Branch::One),
        (&d0, &d1, Branch::Two),
        (&d1, &d1, Branch::Two),
        (&d1, &d1, Branch::One),
    ];
    plan.into_iter()
        .map(|(a, b, branch)| assemble(fhe, io, &k, family, a, b, branch, rng))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BundlePart {
    Keys,
    G1,
    G2,
    PBranch,
}

/// Which components differ between two bundles built from the same keys.
pub fn bundle_diff<F: FheScheme>(a: &ObfuscationBundle<F>, b: &ObfuscationBundle<F>) -> Vec<BundlePart> {
    let mut out = Vec::new();
    if a.pk1 != b.pk1 || a.pk2 != b.pk2 {
        out.push(BundlePart::Keys);
    }
    if a.g1 != b.g1 {
        out.push(BundlePart::G1);
    }
    if a.g2 != b.g2 {
        out.push(BundlePart::G2);
    }
    if a.p.branch() != b.p.branch() {
        out.push(BundlePart::PBranch);
    }
    out
}

fn push_block(out: &mut String, name: &str, body: &str) {
    out.push_str(&format!("{name} {}\n{body}\n", body.len()));
}

struct Blocks<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Blocks<'a> {
    fn line_no(&self) -> usize {
        self.text[..self.pos].matches('\n').count() + 1
    }

    fn line(&mut self) -> Result<&'a str, BootError> {
        let rest = &self.text[self.pos..];
        let end = rest
            .find('\n')
            .ok_or_else(|| format_err(self.line_no(), "unexpected end of file"))?;
        self.pos += end + 1;
        Ok(&rest[..end])
    }

    fn block(&mut self, name: &str) -> Result<&'a str, BootError> {
        let line = self.line_no();
        let header = self.line()?;
        let len = header
            .strip_prefix(name)
            .and_then(|r| r.strip_prefix(' '))
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| format_err(line, format!("expected `{name} <bytes>`")))?;
        let body = self
            .text
            .get(self.pos..self.pos + len)
            .ok_or_else(|| format_err(line, format!("block `{name}` is truncated")))?;
        self.pos += len;
        if self.text.get(self.pos..self.pos + 1) != Some("\n") {
            return Err(format_err(
                self.line_no(),
                format!("block `{name}` has the wrong length"),
            ));
        }
        self.pos += 1;
        Ok(body)
    }

    fn at_end(&self) -> bool {
        self.pos == self.text.len()
    }
}

fn with_line(line: usize, e: BootError) -> BootError {
    match e {
        BootError::Format { line: 0, message } => BootError::Format { line, message },
        other => other,
    }
}

fn parse_family(gates: &str, inputs: &str, line: usize) -> Result<FamilyParams, BootError> {
    let g = gates.parse().map_err(|_| format_err(line, "bad gate count"))?;
    let l = inputs.parse().map_err(|_| format_err(line, "bad input count"))?;
    FamilyParams::new(g, l).map_err(|e| format_err(line, e.to_string()))
}

fn parse_branch(s: &str, line: usize) -> Result<Branch, BootError> {
    match s {
        "1" => Ok(Branch::One),
        "2" => Ok(Branch::Two),
        _ => Err(format_err(line, format!("bad branch `{s}`"))),
    }
}

impl<F: FheScheme> ObfuscationBundle<F> {
    pub fn backend_id(&self) -> &'static str {
        match self.p {
            ObfuscatedP::Plain(_) => "identity",
            ObfuscatedP::Garbled(_) => "garbled",
        }
    }

    pub fn to_text(&self, fhe: &F) -> String {
        let mut out = format!(
            "IOP v1 {} {} {} {}\n",
            fhe.id(),
            self.backend_id(),
            self.family.gates,
            self.family.inputs
        );
        push_block(&mut out, "pk1", &fhe.pk_to_text(&self.pk1));
        push_block(&mut out, "pk2", &fhe.pk_to_text(&self.pk2));
        push_block(&mut out, "g1", &fhe.ct_to_text(&self.g1));
        push_block(&mut out, "g2", &fhe.ct_to_text(&self.g2));
        let artifact = match &self.p {
            ObfuscatedP::Plain(p) => {
                let mut a = format!("PLAIN v1 {}\n", p.branch.number());
                push_block(&mut a, "sk", &fhe.sk_to_text(&p.sk));
                push_block(&mut a, "pk1", &fhe.pk_to_text(&p.pk1));
                push_block(&mut a, "pk2", &fhe.pk_to_text(&p.pk2));
                push_block(&mut a, "g1", &fhe.ct_to_text(&p.g1));
                push_block(&mut a, "g2", &fhe.ct_to_text(&p.g2));
                a
            }
            ObfuscatedP::Garbled(g) => format!("GARBLED v1 {}\n{}", g.branch.number(), g.program.to_text()),
        };
        push_block(&mut out, "P", &artifact);
        out
    }

    pub fn parse(fhe: &F, text: &str) -> Result<Self, BootError> {
        let mut b = Blocks { text, pos: 0 };
        let header: Vec<&str> = b.line()?.split(' ').collect();
        if header.len() != 6 || header[0] != "IOP" || header[1] != "v1" {
            return Err(format_err(1, "expected header `IOP v1 fhe backend gates inputs`"));
        }
        if header[2] != fhe.id() {
            return Err(format_err(
                1,
                format!("bundle uses FHE `{}`, expected `{}`", header[2], fhe.id()),
            ));
        }
        let family = parse_family(header[4], header[5], 1)?;
        let pk = |b: &mut Blocks, name: &str| {
            let line = b.line_no();
            b.block(name)
                .and_then(|s| fhe.pk_from_text(s))
                .map_err(|e| with_line(line, e))
        };
        let pk1 = pk(&mut b, "pk1")?;
        let pk2 = pk(&mut b, "pk2")?;
        let ct = |b: &mut Blocks, name: &str| {
            let line = b.line_no();
            b.block(name)
                .and_then(|s| fhe.ct_from_text(s))
                .map_err(|e| with_line(line, e))
        };
        let g1 = ct(&mut b, "g1")?;
        let g2 = ct(&mut b, "g2")?;
        let p_line = b.line_no();
        let artifact = b.block("P")?;
        if !b.at_end() {
            return Err(format_err(b.line_no(), "trailing content"));
        }
        let shift = |e: BootError| match e {
            BootError::Format { line, message } => BootError::Format {
                line: line + p_line,
                message,
            },
            other => other,
        };
        let mut a = Blocks { text: artifact, pos: 0 };
        let head: Vec<&str> = a.line().map_err(shift)?.split(' ').collect();
        let p = match (header[3], head.as_slice()) {
            ("identity", ["PLAIN", "v1", branch]) => {
                let branch = parse_branch(branch, p_line + 1)?;
                let sk_line = a.line_no();
                let sk = a
                    .block("sk")
                    .and_then(|s| fhe.sk_from_text(s))
                    .map_err(|e| shift(with_line(sk_line, e)))?;
                let pk1 = pk(&mut a, "pk1").map_err(shift)?;
                let pk2 = pk(&mut a, "pk2").map_err(shift)?;
                let g1 = ct(&mut a, "g1").map_err(shift)?;
                let g2 = ct(&mut a, "g2").map_err(shift)?;
                if !a.at_end() {
                    return Err(shift(format_err(a.line_no(), "trailing content in P")));
                }
                ObfuscatedP::Plain(program_p(branch, sk, pk1, pk2, g1, g2, family))
            }
            ("garbled", ["GARBLED", "v1", branch]) => {
                let branch = parse_branch(branch, p_line + 1)?;
                let program = GarbledProgram::parse(&artifact[a.pos..]).map_err(|e| match e {
                    ObfError::Format { line, message } => format_err(line + p_line + 1, message),
                    other => BootError::Obf(other),
                })?;
                ObfuscatedP::Garbled(GarbledP { branch, program })
            }
            _ => {
                return Err(format_err(
                    p_line + 1,
                    "P artifact does not match the backend in the header",
                ))
            }
        };
        Ok(Self {
            p,
            pk1,
            pk2,
            g1,
            g2,
            family,
        })
    }
}
