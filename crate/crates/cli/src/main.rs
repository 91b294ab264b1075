//! `iobp`: compile, obfuscate, evaluate and inspect branching-program
//! obfuscations from the command line.
//!
//! Exit codes: 0 success, 1 internal, 2 parse, 3 limits, 4 arity, 5 format.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use iobp_core::barrington::{compile, compiled_length, eval_bp, pad_to, parse_bp, BpOutput, BranchingProgram};
use iobp_core::bootstrap::{
    evaluate, obfuscate_polysize, FheScheme, GarbledNc1, IdentityNc1, Nc1Obfuscator, ObfuscatedP, ObfuscationBundle,
    RecomputeProofs, RefFhe,
};
use iobp_core::checks::{self, Budget, Outcome};
use iobp_core::circuit::universal::FamilyParams;
use iobp_core::circuit::{balanced_tree, format_bits, parse_bits, parse_circuit, Circuit};
use iobp_core::mjp::{TransparentBackend, MAX_K};
use iobp_core::obf_nc1::{
    dims, encode_bp, eval_obf, garble, obfuscate_nc1, randomize, GarbledProgram, Mode, ObfParams, PartialAssignment,
    DEFAULT_LAMBDA, DEFAULT_MAX_LEN,
};
use iobp_core::zmod::{gen_prime, PrimeModulus};

mod error;

/// Largest padded length `compile-bp --pad` will produce.
const MAX_PAD: u128 = 1 << 20;

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "iobp", version, about = "Branching-program obfuscation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a `.ckt` circuit and print its size, depth and inputs.
    Parse { circuit: PathBuf },
    /// Compile a circuit to a width-5 permutation branching program.
    CompileBp {
        circuit: PathBuf,
        /// Pad with identity steps to exactly 4^depth.
        #[arg(long)]
        pad: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Obfuscate a circuit, either as a single garbled program or as a
    /// bootstrapped bundle.
    Obfuscate {
        circuit: PathBuf,
        #[arg(long, value_enum, default_value_t = Target::Nc1)]
        target: Target,
        #[arg(long, value_enum, default_value_t = ModeArg::Direct)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = Backend::Identity)]
        backend: Backend,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: u32,
        /// Use this prime instead of sampling one.
        #[arg(long)]
        prime: Option<u128>,
        /// Largest branching-program length the obfuscator will accept.
        #[arg(long, default_value_t = DEFAULT_MAX_LEN)]
        max_len: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a circuit, branching program, garbled program or bundle.
    Eval { program: PathBuf, input: String },
    /// Print the shape of any artifact as tab-separated key/value lines.
    Inspect { file: PathBuf },
    /// Run the check suite at reduced trial counts.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use the full acceptance budget.
        #[arg(long)]
        full: bool,
        /// Run only these checks (repeatable).
        #[arg(long = "check")]
        checks: Vec<u8>,
    },
    /// Time the pipeline on balanced circuits of increasing depth.
    Bench {
        #[arg(long, default_value_t = 1)]
        from: usize,
        #[arg(long, default_value_t = 3)]
        to: usize,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Target {
    /// Garbled branching program.
    Nc1,
    /// FHE bundle around an obfuscated decryption program.
    Polysize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Direct,
    Universal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Garbled,
    Identity,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("iobp: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Parse { circuit } => cmd_parse(&circuit),
        Command::CompileBp { circuit, pad, out } => cmd_compile_bp(&circuit, pad, out.as_deref()),
        Command::Obfuscate {
            circuit,
            target,
            mode,
            backend,
            seed,
            lambda,
            prime,
            max_len,
            out,
        } => {
            let prime = prime
                .map(PrimeModulus::new)
                .transpose()
                .map_err(|e| CliError::limit(format!("--prime: {e}")))?;
            let opts = ObfOptions {
                target,
                mode,
                backend,
                seed,
                lambda,
                prime,
                max_len,
            };
            cmd_obfuscate(&circuit, &opts, out.as_deref())
        }
        Command::Eval { program, input } => cmd_eval(&program, &input),
        Command::Inspect { file } => cmd_inspect(&file),
        Command::Selftest { seed, full, checks } => cmd_selftest(seed, full, &checks),
        Command::Bench { from, to, reps, seed } => cmd_bench(from, to, reps, seed),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::internal(format!("cannot read {}: {e}", path.display())))
}

/// Write `artifact` to `out`, or to stdout when no path is given. Stats go
/// to stdout only when the artifact does not.
fn emit(artifact: &str, stats: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            fs::write(path, artifact)
                .map_err(|e| CliError::internal(format!("cannot write {}: {e}", path.display())))?;
            print!("{stats}");
        }
        None => {
            print!("{artifact}");
            eprint!("{stats}");
        }
    }
    Ok(())
}

fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    parse_circuit(&read(path)?).map_err(|e| CliError::from(e).context(path))
}

fn cmd_parse(path: &Path) -> Result<(), CliError> {
    let c = load_circuit(path)?;
    println!("inputs\t{}", c.input_count());
    println!("gates\t{}", c.size());
    println!("depth\t{}", c.depth());
    println!("input_names\t{}", c.input_names().join(","));
    println!("bp_length\t{}", compiled_length(&c));
    Ok(())
}

fn cmd_compile_bp(path: &Path, pad: bool, out: Option<&Path>) -> Result<(), CliError> {
    let c = load_circuit(path)?;
    let bound = 4u128.checked_pow(c.depth() as u32);
    let mut bp = compile(&c);
    if pad {
        let target = bound
            .filter(|&b| b <= MAX_PAD)
            .ok_or_else(|| CliError::limit(format!("padding to 4^{} steps exceeds the limit {MAX_PAD}", c.depth())))?
            as usize;
        bp = pad_to(&bp, target)?;
    }
    let stats = format!(
        "length\t{}\nwidth\t{}\ndepth\t{}\nbound\t{}\n",
        bp.len(),
        bp.width(),
        c.depth(),
        bound.map_or_else(|| "overflow".to_string(), |b| b.to_string())
    );
    emit(&bp.to_text(), &stats, out)
}

struct ObfOptions {
    target: Target,
    mode: ModeArg,
    backend: Backend,
    seed: u64,
    lambda: u32,
    prime: Option<PrimeModulus>,
    max_len: usize,
}

/// The reference FHE used for a backend. The garbled backend needs the
/// tagless variant to keep the decryption circuit within reach.
fn fhe_for(backend: Backend) -> RefFhe {
    match backend {
        Backend::Garbled => RefFhe::new(0),
        Backend::Identity => RefFhe::default(),
    }
}

fn backend_named(name: &str) -> Option<Backend> {
    match name {
        "garbled" => Some(Backend::Garbled),
        "identity" => Some(Backend::Identity),
        _ => None,
    }
}

fn gp_stats(gp: &GarbledProgram, bytes: usize) -> String {
    let l = &gp.layout;
    format!(
        "n\t{}\nd\t{}\nk\t{}\nencodings\t{}\nbytes\t{bytes}\n",
        l.n,
        l.d,
        l.k(),
        l.encoding_count()
    )
}

fn cmd_obfuscate(path: &Path, o: &ObfOptions, out: Option<&Path>) -> Result<(), CliError> {
    let c = load_circuit(path)?;
    let mut rng = ChaCha20Rng::seed_from_u64(o.seed);
    match o.target {
        Target::Nc1 => {
            let mode = match o.mode {
                ModeArg::Direct => Mode::Direct,
                ModeArg::Universal => Mode::Universal(
                    FamilyParams::new(c.size().max(1), c.input_count()).map_err(|e| CliError::limit(e.to_string()))?,
                ),
            };
            let params = ObfParams {
                mode,
                prime: o.prime,
                max_len: o.max_len,
                ..ObfParams::default()
            };
            let gp = obfuscate_nc1(o.lambda, &c, &params, &mut rng)?;
            let text = gp.to_text();
            let stats = format!("target\tnc1\nmode\t{mode}\n{}", gp_stats(&gp, text.len()));
            emit(&text, &stats, out)
        }
        Target::Polysize => {
            let fhe = fhe_for(o.backend);
            let io: Box<dyn Nc1Obfuscator<RefFhe>> = match o.backend {
                Backend::Identity => Box::new(IdentityNc1),
                Backend::Garbled => Box::new(GarbledNc1 {
                    lambda: o.lambda,
                    prime: o.prime,
                    max_len: o.max_len,
                }),
            };
            let bundle = obfuscate_polysize(o.lambda, &c, io.as_ref(), &fhe, &mut rng)?;
            let text = bundle.to_text(&fhe);
            let mut stats = format!(
                "target\tpolysize\nbackend\t{}\nfamily\t{} {}\n",
                bundle.backend_id(),
                bundle.family.gates,
                bundle.family.inputs
            );
            match &bundle.p {
                ObfuscatedP::Garbled(g) => stats.push_str(&gp_stats(&g.program, text.len())),
                ObfuscatedP::Plain(_) => stats.push_str(&format!("bytes\t{}\n", text.len())),
            }
            emit(&text, &stats, out)
        }
    }
}

/// A parsed artifact of any kind.
enum Artifact {
    Circuit(Circuit),
    Bp(BranchingProgram),
    Gp(GarbledProgram),
    Bundle(RefFhe, ObfuscationBundle<RefFhe>),
}

fn load_artifact(path: &Path) -> Result<(Artifact, usize), CliError> {
    let text = read(path)?;
    let mut head = text.split_whitespace();
    let kind = head.next().unwrap_or("");
    let art = match kind {
        "BP" => Artifact::Bp(parse_bp(&text).map_err(|e| CliError::format(e.to_string()))?),
        "GP" => Artifact::Gp(GarbledProgram::parse(&text)?),
        "IOP" => {
            let backend = text
                .lines()
                .next()
                .and_then(|l| l.split(' ').nth(3))
                .and_then(backend_named)
                .ok_or_else(|| CliError::format("line 1: unknown backend in bundle header"))?;
            let fhe = fhe_for(backend);
            let bundle = ObfuscationBundle::parse(&fhe, &text)?;
            Artifact::Bundle(fhe, bundle)
        }
        _ => Artifact::Circuit(
            parse_circuit(&text).map_err(|e| CliError::format(format!("not a circuit, BP, GP or IOP file ({e})")))?,
        ),
    };
    Ok((art, text.len()))
}

fn cmd_eval(path: &Path, input: &str) -> Result<(), CliError> {
    let (art, _) = load_artifact(path).map_err(|e| e.context(path))?;
    let x = parse_bits(input).map_err(|e| CliError::parse(e.to_string()))?;
    let bit = match art {
        Artifact::Circuit(c) => c.eval(&x)?,
        Artifact::Bp(bp) => match eval_bp(&bp, &x)? {
            BpOutput::Zero => false,
            BpOutput::One => true,
            BpOutput::Undef => return Err(CliError::internal("program product matches neither accept matrix")),
        },
        Artifact::Gp(gp) => eval_obf(&gp, &x)?,
        Artifact::Bundle(fhe, bundle) => {
            if x.len() != bundle.family.inputs {
                return Err(CliError::arity(bundle.family.inputs, x.len()));
            }
            evaluate(&bundle, &x, &fhe, &RecomputeProofs::new(fhe))?
        }
    };
    println!("{}", u8::from(bit));
    Ok(())
}

fn cmd_inspect(path: &Path) -> Result<(), CliError> {
    let (art, bytes) = load_artifact(path).map_err(|e| e.context(path))?;
    match art {
        Artifact::Circuit(c) => {
            println!("kind\tcircuit");
            println!("inputs\t{}", c.input_count());
            println!("gates\t{}", c.size());
            println!("depth\t{}", c.depth());
        }
        Artifact::Bp(bp) => {
            println!("kind\tbp");
            println!("width\t{}", bp.width());
            println!("length\t{}", bp.len());
            println!("inputs\t{}", bp.input_count());
        }
        Artifact::Gp(gp) => {
            let l = &gp.layout;
            println!("kind\tgp");
            println!(
                "p\t{}",
                gp.p().map_or_else(|| "-".to_string(), |p| p.value().to_string())
            );
            println!("ell\t{}", l.ell);
            println!("free\t{}", l.free_positions().len());
            let fixed: String = l
                .fixed
                .iter()
                .map(|b| b.map_or('-', |b| if b { '1' } else { '0' }))
                .collect();
            println!("fixed\t{fixed}");
            print!("{}", gp_stats(&gp, bytes));
        }
        Artifact::Bundle(fhe, bundle) => {
            println!("kind\tbundle");
            println!("fhe\t{}", fhe.id());
            println!("fhe_secure\t{}", fhe.is_secure());
            println!("backend\t{}", bundle.backend_id());
            println!("family\t{} {}", bundle.family.gates, bundle.family.inputs);
            println!("branch\t{}", bundle.p.branch().number());
            match &bundle.p {
                ObfuscatedP::Garbled(g) => print!("{}", gp_stats(&g.program, bytes)),
                ObfuscatedP::Plain(_) => println!("bytes\t{bytes}"),
            }
        }
    }
    Ok(())
}

fn cmd_selftest(seed: u64, full: bool, only: &[u8]) -> Result<(), CliError> {
    let budget = if full { Budget::full() } else { Budget::reduced() };
    let selected = |id: u8| only.is_empty() || only.contains(&id);
    let rng = |id: u64| checks::stream(seed, id);
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut report = |o: Outcome| {
        println!("{}", o.line());
        outcomes.push(o);
    };
    if selected(1) {
        report(checks::barrington_bound(&budget, &mut rng(1)));
    }
    if selected(2) {
        report(checks::xor_example());
    }
    if selected(3) {
        report(checks::zero_case(&budget, Default::default(), &mut rng(3)));
        report(checks::mutation_same_pattern(&budget, seed));
    }
    if selected(4) {
        report(checks::one_case_rarity(&budget, &mut rng(4)));
    }
    if selected(5) {
        report(checks::jver_contract(&budget, &mut rng(5)));
    }
    if selected(6) {
        report(checks::garble_restriction(&budget, &mut rng(6)));
    }
    if selected(7) {
        report(checks::nc1_completeness(&budget, &mut rng(7)));
    }
    if selected(8) {
        report(checks::bootstrap_end_to_end(&budget, &mut rng(8)));
    }
    if selected(9) {
        report(checks::hybrid_invariance(&budget, &mut rng(9)));
    }
    if selected(10) {
        report(checks::cpa_harness(&budget, &mut rng(10)));
    }
    if selected(11) {
        report(determinism(seed));
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        return Err(CliError {
            code: 1,
            message: format!("{failed} check(s) failed"),
        });
    }
    Ok(())
}

/// In-process version of the artifact determinism check: every text
/// artifact built twice from the same seed.
fn determinism(seed: u64) -> Outcome {
    let xor = parse_circuit("input a\ninput b\ngate g XOR a b\noutput g\n").expect("valid text");
    let not = parse_circuit("input a\ngate g NOT a\noutput g\n").expect("valid text");
    let build = || -> Result<Vec<String>, CliError> {
        let mut out = vec![compile(&xor).to_text()];
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        out.push(obfuscate_nc1(DEFAULT_LAMBDA, &xor, &ObfParams::default(), &mut rng)?.to_text());
        for backend in [Backend::Identity, Backend::Garbled] {
            let fhe = fhe_for(backend);
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let bundle = match backend {
                Backend::Identity => obfuscate_polysize(DEFAULT_LAMBDA, &xor, &IdentityNc1, &fhe, &mut rng)?,
                Backend::Garbled => obfuscate_polysize(DEFAULT_LAMBDA, &not, &GarbledNc1::default(), &fhe, &mut rng)?,
            };
            out.push(bundle.to_text(&fhe));
        }
        Ok(out)
    };
    let (pass, detail) = match (build(), build()) {
        (Ok(a), Ok(b)) => {
            let same = a.iter().zip(&b).filter(|(x, y)| x == y).count();
            (
                same == a.len(),
                format!("{same}/{} artifacts byte-identical across two builds", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => (false, format!("build failed: {}", e.message)),
    };
    Outcome::new(11, "determinism", pass, detail)
}

fn cmd_bench(from: usize, to: usize, reps: usize, seed: u64) -> Result<(), CliError> {
    if from > to || to > 12 {
        return Err(CliError::limit("depth range must satisfy from <= to <= 12"));
    }
    let reps = reps.max(1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let p = gen_prime(DEFAULT_LAMBDA, &mut rng).map_err(|e| CliError::internal(e.to_string()))?;
    println!("depth\tlength\tbound\tn\td\trandomize_ms\tencode_ms\teval_ms");
    for depth in from..=to {
        let c = balanced_tree(depth);
        let bound = 4u128.pow(depth as u32);
        let len = compiled_length(&c);
        // Beyond the index-set capacity only the length is reported.
        if len as usize + 2 > MAX_K || len as usize > DEFAULT_MAX_LEN {
            println!("{depth}\t{len}\t{bound}\t{len}\t{}\t-\t-\t-", dims(len as usize).1);
            continue;
        }
        let bp = compile(&c);
        let x = vec![true; c.input_count()];
        let (mut t_rand, mut t_enc, mut t_eval) = (0.0, 0.0, 0.0);
        let mut d = 0;
        for _ in 0..reps {
            let start = Instant::now();
            let rbp = randomize(&bp, p, &mut rng)?;
            t_rand += start.elapsed().as_secs_f64();
            d = rbp.d;
            let start = Instant::now();
            let ebp = encode_bp(&rbp, &TransparentBackend)?;
            t_enc += start.elapsed().as_secs_f64();
            let gp = garble(&ebp, &PartialAssignment::empty())?;
            let start = Instant::now();
            let got = eval_obf(&gp, &x)?;
            t_eval += start.elapsed().as_secs_f64();
            if got != c.eval(&x)? {
                return Err(CliError::internal(format!(
                    "obfuscated depth-{depth} circuit disagrees on {}",
                    format_bits(&x)
                )));
            }
        }
        let ms = |t: f64| format!("{:.1}", 1000.0 * t / reps as f64);
        println!(
            "{depth}\t{}\t{bound}\t{}\t{d}\t{}\t{}\t{}",
            bp.len(),
            bp.len(),
            ms(t_rand),
            ms(t_enc),
            ms(t_eval)
        );
    }
    Ok(())
}
