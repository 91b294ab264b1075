//! End-to-end runs through the public API: circuit text to obfuscated
//! program and back, plus the bootstrapped bundle.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use iobp_core::barrington::{compile, compiled_length, eval_bp, parse_bp, BpOutput};
use iobp_core::bootstrap::{evaluate, obfuscate_polysize, IdentityNc1, ObfuscationBundle, RecomputeProofs, RefFhe};
use iobp_core::circuit::{all_inputs, parse_circuit, random_circuit, Circuit};
use iobp_core::mjp::TransparentBackend;
use iobp_core::obf_nc1::{
    dims, encode_bp, eval_obf, f_chi, garble, obfuscate_nc1, randomize, GarbledProgram, ObfParams, PartialAssignment,
};
use iobp_core::zmod::{gen_prime, PrimeModulus};

const MAJ: &str = "\
# majority of three
input a
input b
input c
gate ab AND a b
gate bc AND b c
gate ac AND a c
gate t OR ab bc
gate m OR t ac
output m
";

/// Random circuit on 1..=3 inputs whose program is at most `max_len` long.
fn small_circuit(rng: &mut ChaCha20Rng, max_len: u128) -> Circuit {
    loop {
        let inputs = rng.gen_range(1..=3);
        let gates = rng.gen_range(1..=4);
        let c = random_circuit(rng, inputs, gates);
        if compiled_length(&c) <= max_len {
            return c;
        }
    }
}

#[test]
fn majority_through_every_stage() {
    let c = parse_circuit(MAJ).unwrap();
    let bp = parse_bp(&compile(&c).to_text()).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let gp = obfuscate_nc1(
        61,
        &c,
        &ObfParams {
            max_len: 128,
            ..ObfParams::default()
        },
        &mut rng,
    )
    .unwrap();
    let gp = GarbledProgram::parse(&gp.to_text()).unwrap();
    assert_eq!(gp.layout.d, dims(gp.layout.n).1);
    for x in all_inputs(3) {
        let want = x.iter().filter(|b| **b).count() >= 2;
        assert_eq!(c.eval(&x).unwrap(), want);
        assert_eq!(
            eval_bp(&bp, &x).unwrap(),
            if want { BpOutput::One } else { BpOutput::Zero }
        );
        assert_eq!(eval_obf(&gp, &x).unwrap(), want);
    }
}

#[test]
fn garbled_majority_is_the_restriction() {
    let c = parse_circuit(MAJ).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let p = gen_prime(61, &mut rng).unwrap();
    let ebp = encode_bp(&randomize(&compile(&c), p, &mut rng).unwrap(), &TransparentBackend).unwrap();
    for fixed in [
        vec![(0, true)],
        vec![(1, false), (2, true)],
        vec![(0, false), (2, false)],
    ] {
        let gp = garble(&ebp, &PartialAssignment::new(fixed.clone()).unwrap()).unwrap();
        let r = c.restrict(&fixed).unwrap();
        assert_eq!(gp.layout.free_positions().len(), r.input_count());
        assert!(gp.layout.encoding_count() < ebp.layout.encoding_count());
        for x in all_inputs(r.input_count()) {
            assert_eq!(eval_obf(&gp, &x).unwrap(), r.eval(&x).unwrap(), "{fixed:?} {x:?}");
        }
    }
}

#[test]
fn identity_bundle_round_trips_through_text() {
    let c = parse_circuit(MAJ).unwrap();
    let fhe = RefFhe::default();
    let mut rng = ChaCha20Rng::seed_from_u64(13);
    let bundle = obfuscate_polysize(61, &c, &IdentityNc1, &fhe, &mut rng).unwrap();
    let parsed = ObfuscationBundle::parse(&fhe, &bundle.to_text(&fhe)).unwrap();
    assert_eq!(parsed, bundle);
    let proofs = RecomputeProofs::new(fhe);
    for x in all_inputs(3) {
        assert_eq!(evaluate(&parsed, &x, &fhe, &proofs).unwrap(), c.eval(&x).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // F_chi vanishes exactly where the program outputs zero, up to the
    // 1/p chance of a spurious zero on the one side.
    #[test]
    fn f_chi_zero_iff_output_zero(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = small_circuit(&mut rng, 16);
        let p = gen_prime(61, &mut rng).unwrap();
        let rbp = randomize(&compile(&c), p, &mut rng).unwrap();
        for x in all_inputs(c.input_count()) {
            let zero = f_chi(&rbp, &x).unwrap() == 0;
            prop_assert_eq!(zero, !c.eval(&x).unwrap());
        }
    }

    #[test]
    fn obfuscation_preserves_function(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = small_circuit(&mut rng, 16);
        let gp = obfuscate_nc1(61, &c, &ObfParams::default(), &mut rng).unwrap();
        for x in all_inputs(c.input_count()) {
            prop_assert_eq!(eval_obf(&gp, &x).unwrap(), c.eval(&x).unwrap());
        }
    }

    // Small primes make the randomisation noisy but never change the zero side.
    #[test]
    fn zero_side_exact_at_small_prime(seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let c = small_circuit(&mut rng, 10);
        let p = PrimeModulus::new(7).unwrap();
        let rbp = randomize(&compile(&c), p, &mut rng).unwrap();
        for x in all_inputs(c.input_count()) {
            if !c.eval(&x).unwrap() {
                prop_assert_eq!(f_chi(&rbp, &x).unwrap(), 0);
            }
        }
    }
}
