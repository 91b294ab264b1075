use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use iobp_core::barrington::compile;
use iobp_core::circuit::balanced_tree;
use iobp_core::mjp::TransparentBackend;
use iobp_core::obf_nc1::{encode_bp, eval_obf, garble, randomize, PartialAssignment};
use iobp_core::zmod::{gen_prime, FieldMatrix};

fn field(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let p = gen_prime(61, &mut rng).unwrap();
    let mut g = c.benchmark_group("field");
    for dim in [31, 79] {
        let a = FieldMatrix::random(p, dim, dim, &mut rng);
        let b = FieldMatrix::random(p, dim, dim, &mut rng);
        g.bench_with_input(BenchmarkId::new("mul", dim), &dim, |bench, _| {
            bench.iter(|| a.mul(black_box(&b)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("inverse", dim), &dim, |bench, _| {
            bench.iter(|| black_box(&a).inverse())
        });
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let p = gen_prime(61, &mut rng).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    for depth in [1, 2] {
        let circuit = balanced_tree(depth);
        let bp = compile(&circuit);
        let x = vec![true; circuit.input_count()];
        g.bench_with_input(BenchmarkId::new("compile", depth), &depth, |bench, _| {
            bench.iter(|| compile(black_box(&circuit)))
        });
        g.bench_with_input(BenchmarkId::new("randomize", depth), &depth, |bench, _| {
            bench.iter(|| randomize(&bp, p, &mut rng).unwrap())
        });
        let rbp = randomize(&bp, p, &mut rng).unwrap();
        g.bench_with_input(BenchmarkId::new("encode", depth), &depth, |bench, _| {
            bench.iter(|| encode_bp(black_box(&rbp), &TransparentBackend).unwrap())
        });
        let gp = garble(
            &encode_bp(&rbp, &TransparentBackend).unwrap(),
            &PartialAssignment::empty(),
        )
        .unwrap();
        g.bench_with_input(BenchmarkId::new("eval", depth), &depth, |bench, _| {
            bench.iter(|| eval_obf(black_box(&gp), &x).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, field, pipeline);
criterion_main!(benches);
