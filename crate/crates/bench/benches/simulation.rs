use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use selftimed::adders::{functional_check, Trials};
use selftimed::analysis::{gen_carry_chain_vector, sweep, ChainSpec};
use selftimed::stage::StageRunner;
use selftimed::{build_rca, build_stage, default_delay_table, AdderVariant, Architecture, Circuit};

fn transaction(c: &mut Criterion) {
    let delays = default_delay_table();
    let mut group = c.benchmark_group("transaction");
    for arch in Architecture::ALL {
        let stage = build_stage(arch, arch.default_variant(), 32, false).unwrap();
        let circuit = Circuit::compile(&stage.netlist, &delays).unwrap();
        let (a, b, cin) = gen_carry_chain_vector(ChainSpec { n: 32, m: 28 }).unwrap();
        group.bench_function(BenchmarkId::new(arch.name(), 32), |bench| {
            let mut runner = StageRunner::new(&stage, &circuit).unwrap();
            bench.iter(|| runner.transaction(black_box(a), black_box(b), cin).unwrap())
        });
    }
    group.finish();
}

fn functional(c: &mut Criterion) {
    let delays = default_delay_table();
    let rca = build_rca(AdderVariant::LatencyOptBiased, 16);
    c.bench_function("functional_check/16bit/64", |bench| {
        bench.iter(|| functional_check(&rca, &delays, &Trials::Random { count: 64, seed: 1 }).unwrap())
    });
}

fn sweep_bench(c: &mut Criterion) {
    let delays = default_delay_table();
    let ms: Vec<usize> = (4..=28).collect();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("n32_m4_28", |bench| bench.iter(|| sweep(32, &ms, &delays).unwrap()));
    group.finish();
}

criterion_group!(benches, transaction, functional, sweep_bench);
criterion_main!(benches);
