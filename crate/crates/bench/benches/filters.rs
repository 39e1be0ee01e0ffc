use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dsf_bench::{chain, family, workload};
use dsf_core::consensus::{distributed_explicit_step, DEFAULT_TOL};
use dsf_core::explicit_filter::explicit_step;
use dsf_core::implicit_filter::implicit_step;
use dsf_core::{ImplicitOptions, MembershipMode};

fn explicit(c: &mut Criterion) {
    let mut group = c.benchmark_group("explicit_step");
    for agents in [3, 25] {
        let model = chain(agents);
        let fam = family(&model, 5, 7);
        let inputs = workload(&model, &fam, 64);
        group.bench_with_input(BenchmarkId::new("centralized", agents), &inputs, |b, inputs| {
            let mut k = 0;
            b.iter(|| {
                let (x, u) = &inputs[k % inputs.len()];
                k += 1;
                black_box(explicit_step(&model, &fam, x, u, MembershipMode::GlobalSum, k).unwrap())
            })
        });
        group.bench_with_input(BenchmarkId::new("consensus", agents), &inputs, |b, inputs| {
            let mut k = 0;
            b.iter(|| {
                let (x, u) = &inputs[k % inputs.len()];
                k += 1;
                black_box(distributed_explicit_step(&model, &fam, x, u, DEFAULT_TOL, k).unwrap())
            })
        });
    }
    group.finish();
}

fn implicit(c: &mut Criterion) {
    let model = chain(3);
    let fam = family(&model, 5, 7);
    let inputs = workload(&model, &fam, 16);
    let opts = ImplicitOptions::default();
    let mut group = c.benchmark_group("implicit_step");
    group.sample_size(10);
    group.bench_function("chain3", |b| {
        let mut k = 0;
        b.iter(|| {
            let (x, u) = &inputs[k % inputs.len()];
            k += 1;
            black_box(implicit_step(&model, x, u, &opts).ok())
        })
    });
    group.finish();
}

criterion_group!(benches, explicit, implicit);
criterion_main!(benches);
