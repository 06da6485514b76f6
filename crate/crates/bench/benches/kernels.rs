use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use exch_core::amalgam::check_ndap;
use exch_core::equiv::blur_set;
use exch_core::kspec;
use exch_core::relstruct::Structure;
use exch_core::sampler::{builtin_rule, PreparedSampler, RandomnessSource};

fn bench_prf(c: &mut Criterion) {
    let rs = RandomnessSource::new(42);
    let mut i = 0u64;
    c.bench_function("prf/uniform", |b| {
        b.iter(|| {
            i = i.wrapping_add(1);
            rs.uniform(&i.to_le_bytes())
        })
    });
}

fn bench_sampling(c: &mut Criterion) {
    let k = kspec::builtin("equiv").unwrap();
    let s = Structure::parse(
        Arc::clone(&k.sig),
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\n",
    )
    .unwrap();
    let rule = builtin_rule("classcoin").unwrap();
    let prepared = PreparedSampler::new(&k, &s, rule.as_ref()).unwrap();
    let mut seed = 0u64;
    c.bench_function("sampler/classcoin_3pt", |b| {
        b.iter(|| {
            seed = seed.wrapping_add(1);
            prepared.sample(seed)
        })
    });
}

fn bench_blur_enumeration(c: &mut Criterion) {
    let k = kspec::builtin("two_eq").unwrap();
    let s = Structure::parse(
        Arc::clone(&k.sig),
        "universe: 1 2 3\nR 1 1\nR 2 2\nR 3 3\nR 1 2\nR 2 1\nS 1 1\nS 2 2\nS 3 3\nS 2 3\nS 3 2\n",
    )
    .unwrap();
    c.bench_function("equiv/blur_set_3pt_two_rels", |b| {
        b.iter(|| blur_set(&k, &s, &[1, 2, 3], true))
    });
}

fn bench_dap(c: &mut Criterion) {
    let k = kspec::builtin("equiv").unwrap();
    c.bench_function("amalgam/check_ndap_equiv_n3", |b| {
        b.iter_batched(|| k.clone(), |k| check_ndap(&k, 3), BatchSize::SmallInput)
    });
}

criterion_group!(benches, bench_prf, bench_sampling, bench_blur_enumeration, bench_dap);
criterion_main!(benches);
