//! Throughput of the main engine paths.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use perfektor_core::coloring::perfect_sample;
use perfektor_core::decompose::{decompose, EnumerationBudget};
use perfektor_core::finitary::{finitary_sample, knuth_yao_sample, BitField, FinitaryOptions, RangePartition};
use perfektor_core::harness::TorusSimulator;
use perfektor_core::random::replicate_rng;
use perfektor_core::rates::{
    example_model, heat_bath_model, ExampleOneRates, GeometricQ, HeatBathRates, MrfSpecification,
};
use perfektor_core::sketch::SketchOptions;
use perfektor_core::{Site, SiteSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sites(n: i64) -> SiteSet {
    (0..n).map(|x| Site::new([x])).collect()
}

fn bench_decompose(c: &mut Criterion) {
    let hb2 = HeatBathRates::new(MrfSpecification::ising(2, 0.1).unwrap());
    let em = ExampleOneRates::new(1, &GeometricQ::reference(), 3).unwrap();
    c.bench_function("decompose/heat_bath_d2", |b| {
        b.iter(|| decompose(&hb2, EnumerationBudget::default()).unwrap())
    });
    c.bench_function("decompose/example_r3", |b| {
        b.iter(|| decompose(&em, EnumerationBudget::default()).unwrap())
    });
}

fn bench_sampling(c: &mut Criterion) {
    let em = example_model(1, &GeometricQ::reference(), None).unwrap();
    let hb = heat_bath_model(MrfSpecification::ising(2, 0.05).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (name, model, f) in [
        ("perfect_sample/example_f4", &em, sites(4)),
        ("perfect_sample/heat_bath_d2_f1", &hb, SiteSet::singleton(Site::origin(2))),
    ] {
        c.bench_function(name, |b| {
            b.iter(|| perfect_sample(model, &f, &mut rng, SketchOptions::default()).unwrap())
        });
    }
    let f = sites(2);
    let mut seed = 0u64;
    c.bench_function("finitary_sample/example_f2", |b| {
        b.iter(|| {
            seed += 1;
            finitary_sample(&em, &f, &BitField::new(seed), FinitaryOptions::default()).unwrap()
        })
    });
    let partition = RangePartition::new(em.law());
    c.bench_function("knuth_yao/example_range_law", |b| {
        b.iter(|| knuth_yao_sample(&partition, |_| rng.random::<bool>(), 64).unwrap())
    });
}

fn bench_torus(c: &mut Criterion) {
    let hb = HeatBathRates::new(MrfSpecification::ising(1, 0.1).unwrap());
    let em = ExampleOneRates::new(1, &GeometricQ::reference(), 25).unwrap();
    c.bench_function("torus/heat_bath_1000_events", |b| {
        b.iter_batched(
            || TorusSimulator::new(&hb, 64, replicate_rng(3, 0)).unwrap(),
            |mut sim| (0..1000).for_each(|_| { sim.step().unwrap(); }),
            BatchSize::SmallInput,
        )
    });
    c.bench_function("torus/example_1000_events", |b| {
        b.iter_batched(
            || TorusSimulator::new(&em, 64, replicate_rng(3, 0)).unwrap(),
            |mut sim| (0..1000).for_each(|_| { sim.step().unwrap(); }),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, bench_decompose, bench_sampling, bench_torus);
criterion_main!(benches);
