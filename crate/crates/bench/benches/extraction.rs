use std::hint::black_box;

use armdp::{
    check_additivity, enumerate_trajectories, extract_affine, table_from_armdp,
    DEFAULT_REL_TOL,
};
use armdp_bench::extraction_instance;
use criterion::{criterion_group, criterion_main, Criterion};

fn bench_table_generation(c: &mut Criterion) {
    let (cmp, r, m, _) = extraction_instance();
    c.bench_function("table_from_armdp_h4", |b| {
        b.iter(|| table_from_armdp(black_box(&cmp), &r, &m, 4).unwrap())
    });
}

fn bench_affine_extraction(c: &mut Criterion) {
    let (cmp, _, _, table) = extraction_instance();
    c.bench_function("extract_affine_h4", |b| {
        b.iter(|| extract_affine(black_box(&cmp), &table, DEFAULT_REL_TOL).unwrap())
    });
}

fn bench_additivity_check(c: &mut Criterion) {
    let (cmp, r, _, _) = extraction_instance();
    let ones = armdp::MultiplierSpec::ones(&cmp);
    let table = table_from_armdp(&cmp, &r, &ones, 4).unwrap();
    c.bench_function("check_additivity_h4", |b| {
        b.iter(|| check_additivity(black_box(&cmp), &table, DEFAULT_REL_TOL).unwrap())
    });
}

fn bench_enumeration(c: &mut Criterion) {
    let (cmp, _, _, _) = extraction_instance();
    let start = cmp.state_ids().next().unwrap();
    c.bench_function("enumerate_trajectories_h6", |b| {
        b.iter(|| enumerate_trajectories(black_box(&cmp), start, 6).unwrap())
    });
}

criterion_group!(
    benches,
    bench_table_generation,
    bench_affine_extraction,
    bench_additivity_check,
    bench_enumeration
);
criterion_main!(benches);
