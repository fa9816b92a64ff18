use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use trajspec::hankel::{eigenvalues, hankel_matvec, naive_matvec};
use trajspec::EigenMethod;
use trajspec_bench::gaussian_hankel;

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("hankel_matvec");
    for m in [257usize, 1024, 3000] {
        let h = gaussian_hankel(m, 1);
        let v: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
        group.bench_with_input(BenchmarkId::new("fft", m), &m, |b, _| {
            b.iter(|| hankel_matvec(black_box(&h), black_box(&v)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("naive", m), &m, |b, _| {
            b.iter(|| naive_matvec(black_box(&h), black_box(&v)))
        });
    }
    group.finish();
}

fn eigensolvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("eigenvalues");
    group.sample_size(10);
    for m in [128usize, 512] {
        let h = gaussian_hankel(m, 2);
        for method in [EigenMethod::Dense, EigenMethod::Iterative] {
            group.bench_with_input(BenchmarkId::new(method.as_str(), m), &m, |b, _| {
                b.iter(|| eigenvalues(black_box(&h), method).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, matvec, eigensolvers);
criterion_main!(benches);
