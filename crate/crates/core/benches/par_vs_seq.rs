use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use ulab::cfrac::cf_expand;
use ulab::dani::{lattice_of, max_solution_degree, random_matrix, PsiSpec};
use ulab::par::{item_rng, map_indexed, map_indexed_seq};
use ulab::tree::{loglaw_limsup, DepthSource, LoglawParams};
use ulab::{Fq, Laurent};

fn cf_item(f: &Fq, i: usize) -> usize {
    let mut rng = item_rng(1, i as u64);
    let alpha = Laurent::random_unit_ball(f, 224, &mut rng);
    cf_expand(&alpha, 21, f).unwrap().len()
}

fn kg_item(f: &Fq, psi: &PsiSpec, i: usize) -> (Option<usize>, i64) {
    let mut rng = item_rng(2, i as u64);
    let a = random_matrix(f, 1, 1, 72, &mut rng);
    let deg = max_solution_degree(&a, psi, 16, f).unwrap();
    let dl = lattice_of(&a, f).unwrap();
    (deg, (1..=36).map(|t| dl.depth(t).unwrap()).sum())
}

fn bench(c: &mut Criterion) {
    let f = Fq::new(2).unwrap();
    let psi = PsiSpec::power_int(1);

    let mut g = c.benchmark_group("cfrac_expand_2000");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("rayon", 2000), |b| b.iter(|| map_indexed(2000, |i| cf_item(&f, i))));
    g.bench_function(BenchmarkId::new("sequential", 2000), |b| b.iter(|| map_indexed_seq(2000, |i| cf_item(&f, i))));
    g.finish();

    let mut g = c.benchmark_group("kg_sample_200");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("rayon", 200), |b| b.iter(|| map_indexed(200, |i| kg_item(&f, &psi, i))));
    g.bench_function(BenchmarkId::new("sequential", 200), |b| {
        b.iter(|| map_indexed_seq(200, |i| kg_item(&f, &psi, i)))
    });
    g.finish();

    let mut g = c.benchmark_group("loglaw_20x100k");
    g.sample_size(10);
    let p = LoglawParams { samples: 20, horizon: 100_000, q: 2, seed: 3, source: DepthSource::HaarCf };
    g.bench_function("rayon", |b| b.iter(|| loglaw_limsup(p)));
    g.bench_function("sequential", |b| b.iter(|| ulab::par::with_workers(1, || loglaw_limsup(p))));
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
