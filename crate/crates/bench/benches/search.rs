use criterion::{criterion_group, criterion_main, Criterion};
use prnustab::geometry::CornerWarp;
use prnustab::search::{search, WarpScorer};
use prnustab::{extract_noise, SearchConfig};
use prnustab_bench::{frame, search_fixture};

fn scorer(c: &mut Criterion) {
    let f = search_fixture(128, 50, 1).unwrap();
    let s = WarpScorer::new(&f.block, &f.reference, f.geom, 50, 2).unwrap();
    let mut ws = s.workspace();
    c.bench_function("score_one_warp_128_pm50", |b| {
        b.iter(|| s.score(&f.warp, &mut ws).unwrap())
    });
    let id = CornerWarp::from_components([0; 8]);
    c.bench_function("warped_window_128_pm50", |b| b.iter(|| s.warped_window(&id).unwrap()));
}

fn constrained_search(c: &mut Criterion) {
    let f = search_fixture(128, 50, 2).unwrap();
    let cfg = SearchConfig::constrained();
    let mut g = c.benchmark_group("hgs");
    g.sample_size(10);
    g.bench_function("constrained_128_pm50", |b| {
        b.iter(|| search(&f.block, &f.reference, &f.geom, &cfg).unwrap())
    });
    g.finish();
}

fn noise(c: &mut Criterion) {
    let fr = frame(512, 512, 3).unwrap();
    c.bench_function("extract_noise_512", |b| b.iter(|| extract_noise(&fr, 3.0).unwrap()));
}

criterion_group!(benches, scorer, constrained_search, noise);
criterion_main!(benches);
