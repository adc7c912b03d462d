use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use fractal_hit_lab_core::correlation::{f_and_delta, pp_cross_cov_is_negative};
use fractal_hit_lab_core::experiments::{lemma23_coverage, prop13_chain, window_oracle, WindowSpec};
use fractal_hit_lab_core::rational::ratio;
use fractal_hit_lab_core::selection::{sample_level, PointProcessSpec};
use fractal_hit_lab_core::{CantorSchedule, LevelCap, SelectionModel, StreamKey, TargetSet, DEFAULT_INTERVAL_BUDGET};

fn cantor(c: u64, depth: usize) -> TargetSet {
    let s = CantorSchedule::uniform(c, ratio(1, 16), depth).unwrap();
    TargetSet::cantor(&s, depth, DEFAULT_INTERVAL_BUDGET).unwrap()
}

fn covering_count(c: &mut Criterion) {
    let target = cantor(4, 5);
    c.bench_function("covering_count level 20", |b| b.iter(|| target.covering_count(black_box(20)).unwrap()));
}

fn window(c: &mut Criterion) {
    let model = SelectionModel::bernoulli_power_law(0.5);
    let target = cantor(2, 7);
    let w = WindowSpec::new(24, 28);
    c.bench_function("window_oracle dim 0.25 [24, 28]", |b| {
        b.iter(|| window_oracle(&model, &target, black_box(&w), LevelCap::default()).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let model = SelectionModel::PointProcess(PointProcessSpec::prop14(0.5));
    let mut rng = StreamKey::new(0, 0).trial(0);
    c.bench_function("sample_level point process n = 24", |b| {
        b.iter(|| sample_level(&model, black_box(24), 1, LevelCap::default(), &mut rng).unwrap())
    });
}

fn coverage(c: &mut Criterion) {
    c.bench_function("lemma23_coverage n = 20, 100 trials", |b| {
        b.iter(|| {
            lemma23_coverage(0.5, 0.25, black_box(20), 100, StreamKey::new(1, 1), Some(1), LevelCap::default()).unwrap()
        })
    });
}

fn correlation(c: &mut Criterion) {
    c.bench_function("cross covariance sign n = 20, C <= 4096", |b| {
        b.iter(|| (1..=4096).all(|c| pp_cross_cov_is_negative(black_box(20), c)))
    });
    let model = SelectionModel::PointProcess(PointProcessSpec::prop14(0.5));
    c.bench_function("f_and_delta levels 8..=16", |b| {
        b.iter(|| f_and_delta(&model, 8..=16, 1, black_box(0.5), None).unwrap())
    });
}

fn chain(c: &mut Criterion) {
    let ts: Vec<f64> = (1..=6).map(|i| 1.0 - (-(i as f64)).exp2()).collect();
    c.bench_function("prop13_chain depth 6", |b| {
        b.iter(|| prop13_chain(black_box(&ts), 2, 6, 1 << 62, 2, DEFAULT_INTERVAL_BUDGET).unwrap())
    });
}

criterion_group!(benches, covering_count, window, sampling, coverage, correlation, chain);
criterion_main!(benches);
