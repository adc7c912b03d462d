//! Acceptance suite: one line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use fractal_hit_lab_core::cantor::{
    homogeneous_dims, schedule_prop13, schedule_prop14, ChildCount, Generation, Shrink,
};
use fractal_hit_lab_core::correlation::{empirical_cov, exact_pp_cov, f_and_delta, pp_cross_cov_is_negative};
use fractal_hit_lab_core::experiments::{
    geometric_schedule, lemma23_bound, lemma23_coverage, prop13_chain, prop14_counting, sn_statistics,
    window_hit_probability, window_oracle, WindowSpec,
};
use fractal_hit_lab_core::grid::{make_cube, Closure};
use fractal_hit_lab_core::rational::{ratio, simplest_rational};
use fractal_hit_lab_core::rng::run_trials;
use fractal_hit_lab_core::selection::{sample_level, PointProcessSpec};
use fractal_hit_lab_core::stats::{agrees, proportion_radius};
use fractal_hit_lab_core::{CantorSchedule, LevelCap, SelectionModel, StreamKey, TargetSet, DEFAULT_INTERVAL_BUDGET};
use rand::Rng;

type Outcome = Result<String, String>;

struct Check {
    id: u32,
    title: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn cap() -> LevelCap {
    LevelCap::default()
}

fn pp_counts(c: u64) -> (PointProcessSpec, SelectionModel) {
    let spec = PointProcessSpec::counts(vec![0, c]);
    (spec.clone(), SelectionModel::PointProcess(spec))
}

fn criterion_1() -> Outcome {
    let (spec, model) = pp_counts(3);
    let exact = spec.hit_prob_rational(2).ok_or("no exact P_2")?;
    ensure(exact == ratio(37, 64), || format!("P_2 = {exact}, expected 37/64"))?;
    let trials = 100_000;
    let hits = run_trials(StreamKey::new(1, 1), trials, None, |_, rng| {
        sample_level(&model, 2, 1, cap(), rng).map(|s| s.contains(0))
    });
    let mut count = 0u64;
    for h in hits {
        count += h.map_err(err)? as u64;
    }
    let freq = count as f64 / trials as f64;
    let radius = proportion_radius(0.578125, trials);
    ensure(agrees(freq, 0.578125, trials), || format!("Monte Carlo {freq} outside 0.578125 ± {radius}"))?;
    Ok(format!("P_2 = {exact} exactly; Monte Carlo {freq:.5} within ±{radius:.4} (T = {trials})"))
}

fn criterion_2() -> Outcome {
    let (spec, model) = pp_counts(3);
    let a = make_cube(2, &[0], Closure::Closed).map_err(err)?;
    let b = make_cube(2, &[2], Closure::Closed).map_err(err)?;
    let cov = exact_pp_cov(&spec, 2, &a, &b).map_err(err)?;
    // 18/64 − (37/64)² = −217/4096.
    ensure(cov.exact == Some(ratio(-217, 4096)), || format!("exact covariance {:?}", cov.exact))?;
    ensure((cov.value + 0.052979).abs() < 5e-7, || format!("covariance {}", cov.value))?;
    let trials = 100_000;
    let est = empirical_cov(&model, 2, &[(0, 2)], trials, StreamKey::new(2, 1), None).map_err(err)?;
    let (value, radius) = (est[0].value, est[0].radius.unwrap_or(f64::NAN));
    ensure((value - cov.value).abs() <= radius, || format!("Monte Carlo {value} ± {radius} vs {}", cov.value))?;
    let mut checked = 0u64;
    for n in 1..=20 {
        for c in 1..=4096 {
            ensure(pp_cross_cov_is_negative(n, c), || format!("non-negative covariance at n = {n}, C = {c}"))?;
            checked += 1;
        }
    }
    Ok(format!(
        "Cov = -217/4096 = {:.6}; Monte Carlo {value:.5} ± {radius:.5}; strictly negative on all {checked} (n, C) pairs",
        cov.value
    ))
}

fn criterion_3() -> Outcome {
    let models = [
        ("bernoulli gamma=0.5", SelectionModel::bernoulli_power_law(0.5)),
        ("point process gamma0=0.5", SelectionModel::PointProcess(PointProcessSpec::prop14(0.5))),
    ];
    let mut worst: f64 = f64::NEG_INFINITY;
    for (name, model) in &models {
        for eps in [0.1, 0.5, 1.0] {
            let r = f_and_delta(model, 8..=16, 1, eps, None).map_err(err)?;
            ensure(r.rows.iter().all(|row| row.f == 1), || format!("{name}, eps = {eps}: f = {:?}", r.rows))?;
            ensure(r.delta_est <= 0.05, || format!("{name}, eps = {eps}: delta_est = {}", r.delta_est))?;
            worst = worst.max(r.delta_est);
        }
    }
    Ok(format!("f(n, eps) = 1 for n in 8..=16, eps in {{0.1, 0.5, 1}}, both models; max delta_est = {worst}"))
}

fn uniform_cantor(c: u64, depth: usize) -> Result<TargetSet, String> {
    let s = CantorSchedule::uniform(c, ratio(1, 16), depth).map_err(err)?;
    TargetSet::cantor(&s, depth, DEFAULT_INTERVAL_BUDGET).map_err(err)
}

fn criterion_4() -> Outcome {
    let model = SelectionModel::bernoulli_power_law(0.5);
    let trials = 10_000;
    let thin = uniform_cantor(2, 7)?;
    let thin_p: Vec<f64> = (8..=24)
        .map(|n| window_oracle(&model, &thin, &WindowSpec::new(n, n + 4), cap()).map(|r| r.oracle))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    ensure(thin_p.windows(2).all(|w| w[1] < w[0]), || format!("dim 0.25 oracle not decreasing: {thin_p:?}"))?;
    let a = window_hit_probability(&model, &thin, &WindowSpec::new(24, 28), trials, StreamKey::new(4, 1), None, cap())
        .map_err(err)?;
    ensure(a.oracle < 0.1, || format!("dim 0.25 oracle at n = 24 is {}", a.oracle))?;
    ensure(a.agrees == Some(true), || format!("dim 0.25 Monte Carlo {:?} vs {}", a.empirical, a.oracle))?;
    let thick = uniform_cantor(8, 5)?;
    // Near 1 the f64 oracle saturates; compare the exact log-miss instead.
    let thick_miss: Vec<f64> = (1..=16)
        .map(|n| window_oracle(&model, &thick, &WindowSpec::new(n, n + 4), cap()).map(|r| r.log_miss))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    ensure(thick_miss.windows(2).all(|w| w[1] < w[0]), || format!("dim 0.75 log-miss not decreasing: {thick_miss:?}"))?;
    let b = window_hit_probability(&model, &thick, &WindowSpec::new(16, 20), trials, StreamKey::new(4, 2), None, cap())
        .map_err(err)?;
    ensure(b.oracle > 0.99, || format!("dim 0.75 oracle at n = 16 is {}", b.oracle))?;
    ensure(b.agrees == Some(true), || format!("dim 0.75 Monte Carlo {:?} vs {}", b.empirical, b.oracle))?;
    Ok(format!(
        "dim 0.25: oracle {:.4} at n = 24, Monte Carlo {:.4} ± {:.4}; dim 0.75: oracle {:.6} at n = 16, Monte Carlo {:.4} ± {:.4}",
        a.oracle,
        a.empirical.unwrap_or(f64::NAN),
        a.radius.unwrap_or(f64::NAN),
        b.oracle,
        b.empirical.unwrap_or(f64::NAN),
        b.radius.unwrap_or(f64::NAN)
    ))
}

fn criterion_5() -> Outcome {
    let worked = sn_statistics(
        &SelectionModel::bernoulli_power_law(1.0),
        &TargetSet::unit(1),
        3,
        0,
        StreamKey::new(5, 0),
        None,
        cap(),
    )
    .map_err(err)?;
    let exact = 1.0 - (7.0f64 / 8.0).powi(8);
    ensure((worked.pz_bound - 8.0 / 15.0).abs() < 1e-15, || format!("worked bound {}", worked.pz_bound))?;
    ensure((worked.exact_pos_prob - exact).abs() < 1e-15, || format!("worked P(S > 0) {}", worked.exact_pos_prob))?;
    let mut rng = StreamKey::new(5, 1).trial(0);
    let trials = 2_000;
    let mut configs = 0;
    for i in 0..50u64 {
        let gamma = rng.random_range(0.1..=1.0);
        let n = rng.random_range(2..=12u32);
        let target = match rng.random_range(0..3) {
            0 => TargetSet::unit(1),
            1 => {
                let den = 1i64 << 20;
                TargetSet::point(vec![ratio(rng.random_range(0..=den), den)])
            }
            _ => uniform_cantor([2, 4, 8][rng.random_range(0..3)], 4)?,
        };
        let s = sn_statistics(
            &SelectionModel::bernoulli_power_law(gamma),
            &target,
            n,
            trials,
            StreamKey::new(5, 2).child(i),
            None,
            cap(),
        )
        .map_err(err)?;
        ensure(s.pz_holds == Some(true), || format!("gamma = {gamma}, n = {n}: {s:?}"))?;
        configs += 1;
    }
    Ok(format!(
        "{configs} random configurations satisfy P(S>0) + 3 sigma >= PZ bound (T = {trials}); worked case 8/15 vs {exact:.4}"
    ))
}

fn criterion_6() -> Outcome {
    let s = CantorSchedule::uniform(4, ratio(1, 16), 51).map_err(err)?;
    let d = homogeneous_dims(&s, 50, None).map_err(err)?;
    let (h, p) = (d.hdim_exact.ok_or("no exact h_k")?, d.pdim_exact.ok_or("no exact p_k")?);
    for k in 1..=50i64 {
        let i = k as usize - 1;
        ensure(h[i] == ratio(2 * (k + 1), 4 * k), || format!("h_{k} = {}", h[i]))?;
        ensure(p[i] == ratio(2 * (k + 1), 4 * k + 2), || format!("p_{k} = {}", p[i]))?;
    }
    ensure((d.hdim_limit_est - 0.5).abs() < 0.02 && (d.pdim_limit_est - 0.5).abs() < 0.02, || {
        format!("tails {} and {}", d.hdim_limit_est, d.pdim_limit_est)
    })?;
    let ts: Vec<f64> = (1..=7).map(|i| 1.0 - (-(i as f64)).exp2()).collect();
    let tuned = schedule_prop13(&ts, 2, 7, 1 << 62).map_err(err)?;
    let pt = homogeneous_dims(&tuned.schedule, 6, None).map_err(err)?.pdim_exact.ok_or("no exact tuned p_k")?;
    for (k, pk) in pt.iter().enumerate() {
        ensure(*pk >= simplest_rational(tuned.t[k]), || format!("tuned p_{} = {pk} < t = {}", k + 1, tuned.t[k]))?;
    }
    let p14 = schedule_prop14(0.5, &[4; 51], 51).map_err(err)?;
    let hd = homogeneous_dims(&p14, 50, None).map_err(err)?.hdim_limit_est;
    ensure((hd - 0.5).abs() < 0.02, || format!("prop14 hdim surrogate {hd}"))?;
    Ok(format!(
        "h_k, p_k exact for k <= 50, tails {:.4}/{:.4}; tuned p_k >= t_k for k <= 6; prop14 hdim surrogate {hd:.4}",
        d.hdim_limit_est, d.pdim_limit_est
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = StreamKey::new(7, 1).trial(0);
    let mut compared = 0u64;
    for _ in 0..20 {
        let depth = rng.random_range(1..=3usize);
        let generations = (0..depth)
            .map(|_| {
                let c = rng.random_range(2..=5u64);
                let den = c as i64 + rng.random_range(0..=6i64);
                Generation { children: ChildCount::Exact(c), shrink: Shrink::Ratio(ratio(1, den)) }
            })
            .collect();
        let s = CantorSchedule::new(generations).map_err(err)?;
        let t = TargetSet::cantor(&s, depth, DEFAULT_INTERVAL_BUDGET).map_err(err)?;
        for n in 0..=12u32 {
            let brute = (0..1u64 << n)
                .filter(|&k| make_cube(n, &[k], Closure::HalfOpen).and_then(|q| t.intersects(&q)).unwrap_or(false))
                .count() as u64;
            let pruned = t.covering_count(n).map_err(err)?;
            ensure(pruned == brute, || format!("schedule {s:?}, n = {n}: pruned {pruned} vs brute {brute}"))?;
            compared += 1;
        }
    }
    let n8 = uniform_cantor(4, 2)?.covering_count(8).map_err(err)?;
    ensure(n8 == 16, || format!("N_8 = {n8}"))?;
    Ok(format!("pruned counts equal brute force on {compared} (schedule, n) pairs; N_8 = {n8}"))
}

fn criterion_8() -> Outcome {
    let bound = lemma23_bound(20, 0.25, 1024.0);
    // Independent oracle: 2^20 (63/64)^1024 from 30-digit arithmetic.
    let oracle = 0.1039990073939137;
    let sig4 = |x: f64| format!("{x:.4}");
    ensure(sig4(bound) == sig4(oracle), || format!("bound {bound} vs oracle {oracle}"))?;
    let quoted = 0.1038;
    let quoted_note = if sig4(bound) == sig4(quoted) {
        "matches the quoted 0.1038".to_string()
    } else {
        format!("the quoted 0.1038 differs in the 4th digit (formula gives {})", sig4(bound))
    };
    let r20 = lemma23_coverage(0.5, 0.25, 20, 1000, StreamKey::new(8, 1), None, cap()).map_err(err)?;
    ensure(r20.empirical_coverage >= 0.896 - r20.radius, || format!("n = 20 coverage {r20:?}"))?;
    let r24 = lemma23_coverage(0.5, 0.25, 24, 1000, StreamKey::new(8, 2), None, cap()).map_err(err)?;
    ensure(r24.empirical_noncover < r20.empirical_noncover, || {
        format!("non-coverage {} at n = 24 vs {} at n = 20", r24.empirical_noncover, r20.empirical_noncover)
    })?;
    Ok(format!(
        "bound {bound:.10} agrees with the high-precision oracle to 4 digits; {quoted_note}; coverage {:.3} at n = 20 (C_20 = {}), non-coverage {} at n = 24 < {:.3}",
        r20.empirical_coverage, r20.points, r24.empirical_noncover, r20.empirical_noncover
    ))
}

fn criterion_9() -> Outcome {
    let ts: Vec<f64> = (1..=6).map(|i| 1.0 - (-(i as f64)).exp2()).collect();
    let r = prop13_chain(&ts, 2, 6, 1 << 62, 2, DEFAULT_INTERVAL_BUDGET).map_err(err)?;
    ensure(r.n[0] == 14, || format!("n_1 = {}", r.n[0]))?;
    for row in &r.rows {
        ensure(row.log2_upper <= 1.0 - row.k as f64 + 1e-9, || format!("block {} bound 2^{}", row.k, row.log2_upper))?;
        ensure(row.chain_holds && row.target_holds, || format!("block {}: {row:?}", row.k))?;
    }
    let last = *r.partial_sums.last().ok_or("no partial sums")?;
    ensure(r.partial_sums.windows(2).all(|w| w[1] > w[0]) && last < 2.0, || {
        format!("partial sums {:?}", r.partial_sums)
    })?;
    let exact: Vec<String> =
        r.rows.iter().filter_map(|row| row.expected.map(|e| format!("E_{} = {e:.3e}", row.k))).collect();
    Ok(format!(
        "n_1 = 14; block k bound <= 2^(1-k) for k <= 6 ({}, certified upper bounds for k >= 3); partial sums up to {last:.4} < 2",
        exact.join(", ")
    ))
}

fn criterion_10() -> Outcome {
    let tr = prop14_counting(&ratio(1, 2), &[4], &[20], &[ratio(2, 5)], 1).map_err(err)?;
    let f1 = tr.rows[0].f_count.clone().unwrap_or_default();
    ensure(f1 == "56", || format!("#F_1 = {f1}"))?;
    // Limits 0.85 and 0.95 lie more than the tolerance apart, so swapped ratios would fail.
    let (t, gamma0) = (0.95, 0.15);
    let s = geometric_schedule(t, gamma0, 2.0, 3.0, 4, 20).map_err(err)?;
    let tr = prop14_counting(&s.t, &s.n, &s.m, &s.t_m, 20).map_err(err)?;
    ensure((tr.tail_ratio_f - (1.0 - gamma0)).abs() < 0.05, || format!("ratio_f tail {}", tr.tail_ratio_f))?;
    ensure((tr.tail_ratio_g - t).abs() < 0.05, || format!("ratio_g tail {}", tr.tail_ratio_g))?;
    Ok(format!(
        "#F_1 = 56; at k = 20 log#F/m = {:.4} (limit {}), log#G'/M = {:.4} (limit {t})",
        tr.tail_ratio_f,
        1.0 - gamma0,
        tr.tail_ratio_g
    ))
}

fn run_cli(config: &Path, kind: &str, out: &Path, workers: usize) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_fractal-hit-lab"))
        .args([kind, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--workers", &workers.to_string()])
        .output()
        .map_err(err)?;
    ensure(status.status.code() == Some(0), || {
        format!("{kind} exited {:?}: {}", status.status, String::from_utf8_lossy(&status.stderr))
    })?;
    std::fs::read(out.join(format!("{kind}.jsonl"))).map_err(err)
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut compared = Vec::new();
    for (file, kind) in [("hitprob-singleton.json", "hitprob"), ("sn-cantor.json", "sn"), ("lemma23.json", "lemma23")] {
        let config = configs.join(file);
        let runs = [(1, "a"), (1, "b"), (4, "c"), (16, "d")]
            .iter()
            .map(|&(w, tag)| run_cli(&config, kind, &dir.path().join(format!("{kind}-{tag}")), w))
            .collect::<Result<Vec<_>, _>>()?;
        ensure(runs.iter().all(|r| r == &runs[0] && !r.is_empty()), || format!("{kind}: JSONL differs between runs"))?;
        compared.push(kind);
    }
    Ok(format!("{} JSONL byte-identical across repeat runs and 1, 4, 16 workers", compared.join(", ")))
}

fn main() {
    let checks = [
        Check { id: 1, title: "exact P_n reproduction", budget: Duration::from_secs(1), run: criterion_1 },
        Check { id: 2, title: "exact covariance", budget: Duration::from_secs(10), run: criterion_2 },
        Check { id: 3, title: "correlation condition surrogate", budget: Duration::from_secs(30), run: criterion_3 },
        Check { id: 4, title: "phase transition surrogate", budget: Duration::from_secs(60), run: criterion_4 },
        Check { id: 5, title: "Paley-Zygmund suite", budget: Duration::from_secs(60), run: criterion_5 },
        Check { id: 6, title: "dimension formulas", budget: Duration::from_secs(5), run: criterion_6 },
        Check { id: 7, title: "covering counts", budget: Duration::from_secs(30), run: criterion_7 },
        Check { id: 8, title: "coverage by enlarged cubes", budget: Duration::from_secs(120), run: criterion_8 },
        Check { id: 9, title: "summability chain", budget: Duration::from_secs(10), run: criterion_9 },
        Check { id: 10, title: "counting recursions", budget: Duration::from_secs(5), run: criterion_10 },
        Check { id: 11, title: "determinism", budget: Duration::from_secs(120), run: criterion_11 },
    ];
    let mut failed = 0;
    for c in &checks {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.budget => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} budget", c.budget)),
            Err(e) => (false, e),
        };
        failed += !pass as u32;
        println!(
            "criterion {:>2} {} {} ({:.2} s): {detail}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() as u32 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
