//! Dispatch from a manifest to the experiments.

use fractal_hit_lab_core::correlation::f_and_delta;
use fractal_hit_lab_core::experiments::{
    geometric_schedule, hn_upper_statistic, lemma23_coverage, prop14_counting, sandwich_check, sn_statistics,
    target_box_dim, window_hit_probability,
};
use fractal_hit_lab_core::{LevelCap, SelectionModel, StreamKey, TargetSet};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::manifest::{
    BoxdimParams, CorrParams, CountSchedule, Experiment, HitprobParams, HnParams, Lemma23Params, Manifest,
    Prop14CountParams, SnParams,
};
use crate::output::{col, Column, Outcome, Provenance::*};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub cap: LevelCap,
}

/// Validates the manifest by running every exact part, then samples.
///
/// All configuration errors surface from the first pass, before any trial runs.
pub fn run_manifest(manifest: &Manifest, opts: RunOptions) -> Result<Outcome, CliError> {
    let sampled = matches!(manifest.experiment, Experiment::Hitprob(_) | Experiment::Sn(_) | Experiment::Lemma23(_));
    if sampled && manifest.trials > 0 {
        run(manifest, 0, opts)?;
    }
    run(manifest, manifest.trials, opts)
}

fn run(manifest: &Manifest, trials: u64, opts: RunOptions) -> Result<Outcome, CliError> {
    let key = StreamKey::new(manifest.seed, manifest.kind().stream_id());
    match &manifest.experiment {
        Experiment::Hitprob(p) => hitprob(p, trials, key, opts),
        Experiment::Sn(p) => sn(p, trials, key, opts),
        Experiment::Hn(p) => hn(p, opts),
        Experiment::Boxdim(p) => boxdim(p, opts),
        Experiment::Lemma23(p) => lemma23(p, trials, key, opts),
        Experiment::Prop14Count(p) => prop14_count(p),
        Experiment::Corr(p) => corr(p),
    }
}

fn object<T: Serialize>(value: &T) -> Map<String, Value> {
    match serde_json::to_value(value).expect("result serializes") {
        Value::Object(m) => m,
        other => panic!("expected an object, got {other}"),
    }
}

fn model_and_target(model: &SelectionModel, target: &crate::manifest::TargetSpec) -> Result<TargetSet, CliError> {
    model.validate()?;
    let target = target.build()?;
    model.supports_dim(target.dim())?;
    Ok(target)
}

fn non_empty<T>(items: &[T], what: &str) -> Result<(), CliError> {
    if items.is_empty() {
        return Err(CliError::Config { path: what.into(), message: "must not be empty".into() });
    }
    Ok(())
}

pub const HITPROB_COLUMNS: &[Column] = &[
    col("n_lo", "level", Input),
    col("n_hi", "level", Input),
    col("counts", "cubes meeting the target per level", Exact),
    col("log_miss", "natural log of probability", Exact),
    col("oracle", "probability", Exact),
    col("trials", "count", Input),
    col("empirical", "frequency", Empirical),
    col("radius", "3 sigma of frequency", Empirical),
    col("agrees", "bool", Check),
    col("pass", "bool", Check),
];

fn hitprob(p: &HitprobParams, trials: u64, key: StreamKey, opts: RunOptions) -> Result<Outcome, CliError> {
    let target = model_and_target(&p.model, &p.target)?;
    non_empty(&p.windows, "experiment.hitprob.windows")?;
    let mut rows = Vec::with_capacity(p.windows.len());
    for (i, w) in p.windows.iter().enumerate() {
        let r = window_hit_probability(&p.model, &target, w, trials, key.child(i as u64), opts.workers, opts.cap)?;
        let mut row = object(&r);
        row.insert("pass".into(), Value::from(r.agrees.unwrap_or(true)));
        rows.push(row);
    }
    Ok(Outcome { columns: HITPROB_COLUMNS, rows })
}

pub const SN_COLUMNS: &[Column] = &[
    col("level", "level", Input),
    col("cells", "cubes meeting the target", Exact),
    col("exact_mean", "E S_n", Exact),
    col("exact_second_moment", "E S_n^2", Exact),
    col("exact_var", "Var S_n", Exact),
    col("exact_pos_prob", "P(S_n > 0)", Exact),
    col("pz_bound", "(E S_n)^2 / E S_n^2", Exact),
    col("trials", "count", Input),
    col("empirical_mean", "mean of S_n", Empirical),
    col("mean_radius", "3 sd / sqrt(T)", Empirical),
    col("empirical_pos_freq", "frequency of S_n > 0", Empirical),
    col("pos_radius", "3 sigma of frequency", Empirical),
    col("pos_agrees", "bool", Check),
    col("pz_holds", "bool", Check),
    col("pass", "bool", Check),
];

fn sn(p: &SnParams, trials: u64, key: StreamKey, opts: RunOptions) -> Result<Outcome, CliError> {
    let target = model_and_target(&p.model, &p.target)?;
    non_empty(&p.levels, "experiment.sn.levels")?;
    let mut rows = Vec::with_capacity(p.levels.len());
    for (i, &n) in p.levels.iter().enumerate() {
        let s = sn_statistics(&p.model, &target, n, trials, key.child(i as u64), opts.workers, opts.cap)?;
        let pass = s.pz_holds.unwrap_or(s.pz_bound <= s.exact_pos_prob + 1e-12);
        let mut row = object(&s);
        row.insert("pass".into(), Value::from(pass));
        rows.push(row);
    }
    Ok(Outcome { columns: SN_COLUMNS, rows })
}

pub const HN_COLUMNS: &[Column] = &[
    col("level", "level", Input),
    col("balls", "covering balls of radius 2^-(n+1)", Exact),
    col("gamma_sum", "sum of neighbourhood sizes", Exact),
    col("max_gamma", "largest neighbourhood", Exact),
    col("prob", "P_n", Exact),
    col("expected_h", "E H_n", Exact),
    col("box_dim", "box dimension used", Derived),
    col("gamma1_hat", "-log2(P_n)/n", Derived),
    col("epsilon", "slack exponent", Input),
    col("constant", "bound constant", Input),
    col("bound", "c 2^(n(box_dim - gamma1_hat + 2 epsilon))", Derived),
    col("pass", "bool", Check),
];

fn hn(p: &HnParams, opts: RunOptions) -> Result<Outcome, CliError> {
    let target = model_and_target(&p.model, &p.target)?;
    non_empty(&p.levels, "experiment.hn.levels")?;
    let mut rows = Vec::with_capacity(p.levels.len());
    for &n in &p.levels {
        let h = hn_upper_statistic(&p.model, &target, n, p.box_dim, p.epsilon, opts.cap)?;
        let mut row = object(&h);
        let holds = row.remove("holds").unwrap_or(Value::Bool(false));
        row.insert("pass".into(), holds);
        rows.push(row);
    }
    Ok(Outcome { columns: HN_COLUMNS, rows })
}

pub const BOXDIM_COLUMNS: &[Column] = &[
    col("record", "level or fit", Input),
    col("n", "level", Input),
    col("covering_count", "N_n(G)", Exact),
    col("expected_chosen", "N_n(G) P_n", Exact),
    col("slope", "log2 count per level", Derived),
    col("intercept", "log2 count", Derived),
    col("residual", "rms log2 count", Derived),
    col("lower", "slope bracket", Derived),
    col("upper", "slope bracket", Derived),
    col("pass", "bool", Check),
];

fn fit_row(record: &str, fit: &fractal_hit_lab_core::experiments::BoxDimEstimate) -> Map<String, Value> {
    let mut row = object(fit);
    row.insert("record".into(), Value::from(record));
    row
}

fn boxdim(p: &BoxdimParams, opts: RunOptions) -> Result<Outcome, CliError> {
    let target = p.target.build()?;
    if p.levels.len() < 3 {
        return Err(CliError::Config {
            path: "experiment.boxdim.levels".into(),
            message: "need at least 3 levels".into(),
        });
    }
    let mut rows = Vec::new();
    match &p.sandwich {
        None => {
            let (counts, fit) = target_box_dim(&target, &p.levels, opts.cap)?;
            for (n, c) in counts {
                let mut row = Map::new();
                row.insert("record".into(), Value::from("level"));
                row.insert("n".into(), Value::from(n));
                row.insert("covering_count".into(), Value::from(c));
                rows.push(row);
            }
            rows.push(fit_row("target_fit", &fit));
        }
        Some(s) => {
            s.model.validate()?;
            let r = sandwich_check(&s.model, &target, &p.levels, s.target_dim, s.gamma, s.margin, opts.cap)?;
            for &(n, c, e) in &r.rows {
                let mut row = Map::new();
                row.insert("record".into(), Value::from("level"));
                row.insert("n".into(), Value::from(n));
                row.insert("covering_count".into(), Value::from(c));
                row.insert("expected_chosen".into(), Value::from(e));
                rows.push(row);
            }
            rows.push(fit_row("target_fit", &r.target_fit));
            let mut chosen = fit_row("chosen_fit", &r.chosen_fit);
            chosen.insert("lower".into(), Value::from(r.lower));
            chosen.insert("upper".into(), Value::from(r.upper));
            chosen.insert("pass".into(), Value::from(r.holds));
            rows.push(chosen);
        }
    }
    Ok(Outcome { columns: BOXDIM_COLUMNS, rows })
}

pub const LEMMA23_COLUMNS: &[Column] = &[
    col("n", "level", Input),
    col("gamma0", "exponent", Input),
    col("beta", "exponent", Input),
    col("points", "C_n", Exact),
    col("ideal_bound", "2^n (1 - 2^(-n beta - 1))^(2^(n(1-gamma0)))", Exact),
    col("actual_bound", "same with exponent C_n", Exact),
    col("trials", "count", Input),
    col("covered", "trials covering [0,1]", Empirical),
    col("empirical_coverage", "frequency", Empirical),
    col("empirical_noncover", "frequency", Empirical),
    col("radius", "3 sigma of frequency", Empirical),
    col("decreasing", "bool", Check),
    col("pass", "bool", Check),
];

fn lemma23(p: &Lemma23Params, trials: u64, key: StreamKey, opts: RunOptions) -> Result<Outcome, CliError> {
    non_empty(&p.levels, "experiment.lemma23.levels")?;
    let mut rows = Vec::with_capacity(p.levels.len());
    let mut prev: Option<f64> = None;
    for (i, &n) in p.levels.iter().enumerate() {
        let r = lemma23_coverage(p.gamma0, p.beta, n, trials, key.child(i as u64), opts.workers, opts.cap)?;
        let mut pass = r.holds || trials == 0;
        let mut row = object(&r);
        row.remove("holds");
        if p.expect_decreasing && trials > 0 {
            let decreasing = prev.is_none_or(|q| r.empirical_noncover < q);
            pass &= decreasing;
            row.insert("decreasing".into(), Value::from(decreasing));
        }
        prev = Some(r.empirical_noncover);
        row.insert("pass".into(), Value::from(pass));
        rows.push(row);
    }
    Ok(Outcome { columns: LEMMA23_COLUMNS, rows })
}

pub const PROP14_COLUMNS: &[Column] = &[
    col("k", "generation", Input),
    col("n", "n_k", Input),
    col("m", "m_k", Input),
    col("big_m", "M_k = -log2 l_k", Exact),
    col("t_m", "t_(m_k)", Input),
    col("g_count", "#G'_k", Exact),
    col("f_count", "#F_k", Exact),
    col("log2_g", "log2 #G'_k", Exact),
    col("log2_f", "log2 #F_k", Exact),
    col("ratio_g", "log2 #G'_k / M_k", Derived),
    col("ratio_f", "log2 #F_k / m_k", Derived),
    col("within_limits", "bool", Check),
    col("pass", "bool", Check),
];

fn prop14_count(p: &Prop14CountParams) -> Result<Outcome, CliError> {
    let (n, m, t_m) = match &p.schedule {
        CountSchedule::Explicit { n, m, t_m } => (n.clone(), m.clone(), t_m.iter().map(|r| r.0.clone()).collect()),
        CountSchedule::Geometric { gamma0, alpha, beta, n1 } => {
            let t = num_traits::ToPrimitive::to_f64(&p.t.0).unwrap_or(f64::NAN);
            let s = geometric_schedule(t, *gamma0, *alpha, *beta, *n1, p.depth)?;
            (s.n, s.m, s.t_m)
        }
    };
    let trace = prop14_counting(&p.t.0, &n, &m, &t_m, p.depth)?;
    let last = trace.rows.len() - 1;
    let mut rows = Vec::with_capacity(trace.rows.len());
    for (i, r) in trace.rows.iter().enumerate() {
        let mut row = object(r);
        let mut pass = r.log2_f > 0.0 && r.log2_g >= 0.0;
        if let (Some(l), true) = (&p.limits, i == last) {
            let within = (r.ratio_f - l.ratio_f).abs() <= l.tolerance && (r.ratio_g - l.ratio_g).abs() <= l.tolerance;
            row.insert("within_limits".into(), Value::from(within));
            pass &= within;
        }
        row.insert("pass".into(), Value::from(pass));
        rows.push(row);
    }
    Ok(Outcome { columns: PROP14_COLUMNS, rows })
}

pub const CORR_COLUMNS: &[Column] = &[
    col("n", "level", Input),
    col("epsilon", "relative threshold", Input),
    col("f", "f(n, epsilon)", Exact),
    col("log2f_over_n", "log2 f / n", Derived),
    col("source", "exact or monte_carlo", Input),
    col("delta_est", "tail maximum of log2 f / n", Derived),
    col("window", "levels in the tail", Input),
    col("pass", "bool", Check),
];

fn corr(p: &CorrParams) -> Result<Outcome, CliError> {
    non_empty(&p.epsilons, "experiment.corr.epsilons")?;
    p.model.validate()?;
    p.model.supports_dim(p.dim)?;
    if p.n_lo == 0 || p.n_lo > p.n_hi {
        return Err(CliError::Config {
            path: "experiment.corr.n_lo".into(),
            message: format!("need 1 <= n_lo <= n_hi, got {}..{}", p.n_lo, p.n_hi),
        });
    }
    let mut rows = Vec::new();
    for &eps in &p.epsilons {
        let report = f_and_delta(&p.model, p.n_lo..=p.n_hi, p.dim, eps, p.window)?;
        let pass = p.max_delta.is_none_or(|d| report.delta_est <= d);
        for r in &report.rows {
            let mut row = object(r);
            row.insert("epsilon".into(), Value::from(eps));
            row.insert("delta_est".into(), Value::from(report.delta_est));
            row.insert("window".into(), Value::from(report.window));
            row.insert("pass".into(), Value::from(pass));
            rows.push(row);
        }
    }
    Ok(Outcome { columns: CORR_COLUMNS, rows })
}
