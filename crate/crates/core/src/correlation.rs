//! Covariances of `Z_n(Q)`, the pair-count function `f(n, ε)` and the
//! finite-level exponent estimate `log₂ f(n, ε) / n`.
//!
//! Both models are exchangeable within a level: the covariance of two
//! distinct cubes does not depend on where they sit. `f` therefore reduces
//! to the self pair plus all-or-nothing for the others. Empirical estimates
//! are indexed by the offset `|i − j|` instead, and `f` is evaluated with a
//! prefix count over offsets.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{CellSet, CubeIndex, LevelCap};
use crate::rational::simplest_rational;
use crate::rng::{run_trials, StreamKey};
use crate::selection::{
    block_count, one_minus_pow2_pow, sample_among, sample_level, PointProcessSpec, SelectionModel, MAX_EXACT_PROB_BITS,
};
use crate::stats::mean_radius;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovSource {
    Exact,
    MonteCarlo,
}

/// `Cov(Z_n(Q), Z_n(Q'))` for one pair of cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovEstimate {
    pub level: u32,
    pub a: u64,
    pub b: u64,
    pub value: f64,
    #[serde(skip)]
    pub exact: Option<BigRational>,
    pub source: CovSource,
    pub trials: Option<u64>,
    pub radius: Option<f64>,
}

/// One level of a [`CorrelationReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FRow {
    pub n: u32,
    pub f: u64,
    pub log2f_over_n: f64,
    pub source: CovSource,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub epsilon: f64,
    pub rows: Vec<FRow>,
    /// Maximum of `log₂ f / n` over the last `window` rows.
    pub delta_est: f64,
    pub window: usize,
}

/// Cross-pair covariance of the point process with `c` points at level `n`:
/// `(1 − 2p)^c − (1 − p)^{2c}` with `p = 2^{-n}`, and its exact value when
/// `n·c` is within [`MAX_EXACT_PROB_BITS`].
pub fn pp_cross_cov(n: u32, c: u64) -> (f64, Option<BigRational>) {
    if c == 0 {
        return (0.0, Some(BigRational::zero()));
    }
    let exact = (n as u64).checked_mul(c).filter(|&b| b <= MAX_EXACT_PROB_BITS).map(|_| {
        let miss = one_minus_pow2_pow(n as u64, 1, c);
        one_minus_pow2_pow(n as u64, 2, c) - &miss * &miss
    });
    let value = exact.as_ref().and_then(|e| e.to_f64()).unwrap_or_else(|| pp_cross_cov_f64(n, c));
    (value, exact)
}

/// Floating-point form `(1−p)^{2c}·((1 − p²/(1−p)²)^c − 1)`, accurate for tiny `p`.
pub fn pp_cross_cov_f64(n: u32, c: u64) -> f64 {
    if c == 0 {
        return 0.0;
    }
    let p = (-(n as f64)).exp2();
    let c = c as f64;
    (2.0 * c * (-p).ln_1p()).exp() * (c * (-(p / (1.0 - p)).powi(2)).ln_1p()).exp_m1()
}

/// `log₂(−Cov)` of a cross pair; finite exactly when the covariance is
/// negative, also where the covariance itself underflows.
pub fn pp_cross_cov_log2_neg(n: u32, c: u64) -> f64 {
    if c == 0 {
        return f64::NEG_INFINITY;
    }
    let p = (-(n as f64)).exp2();
    let c = c as f64;
    let inner = -(c * (-(p / (1.0 - p)).powi(2)).ln_1p()).exp_m1();
    2.0 * c * (-p).ln_1p() / std::f64::consts::LN_2 + inner.log2()
}

/// Whether `(1 − 2p) < (1 − p)²` exactly, which makes every cross
/// covariance with `c ≥ 1` strictly negative.
pub fn pp_cross_cov_is_negative(n: u32, c: u64) -> bool {
    if c == 0 {
        return false;
    }
    let p = BigRational::new(BigInt::one(), BigInt::one() << n as usize);
    let one = BigRational::one();
    let lhs = &one - &p * BigRational::from_integer(2.into());
    let base = &one - &p;
    lhs < &base * &base
}

fn check_pair(n: u32, a: &CubeIndex, b: &CubeIndex) -> Result<()> {
    for cube in [a, b] {
        if cube.level() != n {
            return Err(Error::LevelMismatch(cube.level(), n));
        }
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// Exact covariance for the point-process model (d = 1).
pub fn exact_pp_cov(spec: &PointProcessSpec, n: u32, a: &CubeIndex, b: &CubeIndex) -> Result<CovEstimate> {
    check_pair(n, a, b)?;
    if a.dim() != 1 {
        return Err(Error::UnsupportedDimension(a.dim()));
    }
    let (value, exact) = if a == b {
        self_cov(spec.hit_prob(n as u64), spec.hit_prob_rational(n as u64))
    } else {
        pp_cross_cov(n, block_count(spec, n as u64)?)
    };
    Ok(CovEstimate {
        level: n,
        a: a.linear_index(),
        b: b.linear_index(),
        value,
        exact,
        source: CovSource::Exact,
        trials: None,
        radius: None,
    })
}

fn self_cov(p: f64, exact: Option<BigRational>) -> (f64, Option<BigRational>) {
    let exact = exact.map(|p| &p * (BigRational::one() - &p));
    let value = exact.as_ref().and_then(|e| e.to_f64()).unwrap_or(p * (1.0 - p));
    (value, exact)
}

/// Exact covariance for either model; Bernoulli cubes are independent.
pub fn exact_cov(model: &SelectionModel, n: u32, a: &CubeIndex, b: &CubeIndex) -> Result<CovEstimate> {
    match model {
        SelectionModel::PointProcess(spec) => exact_pp_cov(spec, n, a, b),
        SelectionModel::Bernoulli(spec) => {
            check_pair(n, a, b)?;
            let (value, exact) = if a == b {
                self_cov(spec.prob(n as u64)?, spec.prob_rational(n as u64))
            } else {
                (0.0, Some(BigRational::zero()))
            };
            Ok(CovEstimate {
                level: n,
                a: a.linear_index(),
                b: b.linear_index(),
                value,
                exact,
                source: CovSource::Exact,
                trials: None,
                radius: None,
            })
        }
    }
}

/// Sample covariances of the given cell pairs over `trials` independent
/// level selections (d = 1), each with a `3·sd/√T` radius.
pub fn empirical_cov(
    model: &SelectionModel,
    n: u32,
    pairs: &[(u64, u64)],
    trials: u64,
    key: StreamKey,
    workers: Option<usize>,
) -> Result<Vec<CovEstimate>> {
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("empirical covariance needs at least 100 trials, got {trials}")));
    }
    model.supports_dim(1)?;
    let mut cells: Vec<u64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    cells.sort_unstable();
    cells.dedup();
    if cells.last().is_some_and(|&c| n >= 63 || c >> n != 0) {
        return Err(Error::CoordOutOfRange { axis: 0, coord: *cells.last().unwrap(), level: n });
    }
    let candidates = CellSet::List(cells.clone());
    let draws = run_trials(key, trials, workers, |_, rng| sample_among(model, n, &candidates, rng));
    let draws: Vec<Vec<u64>> = draws.into_iter().collect::<Result<_>>()?;
    let t = trials as f64;
    let indicator = |draw: &Vec<u64>, c: u64| if draw.binary_search(&c).is_ok() { 1.0 } else { 0.0 };
    pairs
        .iter()
        .map(|&(a, b)| {
            let xs: Vec<f64> = draws.iter().map(|d| indicator(d, a)).collect();
            let ys: Vec<f64> = draws.iter().map(|d| indicator(d, b)).collect();
            let mx = xs.iter().sum::<f64>() / t;
            let my = ys.iter().sum::<f64>() / t;
            let terms: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).collect();
            let (mean, radius) = mean_radius(&terms);
            Ok(CovEstimate {
                level: n,
                a,
                b,
                value: mean * t / (t - 1.0),
                exact: None,
                source: CovSource::MonteCarlo,
                trials: Some(trials),
                radius: Some(radius),
            })
        })
        .collect()
}

/// `max_k q₀ + P(k) + P(2ⁿ − 1 − k)` where `P(m)` counts qualifying offsets
/// `1..=m`: the largest number of cells qualifying with some cell `k` when
/// qualification depends on the offset only.
pub fn f_from_offsets(qualifies: &[bool]) -> u64 {
    let cells = qualifies.len();
    if cells == 0 {
        return 0;
    }
    let mut prefix = vec![0u64; cells];
    for d in 1..cells {
        prefix[d] = prefix[d - 1] + qualifies[d] as u64;
    }
    let q0 = qualifies[0] as u64;
    (0..cells).map(|k| q0 + prefix[k] + prefix[cells - 1 - k]).max().unwrap_or(0)
}

/// Whether `cov ≥ ε·P²`, exactly when both sides are rational.
fn qualifies(
    cov: f64,
    cov_exact: Option<&BigRational>,
    p: f64,
    p_exact: Option<&BigRational>,
    eps: &BigRational,
    eps_f: f64,
) -> bool {
    match (cov_exact, p_exact) {
        (Some(c), Some(p)) => *c >= eps * p * p,
        _ => cov >= eps_f * p * p,
    }
}

/// `f(n, ε)` from the exact covariances (exchangeable models).
pub fn f_exact(model: &SelectionModel, n: u32, dim: usize, epsilon: f64) -> Result<u64> {
    model.supports_dim(dim)?;
    let bits = n as u64 * dim as u64;
    if bits > 62 {
        return Err(Error::LevelCapExceeded { level: n, cap: (62 / dim as u64) as u32 });
    }
    let p = model.hit_prob(n as u64)?;
    let p_exact = model.hit_prob_rational(n as u64);
    let eps = simplest_rational(epsilon);
    let (self_v, self_e) = self_cov(p, p_exact.clone());
    let (cross_v, cross_e) = match model {
        SelectionModel::Bernoulli(_) => (0.0, Some(BigRational::zero())),
        SelectionModel::PointProcess(spec) => pp_cross_cov(n, block_count(spec, n as u64)?),
    };
    let q_self = qualifies(self_v, self_e.as_ref(), p, p_exact.as_ref(), &eps, epsilon);
    let q_cross = qualifies(cross_v, cross_e.as_ref(), p, p_exact.as_ref(), &eps, epsilon);
    Ok(q_self as u64 + ((1u64 << bits) - 1) * q_cross as u64)
}

/// Largest level for which [`f_empirical`] samples whole levels.
pub const MAX_EMPIRICAL_LEVEL: u32 = 12;

/// `f(n, ε)` with offset covariances estimated from `trials` sampled
/// levels (d = 1). Fails when a confidence radius straddles the threshold.
pub fn f_empirical(
    model: &SelectionModel,
    n: u32,
    epsilon: f64,
    trials: u64,
    key: StreamKey,
    workers: Option<usize>,
) -> Result<u64> {
    if n > MAX_EMPIRICAL_LEVEL {
        return Err(Error::LevelCapExceeded { level: n, cap: MAX_EMPIRICAL_LEVEL });
    }
    if trials < 100 {
        return Err(Error::InvalidParameter(format!("empirical f needs at least 100 trials, got {trials}")));
    }
    let cells = 1usize << n;
    let cap = LevelCap(MAX_EMPIRICAL_LEVEL);
    // Per trial: number of chosen cells and chosen pairs at each offset.
    let per_trial = run_trials(key, trials, workers, |_, rng| -> Result<(u64, Vec<(usize, u64)>)> {
        let sel = sample_level(model, n, 1, cap, rng)?;
        let mut counts = std::collections::BTreeMap::new();
        for (i, &a) in sel.chosen.iter().enumerate() {
            for &b in &sel.chosen[i + 1..] {
                *counts.entry((b - a) as usize).or_insert(0u64) += 1;
            }
        }
        Ok((sel.chosen.len() as u64, counts.into_iter().collect()))
    });
    let per_trial: Vec<(u64, Vec<(usize, u64)>)> = per_trial.into_iter().collect::<Result<_>>()?;
    let t = trials as f64;
    let p = model.hit_prob(n as u64)?;
    let threshold = epsilon * p * p;
    // X_d = chosen pairs at offset d / (2ⁿ − d) has mean E[Z_i Z_{i+d}].
    let mut sum = vec![0.0f64; cells];
    let mut sumsq = vec![0.0f64; cells];
    let sizes: Vec<f64> = per_trial.iter().map(|(s, _)| *s as f64 / cells as f64).collect();
    for (_, pairs) in &per_trial {
        for &(d, c) in pairs {
            let x = c as f64 / (cells - d) as f64;
            sum[d] += x;
            sumsq[d] += x * x;
        }
    }
    let (p_hat, p_radius) = mean_radius(&sizes);
    sum[0] = sizes.iter().sum();
    sumsq[0] = sizes.iter().map(|x| x * x).sum();
    let mut q = vec![false; cells];
    for d in 0..cells {
        let mean = sum[d] / t;
        let var = ((sumsq[d] / t - mean * mean) * t / (t - 1.0)).max(0.0);
        let radius = 3.0 * (var / t).sqrt() + 2.0 * p_hat * p_radius + p_radius * p_radius;
        let cov = mean - p_hat * p_hat;
        if (cov - threshold).abs() <= radius {
            return Err(Error::InsufficientPrecision { level: n, offset: d as u64, radius });
        }
        q[d] = cov >= threshold;
    }
    Ok(f_from_offsets(&q))
}

/// `f(n, ε)` and `log₂ f / n` over `levels`, with the tail-window maximum.
pub fn f_and_delta(
    model: &SelectionModel,
    levels: std::ops::RangeInclusive<u32>,
    dim: usize,
    epsilon: f64,
    window: Option<usize>,
) -> Result<CorrelationReport> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be positive")));
    }
    let rows = levels
        .map(|n| {
            if n == 0 {
                return Err(Error::InvalidParameter("levels start at 1".into()));
            }
            let f = f_exact(model, n, dim, epsilon)?;
            Ok(FRow { n, f, log2f_over_n: (f as f64).log2() / n as f64, source: CovSource::Exact })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(report(epsilon, rows, window))
}

/// Assembles a report with the tail-window estimate (default: last half).
pub fn report(epsilon: f64, rows: Vec<FRow>, window: Option<usize>) -> CorrelationReport {
    let window = window.unwrap_or(rows.len().div_ceil(2)).clamp(1, rows.len().max(1));
    let delta_est =
        rows[rows.len().saturating_sub(window)..].iter().map(|r| r.log2f_over_n).fold(f64::NEG_INFINITY, f64::max);
    CorrelationReport { epsilon, rows, delta_est, window }
}
