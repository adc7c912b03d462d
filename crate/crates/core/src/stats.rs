//! Small statistical helpers shared by the experiments.

use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// `3·sqrt(p(1−p)/T)`, the radius used for every proportion check.
pub fn proportion_radius(p: f64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    let p = p.clamp(0.0, 1.0);
    3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Whether an empirical frequency is consistent with an exact probability.
///
/// Uses the exact probability for σ, so `p ∈ {0, 1}` demands an exact match.
pub fn agrees(empirical: f64, exact: f64, trials: u64) -> bool {
    (empirical - exact).abs() <= proportion_radius(exact, trials) + 1e-12
}

/// Sample mean and `3·sd/√T` radius.
pub fn mean_radius(values: &[f64]) -> (f64, f64) {
    let t = values.len();
    if t == 0 {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = values.iter().sum::<f64>() / t as f64;
    if t == 1 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (t - 1) as f64;
    (mean, 3.0 * (var / t as f64).sqrt())
}

/// Least-squares fit `y ≈ slope·x + intercept` with the RMS residual.
pub fn linear_fit(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    (slope, intercept, (rss / n).sqrt())
}

/// `log₂ x` for arbitrarily large integers; `-∞` for zero.
pub fn log2_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).log2();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap_or(f64::INFINITY).log2() + shift as f64
}

/// `ln(1 − 2^{-n})`, accurate for every `n ≥ 1`.
pub fn ln1m_pow2(n: u64) -> f64 {
    if n > 1100 {
        // 2^{-n} underflows; the correction is far below f64 resolution.
        return -0.0;
    }
    (-(-(n as f64)).exp2()).ln_1p()
}
