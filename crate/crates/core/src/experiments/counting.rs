//! The counting recursions `#F_k`, `#G'_{k+1}` of the ⌊2^{n_k t}⌋-ary construction.
//!
//! Every factor has the form `⌊2^x⌋ − 2` with an exact rational `x`:
//! `x = m_k t_{m_k} − M_k` for `F_k` and `x = n_{k+1} t − (m_k − M_k)` for
//! `G'_{k+1}`, using `⌊⌊y⌋ / 2^s⌋ = ⌊y / 2^s⌋` for integer `s ≥ 0`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{ceil_int, floor_pow2, simplest_rational};
use crate::stats::log2_biguint;

/// Factors with `x` above this are carried in the log domain only.
pub const MAX_EXACT_FACTOR_EXPONENT: u64 = 4096;
/// Counts above this many bits are reported through their logarithm only.
pub const MAX_EXACT_COUNT_BITS: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingRow {
    pub k: usize,
    pub n: u64,
    pub m: u64,
    /// `M_k = n_1 + … + n_k = −log₂ l_k`.
    pub big_m: u64,
    pub t_m: String,
    pub log2_g: f64,
    pub log2_f: f64,
    /// Exact `#G'_k` as a decimal string when small enough.
    pub g_count: Option<String>,
    pub f_count: Option<String>,
    /// `log #F_k / (m_k log 2)`.
    pub ratio_f: f64,
    /// `log #G'_k / (−log l_k)`.
    pub ratio_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingTrace {
    pub t: String,
    pub rows: Vec<CountingRow>,
    /// `log₂ #G'_{K+1}` when `n_{K+1}` was supplied.
    pub log2_g_next: Option<f64>,
    pub tail_ratio_f: f64,
    pub tail_ratio_g: f64,
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// A count carried exactly while affordable, always with its logarithm.
#[derive(Debug, Clone)]
struct Count {
    exact: Option<BigUint>,
    log2: f64,
}

impl Count {
    fn times(&self, factor: &Factor) -> Count {
        let exact = match (&self.exact, &factor.exact) {
            (Some(a), Some(b)) if a.bits() + b.bits() <= MAX_EXACT_COUNT_BITS => Some(a * b),
            _ => None,
        };
        let log2 = exact.as_ref().map(log2_biguint).unwrap_or(self.log2 + factor.log2);
        Count { exact, log2 }
    }
}

struct Factor {
    exact: Option<BigUint>,
    log2: f64,
}

/// `⌊2^x⌋ − 2`, requiring it to be at least 1.
fn factor(x: &BigRational, k: usize, what: &str) -> Result<Factor> {
    let violated = |detail: String| Error::SideConditionViolated { k, condition: format!("{what}: {detail}") };
    let two = rat(2);
    let small = x <= &rat(MAX_EXACT_FACTOR_EXPONENT);
    let floor = if small { floor_pow2(x) } else { None };
    match floor {
        Some(f) => {
            if f < BigUint::from(3u32) {
                return Err(violated(format!("floor(2^{x}) = {f} < 3")));
            }
            let v = f - 2u32;
            Ok(Factor { log2: log2_biguint(&v), exact: Some(v) })
        }
        None if x >= &two => {
            // 2^x − 3 < ⌊2^x⌋ − 2 ≤ 2^x − 1: the logarithm is x to f64 precision once x is large.
            let xf = x.to_f64().unwrap_or(f64::INFINITY);
            Ok(Factor { exact: None, log2: xf + (-(2.0 - xf).exp2()).ln_1p() / std::f64::consts::LN_2 })
        }
        None => Err(violated(format!("cannot decide floor(2^{x}) >= 3"))),
    }
}

/// Evaluates the recursions for `k = 1..=depth`.
///
/// Requires `n_seq.len() ≥ depth`, `m_seq.len() ≥ depth` and
/// `t_m_seq.len() ≥ depth`; `#G'_{K+1}` is added when `n_{K+1}` is present.
pub fn prop14_counting(
    t: &BigRational,
    n_seq: &[u64],
    m_seq: &[u64],
    t_m_seq: &[BigRational],
    depth: usize,
) -> Result<CountingTrace> {
    if depth == 0 || n_seq.len() < depth || m_seq.len() < depth || t_m_seq.len() < depth {
        return Err(Error::InvalidParameter(format!("need {depth} entries of n, m and t_m")));
    }
    if !(t > &BigRational::from_integer(0.into()) && t <= &BigRational::one()) {
        return Err(Error::InvalidParameter(format!("t = {t} must lie in (0, 1]")));
    }
    if n_seq.contains(&0) {
        return Err(Error::InvalidParameter("n_k must be positive".into()));
    }
    let mut big_m = n_seq[0];
    let n1t = t * rat(n_seq[0]);
    let n1 = if n1t <= rat(MAX_EXACT_FACTOR_EXPONENT) { floor_pow2(&n1t) } else { None }
        .ok_or_else(|| Error::InvalidParameter(format!("N_1 = floor(2^{n1t}) is out of range")))?;
    let mut g = Count { log2: log2_biguint(&n1), exact: Some(n1) };
    let mut rows = Vec::with_capacity(depth);
    let mut log2_g_next = None;
    for i in 0..depth {
        let k = i + 1;
        let (m, tm) = (m_seq[i], &t_m_seq[i]);
        if m <= big_m {
            return Err(Error::SideConditionViolated { k, condition: format!("m_k = {m} must exceed M_k = {big_m}") });
        }
        // m_k > (M_k + 1)/t_{m_k}.
        if rat(m) * tm <= rat(big_m + 1) {
            return Err(Error::SideConditionViolated {
                k,
                condition: format!("m_k t_m = {} must exceed M_k + 1 = {}", rat(m) * tm, big_m + 1),
            });
        }
        let f = g.times(&factor(&(rat(m) * tm - rat(big_m)), k, "F_k")?);
        rows.push(CountingRow {
            k,
            n: n_seq[i],
            m,
            big_m,
            t_m: tm.to_string(),
            log2_g: g.log2,
            log2_f: f.log2,
            g_count: g.exact.as_ref().map(ToString::to_string),
            f_count: f.exact.as_ref().map(ToString::to_string),
            ratio_f: f.log2 / m as f64,
            ratio_g: g.log2 / big_m as f64,
        });
        let Some(&n_next) = n_seq.get(k) else { break };
        let x = t * rat(n_next) - rat(m - big_m);
        g = f.times(&factor(&x, k, "G'_{k+1}")?);
        big_m = big_m.checked_add(n_next).ok_or_else(|| Error::InvalidParameter("M_k overflows 64 bits".into()))?;
        if k == depth {
            log2_g_next = Some(g.log2);
        }
    }
    let last = rows.last().expect("depth >= 1");
    let (tail_ratio_f, tail_ratio_g) = (last.ratio_f, last.ratio_g);
    Ok(CountingTrace { t: t.to_string(), rows, log2_g_next, tail_ratio_f, tail_ratio_g })
}

/// A schedule with `t_{m_k} = (1 − γ₀)(1 − 2^{−k−2}) ↑ 1 − γ₀`, `m_k` growing
/// geometrically in `M_k` and `n_{k+1}` growing geometrically in `Σ m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricSchedule {
    pub t: BigRational,
    /// `n_1..n_{K+1}`.
    pub n: Vec<u64>,
    pub m: Vec<u64>,
    pub t_m: Vec<BigRational>,
}

fn ceil_u64(x: &BigRational) -> Result<u64> {
    ceil_int(x).to_u64().ok_or_else(|| Error::InvalidParameter(format!("schedule entry {x} overflows 64 bits")))
}

/// Builds a schedule satisfying the side conditions, with
/// `m_k = max(⌈αM_k⌉, ⌈(M_k+2)/t_{m_k}⌉, M_k + 1)` and
/// `n_{k+1} = max(⌈β Σ_{i≤k} m_i⌉, ⌈(m_k − M_k + 2)/t⌉, n_k + 1)`.
pub fn geometric_schedule(
    t: f64,
    gamma0: f64,
    alpha: f64,
    beta: f64,
    n1: u64,
    depth: usize,
) -> Result<GeometricSchedule> {
    if !(t > 0.0 && t <= 1.0) || !(0.0..1.0).contains(&gamma0) || alpha < 1.0 || beta <= 0.0 || n1 == 0 {
        return Err(Error::InvalidParameter(format!(
            "geometric schedule needs t in (0,1], gamma0 in [0,1), alpha >= 1, beta > 0, n1 >= 1; got {t}, {gamma0}, {alpha}, {beta}, {n1}"
        )));
    }
    let tr = simplest_rational(t);
    let one_minus_g = BigRational::one() - simplest_rational(gamma0);
    let (a, b) = (simplest_rational(alpha), simplest_rational(beta));
    let mut n = vec![n1];
    let mut m = Vec::with_capacity(depth);
    let mut t_m = Vec::with_capacity(depth);
    let (mut big_m, mut sum_m) = (n1, 0u64);
    for k in 1..=depth {
        let tm = &one_minus_g * (BigRational::one() - BigRational::new(BigInt::one(), BigInt::one() << (k + 2)));
        let mk = ceil_u64(&(&a * rat(big_m)))?.max(ceil_u64(&(rat(big_m + 2) / &tm))?).max(big_m + 1);
        sum_m = sum_m.checked_add(mk).ok_or_else(|| Error::InvalidParameter("sum of m_k overflows".into()))?;
        let nk = ceil_u64(&(&b * rat(sum_m)))?.max(ceil_u64(&(rat(mk - big_m + 2) / &tr))?).max(n[k - 1] + 1);
        big_m = big_m.checked_add(nk).ok_or_else(|| Error::InvalidParameter("M_k overflows".into()))?;
        m.push(mk);
        t_m.push(tm);
        n.push(nk);
    }
    Ok(GeometricSchedule { t: tr, n, m, t_m })
}
