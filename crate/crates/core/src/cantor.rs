//! Homogeneous Cantor sets: generation schedules, exact interval levels and
//! the Feng–Wen–Wu style dimension sequences.
//!
//! Generation `k` replaces every interval of length `l_{k−1}` by `c_k` closed
//! children of length `l_k = r_k l_{k−1}`. The first child is flush with the
//! parent's left end, the last with its right end, and the gaps are equal.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{ceil_int, floor_pow2, fmt_rational, simplest_rational, RationalInterval, MAX_EXACT_BITS};
use crate::stats::log2_biguint;

/// Default cap on the number of intervals [`build_levels`] will materialise.
pub const DEFAULT_INTERVAL_BUDGET: usize = 1 << 20;

/// Default depth for Cantor targets.
pub const DEFAULT_DEPTH: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChildCount {
    Exact(u64),
    /// `2^m` children, kept symbolic because `m` can be astronomically large.
    PowerOfTwo(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Shrink {
    /// `l_k = 2^{-e} l_{k−1}`.
    PowerOfTwo(u64),
    /// `l_k = r · l_{k−1}`.
    Ratio(#[serde(with = "crate::rational::rational_str")] BigRational),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generation {
    pub children: ChildCount,
    pub shrink: Shrink,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CantorSchedule {
    generations: Vec<Generation>,
}

impl ChildCount {
    fn log2(&self) -> f64 {
        match self {
            ChildCount::Exact(c) => (*c as f64).log2(),
            ChildCount::PowerOfTwo(m) => *m as f64,
        }
    }

    fn log2_exact(&self) -> Option<u64> {
        match self {
            ChildCount::Exact(c) if c.is_power_of_two() => Some(c.trailing_zeros() as u64),
            ChildCount::Exact(_) => None,
            ChildCount::PowerOfTwo(m) => Some(*m),
        }
    }

    fn exact(&self) -> Option<BigUint> {
        match self {
            ChildCount::Exact(c) => Some(BigUint::from(*c)),
            ChildCount::PowerOfTwo(m) if *m <= MAX_EXACT_BITS => Some(BigUint::one() << *m),
            ChildCount::PowerOfTwo(_) => None,
        }
    }
}

impl Shrink {
    fn log2(&self) -> f64 {
        match self {
            Shrink::PowerOfTwo(e) => -(*e as f64),
            Shrink::Ratio(r) => log2_biguint(r.numer().magnitude()) - log2_biguint(r.denom().magnitude()),
        }
    }

    fn exact(&self) -> Option<BigRational> {
        match self {
            Shrink::PowerOfTwo(e) if *e <= MAX_EXACT_BITS => Some(BigRational::new(BigInt::one(), BigInt::one() << *e)),
            Shrink::PowerOfTwo(_) => None,
            Shrink::Ratio(r) => Some(r.clone()),
        }
    }
}

impl CantorSchedule {
    pub fn new(generations: Vec<Generation>) -> Result<Self> {
        for (i, g) in generations.iter().enumerate() {
            let k = i + 1;
            match g.children {
                ChildCount::Exact(c) if c < 2 => return Err(Error::DegenerateGeneration { k, children: c }),
                ChildCount::PowerOfTwo(0) => return Err(Error::DegenerateGeneration { k, children: 1 }),
                _ => {}
            }
            if let Shrink::Ratio(r) = &g.shrink {
                if !r.is_positive() {
                    return Err(Error::InvalidSchedule {
                        k,
                        reason: format!("ratio {} is not positive", fmt_rational(r)),
                    });
                }
            }
            let fits = match (&g.children, &g.shrink) {
                (ChildCount::PowerOfTwo(m), Shrink::PowerOfTwo(e)) => m <= e,
                (ChildCount::Exact(c), Shrink::PowerOfTwo(e)) => *e >= 64 || *c <= 1u64 << e,
                (children, Shrink::Ratio(r)) => match children.exact() {
                    Some(c) => BigRational::from_integer(BigInt::from(c)) * r <= BigRational::one(),
                    None => children.log2() + g.shrink.log2() <= 0.0,
                },
            };
            if !fits {
                return Err(Error::InvalidSchedule { k, reason: "children do not fit inside the parent".into() });
            }
        }
        Ok(CantorSchedule { generations })
    }

    /// `depth` generations of `c` children scaled by `ratio`.
    pub fn uniform(c: u64, ratio: BigRational, depth: usize) -> Result<Self> {
        let shrink = match crate::rational::DyadicRational::from_rational(&ratio) {
            Some(d) if d.numerator() == &BigInt::one() => Shrink::PowerOfTwo(d.exponent() as u64),
            _ => Shrink::Ratio(ratio),
        };
        let children =
            if c.is_power_of_two() { ChildCount::PowerOfTwo(c.trailing_zeros() as u64) } else { ChildCount::Exact(c) };
        Self::new(vec![Generation { children, shrink }; depth])
    }

    pub fn generations(&self) -> &[Generation] {
        &self.generations
    }

    pub fn depth(&self) -> usize {
        self.generations.len()
    }

    /// A schedule truncated to its first `depth` generations.
    pub fn truncated(&self, depth: usize) -> Self {
        CantorSchedule { generations: self.generations[..depth.min(self.depth())].to_vec() }
    }

    /// `log₂ N_k` (with `N_0 = 1`).
    pub fn log2_count(&self, k: usize) -> f64 {
        self.generations[..k].iter().map(|g| g.children.log2()).sum()
    }

    /// `log₂ l_k` (with `l_0 = 1`).
    pub fn log2_length(&self, k: usize) -> f64 {
        self.generations[..k].iter().map(|g| g.shrink.log2()).sum()
    }

    /// `log₂ N_k` as an integer when every child count is a power of two.
    pub fn log2_count_exact(&self, k: usize) -> Option<u64> {
        self.generations[..k].iter().map(|g| g.children.log2_exact()).sum()
    }

    /// `M_k = −log₂ l_k` when every shrink factor is a power of two.
    pub fn dyadic_exponent(&self, k: usize) -> Option<u64> {
        self.generations[..k]
            .iter()
            .map(|g| match g.shrink {
                Shrink::PowerOfTwo(e) => Some(e),
                Shrink::Ratio(_) => None,
            })
            .sum()
    }

    /// Exact `N_k`, if it fits the exact-arithmetic budget.
    pub fn count(&self, k: usize) -> Option<BigUint> {
        if self.log2_count(k) > MAX_EXACT_BITS as f64 {
            return None;
        }
        self.generations[..k].iter().try_fold(BigUint::one(), |acc, g| Some(acc * g.children.exact()?))
    }

    /// Exact `l_k`, if it fits the exact-arithmetic budget.
    pub fn length(&self, k: usize) -> Option<BigRational> {
        if -self.log2_length(k) > MAX_EXACT_BITS as f64 {
            return None;
        }
        self.generations[..k].iter().try_fold(BigRational::one(), |acc, g| Some(acc * g.shrink.exact()?))
    }

    /// The finest dyadic level `n` with `2^{-n} ≥ l_k`.
    pub fn resolved_level(&self, k: usize) -> u64 {
        if let Some(m) = self.dyadic_exponent(k) {
            return m;
        }
        match self.length(k) {
            Some(l) => {
                // ⌊log₂(1/l)⌋ for 1/l = q/p: largest n with p·2^n ≤ q.
                let (p, q) = (l.numer().magnitude().clone(), l.denom().magnitude().clone());
                let mut n = q.bits().saturating_sub(p.bits());
                while n > 0 && (&p << n) > q {
                    n -= 1;
                }
                while (&p << (n + 1)) <= q {
                    n += 1;
                }
                n
            }
            None => (-self.log2_length(k)).floor() as u64,
        }
    }
}

/// The exact intervals of generations `0..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CantorLevels {
    generations: Vec<Vec<RationalInterval>>,
}

impl CantorLevels {
    /// Generation `k` (0 is `[0,1]`), sorted left to right.
    pub fn generation(&self, k: usize) -> &[RationalInterval] {
        &self.generations[k]
    }

    pub fn depth(&self) -> usize {
        self.generations.len() - 1
    }

    /// Text table with one `left right` row of exact fractions per interval.
    pub fn to_table(&self, k: usize) -> String {
        let mut out = String::from("left right\n");
        for iv in self.generation(k) {
            out.push_str(&format!("{} {}\n", fmt_rational(&iv.left), fmt_rational(&iv.right)));
        }
        out
    }
}

/// Materialises generations `0..=depth` of `schedule`.
pub fn build_levels(schedule: &CantorSchedule, depth: usize, budget: usize) -> Result<CantorLevels> {
    if depth > schedule.depth() {
        return Err(Error::InvalidParameter(format!(
            "depth {depth} exceeds the schedule's {} generations",
            schedule.depth()
        )));
    }
    match schedule.count(depth).and_then(|c| c.to_usize()) {
        Some(c) if c <= budget => {}
        other => {
            let count = other.map(|c| c.to_string()).unwrap_or_else(|| format!("2^{:.1}", schedule.log2_count(depth)));
            return Err(Error::IntervalBudgetExceeded { count, budget });
        }
    }
    let mut generations = vec![vec![RationalInterval::closed(BigRational::zero(), BigRational::one())]];
    let mut parent_len = BigRational::one();
    for g in &schedule.generations[..depth] {
        let c = g.children.exact().and_then(|c| c.to_u64()).expect("count within budget");
        let child_len = &parent_len * g.shrink.exact().expect("length within budget");
        let step = (&parent_len - &child_len) / BigRational::from_integer(BigInt::from(c - 1));
        let offsets: Vec<BigRational> = (0..c).map(|i| &step * BigRational::from_integer(BigInt::from(i))).collect();
        let prev = generations.last().expect("generation 0 exists");
        let mut next = Vec::with_capacity(prev.len() * c as usize);
        for parent in prev {
            for off in &offsets {
                let left = &parent.left + off;
                let right = &left + &child_len;
                next.push(RationalInterval::closed(left, right));
            }
        }
        generations.push(next);
        parent_len = child_len;
    }
    Ok(CantorLevels { generations })
}

/// The tuned schedule of the summable-hitting construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prop13Schedule {
    /// `t_1..t_K`.
    pub t: Vec<f64>,
    /// `m_1..m_{K+1}`; the last entry is the tuned exponent of the next generation.
    pub m: Vec<u64>,
    /// `n_1..n_K`.
    pub n: Vec<u64>,
    /// `M_k = n_1 + … + n_k`.
    pub big_m: Vec<u64>,
    pub schedule: CantorSchedule,
}

impl Prop13Schedule {
    /// `Σ_{i≤k} m_i = log₂ N_k`.
    pub fn sum_m(&self, k: usize) -> u64 {
        self.m[..k].iter().sum()
    }

    /// The point process with `b_n = 2^{M_k t_k}` on `[M_k, M_{k+1})`.
    pub fn point_process(&self) -> crate::selection::PointProcessSpec {
        crate::selection::PointProcessSpec::prop13(self.big_m.clone(), self.t.clone())
    }
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `2^{m_{k+1}(1−t_k)} N_k l_k^{t_k} ≥ 1`, with `N_k = 2^{sum_m}`, `l_k = 2^{-big_m}`.
pub fn prop13_child_inequality(m_next: u64, sum_m: u64, big_m: u64, t: &BigRational) -> bool {
    rat(m_next) * (BigRational::one() - t) + rat(sum_m) - t * rat(big_m) >= BigRational::zero()
}

/// `n_k N_k l_k 2^{M_k t_k} ≤ 2^{-k}` with `M_k = big_m_prev + n`.
pub fn prop13_block_inequality(n: u64, sum_m: u64, big_m_prev: u64, t: &BigRational, k: u64) -> bool {
    // log₂ n ≤ r with r = M_k(1 − t) − Σm − k.
    let r = rat(big_m_prev + n) * (BigRational::one() - t) - rat(sum_m) - rat(k);
    if r.is_negative() {
        return false;
    }
    if r >= rat(64) {
        return true;
    }
    floor_pow2(&r).is_some_and(|f| BigUint::from(n) <= f)
}

/// Tunes `m_{k+1}` and `n_k` to the smallest integers satisfying both
/// inequalities of the construction, for `k = 1..=depth`.
pub fn schedule_prop13(t_seq: &[f64], m1: u64, depth: usize, search_limit: u64) -> Result<Prop13Schedule> {
    if depth == 0 || t_seq.len() < depth {
        return Err(Error::InvalidParameter(format!("need depth >= 1 and {depth} exponents, got {}", t_seq.len())));
    }
    if m1 == 0 {
        return Err(Error::DegenerateGeneration { k: 1, children: 1 });
    }
    let ts = &t_seq[..depth];
    if ts.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || ts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter("t_k must increase strictly inside (0, 1)".into()));
    }
    let mut m = vec![m1];
    let mut n = Vec::with_capacity(depth);
    let mut big_m = Vec::with_capacity(depth);
    let mut prev_big_m = 0u64;
    for (i, &tf) in ts.iter().enumerate() {
        let k = (i + 1) as u64;
        let t = simplest_rational(tf);
        let sum_m: u64 = m.iter().sum();
        let holds = |cand: u64| prop13_block_inequality(cand, sum_m, prev_big_m, &t, k);
        let lo = m[i].max(1);
        let turning = (1.0 / ((1.0 - tf) * std::f64::consts::LN_2)).ceil() as u64;
        let mut found = (lo..=lo.max(turning).min(search_limit)).find(|&c| holds(c));
        if found.is_none() {
            // Past the turning point the left side only decreases; gallop then bisect.
            let base = lo.max(turning);
            let mut step = 1u64;
            loop {
                let probe = base.checked_add(step).filter(|&p| p <= search_limit);
                match probe {
                    None => return Err(Error::SearchOverflow { what: "block length", k: i + 1, limit: search_limit }),
                    Some(p) if holds(p) => break,
                    Some(_) => step *= 2,
                }
            }
            let (mut a, mut b) = (base + step / 2, base + step);
            while a < b {
                let mid = a + (b - a) / 2;
                if holds(mid) {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            found = Some(a);
        }
        let nk = found.expect("search produced a value");
        let mk = prev_big_m + nk;
        n.push(nk);
        big_m.push(mk);
        prev_big_m = mk;
        // m_{k+1} = ⌈(t M_k − Σm)/(1 − t)⌉, at least 1.
        let raw = (&t * rat(mk) - rat(sum_m)) / (BigRational::one() - &t);
        let next = ceil_int(&raw).max(BigInt::one());
        let next = next.to_u64().filter(|&v| v <= search_limit).ok_or(Error::SearchOverflow {
            what: "child exponent",
            k: i + 1,
            limit: search_limit,
        })?;
        m.push(next);
    }
    let generations = (0..depth)
        .map(|i| Generation { children: ChildCount::PowerOfTwo(m[i]), shrink: Shrink::PowerOfTwo(n[i]) })
        .collect();
    Ok(Prop13Schedule { t: ts.to_vec(), m, n, big_m, schedule: CantorSchedule::new(generations)? })
}

/// `c_k = ⌊2^{n_k t}⌋` children of length `2^{-n_k} l_{k−1}`.
pub fn schedule_prop14(t: f64, n_seq: &[u64], depth: usize) -> Result<CantorSchedule> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} must lie in (0, 1]")));
    }
    if n_seq.len() < depth || n_seq[..depth].contains(&0) || n_seq[..depth].windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("n_k must be positive and non-decreasing".into()));
    }
    let tr = simplest_rational(t);
    let generations = n_seq[..depth]
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let c = floor_pow2(&(&tr * rat(n)))
                .and_then(|c| c.to_u64())
                .ok_or_else(|| Error::InvalidSchedule { k: i + 1, reason: "child count exceeds 64 bits".into() })?;
            if c < 2 {
                return Err(Error::DegenerateGeneration { k: i + 1, children: c });
            }
            Ok(Generation { children: ChildCount::Exact(c), shrink: Shrink::PowerOfTwo(n) })
        })
        .collect::<Result<Vec<_>>>()?;
    CantorSchedule::new(generations)
}

/// The sequences `h_k`, `p_k` and their tail-window surrogates.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousDims {
    /// `h_k = log N_{k+1} / (−log l_k)`, `k = 1..=K`.
    pub hdim_seq: Vec<f64>,
    /// `p_k = log N_{k+1} / (−log l_k + log(N_{k+1}/N_k))`.
    pub pdim_seq: Vec<f64>,
    /// Exact `h_k` when all logarithms are integers.
    pub hdim_exact: Option<Vec<BigRational>>,
    pub pdim_exact: Option<Vec<BigRational>>,
    /// Minimum of `h_k` over the tail window.
    pub hdim_limit_est: f64,
    /// Maximum of `p_k` over the tail window.
    pub pdim_limit_est: f64,
    pub window: usize,
}

/// Evaluates the dimension sequences up to `horizon`; needs `horizon + 1` generations.
pub fn homogeneous_dims(schedule: &CantorSchedule, horizon: usize, window: Option<usize>) -> Result<HomogeneousDims> {
    if horizon < 2 || schedule.depth() < horizon + 1 {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} needs >= 2 and {} generations, schedule has {}",
            horizon + 1,
            schedule.depth()
        )));
    }
    let window = window.unwrap_or(horizon.div_ceil(2)).clamp(1, horizon);
    let mut hdim_seq = Vec::with_capacity(horizon);
    let mut pdim_seq = Vec::with_capacity(horizon);
    let mut exact = Some((Vec::new(), Vec::new()));
    for k in 1..=horizon {
        let ln_next = schedule.log2_count(k + 1);
        let ln_k = schedule.log2_count(k);
        let neg_ll = -schedule.log2_length(k);
        hdim_seq.push(ln_next / neg_ll);
        pdim_seq.push(ln_next / (neg_ll + ln_next - ln_k));
        if let Some((h, p)) = exact.as_mut() {
            match (schedule.log2_count_exact(k + 1), schedule.log2_count_exact(k), schedule.dyadic_exponent(k)) {
                (Some(a), Some(b), Some(mk)) => {
                    h.push(BigRational::new(BigInt::from(a), BigInt::from(mk)));
                    p.push(BigRational::new(BigInt::from(a), BigInt::from(mk + a - b)));
                }
                _ => exact = None,
            }
        }
    }
    let tail = horizon - window;
    let hdim_limit_est = hdim_seq[tail..].iter().copied().fold(f64::INFINITY, f64::min);
    let pdim_limit_est = pdim_seq[tail..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (hdim_exact, pdim_exact) = match exact {
        Some((h, p)) => (Some(h), Some(p)),
        None => (None, None),
    };
    Ok(HomogeneousDims { hdim_seq, pdim_seq, hdim_exact, pdim_exact, hdim_limit_est, pdim_limit_est, window })
}
