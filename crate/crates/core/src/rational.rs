//! Exact arithmetic helpers: dyadic rationals, closed/half-open rational
//! intervals, and exact floors/ceilings of `2^x` for rational `x`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Largest root degree `q` for which `⌊2^{p/q}⌋` is evaluated exactly.
pub const MAX_ROOT_DEGREE: u64 = 1 << 8;

/// Largest numerator `p` (in bits of `2^p`) evaluated exactly.
pub const MAX_EXACT_BITS: u64 = 1 << 20;

/// A number `numerator / 2^exponent`, kept in lowest terms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DyadicRational {
    numerator: BigInt,
    exponent: u32,
}

impl DyadicRational {
    pub fn new(numerator: impl Into<BigInt>, exponent: u32) -> Self {
        let mut numerator = numerator.into();
        let mut exponent = exponent;
        if numerator.is_zero() {
            exponent = 0;
        } else {
            let tz = numerator.trailing_zeros().unwrap_or(0);
            let shift = tz.min(exponent as u64) as u32;
            numerator >>= shift;
            exponent -= shift;
        }
        Self { numerator, exponent }
    }

    pub fn integer(value: impl Into<BigInt>) -> Self {
        Self::new(value, 0)
    }

    pub fn zero() -> Self {
        Self::integer(0)
    }

    pub fn numerator(&self) -> &BigInt {
        &self.numerator
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    pub fn to_rational(&self) -> BigRational {
        BigRational::new(self.numerator.clone(), BigInt::one() << self.exponent)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_rational().to_f64().unwrap_or(f64::NAN)
    }

    /// Returns the dyadic value of `r` if its reduced denominator is a power of two.
    pub fn from_rational(r: &BigRational) -> Option<Self> {
        let den = r.denom();
        if den.sign() != Sign::Plus || den.magnitude().count_ones() != 1 {
            return None;
        }
        let exponent = den.trailing_zeros()? as u32;
        Some(Self::new(r.numer().clone(), exponent))
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, u32) {
        let e = self.exponent.max(other.exponent);
        (&self.numerator << (e - self.exponent), &other.numerator << (e - other.exponent), e)
    }

    pub fn add(&self, other: &Self) -> Self {
        let (a, b, e) = self.aligned(other);
        Self::new(a + b, e)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b, e) = self.aligned(other);
        Self::new(a - b, e)
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::new(&self.numerator * &other.numerator, self.exponent + other.exponent)
    }

    pub fn abs(&self) -> Self {
        Self::new(self.numerator.abs(), self.exponent)
    }
}

impl Ord for DyadicRational {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b, _) = self.aligned(other);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponent == 0 {
            write!(f, "{}", self.numerator)
        } else {
            write!(f, "{}/{}", self.numerator, BigInt::one() << self.exponent)
        }
    }
}

/// Formats a rational as `numerator/denominator` (integers print bare).
pub fn fmt_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"0.375"` exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        if q.is_zero() {
            return None;
        }
        return Some(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let digits = format!("{}{}", int.trim_start_matches('-'), frac);
        let mut p: BigInt = digits.parse().ok()?;
        if negative {
            p = -p;
        }
        let q = num_traits::pow(BigInt::from(10), frac.len());
        return Some(BigRational::new(p, q));
    }
    s.parse::<BigInt>().ok().map(BigRational::from_integer)
}

/// The simplest rational within a relative tolerance of `1e-12` of `x`.
///
/// Configuration values such as `0.3` are intended as `3/10`, not as the
/// binary64 number nearest to it; exponent arithmetic relies on that reading.
pub fn simplest_rational(x: f64) -> BigRational {
    assert!(x.is_finite(), "simplest_rational of non-finite value");
    let tol = 1e-12 * x.abs().max(1.0);
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = BigRational::new(h1.clone(), k1.clone());
        if (approx.to_f64().unwrap_or(f64::NAN) - x).abs() <= tol {
            return approx;
        }
        let frac = rem - a;
        if frac == 0.0 {
            break;
        }
        rem = 1.0 / frac;
    }
    BigRational::from_float(x).expect("finite")
}

/// Largest `x` for which [`floor_pow2`] falls back to series evaluation when
/// the root degree is too large for an integer root.
pub const MAX_SERIES_EXPONENT: u64 = 1 << 12;

/// Exact `⌊2^x⌋` for rational `x ≥ 0`, or `None` when the evaluation would
/// exceed the exactness budget.
pub fn floor_pow2(x: &BigRational) -> Option<BigUint> {
    if x.is_negative() {
        return Some(BigUint::zero());
    }
    let p = x.numer().to_u64()?;
    let q = x.denom().to_u64()?;
    if q == 1 && p <= 4 * MAX_EXACT_BITS {
        return Some(BigUint::one() << p);
    }
    if q <= MAX_ROOT_DEGREE && p <= 4 * MAX_EXACT_BITS {
        return Some((BigUint::one() << p).nth_root(q as u32));
    }
    if p / q > MAX_SERIES_EXPONENT {
        return None;
    }
    // 2^x is irrational here, so enough precision separates it from integers.
    let mut bits = 64 + (p / q) as u32;
    for _ in 0..4 {
        let (lo, hi) = pow2_series_bounds(x, bits);
        let (lo, hi) = (floor_int(&lo), floor_int(&hi));
        if lo == hi {
            return lo.to_biguint();
        }
        bits *= 2;
    }
    None
}

/// `lo ≤ 2^x ≤ hi` from the series of `ln 2` and `exp`, in fixed point
/// with `bits` fractional bits beyond the integer part of `x`.
fn pow2_series_bounds(x: &BigRational, bits: u32) -> (BigRational, BigRational) {
    let i = floor_int(x);
    let f = x - BigRational::from_integer(i.clone());
    let prec = bits as usize + 32;
    let one = BigInt::one() << prec;
    // ln 2 = Σ_{k≥1} 1/(k 2^k); the tail after K terms is below 2^{-K}.
    let terms = prec + 8;
    let mut ln2_lo = BigInt::zero();
    for k in 1..=terms {
        ln2_lo += &one / (BigInt::from(k) << k);
    }
    let ln2_hi = &ln2_lo + BigInt::from(terms + 1);
    let y_lo = (f.numer() * &ln2_lo).div_floor(f.denom());
    let y_hi = -((-(f.numer() * &ln2_hi)).div_floor(f.denom()));
    let exp_fixed = |y: &BigInt, upper: bool| -> BigInt {
        // y < 0.7·2^prec, so terms at least halve from the second on.
        let mut sum = one.clone();
        let mut term = one.clone();
        let mut j = 1u32;
        loop {
            let num = &term * y;
            let den = &one * BigInt::from(j);
            term = if upper { -((-num).div_floor(&den)) } else { num.div_floor(&den) };
            if term.is_zero() {
                break;
            }
            sum += &term;
            j += 1;
            if upper && term <= BigInt::from(1) {
                break;
            }
        }
        if upper {
            // Remaining tail is at most twice the last term, plus rounding.
            sum += &term * 2u32 + BigInt::from(j + 2);
        }
        sum
    };
    let e_lo = exp_fixed(&y_lo, false);
    let e_hi = exp_fixed(&y_hi, true);
    let scale = |e: BigInt| -> BigRational {
        let shift = i.to_i64().unwrap_or(0);
        let r = BigRational::new(e, one.clone());
        if shift >= 0 {
            r * BigRational::from_integer(BigInt::one() << shift as u64)
        } else {
            r / BigRational::from_integer(BigInt::one() << (-shift) as u64)
        }
    };
    (scale(e_lo), scale(e_hi))
}

/// Exact `⌈2^x⌉` for rational `x ≥ 0`, or `None` beyond the budget.
pub fn ceil_pow2(x: &BigRational) -> Option<BigUint> {
    let floor = floor_pow2(x)?;
    if x.denom().is_one() {
        return Some(floor);
    }
    // 2^{p/q} with q > 1 in lowest terms is irrational.
    Some(floor + 1u32)
}

/// Lower and upper dyadic bounds on `2^x` (any sign of `x`) with roughly
/// `bits` bits of relative precision. Both bounds coincide when `2^x` is
/// itself dyadic.
pub fn pow2_bounds(x: &BigRational, bits: u32) -> Option<(DyadicRational, DyadicRational)> {
    if x.denom().is_one() {
        let e = x.numer().to_i64()?;
        let v = if e >= 0 {
            DyadicRational::integer(BigInt::one() << (e as u64))
        } else {
            DyadicRational::new(1, (-e) as u32)
        };
        return Some((v.clone(), v));
    }
    let shift = bits as i64 + (-x.floor().numer().to_i64()?).max(0);
    let shifted = x + BigRational::from_integer(BigInt::from(shift));
    let lo = floor_pow2(&shifted)?;
    let hi = &lo + 1u32;
    Some((DyadicRational::new(BigInt::from(lo), shift as u32), DyadicRational::new(BigInt::from(hi), shift as u32)))
}

/// A real interval with exact rational endpoints and per-endpoint closure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalInterval {
    #[serde(with = "rational_str")]
    pub left: BigRational,
    #[serde(with = "rational_str")]
    pub right: BigRational,
    pub left_closed: bool,
    pub right_closed: bool,
}

impl RationalInterval {
    pub fn closed(left: BigRational, right: BigRational) -> Self {
        assert!(left <= right, "interval endpoints out of order");
        Self { left, right, left_closed: true, right_closed: true }
    }

    /// `[left, right)`.
    pub fn half_open(left: BigRational, right: BigRational) -> Self {
        assert!(left <= right, "interval endpoints out of order");
        Self { left, right, left_closed: true, right_closed: false }
    }

    pub fn width(&self) -> BigRational {
        &self.right - &self.left
    }

    pub fn midpoint(&self) -> BigRational {
        (&self.left + &self.right) / BigRational::from_integer(BigInt::from(2))
    }

    pub fn is_empty(&self) -> bool {
        match self.left.cmp(&self.right) {
            Ordering::Less => false,
            Ordering::Equal => !(self.left_closed && self.right_closed),
            Ordering::Greater => true,
        }
    }

    pub fn contains(&self, x: &BigRational) -> bool {
        let above = if self.left_closed { *x >= self.left } else { *x > self.left };
        let below = if self.right_closed { *x <= self.right } else { *x < self.right };
        above && below
    }

    pub fn contains_interval(&self, other: &RationalInterval) -> bool {
        if other.is_empty() {
            return true;
        }
        let left_ok = match self.left.cmp(&other.left) {
            Ordering::Less => true,
            Ordering::Equal => self.left_closed || !other.left_closed,
            Ordering::Greater => false,
        };
        let right_ok = match other.right.cmp(&self.right) {
            Ordering::Less => true,
            Ordering::Equal => self.right_closed || !other.right_closed,
            Ordering::Greater => false,
        };
        left_ok && right_ok
    }

    /// Exact test for a nonempty intersection, honouring endpoint closure.
    pub fn intersects(&self, other: &RationalInterval) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        // The intersection's left end is the larger left endpoint, and it is
        // closed only if every interval attaining it is closed there.
        let (lo, lo_closed) = match self.left.cmp(&other.left) {
            Ordering::Greater => (&self.left, self.left_closed),
            Ordering::Less => (&other.left, other.left_closed),
            Ordering::Equal => (&self.left, self.left_closed && other.left_closed),
        };
        let (hi, hi_closed) = match self.right.cmp(&other.right) {
            Ordering::Less => (&self.right, self.right_closed),
            Ordering::Greater => (&other.right, other.right_closed),
            Ordering::Equal => (&self.right, self.right_closed && other.right_closed),
        };
        match lo.cmp(hi) {
            Ordering::Less => true,
            Ordering::Equal => lo_closed && hi_closed,
            Ordering::Greater => false,
        }
    }
}

impl fmt::Display for RationalInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.left_closed { '[' } else { '(' },
            fmt_rational(&self.left),
            fmt_rational(&self.right),
            if self.right_closed { ']' } else { ')' },
        )
    }
}

/// Whether a union of intervals covers `[lo, hi]`, by a left-to-right sweep.
pub fn union_covers(intervals: &[RationalInterval], lo: &BigRational, hi: &BigRational) -> bool {
    let mut sorted: Vec<&RationalInterval> = intervals.iter().filter(|iv| !iv.is_empty()).collect();
    sorted.sort_by(|a, b| a.left.cmp(&b.left).then(b.left_closed.cmp(&a.left_closed)));
    // `reach` is the supremum covered so far; `reach_closed` whether it is attained.
    let mut reach = lo.clone();
    let mut reach_closed = false;
    for iv in sorted {
        let joins = match iv.left.cmp(&reach) {
            Ordering::Less => true,
            Ordering::Equal => reach_closed || iv.left_closed,
            Ordering::Greater => false,
        };
        if !joins {
            if iv.left > reach {
                break;
            }
            continue;
        }
        match iv.right.cmp(&reach) {
            Ordering::Greater => {
                reach = iv.right.clone();
                reach_closed = iv.right_closed;
            }
            Ordering::Equal => reach_closed |= iv.right_closed,
            Ordering::Less => {}
        }
        if reach > *hi || (reach == *hi && reach_closed) {
            return true;
        }
    }
    reach > *hi || (reach == *hi && reach_closed)
}

pub mod rational_str {
    use super::{fmt_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).ok_or_else(|| D::Error::custom(format!("not a rational: {s:?}")))
    }
}

/// `BigRational` from a machine integer pair.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

/// Floor of a rational as `BigInt`.
pub fn floor_int(r: &BigRational) -> BigInt {
    r.numer().div_floor(r.denom())
}

/// Ceiling of a rational as `BigInt`.
pub fn ceil_int(r: &BigRational) -> BigInt {
    -((-r.numer()).div_floor(r.denom()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_canonical_form() {
        let d = DyadicRational::new(12, 4);
        assert_eq!(d.numerator(), &BigInt::from(3));
        assert_eq!(d.exponent(), 2);
        assert_eq!(DyadicRational::new(0, 7).exponent(), 0);
        assert_eq!(DyadicRational::new(5, 3).to_string(), "5/8");
    }

    #[test]
    fn dyadic_ordering_and_arithmetic() {
        let a = DyadicRational::new(5, 3);
        let b = DyadicRational::new(3, 2);
        assert!(a < b);
        assert_eq!(a.add(&b), DyadicRational::new(11, 3));
        assert_eq!(b.sub(&a), DyadicRational::new(1, 3));
        assert_eq!(a.mul(&b), DyadicRational::new(15, 5));
    }

    #[test]
    fn simplest_rational_reads_decimals() {
        assert_eq!(simplest_rational(0.3), ratio(3, 10));
        assert_eq!(simplest_rational(0.75), ratio(3, 4));
        assert_eq!(simplest_rational(0.4), ratio(2, 5));
        assert_eq!(simplest_rational(7.0), ratio(7, 1));
    }

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3/8"), Some(ratio(3, 8)));
        assert_eq!(parse_rational("0.375"), Some(ratio(3, 8)));
        assert_eq!(parse_rational("-2"), Some(ratio(-2, 1)));
        assert_eq!(parse_rational("1/0"), None);
    }

    #[test]
    fn floor_and_ceil_of_powers() {
        // 2^{6/5} = 2^{1.2} ≈ 2.297
        assert_eq!(floor_pow2(&ratio(6, 5)), Some(BigUint::from(2u32)));
        // 2^{2/5} = 2^{0.4} ≈ 1.32
        assert_eq!(floor_pow2(&ratio(2, 5)), Some(BigUint::from(1u32)));
        // 2^{4.5} ≈ 22.63
        assert_eq!(ceil_pow2(&ratio(9, 2)), Some(BigUint::from(23u32)));
        assert_eq!(ceil_pow2(&ratio(5, 1)), Some(BigUint::from(32u32)));
    }

    #[test]
    fn series_bounds_bracket_powers() {
        for (p, q) in [(3i64, 7i64), (1, 3), (45, 2), (-5, 3), (1000, 999)] {
            let (lo, hi) = pow2_series_bounds(&ratio(p, q), 80);
            let v = (p as f64 / q as f64).exp2();
            assert!(lo.to_f64().unwrap() <= v * (1.0 + 1e-15) && v <= hi.to_f64().unwrap() * (1.0 + 1e-15));
            assert!(((&hi - &lo) / &lo).to_f64().unwrap() < 1e-20);
        }
        // The series path agrees with integer roots where both apply.
        for (p, q) in [(9i64, 2i64), (6, 5), (137, 19), (1, 65_537)] {
            let x = ratio(p, q);
            let (lo, hi) = pow2_series_bounds(&x, 96);
            assert_eq!(floor_int(&lo), floor_int(&hi));
            let root = (BigUint::one() << p as u64).nth_root(q as u32);
            assert_eq!(floor_int(&lo).to_biguint(), Some(root.clone()));
            assert_eq!(floor_pow2(&x), Some(root));
        }
        let big_q = ratio(3_000_000_001, 200_000_000);
        // 2^{15.000000005} = 32768.000113...
        assert_eq!(floor_pow2(&big_q), Some(BigUint::from(32768u32)));
    }

    #[test]
    fn pow2_bounds_bracket_the_value() {
        let (lo, hi) = pow2_bounds(&ratio(-1, 3), 80).unwrap();
        let v = 2f64.powf(-1.0 / 3.0);
        assert!(lo.to_f64() <= v && v <= hi.to_f64());
        assert!(hi.sub(&lo).to_f64() < 1e-20);
        let (lo, hi) = pow2_bounds(&ratio(-3, 1), 80).unwrap();
        assert_eq!(lo, hi);
        assert_eq!(lo, DyadicRational::new(1, 3));
    }

    #[test]
    fn interval_closure_semantics() {
        let a = RationalInterval::closed(ratio(0, 1), ratio(1, 4));
        let b = RationalInterval::half_open(ratio(1, 4), ratio(1, 2));
        let c = RationalInterval::closed(ratio(1, 4), ratio(1, 2));
        assert!(a.intersects(&b));
        assert!(a.intersects(&c));
        let a_ho = RationalInterval::half_open(ratio(0, 1), ratio(1, 4));
        assert!(!a_ho.intersects(&b));
        assert!(a_ho.intersects(&RationalInterval::closed(ratio(0, 1), ratio(0, 1))));
    }

    #[test]
    fn sweep_detects_gaps() {
        let ivs = vec![
            RationalInterval::closed(ratio(-1, 8), ratio(1, 2)),
            RationalInterval::closed(ratio(1, 2), ratio(9, 8)),
        ];
        assert!(union_covers(&ivs, &ratio(0, 1), &ratio(1, 1)));
        let gap = vec![
            RationalInterval::closed(ratio(0, 1), ratio(1, 2)),
            RationalInterval::half_open(ratio(3, 5), ratio(1, 1)),
        ];
        assert!(union_covers(&gap, &ratio(0, 1), &ratio(1, 2)));
        assert!(!union_covers(&gap, &ratio(0, 1), &ratio(1, 1)));
        let touching_open = vec![
            RationalInterval::half_open(ratio(0, 1), ratio(1, 2)),
            RationalInterval { left: ratio(1, 2), right: ratio(1, 1), left_closed: false, right_closed: true },
        ];
        assert!(!union_covers(&touching_open, &ratio(0, 1), &ratio(1, 1)));
    }
}
