//! Random selection families `{Z_n(Q)}`.
//!
//! Two models are provided. In the Bernoulli model every `Z_n(Q)` is an
//! independent coin with probability `P_n`, independent across cubes and
//! across levels. In the point-process model, level `n` owns a block of
//! `C_n` i.i.d. uniform points on `[0,1]` and `Z_n(Q) = 1` iff one of them
//! lies in the closed cube `Q`. Block boundaries are `b_n = 2^{e_n}` for an
//! exponent rule `e_n`, and `C_n = ⌈b_n⌉ − ⌈b_{n−1}⌉`.

use std::ops::RangeInclusive;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, Closure, CubeIndex, LevelCap};
use crate::rational::{ceil_pow2, simplest_rational};
use crate::stats::{ln1m_pow2, log2_biguint};

/// Largest `n·C` for which `(1 − 2^{-n})^C` is expanded exactly.
pub const MAX_EXACT_PROB_BITS: u64 = 1 << 18;

/// Per-level inclusion probability of the Bernoulli model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbRule {
    /// `P_n = 2^{-nγ}`.
    PowerLaw { gamma: f64 },
    /// `P_n = p` at every level.
    Constant { p: f64 },
    /// `P_n = probs[n − 1]`; levels past the table are rejected.
    PerLevel { probs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliSpec {
    pub prob: ProbRule,
}

/// How the block boundaries `b_n` are defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BlockRule {
    /// `b_n = 1` below `M_1` and `b_n = 2^{M_k t_k}` on `[M_k, M_{k+1})`; the
    /// last block extends to infinity.
    Prop13 { block_starts: Vec<u64>, exponents: Vec<f64> },
    /// `a_n = 2^{n(1−γ₀)}`.
    Prop14 { gamma0: f64 },
    /// Explicit block sizes: `counts[n − 1]` points at level `n`, zero past the end.
    Counts(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointProcessSpec {
    pub blocks: BlockRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionModel {
    Bernoulli(BernoulliSpec),
    PointProcess(PointProcessSpec),
}

/// The chosen cubes of one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSelection {
    pub level: u32,
    pub dim: usize,
    /// Sorted row-major indices of the chosen (closed) cubes.
    pub chosen: Vec<u64>,
    /// Sampled points as 64-bit fixed-point fractions `u / 2^64`, in draw order.
    pub points: Option<Vec<u64>>,
}

impl LevelSelection {
    pub fn contains(&self, index: u64) -> bool {
        self.chosen.binary_search(&index).is_ok()
    }

    pub fn cubes(&self) -> Vec<CubeIndex> {
        let side_bits = self.level;
        self.chosen
            .iter()
            .map(|&lin| {
                let mask = if side_bits == 0 { 0 } else { u64::MAX >> (64 - side_bits) };
                let coords: Vec<u64> =
                    (0..self.dim).rev().map(|axis| (lin >> (axis as u32 * side_bits)) & mask).collect();
                crate::grid::make_cube(self.level, &coords, Closure::Closed).expect("sampled index in range")
            })
            .collect()
    }
}

/// Finite-level estimates of the indices `γ₁`, `γ₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndexEstimate {
    pub level: u32,
    /// `−log₂ max_Q P_n(Q) / n`; `+∞` when `P_n = 0`.
    pub gamma1: f64,
    /// `−log₂ min_Q P_n(Q) / n`; `+∞` when `P_n = 0`.
    pub gamma2: f64,
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} = {p} is not a probability")))
    }
}

impl BernoulliSpec {
    pub fn power_law(gamma: f64) -> Self {
        BernoulliSpec { prob: ProbRule::PowerLaw { gamma } }
    }

    pub fn constant(p: f64) -> Self {
        BernoulliSpec { prob: ProbRule::Constant { p } }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.prob {
            ProbRule::PowerLaw { gamma } if !(gamma.is_finite() && *gamma >= 0.0) => {
                Err(Error::InvalidParameter(format!("gamma = {gamma} must be finite and >= 0")))
            }
            ProbRule::PowerLaw { .. } => Ok(()),
            ProbRule::Constant { p } => check_prob(*p, "p"),
            ProbRule::PerLevel { probs } => probs.iter().try_for_each(|&p| check_prob(p, "probs[i]")),
        }
    }

    pub fn prob(&self, n: u64) -> Result<f64> {
        match &self.prob {
            ProbRule::PowerLaw { gamma } => Ok((-(n as f64) * gamma).exp2()),
            ProbRule::Constant { p } => Ok(*p),
            ProbRule::PerLevel { probs } => level_entry(probs, n),
        }
    }

    pub fn log2_prob(&self, n: u64) -> Result<f64> {
        match &self.prob {
            ProbRule::PowerLaw { gamma } => Ok(if *gamma == 0.0 { 0.0 } else { -(n as f64) * gamma }),
            _ => self.prob(n).map(f64::log2),
        }
    }

    /// `P_n` as an exact rational when the rule makes it one.
    pub fn prob_rational(&self, n: u64) -> Option<BigRational> {
        match &self.prob {
            ProbRule::PowerLaw { gamma } => {
                let e = simplest_rational(*gamma) * BigRational::from_integer(BigInt::from(n));
                if !e.is_integer() {
                    return None;
                }
                let bits = e.to_integer().to_u64()?;
                (bits <= MAX_EXACT_PROB_BITS).then(|| BigRational::new(BigInt::one(), BigInt::one() << bits))
            }
            ProbRule::Constant { p } => Some(simplest_rational(*p)),
            ProbRule::PerLevel { probs } => level_entry(probs, n).ok().map(simplest_rational),
        }
    }
}

fn level_entry(probs: &[f64], n: u64) -> Result<f64> {
    n.checked_sub(1)
        .and_then(|i| probs.get(i as usize))
        .copied()
        .ok_or_else(|| Error::InvalidParameter(format!("no probability given for level {n}")))
}

impl PointProcessSpec {
    pub fn prop14(gamma0: f64) -> Self {
        PointProcessSpec { blocks: BlockRule::Prop14 { gamma0 } }
    }

    pub fn counts(counts: Vec<u64>) -> Self {
        PointProcessSpec { blocks: BlockRule::Counts(counts) }
    }

    pub fn prop13(block_starts: Vec<u64>, exponents: Vec<f64>) -> Self {
        PointProcessSpec { blocks: BlockRule::Prop13 { block_starts, exponents } }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.blocks {
            BlockRule::Prop14 { gamma0 } => {
                if (0.0..1.0).contains(gamma0) {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("gamma0 = {gamma0} must lie in [0, 1)")))
                }
            }
            BlockRule::Counts(_) => Ok(()),
            BlockRule::Prop13 { block_starts, exponents } => {
                if block_starts.is_empty() || block_starts.len() != exponents.len() {
                    return Err(Error::InvalidParameter("prop13 needs equally many block starts and exponents".into()));
                }
                if block_starts[0] == 0 || block_starts.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::InvalidParameter("block starts must be positive and increasing".into()));
                }
                if exponents.iter().any(|t| !(*t > 0.0 && *t < 1.0)) || exponents.windows(2).any(|w| w[0] > w[1]) {
                    return Err(Error::InvalidParameter("exponents t_k must be non-decreasing in (0, 1)".into()));
                }
                // b_n must be non-decreasing: M_k t_k increasing follows from both factors increasing.
                Ok(())
            }
        }
    }

    /// `log₂ b_n` as an exact rational, or `None` for explicit counts.
    pub fn log2_boundary(&self, n: u64) -> Option<BigRational> {
        match &self.blocks {
            BlockRule::Prop14 { gamma0 } => {
                Some((BigRational::one() - simplest_rational(*gamma0)) * BigRational::from_integer(n.into()))
            }
            BlockRule::Prop13 { block_starts, exponents } => {
                let k = block_starts.partition_point(|&m| m <= n);
                if k == 0 {
                    Some(BigRational::zero())
                } else {
                    Some(simplest_rational(exponents[k - 1]) * BigRational::from_integer(block_starts[k - 1].into()))
                }
            }
            BlockRule::Counts(_) => None,
        }
    }

    /// Exact `C_n`, or `None` when `⌈b_n⌉` is beyond the exact-evaluation budget.
    pub fn block_count_big(&self, n: u64) -> Option<BigUint> {
        if n == 0 {
            return Some(BigUint::zero());
        }
        if let BlockRule::Counts(c) = &self.blocks {
            return Some(BigUint::from(c.get((n - 1) as usize).copied().unwrap_or(0)));
        }
        let hi = self.log2_boundary(n)?;
        let lo = self.log2_boundary(n - 1)?;
        if hi == lo {
            return Some(BigUint::zero());
        }
        Some(ceil_pow2(&hi)? - ceil_pow2(&lo)?)
    }

    /// `log₂ C_n`, `-∞` for an empty block. Falls back to the asymptotic
    /// `e_n + log₂(1 − 2^{e_{n−1} − e_n})` when the exact count is out of budget.
    pub fn log2_block_count(&self, n: u64) -> f64 {
        if let Some(c) = self.block_count_big(n) {
            return log2_biguint(&c);
        }
        let hi = self.log2_boundary(n).and_then(|r| r.to_f64()).unwrap_or(f64::NAN);
        let lo = self.log2_boundary(n - 1).and_then(|r| r.to_f64()).unwrap_or(f64::NAN);
        if hi == lo {
            return f64::NEG_INFINITY;
        }
        hi + (-(lo - hi).exp2()).ln_1p() / std::f64::consts::LN_2
    }

    pub fn hit_prob(&self, n: u64) -> f64 {
        match self.block_count_big(n).and_then(|c| c.to_u64()) {
            Some(0) => 0.0,
            Some(c) => -(c as f64 * ln1m_pow2(n)).exp_m1(),
            None => {
                let log2c = self.log2_block_count(n);
                if n <= 1000 {
                    -(log2c.exp2() * ln1m_pow2(n)).exp_m1()
                } else {
                    -(-(log2c - n as f64).exp2()).exp_m1()
                }
            }
        }
    }

    /// `log₂ P_n`, accurate also when `P_n` underflows.
    pub fn log2_hit_prob(&self, n: u64) -> f64 {
        let log2c = self.log2_block_count(n);
        if log2c == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let e = log2c - n as f64;
        if e < -40.0 {
            // P = 1 − e^{−λ} with λ = 2^e below 1e-12: P = λ to f64 precision.
            e
        } else {
            self.hit_prob(n).log2()
        }
    }

    /// `P_n = 1 − (1 − 2^{-n})^{C_n}` exactly, within [`MAX_EXACT_PROB_BITS`].
    pub fn hit_prob_rational(&self, n: u64) -> Option<BigRational> {
        let c = self.block_count_big(n)?.to_u64()?;
        if n.checked_mul(c)? > MAX_EXACT_PROB_BITS {
            return None;
        }
        let miss = one_minus_pow2_pow(n, 1, c);
        Some(BigRational::one() - miss)
    }
}

/// `(1 − j·2^{-n})^c` as an exact rational.
pub(crate) fn one_minus_pow2_pow(n: u64, j: u64, c: u64) -> BigRational {
    let den = BigInt::one() << n;
    let base = BigRational::new(&den - BigInt::from(j), den);
    num_traits::pow(base, c as usize)
}

/// Number of points drawn at level `n`; errors if it does not fit in a `u64`.
pub fn block_count(spec: &PointProcessSpec, n: u64) -> Result<u64> {
    spec.block_count_big(n).and_then(|c| c.to_u64()).ok_or(Error::CountOverflow(n))
}

impl SelectionModel {
    pub fn bernoulli_power_law(gamma: f64) -> Self {
        SelectionModel::Bernoulli(BernoulliSpec::power_law(gamma))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SelectionModel::Bernoulli(b) => b.validate(),
            SelectionModel::PointProcess(p) => p.validate(),
        }
    }

    /// Models are homogeneous: `P_n(Q)` depends on the level only.
    pub fn hit_prob(&self, n: u64) -> Result<f64> {
        match self {
            SelectionModel::Bernoulli(b) => b.prob(n),
            SelectionModel::PointProcess(p) => Ok(p.hit_prob(n)),
        }
    }

    pub fn log2_hit_prob(&self, n: u64) -> Result<f64> {
        match self {
            SelectionModel::Bernoulli(b) => b.log2_prob(n),
            SelectionModel::PointProcess(p) => Ok(p.log2_hit_prob(n)),
        }
    }

    pub fn hit_prob_rational(&self, n: u64) -> Option<BigRational> {
        match self {
            SelectionModel::Bernoulli(b) => b.prob_rational(n),
            SelectionModel::PointProcess(p) => p.hit_prob_rational(n),
        }
    }

    pub fn supports_dim(&self, dim: usize) -> Result<()> {
        match self {
            SelectionModel::PointProcess(_) if dim != 1 => Err(Error::UnsupportedDimension(dim)),
            _ => Ok(()),
        }
    }
}

/// `P_n(Q)` for a specific cube.
pub fn exact_hit_prob(model: &SelectionModel, n: u32, cube: &CubeIndex) -> Result<f64> {
    if cube.level() != n {
        return Err(Error::LevelMismatch(cube.level(), n));
    }
    model.supports_dim(cube.dim())?;
    model.hit_prob(n as u64)
}

/// Number of failures before the first success of a `p`-coin.
fn geometric_skip<R: Rng + ?Sized>(p: f64, rng: &mut R) -> u64 {
    let u = 1.0 - rng.random::<f64>();
    let skip = u.ln() / (-p).ln_1p();
    if skip >= u64::MAX as f64 {
        u64::MAX
    } else {
        skip as u64
    }
}

/// Successful positions among `0..total` for independent `p`-coins.
fn bernoulli_positions<R: Rng + ?Sized>(p: f64, total: u64, rng: &mut R) -> Vec<u64> {
    if p <= 0.0 || total == 0 {
        return Vec::new();
    }
    if p >= 1.0 {
        return (0..total).collect();
    }
    let mut out = Vec::new();
    let mut pos = 0u64;
    loop {
        pos = pos.saturating_add(geometric_skip(p, rng));
        if pos >= total {
            return out;
        }
        out.push(pos);
        pos += 1;
    }
}

/// Cells of level `n` whose closed cube contains the fixed-point sample `u / 2^64`.
fn point_cells(u: u64, n: u32) -> (u64, Option<u64>) {
    if n == 0 {
        return (0, None);
    }
    let cell = u >> (64 - n);
    let on_boundary = (u << n) == 0 && cell > 0;
    (cell, on_boundary.then(|| cell - 1))
}

fn check_level(n: u32, dim: usize, cap: LevelCap) -> Result<u64> {
    cap.check(n)?;
    let bits = n as u64 * dim as u64;
    if bits > 62 {
        return Err(Error::LevelCapExceeded { level: n, cap: (62 / dim as u64) as u32 });
    }
    Ok(1u64 << bits)
}

/// Samples every `Z_n(Q)` of one level.
pub fn sample_level<R: Rng + ?Sized>(
    model: &SelectionModel,
    n: u32,
    dim: usize,
    cap: LevelCap,
    rng: &mut R,
) -> Result<LevelSelection> {
    model.supports_dim(dim)?;
    let total = check_level(n, dim, cap)?;
    match model {
        SelectionModel::Bernoulli(b) => {
            let p = b.prob(n as u64)?;
            Ok(LevelSelection { level: n, dim, chosen: bernoulli_positions(p, total, rng), points: None })
        }
        SelectionModel::PointProcess(pp) => {
            let c = block_count(pp, n as u64)?;
            let points: Vec<u64> = (0..c).map(|_| rng.random::<u64>()).collect();
            let mut chosen = Vec::with_capacity(points.len() + 1);
            for &u in &points {
                let (cell, left) = point_cells(u, n);
                chosen.push(cell);
                chosen.extend(left);
            }
            chosen.sort_unstable();
            chosen.dedup();
            Ok(LevelSelection { level: n, dim, chosen, points: Some(points) })
        }
    }
}

/// Samples `Z_n(Q)` and returns the chosen members of `candidates` in
/// increasing order. For the Bernoulli model only the candidate coins are
/// drawn.
pub fn sample_among<R: Rng + ?Sized>(
    model: &SelectionModel,
    n: u32,
    candidates: &CellSet,
    rng: &mut R,
) -> Result<Vec<u64>> {
    match model {
        SelectionModel::Bernoulli(b) => {
            let p = b.prob(n as u64)?;
            Ok(bernoulli_positions(p, candidates.len(), rng).into_iter().map(|i| candidates.nth(i)).collect())
        }
        SelectionModel::PointProcess(pp) => {
            if n > 62 {
                return Err(Error::LevelCapExceeded { level: n, cap: 62 });
            }
            let c = block_count(pp, n as u64)?;
            let mut out = Vec::new();
            for _ in 0..c {
                let (cell, left) = point_cells(rng.random::<u64>(), n);
                out.extend(std::iter::once(cell).chain(left).filter(|&k| candidates.contains(k)));
            }
            out.sort_unstable();
            out.dedup();
            Ok(out)
        }
    }
}

/// Whether any member of `candidates` is chosen at level `n`.
pub fn hits_any<R: Rng + ?Sized>(model: &SelectionModel, n: u32, candidates: &CellSet, rng: &mut R) -> Result<bool> {
    match model {
        SelectionModel::Bernoulli(b) => {
            let p = b.prob(n as u64)?;
            if candidates.is_empty() || p <= 0.0 {
                return Ok(false);
            }
            Ok(p >= 1.0 || geometric_skip(p, rng) < candidates.len())
        }
        SelectionModel::PointProcess(_) => Ok(!sample_among(model, n, candidates, rng)?.is_empty()),
    }
}

/// `γ̂₁(n)`, `γ̂₂(n)` over a range of levels.
pub fn index_estimates(model: &SelectionModel, levels: RangeInclusive<u32>) -> Result<Vec<IndexEstimate>> {
    levels
        .map(|n| {
            if n == 0 {
                return Err(Error::InvalidParameter("index estimates need n >= 1".into()));
            }
            let lp = model.log2_hit_prob(n as u64)?;
            let g = if lp == f64::NEG_INFINITY { f64::INFINITY } else { -lp / n as f64 };
            Ok(IndexEstimate { level: n, gamma1: g, gamma2: g })
        })
        .collect()
}
