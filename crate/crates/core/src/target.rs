//! Target sets `G` seen through dyadic cubes.
//!
//! Cantor targets are stored as the closed intervals of one generation
//! `G_K`. Against half-open cubes each target interval is read as `[a, b)`,
//! so neighbouring cubes that only touch an interval at an endpoint do not
//! count; against closed cubes the closed intervals are used.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::cantor::{build_levels, CantorSchedule};
use crate::error::{Error, Result};
use crate::grid::{CellSet, Closure, CubeIndex, MAX_REPRESENTABLE_LEVEL};
use crate::rational::{ceil_int, floor_int, RationalInterval};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSet {
    /// The full cube `[0,1]^d`.
    Unit { dim: usize },
    /// A singleton.
    Point {
        #[serde(with = "rational_vec")]
        coords: Vec<BigRational>,
    },
    /// A finite union of sorted closed intervals in `[0,1]`, meaningful for
    /// levels up to `resolved`.
    Intervals { intervals: Vec<RationalInterval>, resolved: u32 },
}

/// A greedy cover by closed intervals of length `2^{-n}` and the sizes of
/// their level-`n` neighbourhoods `Γ_n(B)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BallCover {
    pub balls: u64,
    /// `Σ_B #Γ_n(B)`.
    pub gamma_sum: u64,
    pub max_gamma: u64,
}

fn pow2(n: u32) -> BigRational {
    BigRational::from_integer(BigInt::one() << n as usize)
}

fn clamp_cell(x: BigInt, last: u64) -> Option<u64> {
    if x < BigInt::zero() {
        Some(0)
    } else {
        Some(x.to_u64().map_or(last, |v| v.min(last)))
    }
}

/// Inclusive range of level-`n` cells meeting `[a, b]` (closed) or `[a, b)` (half-open).
fn cell_range(iv: &RationalInterval, n: u32, closure: Closure) -> Option<(u64, u64)> {
    let scale = pow2(n);
    let (a, b) = (&iv.left * &scale, &iv.right * &scale);
    let (lo, hi) = match closure {
        Closure::HalfOpen => {
            if iv.left >= iv.right {
                return None;
            }
            (floor_int(&a), ceil_int(&b) - 1)
        }
        Closure::Closed => (ceil_int(&a) - 1, floor_int(&b)),
    };
    let last = (1u64 << n) - 1;
    if hi < BigInt::zero() || lo > BigInt::from(last) {
        return None;
    }
    Some((clamp_cell(lo, last)?, clamp_cell(hi, last)?))
}

fn merge_ranges(ranges: impl IntoIterator<Item = (u64, u64)>) -> Vec<(u64, u64)> {
    let mut out: Vec<(u64, u64)> = Vec::new();
    for (lo, hi) in ranges {
        match out.last_mut() {
            Some(last) if lo <= last.1.saturating_add(1) => last.1 = last.1.max(hi),
            _ => out.push((lo, hi)),
        }
    }
    out
}

impl TargetSet {
    pub fn unit(dim: usize) -> Self {
        TargetSet::Unit { dim }
    }

    pub fn point(coords: Vec<BigRational>) -> Self {
        TargetSet::Point { coords }
    }

    /// Generation `depth` of a Cantor schedule; levels are resolved while
    /// `2^{-n} ≥ l_depth`.
    pub fn cantor(schedule: &CantorSchedule, depth: usize, budget: usize) -> Result<Self> {
        let levels = build_levels(schedule, depth, budget)?;
        let resolved = schedule.resolved_level(depth).min(MAX_REPRESENTABLE_LEVEL as u64) as u32;
        Ok(TargetSet::Intervals { intervals: levels.generation(depth).to_vec(), resolved })
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Unit { dim } => *dim,
            TargetSet::Point { coords } => coords.len(),
            TargetSet::Intervals { .. } => 1,
        }
    }

    /// Finest level at which the stored set stands in for the target.
    pub fn resolved_level(&self) -> u32 {
        match self {
            TargetSet::Intervals { resolved, .. } => *resolved,
            _ => MAX_REPRESENTABLE_LEVEL,
        }
    }

    pub fn check_depth(&self, level: u32) -> Result<()> {
        let resolved = self.resolved_level();
        if level > resolved {
            return Err(Error::DepthInsufficient { requested: level, resolved });
        }
        Ok(())
    }

    /// The target as closed intervals (d = 1).
    fn closed_intervals(&self) -> Result<Vec<RationalInterval>> {
        match self {
            TargetSet::Unit { dim: 1 } => Ok(vec![RationalInterval::closed(BigRational::zero(), BigRational::one())]),
            TargetSet::Point { coords } if coords.len() == 1 => {
                Ok(vec![RationalInterval::closed(coords[0].clone(), coords[0].clone())])
            }
            TargetSet::Intervals { intervals, .. } => Ok(intervals.clone()),
            other => Err(Error::UnsupportedDimension(other.dim())),
        }
    }

    /// Exact test `cube ∩ G ≠ ∅` honouring the cube's closure.
    pub fn intersects(&self, cube: &CubeIndex) -> Result<bool> {
        if cube.dim() != self.dim() {
            return Err(Error::DimensionMismatch(cube.dim(), self.dim()));
        }
        match self {
            TargetSet::Unit { .. } => Ok(true),
            TargetSet::Point { coords } => Ok(cube.contains(coords)),
            TargetSet::Intervals { intervals, .. } => {
                let c = cube.interval(0);
                let start = intervals.partition_point(|iv| iv.right < c.left);
                for iv in &intervals[start..] {
                    if iv.left > c.right {
                        break;
                    }
                    let view = match cube.closure() {
                        Closure::Closed => iv.clone(),
                        Closure::HalfOpen => RationalInterval::half_open(iv.left.clone(), iv.right.clone()),
                    };
                    if view.intersects(&c) {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Inclusive ranges of level-`n` cells meeting the target (d = 1), merged.
    pub fn cell_ranges(&self, n: u32, closure: Closure) -> Result<Vec<(u64, u64)>> {
        if n > MAX_REPRESENTABLE_LEVEL {
            return Err(Error::LevelCapExceeded { level: n, cap: MAX_REPRESENTABLE_LEVEL });
        }
        let ivs = self.closed_intervals()?;
        Ok(merge_ranges(ivs.iter().filter_map(|iv| cell_range(iv, n, closure))))
    }

    /// The level-`n` cells meeting the target, by row-major index.
    pub fn covering_cells(&self, n: u32, closure: Closure) -> Result<CellSet> {
        match self {
            TargetSet::Unit { dim } => {
                let bits = n as u64 * *dim as u64;
                if bits > MAX_REPRESENTABLE_LEVEL as u64 {
                    return Err(Error::LevelCapExceeded { level: n, cap: MAX_REPRESENTABLE_LEVEL / *dim as u32 });
                }
                Ok(CellSet::All(1u64 << bits))
            }
            TargetSet::Point { coords } => {
                let per_axis: Vec<Vec<u64>> = coords
                    .iter()
                    .map(|x| {
                        let iv = RationalInterval::closed(x.clone(), x.clone());
                        match closure {
                            Closure::Closed => cell_range(&iv, n, closure).map(|(a, b)| (a..=b).collect()),
                            Closure::HalfOpen => {
                                let k = floor_int(&(x * pow2(n)));
                                k.to_u64().filter(|&k| k < 1u64 << n && *x >= BigRational::zero()).map(|k| vec![k])
                            }
                        }
                        .unwrap_or_default()
                    })
                    .collect();
                let mut cells = vec![0u64];
                for axis in per_axis {
                    cells = cells.iter().flat_map(|&c| axis.iter().map(move |&k| (c << n) | k)).collect();
                }
                cells.sort_unstable();
                Ok(CellSet::List(cells))
            }
            TargetSet::Intervals { .. } => {
                let ranges = self.cell_ranges(n, closure)?;
                Ok(CellSet::List(ranges.into_iter().flat_map(|(a, b)| a..=b).collect()))
            }
        }
    }

    /// `#{Q ∈ Q'_n : Q ∩ G ≠ ∅}` by descending the dyadic tree, pruning
    /// subtrees that miss the target or lie inside one interval.
    pub fn covering_count(&self, n: u32) -> Result<u64> {
        match self {
            TargetSet::Unit { .. } | TargetSet::Point { .. } => Ok(self.covering_cells(n, Closure::HalfOpen)?.len()),
            TargetSet::Intervals { intervals, .. } => {
                if n > MAX_REPRESENTABLE_LEVEL {
                    return Err(Error::LevelCapExceeded { level: n, cap: MAX_REPRESENTABLE_LEVEL });
                }
                let half_open: Vec<RationalInterval> = intervals
                    .iter()
                    .map(|iv| RationalInterval::half_open(iv.left.clone(), iv.right.clone()))
                    .filter(|iv| !iv.is_empty())
                    .collect();
                Ok(descend(&half_open, 0, 0, n))
            }
        }
    }

    /// `#{closed level-L cells meeting G}` for any level, exactly.
    pub fn closed_cell_count_big(&self, level: u64) -> Result<BigUint> {
        let ivs = self.closed_intervals()?;
        let scale = BigRational::from_integer(BigInt::one() << level as usize);
        let last: BigInt = (BigInt::one() << level as usize) - BigInt::one();
        let mut total = BigInt::zero();
        let mut reach: Option<BigInt> = None;
        for iv in &ivs {
            let lo: BigInt = (ceil_int(&(&iv.left * &scale)) - BigInt::one()).max(BigInt::zero());
            let hi: BigInt = floor_int(&(&iv.right * &scale)).min(last.clone());
            let lo = match &reach {
                Some(r) if lo <= *r => r + 1,
                _ => lo,
            };
            if hi >= lo {
                total += &hi - &lo + 1;
                reach = Some(hi);
            }
        }
        Ok(total.to_biguint().expect("non-negative count"))
    }

    /// Greedy cover by closed intervals of length `2^{-n}` (radius `2^{-n-1}`)
    /// and the closed level-`n` cubes each one meets (d = 1).
    pub fn ball_cover(&self, n: u32) -> Result<BallCover> {
        if n > MAX_REPRESENTABLE_LEVEL {
            return Err(Error::LevelCapExceeded { level: n, cap: MAX_REPRESENTABLE_LEVEL });
        }
        let ivs = self.closed_intervals()?;
        let len = BigRational::new(BigInt::one(), BigInt::one() << n as usize);
        let scale = pow2(n);
        let last = (1u64 << n) as i128 - 1;
        let mut cover = BallCover { balls: 0, gamma_sum: 0, max_gamma: 0 };
        let mut covered: Option<BigRational> = None;
        for iv in &ivs {
            let start = match &covered {
                Some(c) if iv.right <= *c => continue,
                Some(c) if iv.left <= *c => c.clone(),
                _ => iv.left.clone(),
            };
            let m = ceil_int(&((&iv.right - &start) / &len)).max(BigInt::one());
            let m = m.to_u64().ok_or_else(|| Error::InvalidParameter("ball count overflow".into()))?;
            // Ball j is [s + j, s + j + 1] in cell units; all share the fractional part of s.
            let s = &start * &scale;
            let fl = floor_int(&s).to_i128().expect("cell index fits");
            let on_grid = BigRational::from_integer(BigInt::from(fl)) == s;
            let (first, width) = if on_grid { (fl - 1, 3i128) } else { (fl, 2i128) };
            let gamma = |j: i128| -> u64 {
                let lo = (first + j).max(0);
                let hi = (first + j + width - 1).min(last);
                (hi - lo + 1).max(0) as u64
            };
            // Interior balls see the full width; only those near 0 or 1 are clipped.
            let mut sum = width as u64 * m;
            let mut max = 0u64;
            let m_i = m as i128;
            let edge: Vec<i128> = (0..m_i.min(2)).chain((m_i - 2).max(2)..m_i).collect();
            for &j in &edge {
                let g = gamma(j);
                sum = sum - width as u64 + g;
                max = max.max(g);
            }
            if m > edge.len() as u64 {
                max = max.max(gamma(2));
            }
            cover.balls += m;
            cover.gamma_sum += sum;
            cover.max_gamma = cover.max_gamma.max(max);
            covered = Some(&start + &len * BigRational::from_integer(BigInt::from(m)));
        }
        assert!(cover.max_gamma <= 3, "a ball of diameter 2^-n meets at most 3 cubes");
        Ok(cover)
    }
}

fn descend(intervals: &[RationalInterval], level: u32, cell: u64, n: u32) -> u64 {
    if intervals.is_empty() {
        return 0;
    }
    let scale = BigRational::new(BigInt::one(), BigInt::one() << level as usize);
    let cube = RationalInterval::half_open(
        BigRational::from_integer(cell.into()) * &scale,
        BigRational::from_integer((cell + 1).into()) * &scale,
    );
    let hits: Vec<RationalInterval> = intervals.iter().filter(|iv| iv.intersects(&cube)).cloned().collect();
    if hits.is_empty() {
        return 0;
    }
    if level == n {
        return 1;
    }
    if hits.iter().any(|iv| iv.contains_interval(&cube)) {
        return 1u64 << (n - level);
    }
    descend(&hits, level + 1, 2 * cell, n) + descend(&hits, level + 1, 2 * cell + 1, n)
}

mod rational_vec {
    use crate::rational::{fmt_rational, parse_rational};
    use num_rational::BigRational;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(fmt_rational))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| parse_rational(s).ok_or_else(|| D::Error::custom(format!("not a rational: {s:?}"))))
            .collect()
    }
}
