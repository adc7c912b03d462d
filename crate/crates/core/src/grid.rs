//! Dyadic cubes on `[0,1]^d`: indexing, tree navigation, distances and the
//! concentric `|Q|^β` enlargement.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{pow2_bounds, simplest_rational, DyadicRational, RationalInterval};

/// Hard ceiling on levels so that coordinates fit in a `u64`.
pub const MAX_REPRESENTABLE_LEVEL: u32 = 62;

/// Environment variable overriding [`LevelCap::default`].
pub const LEVEL_CAP_ENV: &str = "FRACTAL_HIT_LAB_LEVEL_CAP";

/// Upper bound on the levels any sampling or enumeration may touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCap(pub u32);

impl Default for LevelCap {
    fn default() -> Self {
        LevelCap(30)
    }
}

impl LevelCap {
    /// Reads the cap from `FRACTAL_HIT_LAB_LEVEL_CAP`, falling back to the default.
    pub fn from_env() -> Result<Self> {
        match std::env::var(LEVEL_CAP_ENV) {
            Ok(v) => {
                let cap: u32 =
                    v.trim().parse().map_err(|_| Error::InvalidParameter(format!("{LEVEL_CAP_ENV}={v:?}")))?;
                if cap > MAX_REPRESENTABLE_LEVEL {
                    return Err(Error::InvalidParameter(format!(
                        "{LEVEL_CAP_ENV}={cap} exceeds {MAX_REPRESENTABLE_LEVEL}"
                    )));
                }
                Ok(LevelCap(cap))
            }
            Err(_) => Ok(LevelCap::default()),
        }
    }

    pub fn check(self, level: u32) -> Result<()> {
        if level > self.0 {
            Err(Error::LevelCapExceeded { level, cap: self.0 })
        } else {
            Ok(())
        }
    }
}

/// Whether a cube is the closed `Q_n` cube or its half-open `Q'_n` twin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    Closed,
    HalfOpen,
}

/// A dyadic cube `Π [k_i 2^{-n}, (k_i + 1) 2^{-n}]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CubeIndex {
    level: u32,
    coords: Vec<u64>,
    closure: Closure,
}

/// A set of level-`n` cells given by row-major index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CellSet {
    /// Every cell `0..total`.
    All(u64),
    /// Sorted, distinct indices.
    List(Vec<u64>),
}

impl CellSet {
    pub fn len(&self) -> u64 {
        match self {
            CellSet::All(total) => *total,
            CellSet::List(v) => v.len() as u64,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th cell in increasing order.
    pub fn nth(&self, i: u64) -> u64 {
        match self {
            CellSet::All(_) => i,
            CellSet::List(v) => v[i as usize],
        }
    }

    pub fn contains(&self, cell: u64) -> bool {
        match self {
            CellSet::All(total) => cell < *total,
            CellSet::List(v) => v.binary_search(&cell).is_ok(),
        }
    }
}

/// Tree direction for [`navigate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Parent,
    Children,
}

/// Result of [`navigate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Navigated {
    Parent(CubeIndex),
    Children(Vec<CubeIndex>),
}

pub fn make_cube(level: u32, coords: &[u64], closure: Closure) -> Result<CubeIndex> {
    if coords.is_empty() {
        return Err(Error::InvalidParameter("a cube needs at least one coordinate".into()));
    }
    if level > MAX_REPRESENTABLE_LEVEL {
        return Err(Error::LevelCapExceeded { level, cap: MAX_REPRESENTABLE_LEVEL });
    }
    let side = 1u64 << level;
    if let Some((axis, &coord)) = coords.iter().enumerate().find(|(_, &k)| k >= side) {
        return Err(Error::CoordOutOfRange { axis, coord, level });
    }
    Ok(CubeIndex { level, coords: coords.to_vec(), closure })
}

impl CubeIndex {
    /// The whole unit cube `[0,1]^d`.
    pub fn root(dim: usize, closure: Closure) -> Self {
        CubeIndex { level: 0, coords: vec![0; dim], closure }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn closure(&self) -> Closure {
        self.closure
    }

    pub fn with_closure(&self, closure: Closure) -> Self {
        CubeIndex { closure, ..self.clone() }
    }

    /// Side length `2^{-level}`.
    pub fn side(&self) -> DyadicRational {
        DyadicRational::new(1, self.level)
    }

    /// Volume `2^{-d·level}`.
    pub fn volume(&self) -> DyadicRational {
        DyadicRational::new(1, self.level * self.dim() as u32)
    }

    /// The extent along one axis as exact endpoints.
    pub fn extent(&self, axis: usize) -> (DyadicRational, DyadicRational) {
        let k = self.coords[axis];
        (DyadicRational::new(k, self.level), DyadicRational::new(k + 1, self.level))
    }

    /// The one-dimensional extent as an interval with this cube's closure.
    pub fn interval(&self, axis: usize) -> RationalInterval {
        let (a, b) = self.extent(axis);
        match self.closure {
            Closure::Closed => RationalInterval::closed(a.to_rational(), b.to_rational()),
            Closure::HalfOpen => RationalInterval::half_open(a.to_rational(), b.to_rational()),
        }
    }

    /// Exact point membership; `point` must have one coordinate per axis.
    pub fn contains(&self, point: &[BigRational]) -> bool {
        point.len() == self.dim() && point.iter().enumerate().all(|(axis, x)| self.interval(axis).contains(x))
    }

    pub fn parent(&self) -> Result<CubeIndex> {
        if self.level == 0 {
            return Err(Error::NoParent);
        }
        Ok(CubeIndex {
            level: self.level - 1,
            coords: self.coords.iter().map(|k| k >> 1).collect(),
            closure: self.closure,
        })
    }

    /// The `2^d` children in lexicographic order of their coordinates.
    pub fn children(&self) -> Result<Vec<CubeIndex>> {
        if self.level >= MAX_REPRESENTABLE_LEVEL {
            return Err(Error::LevelCapExceeded { level: self.level + 1, cap: MAX_REPRESENTABLE_LEVEL });
        }
        let d = self.dim();
        let out = (0..1u64 << d)
            .map(|mask| CubeIndex {
                level: self.level + 1,
                coords: self
                    .coords
                    .iter()
                    .enumerate()
                    .map(|(axis, k)| 2 * k + ((mask >> (d - 1 - axis)) & 1))
                    .collect(),
                closure: self.closure,
            })
            .collect();
        Ok(out)
    }

    /// Row-major linear index of the cube within its level.
    pub fn linear_index(&self) -> u64 {
        self.coords.iter().fold(0u64, |acc, &k| (acc << self.level) | k)
    }
}

impl fmt::Display for CubeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut sep = "";
        for axis in 0..self.dim() {
            write!(f, "{sep}{}", self.interval(axis))?;
            sep = " x ";
        }
        Ok(())
    }
}

pub fn navigate(cube: &CubeIndex, direction: Direction) -> Result<Navigated> {
    match direction {
        Direction::Parent => cube.parent().map(Navigated::Parent),
        Direction::Children => cube.children().map(Navigated::Children),
    }
}

/// `inf{|x - y| : x ∈ a, y ∈ b}` in the sup-norm, exact.
pub fn min_distance(a: &CubeIndex, b: &CubeIndex) -> Result<DyadicRational> {
    if a.level != b.level {
        return Err(Error::LevelMismatch(a.level, b.level));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let gap_cells = a.coords.iter().zip(&b.coords).map(|(&k, &j)| k.abs_diff(j).saturating_sub(1)).max().unwrap_or(0);
    Ok(DyadicRational::new(gap_cells, a.level))
}

/// `Q^β`: the interval of length `|Q|^β = 2^{-nβ}` concentric with `Q`
/// (d = 1), not clipped to `[0,1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enlargement {
    pub interval: RationalInterval,
    /// True when `2^{-nβ}` is dyadic and the endpoints are exact. Otherwise
    /// the interval is the inner approximation from a 128-bit lower bound on
    /// the length.
    pub exact: bool,
}

pub fn enlarge_beta(cube: &CubeIndex, beta: f64) -> Result<Enlargement> {
    if cube.dim() != 1 {
        return Err(Error::UnsupportedDimension(cube.dim()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1)")));
    }
    let exponent = -simplest_rational(beta) * BigRational::from_integer(BigInt::from(cube.level));
    let (lo, hi) = pow2_bounds(&exponent, 128)
        .ok_or_else(|| Error::InvalidParameter(format!("beta = {beta} has too large a denominator")))?;
    let exact = lo == hi;
    let half = lo.to_rational() / BigRational::from_integer(BigInt::from(2));
    let center = cube.interval(0).midpoint();
    Ok(Enlargement { interval: RationalInterval::closed(&center - &half, &center + &half), exact })
}

/// Length `2^{-nβ}` as an `f64`, for reporting.
pub fn enlarged_length_f64(level: u32, beta: f64) -> f64 {
    (-(level as f64) * beta).exp2()
}

#[doc(hidden)]
pub fn level_of_width(width: &BigRational) -> Option<u32> {
    DyadicRational::from_rational(width)
        .filter(|d| d.numerator() == &BigInt::from(1))
        .map(|d| d.exponent())
        .and_then(|e| e.to_u32())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use proptest::prelude::*;

    #[test]
    fn make_cube_examples() {
        let root = make_cube(0, &[0], Closure::Closed).unwrap();
        assert_eq!(root.interval(0), RationalInterval::closed(ratio(0, 1), ratio(1, 1)));
        let q = make_cube(3, &[5], Closure::Closed).unwrap();
        assert_eq!(q.interval(0), RationalInterval::closed(ratio(5, 8), ratio(6, 8)));
        assert_eq!(make_cube(2, &[4], Closure::Closed), Err(Error::CoordOutOfRange { axis: 0, coord: 4, level: 2 }));
    }

    #[test]
    fn navigation_examples() {
        let q = make_cube(3, &[5], Closure::Closed).unwrap();
        assert_eq!(q.parent().unwrap(), make_cube(2, &[2], Closure::Closed).unwrap());
        let p = make_cube(1, &[0], Closure::Closed).unwrap();
        let kids = p.children().unwrap();
        assert_eq!(
            kids,
            vec![make_cube(2, &[0], Closure::Closed).unwrap(), make_cube(2, &[1], Closure::Closed).unwrap()]
        );
        assert_eq!(navigate(&CubeIndex::root(1, Closure::Closed), Direction::Parent), Err(Error::NoParent));
        let sq = make_cube(1, &[1, 0], Closure::Closed).unwrap();
        assert_eq!(sq.children().unwrap().len(), 4);
    }

    #[test]
    fn distance_examples() {
        let a = make_cube(2, &[0], Closure::Closed).unwrap();
        let b = make_cube(2, &[3], Closure::Closed).unwrap();
        let c = make_cube(2, &[1], Closure::Closed).unwrap();
        assert_eq!(min_distance(&a, &b).unwrap(), DyadicRational::new(1, 1));
        assert_eq!(min_distance(&a, &c).unwrap(), DyadicRational::zero());
        assert_eq!(min_distance(&b, &b).unwrap(), DyadicRational::zero());
        let far = make_cube(3, &[0], Closure::Closed).unwrap();
        assert_eq!(min_distance(&a, &far), Err(Error::LevelMismatch(2, 3)));
    }

    #[test]
    fn enlarge_examples() {
        let q = make_cube(2, &[1], Closure::Closed).unwrap();
        let e = enlarge_beta(&q, 0.5).unwrap();
        assert!(e.exact);
        assert_eq!(e.interval, RationalInterval::closed(ratio(1, 8), ratio(5, 8)));

        let root = CubeIndex::root(1, Closure::Closed);
        assert_eq!(enlarge_beta(&root, 0.3).unwrap().interval, root.interval(0));

        let q = make_cube(4, &[0], Closure::Closed).unwrap();
        let e = enlarge_beta(&q, 0.25).unwrap();
        assert!(e.exact);
        assert_eq!(e.interval, RationalInterval::closed(ratio(1, 32) - ratio(1, 4), ratio(1, 32) + ratio(1, 4)));
        // Independent float evaluation of the same endpoints.
        let (l, r) = (e.interval.left.to_f64().unwrap(), e.interval.right.to_f64().unwrap());
        assert!((l - (1.0 / 32.0 - 0.25)).abs() < 1e-15 && (r - (1.0 / 32.0 + 0.25)).abs() < 1e-15);

        let sq = make_cube(1, &[0, 0], Closure::Closed).unwrap();
        assert_eq!(enlarge_beta(&sq, 0.5), Err(Error::UnsupportedDimension(2)));
    }

    #[test]
    fn inexact_enlargement_is_tight() {
        let q = make_cube(5, &[7], Closure::Closed).unwrap();
        let e = enlarge_beta(&q, 0.3).unwrap();
        assert!(!e.exact);
        let len = e.interval.width().to_f64().unwrap();
        assert!((len - 2f64.powf(-1.5)).abs() < 1e-15);
        assert!(e.interval.contains_interval(&q.interval(0)));
    }

    proptest! {
        #[test]
        fn parent_children_round_trip(level in 1u32..=30, seed in any::<u64>()) {
            let k = seed % (1u64 << level);
            let q = make_cube(level, &[k], Closure::HalfOpen).unwrap();
            let kids = q.parent().unwrap().children().unwrap();
            prop_assert!(kids.contains(&q));
        }

        #[test]
        fn distance_symmetric_and_parent_monotone(level in 1u32..=20, a in any::<u64>(), b in any::<u64>()) {
            let side = 1u64 << level;
            let qa = make_cube(level, &[a % side], Closure::Closed).unwrap();
            let qb = make_cube(level, &[b % side], Closure::Closed).unwrap();
            let dab = min_distance(&qa, &qb).unwrap();
            prop_assert_eq!(&dab, &min_distance(&qb, &qa).unwrap());
            // Replacing a cube by its parent (compared at a common level via
            // both parents) never increases the distance.
            let pa = qa.parent().unwrap();
            let pb = qb.parent().unwrap();
            prop_assert!(min_distance(&pa, &pb).unwrap() <= dab);
        }

        #[test]
        fn half_open_cubes_partition(level in 0u32..=12, num in 0u64..1_000_000, den_pow in 0u32..24) {
            let den = 1u64 << den_pow;
            let x = ratio((num % den) as i64, den as i64);
            let hits = (0..1u64 << level)
                .filter(|&k| make_cube(level, &[k], Closure::HalfOpen).unwrap().contains(std::slice::from_ref(&x)))
                .count();
            prop_assert_eq!(hits, 1);
        }

        #[test]
        fn enlargement_contains_cube(level in 0u32..=24, k in any::<u64>(), q in 1u32..8) {
            let beta = q as f64 / 8.0;
            let cube = make_cube(level, &[k % (1u64 << level)], Closure::Closed).unwrap();
            let e = enlarge_beta(&cube, beta).unwrap();
            prop_assert!(e.interval.contains_interval(&cube.interval(0)));
            if (level * q) % 8 == 0 {
                prop_assert!(e.exact);
                let expected = DyadicRational::new(1, level * q / 8).to_rational();
                prop_assert_eq!(e.interval.width(), expected);
            }
        }
    }
}
