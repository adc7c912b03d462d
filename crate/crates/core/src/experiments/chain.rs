//! The block-by-block hitting chain of the tuned construction.
//!
//! Block `k` covers levels `M_{k−1}+1..=M_k`. The boundary `b_n` only moves
//! at `n = M_k`, so the expected number of chosen cubes meeting `G_k` over the
//! block is `E_k = J_k · P_{M_k}`, where `J_k` counts the closed level-`M_k`
//! cells meeting `G_k`. The chain checked per block is
//! `E_k ≤ 2 n_k N_k l_k 2^{M_k t_k} ≤ 2^{1−k}`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::cantor::{prop13_block_inequality, schedule_prop13, Prop13Schedule};
use crate::error::{Error, Result};
use crate::rational::{floor_pow2, simplest_rational};
use crate::stats::log2_biguint;
use crate::target::TargetSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainMethod {
    /// `J_k` and `C_{M_k}` counted exactly.
    Exact,
    /// `J_k ≤ 3 N_k` and `C_{M_k} < 2^{M_k t_k}`.
    Bounded,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainRow {
    pub k: usize,
    pub n: u64,
    pub m: u64,
    pub big_m: u64,
    /// `log₂ N_k`.
    pub log2_intervals: u64,
    pub t: f64,
    pub method: ChainMethod,
    /// Exact `J_k`.
    pub cells: Option<String>,
    /// Exact `C_{M_k}`.
    pub points: Option<String>,
    /// Exact `E_k` when `P_{M_k}` is exactly computable.
    pub expected: Option<f64>,
    /// `log₂` of the certified upper bound on `E_k`.
    pub log2_upper: f64,
    /// Upper bound `≤ 2 n_k N_k l_k 2^{M_k t_k}`.
    pub chain_holds: bool,
    /// `2 n_k N_k l_k 2^{M_k t_k} ≤ 2^{1−k}`.
    pub target_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainReport {
    pub m: Vec<u64>,
    pub n: Vec<u64>,
    pub rows: Vec<ChainRow>,
    /// Partial sums of the upper bounds.
    pub partial_sums: Vec<f64>,
    pub holds: bool,
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn pow2(e: u64) -> BigRational {
    BigRational::from_integer(BigInt::one() << e as usize)
}

/// Tunes the schedule and checks the chain for `k = 1..=depth`, counting
/// exactly for `k ≤ exact_depth` when the generation fits the interval budget.
pub fn prop13_chain(
    t_seq: &[f64],
    m1: u64,
    depth: usize,
    search_limit: u64,
    exact_depth: usize,
    budget: usize,
) -> Result<ChainReport> {
    let sched = schedule_prop13(t_seq, m1, depth, search_limit)?;
    let spec = sched.point_process();
    spec.validate()?;
    let mut rows = Vec::with_capacity(depth);
    for i in 0..depth {
        let k = i + 1;
        let exact = if k <= exact_depth {
            match TargetSet::cantor(&sched.schedule, k, budget) {
                Ok(target) => Some(exact_row(&sched, &spec, &target, k)?),
                Err(Error::IntervalBudgetExceeded { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        rows.push(match exact {
            Some(row) => row,
            None => bounded_row(&sched, k)?,
        });
    }
    let partial_sums = rows
        .iter()
        .scan(0.0, |acc, r| {
            *acc += r.log2_upper.exp2();
            Some(*acc)
        })
        .collect::<Vec<_>>();
    let holds = rows.iter().all(|r| r.chain_holds && r.target_holds) && partial_sums.last().is_some_and(|s| *s < 2.0);
    Ok(ChainReport { m: sched.m.clone(), n: sched.n.clone(), rows, partial_sums, holds })
}

fn block(sched: &Prop13Schedule, k: usize) -> (u64, u64, u64, BigRational) {
    let i = k - 1;
    let prev = if i == 0 { 0 } else { sched.big_m[i - 1] };
    (sched.n[i], prev, sched.sum_m(k), simplest_rational(sched.t[i]))
}

fn target_holds(sched: &Prop13Schedule, k: usize) -> bool {
    let (n, prev, sum_m, t) = block(sched, k);
    prop13_block_inequality(n, sum_m, prev, &t, k as u64)
}

fn exact_row(
    sched: &Prop13Schedule,
    spec: &crate::selection::PointProcessSpec,
    target: &TargetSet,
    k: usize,
) -> Result<ChainRow> {
    let (n, _, sum_m, t) = block(sched, k);
    let big_m = sched.big_m[k - 1];
    for level in big_m - n + 1..big_m {
        if spec.block_count_big(level).is_none_or(|c| !c.is_zero()) {
            return Err(Error::InvalidSchedule { k, reason: format!("level {level} inside block {k} draws points") });
        }
    }
    let cells = target.closed_cell_count_big(big_m)?;
    let points = spec
        .block_count_big(big_m)
        .ok_or_else(|| Error::InvalidSchedule { k, reason: "block count not exactly computable".into() })?;
    let upper = BigRational::from_integer(BigInt::from(&cells * &points)) / pow2(big_m);
    let bound = BigRational::new(BigInt::one(), BigInt::one() << (k - 1));
    let mt_floor = floor_pow2(&(&t * rat(big_m)))
        .ok_or_else(|| Error::InvalidSchedule { k, reason: "2^{M_k t_k} not exactly computable".into() })?;
    let chain_holds = &cells * &points <= BigUint::from(2 * n) * (BigUint::one() << sum_m as usize) * mt_floor;
    let expected = spec
        .hit_prob_rational(big_m)
        .and_then(|p| (BigRational::from_integer(BigInt::from(cells.clone())) * p).to_f64());
    Ok(ChainRow {
        k,
        n,
        m: sched.m[k - 1],
        big_m,
        log2_intervals: sum_m,
        t: sched.t[k - 1],
        method: ChainMethod::Exact,
        cells: Some(cells.to_string()),
        points: Some(points.to_string()),
        expected,
        log2_upper: log2_biguint(&cells) + log2_biguint(&points) - big_m as f64,
        chain_holds,
        target_holds: target_holds(sched, k) && upper <= bound,
    })
}

fn bounded_row(sched: &Prop13Schedule, k: usize) -> Result<ChainRow> {
    let (n, _, sum_m, t) = block(sched, k);
    let big_m = sched.big_m[k - 1];
    // Upper bound 3·2^{e}, e = Σm − M_k(1 − t_k); it is ≤ 2^{1−k} iff 2^r ≥ 3 with r = −(e + k − 1).
    let e = rat(sum_m) - rat(big_m) * (BigRational::one() - &t);
    let r = -(&e + rat(k as u64 - 1));
    let fits = r >= rat(2) || (r >= BigRational::zero() && floor_pow2(&r).is_some_and(|f| f >= BigUint::from(3u32)));
    Ok(ChainRow {
        k,
        n,
        m: sched.m[k - 1],
        big_m,
        log2_intervals: sum_m,
        t: sched.t[k - 1],
        method: ChainMethod::Bounded,
        cells: None,
        points: None,
        expected: None,
        log2_upper: 3f64.log2() + e.to_f64().unwrap_or(f64::NAN),
        chain_holds: 3 <= 2 * n,
        target_holds: target_holds(sched, k) && fits,
    })
}
