//! Box-counting slopes of covering counts and of expected chosen-cube counts.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::LevelCap;
use crate::selection::SelectionModel;
use crate::stats::linear_fit;
use crate::target::TargetSet;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxDimEstimate {
    /// Least-squares slope of `log₂ N_n` against `n`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub residual: f64,
    /// Levels with `N_n > 0` that entered the fit.
    pub levels_used: usize,
}

/// Fits `log₂ N_n ≈ slope·n + c`; levels with `N_n = 0` are dropped.
pub fn box_dim_estimate(counts: &[(u32, f64)]) -> Result<BoxDimEstimate> {
    let mut points: Vec<(f64, f64)> =
        counts.iter().filter(|(_, c)| *c > 0.0).map(|&(n, c)| (n as f64, c.log2())).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    if points.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::DegenerateInput("counts must be finite".into()));
    }
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 distinct levels with positive counts, got {}",
            points.len()
        )));
    }
    let (slope, intercept, residual) = linear_fit(&points);
    Ok(BoxDimEstimate { slope, intercept, residual, levels_used: points.len() })
}

/// Slope of the half-open covering counts `N_n(G)`.
pub fn target_box_dim(target: &TargetSet, levels: &[u32], cap: LevelCap) -> Result<(Vec<(u32, u64)>, BoxDimEstimate)> {
    let counts = covering_counts(target, levels, cap)?;
    let fit = box_dim_estimate(&counts.iter().map(|&(n, c)| (n, c as f64)).collect::<Vec<_>>())?;
    Ok((counts, fit))
}

fn covering_counts(target: &TargetSet, levels: &[u32], cap: LevelCap) -> Result<Vec<(u32, u64)>> {
    for &n in levels {
        cap.check(n)?;
        target.check_depth(n)?;
    }
    levels.iter().map(|&n| Ok((n, target.covering_count(n)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichResult {
    /// `(n, N_n(G), N_n(G)·P_n)`.
    pub rows: Vec<(u32, u64, f64)>,
    pub target_fit: BoxDimEstimate,
    pub chosen_fit: BoxDimEstimate,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Checks that the slope of the expected number of chosen cubes meeting the
/// target lies in `[t − γ − margin, t + margin]`.
pub fn sandwich_check(
    model: &SelectionModel,
    target: &TargetSet,
    levels: &[u32],
    target_dim: f64,
    gamma: f64,
    margin: f64,
    cap: LevelCap,
) -> Result<SandwichResult> {
    model.supports_dim(target.dim())?;
    let counts = covering_counts(target, levels, cap)?;
    let rows =
        counts.iter().map(|&(n, c)| Ok((n, c, c as f64 * model.hit_prob(n as u64)?))).collect::<Result<Vec<_>>>()?;
    let target_fit = box_dim_estimate(&rows.iter().map(|r| (r.0, r.1 as f64)).collect::<Vec<_>>())?;
    let chosen_fit = box_dim_estimate(&rows.iter().map(|r| (r.0, r.2)).collect::<Vec<_>>())?;
    let lower = target_dim - gamma - margin;
    let upper = target_dim + margin;
    let holds = chosen_fit.slope >= lower && chosen_fit.slope <= upper;
    Ok(SandwichResult { rows, target_fit, chosen_fit, lower, upper, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cantor::{CantorSchedule, DEFAULT_INTERVAL_BUDGET};
    use crate::rational::ratio;
    use proptest::prelude::*;

    #[test]
    fn trivial_slopes() {
        let full: Vec<(u32, f64)> = (1..=10).map(|n| (n, (n as f64).exp2())).collect();
        assert!((box_dim_estimate(&full).unwrap().slope - 1.0).abs() < 1e-12);
        let flat: Vec<(u32, f64)> = (1..=10).map(|n| (n, 1.0)).collect();
        assert_eq!(box_dim_estimate(&flat).unwrap().slope, 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let zeros: Vec<(u32, f64)> = (1..=5).map(|n| (n, 0.0)).collect();
        assert!(matches!(box_dim_estimate(&zeros), Err(Error::DegenerateInput(_))));
        assert!(matches!(box_dim_estimate(&[(1, 2.0), (2, 4.0), (2, 4.0)]), Err(Error::DegenerateInput(_))));
        let fit = box_dim_estimate(&[(1, 0.0), (2, 4.0), (3, 8.0), (4, 16.0)]).unwrap();
        assert_eq!(fit.levels_used, 3);
    }

    #[test]
    fn uniform_cantor_slope() {
        let s = CantorSchedule::uniform(4, ratio(1, 16), 4).unwrap();
        let t = TargetSet::cantor(&s, 4, DEFAULT_INTERVAL_BUDGET).unwrap();
        let (counts, fit) = target_box_dim(&t, &[4, 8, 12, 16], LevelCap::default()).unwrap();
        assert_eq!(counts, vec![(4, 4), (8, 16), (12, 64), (16, 256)]);
        assert!((fit.slope - 0.5).abs() < 0.01);
    }

    #[test]
    fn sandwich_on_expectations() {
        let s = CantorSchedule::uniform(4, ratio(1, 16), 5).unwrap();
        let t = TargetSet::cantor(&s, 5, DEFAULT_INTERVAL_BUDGET).unwrap();
        let levels: Vec<u32> = (4..=20).step_by(4).collect();
        for gamma in [0.0, 0.1, 0.25, 0.4] {
            let m = SelectionModel::bernoulli_power_law(gamma);
            let r = sandwich_check(&m, &t, &levels, 0.5, gamma, 0.1, LevelCap::default()).unwrap();
            assert!(r.holds, "{r:?}");
            assert!((r.chosen_fit.slope - (0.5 - gamma)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn slope_recovers_power_laws(a in -3.0f64..3.0, b in -5.0f64..5.0, lo in 1u32..10, len in 3u32..12) {
            let counts: Vec<(u32, f64)> = (lo..lo + len).map(|n| (n, (a * n as f64 + b).exp2())).collect();
            let fit = box_dim_estimate(&counts).unwrap();
            prop_assert!((fit.slope - a).abs() < 1e-9);
            prop_assert!(fit.residual < 1e-9);
        }
    }
}
