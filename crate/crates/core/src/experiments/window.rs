//! Finite-window hitting probabilities.
//!
//! The event is "some level `n` in `[n_lo, n_hi]` chooses a cube meeting the
//! target", with the level-`n` cubes meeting the target taken from the
//! half-open covering. Levels are independent in both models, so the miss
//! probability is a product over the window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{CellSet, Closure, LevelCap};
use crate::rng::{run_trials, StreamKey};
use crate::selection::{block_count, hits_any, SelectionModel};
use crate::stats::{agrees, proportion_radius};
use crate::target::TargetSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub n_lo: u32,
    pub n_hi: u32,
}

impl WindowSpec {
    pub fn new(n_lo: u32, n_hi: u32) -> Self {
        WindowSpec { n_lo, n_hi }
    }

    pub fn validate(&self, cap: LevelCap) -> Result<()> {
        if self.n_lo < 1 || self.n_lo > self.n_hi {
            return Err(Error::InvalidParameter(format!(
                "window [{}, {}] must satisfy 1 <= n_lo <= n_hi",
                self.n_lo, self.n_hi
            )));
        }
        cap.check(self.n_hi)
    }

    pub fn levels(&self) -> std::ops::RangeInclusive<u32> {
        self.n_lo..=self.n_hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowResult {
    pub n_lo: u32,
    pub n_hi: u32,
    /// `N_n(G)` for each level of the window.
    pub counts: Vec<u64>,
    /// `ln P(miss)`, kept separately because the hit probability saturates.
    pub log_miss: f64,
    pub oracle: f64,
    pub trials: u64,
    pub empirical: Option<f64>,
    /// `3·sqrt(p̂(1−p̂)/T)`.
    pub radius: Option<f64>,
    /// Agreement within `3σ` of the oracle.
    pub agrees: Option<bool>,
}

/// `ln P(no level-n cube among `cells` cells is chosen)`.
fn log_miss_level(model: &SelectionModel, n: u32, cells: u64) -> Result<f64> {
    if cells == 0 {
        return Ok(0.0);
    }
    match model {
        SelectionModel::Bernoulli(b) => {
            let p = b.prob(n as u64)?;
            Ok(if p >= 1.0 { f64::NEG_INFINITY } else { cells as f64 * (-p).ln_1p() })
        }
        SelectionModel::PointProcess(pp) => {
            let c = block_count(pp, n as u64)?;
            if c == 0 {
                return Ok(0.0);
            }
            // Every point must avoid a union of measure cells·2^{-n}.
            let frac = cells as f64 * (-(n as f64)).exp2();
            Ok(if frac >= 1.0 { f64::NEG_INFINITY } else { c as f64 * (-frac).ln_1p() })
        }
    }
}

fn window_cells(target: &TargetSet, window: &WindowSpec, cap: LevelCap) -> Result<Vec<CellSet>> {
    window.validate(cap)?;
    target.check_depth(window.n_hi)?;
    window.levels().map(|n| target.covering_cells(n, Closure::HalfOpen)).collect()
}

/// Exact window-hit probability `1 − Π_n P(level n misses)`.
pub fn window_oracle(
    model: &SelectionModel,
    target: &TargetSet,
    window: &WindowSpec,
    cap: LevelCap,
) -> Result<WindowResult> {
    model.supports_dim(target.dim())?;
    let cells = window_cells(target, window, cap)?;
    oracle_from_cells(model, window, &cells)
}

fn oracle_from_cells(model: &SelectionModel, window: &WindowSpec, cells: &[CellSet]) -> Result<WindowResult> {
    let counts: Vec<u64> = cells.iter().map(CellSet::len).collect();
    let log_miss = window.levels().zip(&counts).map(|(n, &c)| log_miss_level(model, n, c)).sum::<Result<f64>>()?;
    Ok(WindowResult {
        n_lo: window.n_lo,
        n_hi: window.n_hi,
        counts,
        log_miss,
        oracle: -log_miss.exp_m1(),
        trials: 0,
        empirical: None,
        radius: None,
        agrees: None,
    })
}

/// The oracle plus a Monte Carlo frequency over `trials` independent trials.
pub fn window_hit_probability(
    model: &SelectionModel,
    target: &TargetSet,
    window: &WindowSpec,
    trials: u64,
    key: StreamKey,
    workers: Option<usize>,
    cap: LevelCap,
) -> Result<WindowResult> {
    model.supports_dim(target.dim())?;
    let cells = window_cells(target, window, cap)?;
    let mut out = oracle_from_cells(model, window, &cells)?;
    if trials == 0 {
        return Ok(out);
    }
    let hits = run_trials(key, trials, workers, |_, rng| -> Result<bool> {
        for (n, set) in window.levels().zip(&cells) {
            if hits_any(model, n, set, rng)? {
                return Ok(true);
            }
        }
        Ok(false)
    });
    let mut count = 0u64;
    for h in hits {
        count += h? as u64;
    }
    let freq = count as f64 / trials as f64;
    out.trials = trials;
    out.empirical = Some(freq);
    out.radius = Some(proportion_radius(freq, trials));
    out.agrees = Some(agrees(freq, out.oracle, trials));
    Ok(out)
}
