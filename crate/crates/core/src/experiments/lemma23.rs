//! Coverage of `[0,1]` by the enlarged cubes `Q^β` of one point-process level.

use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::LevelCap;
use crate::rational::{floor_pow2, simplest_rational};
use crate::rng::{run_trials, StreamKey};
use crate::selection::{block_count, sample_level, PointProcessSpec, SelectionModel};
use crate::stats::proportion_radius;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma23Result {
    pub n: u32,
    pub gamma0: f64,
    pub beta: f64,
    /// `C_n`, the number of points drawn at level `n`.
    pub points: u64,
    /// `2^n (1 − 2^{−nβ−1})^{2^{n(1−γ₀)}}`.
    pub ideal_bound: f64,
    /// The same expression with the exponent replaced by `C_n`.
    pub actual_bound: f64,
    pub trials: u64,
    pub covered: u64,
    pub empirical_coverage: f64,
    pub empirical_noncover: f64,
    pub radius: f64,
    /// `empirical_noncover ≤ actual_bound + 3σ`.
    pub holds: bool,
}

/// `2^n (1 − 2^{−nβ−1})^{e}`, evaluated as `exp(n ln 2 + e·ln(1 − 2^{−nβ−1}))`.
pub fn lemma23_bound(n: u32, beta: f64, exponent: f64) -> f64 {
    let q = (-(n as f64) * beta - 1.0).exp2();
    (n as f64 * std::f64::consts::LN_2 + exponent * (-q).ln_1p()).exp()
}

fn validate(gamma0: f64, beta: f64, n: u32) -> Result<()> {
    if !(0.0..1.0).contains(&gamma0) {
        return Err(Error::InvalidParameter(format!("gamma0 = {gamma0} must lie in [0, 1)")));
    }
    if !(beta > 0.0 && beta < 1.0 - gamma0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must lie in (0, 1 - gamma0)")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("level must be at least 1".into()));
    }
    Ok(())
}

/// Whether the enlarged cubes of the sorted cells cover `[0, 2^n]` (in cell
/// units), each enlarged interval being `width` cells long around its cell.
///
/// Endpoints are compared doubled so everything stays in integers: the cube
/// `k` has centre `k + ½` and reaches `width/2` either side.
fn covers(cells: &[u64], n: u32, width: u64) -> bool {
    let (Some(&first), Some(&last)) = (cells.first(), cells.last()) else {
        return false;
    };
    let end = 1u64 << n;
    2 * first < width && 2 * (end - last) - 1 <= width && cells.windows(2).all(|w| w[1] - w[0] <= width)
}

/// Samples level `n` of the point process with `a_n = 2^{n(1−γ₀)}` and tests
/// coverage of `[0,1]` by `∪ Q^β` over the chosen cubes.
pub fn lemma23_coverage(
    gamma0: f64,
    beta: f64,
    n: u32,
    trials: u64,
    key: StreamKey,
    workers: Option<usize>,
    cap: LevelCap,
) -> Result<Lemma23Result> {
    validate(gamma0, beta, n)?;
    cap.check(n)?;
    let spec = PointProcessSpec::prop14(gamma0);
    spec.validate()?;
    let points = block_count(&spec, n as u64)?;
    if points == 0 {
        return Err(Error::InvalidParameter(format!("level {n} draws no points")));
    }
    // |Q^β| / |Q| = 2^{n(1−β)}; only its integer part matters against integer gaps.
    let width = floor_pow2(&(simplest_rational(1.0 - beta) * num_rational::BigRational::from_integer(n.into())))
        .and_then(|w| w.to_u64())
        .ok_or_else(|| Error::InvalidParameter(format!("enlargement at level {n} is not representable")))?;
    let model = SelectionModel::PointProcess(spec);
    let outcomes = run_trials(key, trials, workers, |_, rng| -> Result<bool> {
        let sel = sample_level(&model, n, 1, cap, rng)?;
        Ok(covers(&sel.chosen, n, width))
    });
    let mut covered = 0u64;
    for o in outcomes {
        covered += o? as u64;
    }
    let coverage = if trials == 0 { f64::NAN } else { covered as f64 / trials as f64 };
    let noncover = 1.0 - coverage;
    let radius = proportion_radius(noncover, trials);
    let actual_bound = lemma23_bound(n, beta, points as f64);
    Ok(Lemma23Result {
        n,
        gamma0,
        beta,
        points,
        ideal_bound: lemma23_bound(n, beta, (n as f64 * (1.0 - gamma0)).exp2()),
        actual_bound,
        trials,
        covered,
        empirical_coverage: coverage,
        empirical_noncover: noncover,
        radius,
        holds: trials > 0 && noncover <= actual_bound + radius + 1e-12,
    })
}
