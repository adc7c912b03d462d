//! Versioned JSON experiment manifests.

use std::path::{Path, PathBuf};

use fractal_hit_lab_core::cantor::{schedule_prop14, CantorSchedule, DEFAULT_INTERVAL_BUDGET};
use fractal_hit_lab_core::experiments::WindowSpec;
use fractal_hit_lab_core::rational::{fmt_rational, parse_rational, simplest_rational};
use fractal_hit_lab_core::{Result as CoreResult, SelectionModel, TargetSet};
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

pub const MANIFEST_VERSION: u32 = 1;

pub fn tool_version() -> String {
    format!("fractal-hit-lab {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    #[serde(default = "tool_version")]
    pub tool_version: String,
    pub seed: u64,
    #[serde(default)]
    pub trials: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// File stem; defaults to the experiment name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Hitprob,
    Sn,
    Hn,
    Boxdim,
    Lemma23,
    Prop14Count,
    Corr,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Hitprob => "hitprob",
            ExperimentKind::Sn => "sn",
            ExperimentKind::Hn => "hn",
            ExperimentKind::Boxdim => "boxdim",
            ExperimentKind::Lemma23 => "lemma23",
            ExperimentKind::Prop14Count => "prop14-count",
            ExperimentKind::Corr => "corr",
        }
    }

    /// Stream id separating the random streams of different experiments.
    pub fn stream_id(self) -> u64 {
        self as u64 + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Hitprob(HitprobParams),
    Sn(SnParams),
    Hn(HnParams),
    Boxdim(BoxdimParams),
    Lemma23(Lemma23Params),
    Prop14Count(Prop14CountParams),
    Corr(CorrParams),
}

impl Experiment {
    pub fn kind(&self) -> ExperimentKind {
        match self {
            Experiment::Hitprob(_) => ExperimentKind::Hitprob,
            Experiment::Sn(_) => ExperimentKind::Sn,
            Experiment::Hn(_) => ExperimentKind::Hn,
            Experiment::Boxdim(_) => ExperimentKind::Boxdim,
            Experiment::Lemma23(_) => ExperimentKind::Lemma23,
            Experiment::Prop14Count(_) => ExperimentKind::Prop14Count,
            Experiment::Corr(_) => ExperimentKind::Corr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitprobParams {
    pub model: SelectionModel,
    pub target: TargetSpec,
    pub windows: Vec<WindowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnParams {
    pub model: SelectionModel,
    pub target: TargetSpec,
    pub levels: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HnParams {
    pub model: SelectionModel,
    pub target: TargetSpec,
    pub levels: Vec<u32>,
    /// `β̄`; defaults to `log₂(#balls)/n` per level.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub box_dim: Option<f64>,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxdimParams {
    pub target: TargetSpec,
    pub levels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sandwich: Option<SandwichParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichParams {
    pub model: SelectionModel,
    pub target_dim: f64,
    pub gamma: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_margin() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma23Params {
    pub gamma0: f64,
    pub beta: f64,
    pub levels: Vec<u32>,
    /// Also require the empirical non-coverage to decrease strictly along `levels`.
    #[serde(default)]
    pub expect_decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prop14CountParams {
    pub t: Rational,
    pub depth: usize,
    pub schedule: CountSchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CountSchedule {
    Explicit { n: Vec<u64>, m: Vec<u64>, t_m: Vec<Rational> },
    Geometric { gamma0: f64, alpha: f64, beta: f64, n1: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrParams {
    pub model: SelectionModel,
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub n_lo: u32,
    pub n_hi: u32,
    pub epsilons: Vec<f64>,
    /// Tail window for the `δ` estimate; defaults to the last half of the levels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Fail any `ε` whose `δ` estimate exceeds this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_delta: Option<f64>,
}

fn default_dim() -> usize {
    1
}

/// Expected tail values of the two ratio sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Limits {
    pub ratio_f: f64,
    pub ratio_g: f64,
    pub tolerance: f64,
}

/// A target given by construction rather than by its intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    Unit {
        dim: usize,
    },
    Point {
        coords: Vec<Rational>,
    },
    /// `depth` generations of `children` equally spaced children scaled by `ratio`.
    UniformCantor {
        children: u64,
        ratio: Rational,
        depth: usize,
    },
    /// `⌊2^{n_k t}⌋` children of length `2^{-n_k}` times the parent.
    Prop14Cantor {
        t: f64,
        n: Vec<u64>,
        depth: usize,
    },
}

impl TargetSpec {
    pub fn build(&self) -> CoreResult<TargetSet> {
        match self {
            TargetSpec::Unit { dim } => Ok(TargetSet::unit(*dim)),
            TargetSpec::Point { coords } => Ok(TargetSet::point(coords.iter().map(|c| c.0.clone()).collect())),
            TargetSpec::UniformCantor { children, ratio, depth } => {
                let s = CantorSchedule::uniform(*children, ratio.0.clone(), *depth)?;
                TargetSet::cantor(&s, *depth, DEFAULT_INTERVAL_BUDGET)
            }
            TargetSpec::Prop14Cantor { t, n, depth } => {
                let s = schedule_prop14(*t, n, *depth)?;
                TargetSet::cantor(&s, *depth, DEFAULT_INTERVAL_BUDGET)
            }
        }
    }
}

/// An exact rational written as `"p/q"`, a decimal string, or a JSON number.
///
/// JSON numbers are read as the simplest rational within `1e-12`, so `0.4`
/// means `2/5`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rational(pub BigRational);

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x.is_finite() => Ok(Rational(simplest_rational(x))),
            Raw::Num(x) => Err(serde::de::Error::custom(format!("not a finite number: {x}"))),
            Raw::Str(s) => parse_rational(&s)
                .map(Rational)
                .ok_or_else(|| serde::de::Error::custom(format!("not a rational: {s:?}"))),
        }
    }
}

impl Manifest {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let manifest: Manifest = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::Config { path: e.path().to_string(), message: e.inner().to_string() })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(CliError::Config {
                path: "version".into(),
                message: format!("unsupported manifest version {}, expected {MANIFEST_VERSION}", manifest.version),
            });
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.kind()
    }
}
