//! Manifest-driven experiment runner.

pub mod error;
pub mod manifest;
pub mod output;
pub mod runner;

use std::path::PathBuf;

pub use error::CliError;
pub use manifest::{ExperimentKind, Manifest};
pub use output::Outcome;
pub use runner::{run_manifest, RunOptions};

/// Command-line overrides applied on top of a manifest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Applies overrides and returns the manifest plus its output directory and file stem.
pub fn prepare(
    mut manifest: Manifest,
    expected: ExperimentKind,
    o: &Overrides,
) -> Result<(Manifest, PathBuf, String), CliError> {
    if manifest.kind() != expected {
        return Err(CliError::Config {
            path: "experiment".into(),
            message: format!("manifest describes `{}`, not `{}`", manifest.kind().name(), expected.name()),
        });
    }
    if let Some(seed) = o.seed {
        manifest.seed = seed;
    }
    if let Some(trials) = o.trials {
        manifest.trials = trials;
    }
    let output = manifest.output.take();
    let dir = o.out.clone().or_else(|| output.as_ref().map(|s| s.dir.clone())).unwrap_or_else(|| "results".into());
    let stem = output.and_then(|s| s.stem).unwrap_or_else(|| expected.name().to_string());
    Ok((manifest, dir, stem))
}
