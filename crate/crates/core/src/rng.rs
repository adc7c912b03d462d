//! Reproducible per-trial random streams.
//!
//! A trial stream is a ChaCha8 generator keyed by `(master_seed, experiment)`
//! with the stream id set to the trial index. Trials are therefore
//! independent of each other, of the order they run in, and of how many
//! trials follow them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Identifies a family of trial streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub experiment: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, experiment: u64) -> Self {
        StreamKey { master_seed, experiment }
    }

    /// Derives a key for a sub-experiment, e.g. one configuration of a sweep.
    pub fn child(self, index: u64) -> Self {
        // splitmix64 finaliser on (experiment, index) keeps children distinct.
        let mut z = self.experiment ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        StreamKey { master_seed: self.master_seed, experiment: z ^ (z >> 31) }
    }

    pub fn trial(self, index: u64) -> ChaCha8Rng {
        let mut seed = [0u8; 32];
        seed[..8].copy_from_slice(&self.master_seed.to_le_bytes());
        seed[8..16].copy_from_slice(&self.experiment.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(seed);
        rng.set_stream(index);
        rng
    }
}

/// Runs `trials` independent trials and returns their outputs in trial order.
///
/// `workers = None` uses the global rayon pool. The output does not depend on
/// the worker count.
pub fn run_trials<T, F>(key: StreamKey, trials: u64, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync + Send,
{
    let body = || {
        (0..trials)
            .into_par_iter()
            .map(|i| {
                let mut rng = key.trial(i);
                f(i, &mut rng)
            })
            .collect()
    };
    match workers {
        Some(1) => (0..trials)
            .map(|i| {
                let mut rng = key.trial(i);
                f(i, &mut rng)
            })
            .collect(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(body))
            .unwrap_or_else(|_| body()),
        None => body(),
    }
}
