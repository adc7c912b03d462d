//! Experiments over the selection models and targets.

pub mod boxdim;
pub mod chain;
pub mod counting;
pub mod lemma23;
pub mod moments;
pub mod window;

pub use boxdim::{box_dim_estimate, sandwich_check, target_box_dim, BoxDimEstimate, SandwichResult};
pub use chain::{prop13_chain, ChainReport, ChainRow};
pub use counting::{geometric_schedule, prop14_counting, CountingRow, CountingTrace, GeometricSchedule};
pub use lemma23::{lemma23_bound, lemma23_coverage, Lemma23Result};
pub use moments::{hn_upper_statistic, sn_exact, sn_statistics, HitStatistics, HnResult};
pub use window::{window_hit_probability, window_oracle, WindowResult, WindowSpec};
