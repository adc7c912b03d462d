pub mod cantor;
pub mod correlation;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod rational;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod target;

pub use cantor::{schedule_prop13, schedule_prop14, CantorSchedule, Prop13Schedule, DEFAULT_INTERVAL_BUDGET};
pub use error::{Error, Result};
pub use grid::{CellSet, Closure, CubeIndex, LevelCap};
pub use rng::StreamKey;
pub use selection::{BernoulliSpec, PointProcessSpec, SelectionModel};
pub use target::TargetSet;
