use thiserror::Error;

/// Errors raised by the grid, model, target and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("coordinate {coord} on axis {axis} is outside [0, 2^{level} - 1]")]
    CoordOutOfRange { axis: usize, coord: u64, level: u32 },
    #[error("the level-0 cube has no parent")]
    NoParent,
    #[error("cubes live on different levels ({0} vs {1})")]
    LevelMismatch(u32, u32),
    #[error("cubes have different dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("operation supports d = 1 only, got d = {0}")]
    UnsupportedDimension(usize),
    #[error("level {level} exceeds the level cap {cap}")]
    LevelCapExceeded { level: u32, cap: u32 },
    #[error("no integer below {limit} satisfies the {what} inequality at generation {k}")]
    SearchOverflow { what: &'static str, k: usize, limit: u64 },
    #[error("generation {k} would have {children} children (< 2)")]
    DegenerateGeneration { k: usize, children: u64 },
    #[error("generation {k}: {reason}")]
    InvalidSchedule { k: usize, reason: String },
    #[error("building {count} intervals exceeds the budget of {budget}")]
    IntervalBudgetExceeded { count: String, budget: usize },
    #[error("target resolves levels up to {resolved}, level {requested} requested")]
    DepthInsufficient { requested: u32, resolved: u32 },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("side condition violated at k = {k}: {condition}")]
    SideConditionViolated { k: usize, condition: String },
    #[error("empirical radius {radius:.3e} overlaps the threshold at level {level}, offset {offset}")]
    InsufficientPrecision { level: u32, offset: u64, radius: f64 },
    #[error("block count at level {0} does not fit in 64 bits")]
    CountOverflow(u64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
