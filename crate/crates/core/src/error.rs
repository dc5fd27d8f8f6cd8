use thiserror::Error;

/// Library-wide error type. Every variant carries enough context to point
/// the user at the offending node, line, or value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty p-value family")]
    EmptyFamily,

    #[error("empty tree: at least one node is required")]
    EmptyTree,

    #[error("p-value {value} outside [0,1] at {at}")]
    PValueOutOfRange { at: String, value: f64 },

    #[error("level {0} outside (0,1)")]
    LevelOutOfRange(f64),

    #[error("duplicate node id \"{id}\" at {path}")]
    DuplicateId { id: String, path: String },

    #[error("cycle detected: node \"{id}\" appears in its own ancestor path \"{path}\"")]
    CycleDetected { id: String, path: String },

    #[error("unknown parent \"{parent}\" referenced by node \"{id}\"")]
    UnknownParent { id: String, parent: String },

    #[error("no p-value derivable at node \"{0}\" (no own p and no descendant carries one)")]
    NoDerivablePValue(String),

    #[error("results missing node id \"{0}\"")]
    MissingResult(String),

    #[error("results reference unknown node id \"{0}\"")]
    UnknownResultId(String),

    #[error("parse error{}: {msg}", fmt_line(.line))]
    Parse { line: Option<usize>, msg: String },

    #[error("invalid tree: {0}")]
    InvalidTree(String),

    #[error("contingency table has a zero marginal (every row and column sum must be positive)")]
    ZeroMarginal,

    #[error("non-finite input: {0}")]
    NonFinite(f64),

    #[error("probability {0} outside (0,1)")]
    ProbabilityOutOfRange(f64),

    #[error("invalid group summary: {0}")]
    InvalidGroupSummary(String),

    #[error("both group standard deviations are zero")]
    DegenerateGroups,

    #[error("selection count {r} invalid for {m} parameters (need 1 <= R <= m)")]
    InvalidSelectionCount { m: usize, r: usize },

    #[error("no parameters selected: nothing to build intervals for")]
    NoneSelected,

    #[error("direction must be positive or negative, got \"none\"")]
    DirectionUnspecified,

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),

    #[error("empty analysis set: no included records")]
    EmptyAnalysisSet,

    #[error("unknown group field \"{0}\" (only \"field\" is supported)")]
    UnknownGroup(String),
}

fn fmt_line(line: &Option<usize>) -> String {
    match line {
        Some(l) => format!(" at line {l}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
