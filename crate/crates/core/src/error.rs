use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    DanglingNode(String),
    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },
    #[error("duplicate {kind} `{name}`")]
    Duplicate { kind: &'static str, name: String },
    #[error("{what} must be non-negative, got {value}")]
    Negative { what: String, value: f64 },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: String, value: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("duplication status has no destinations")]
    EmptyStatus,
    #[error("invalid decision on {interface}: {reason}")]
    InvalidDecision { interface: String, reason: String },
    #[error("capacity exceeded on {interface}: load {load} > capacity {capacity}")]
    CapacityExceeded {
        interface: String,
        load: f64,
        capacity: f64,
    },
    #[error("randomized policy masses on {interface} sum to {sum} > 1")]
    ProbabilityMass { interface: String, sum: f64 },
    #[error("series of {len} samples is too short for stability detection")]
    SeriesTooShort { len: usize },
    #[error("empty grid")]
    EmptyGrid,
    #[error("horizon must be at least one slot")]
    ZeroHorizon,
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("not a Y-network: {0}")]
    NotYNetwork(String),
    #[error("unstable run at lambda = {lambda} packets/slot, V = {v}")]
    UnstableRun { lambda: f64, v: f64 },
    #[error("malformed ledger: {0}")]
    Ledger(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
