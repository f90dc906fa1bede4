use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid time interval: start {start} is after end {end}")]
    InvalidInterval { start: i64, end: i64 },

    #[error("invalid energy amount {0} mAh: must be positive and finite")]
    InvalidAmount(f64),

    #[error("trust score {0} is outside [0, 1]")]
    InvalidTrust(f64),

    #[error("invalid history record {service_id}: {reason}")]
    InvalidRecord { service_id: String, reason: String },

    #[error("invalid trust weights: {0}")]
    InvalidWeights(String),

    #[error("invalid expectation: {0}")]
    InvalidExpectation(String),

    #[error("customized expectation needs a non-empty history")]
    EmptyHistory,

    #[error("demand slot [{start}, {end}] has zero length")]
    DegenerateSlot { start: i64, end: i64 },

    #[error("no consumer history overlaps slot [{start}, {end}] in microcell {microcell}")]
    NoDemand { microcell: String, start: i64, end: i64 },

    #[error("service {0} carries no trust score")]
    MissingTrust(String),

    #[error("no ground-truth behavior for provider {0}")]
    MissingBehavior(String),

    #[error("unknown strategy `{0}` (expected greedy, priority, knapsack or trust_heuristic)")]
    UnknownStrategy(String),

    #[error("unknown environment `{0}` (expected trustworthy, neutral or untrustworthy)")]
    UnknownEnvironment(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    CsvData(#[from] csv::Error),

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}
