use thiserror::Error;

use crate::model::{AoiState, Operation};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    InvalidProbability {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("channel ({p1}, {p2}, {p3}) violates 0 < P1 < P2 < 1 and 0 < P1 < P3 < 1")]
    OutsideAnalyticDomain { p1: f64, p2: f64, p3: f64 },

    #[error("operation {op} is infeasible in state {state}")]
    InfeasibleOperation { op: Operation, state: AoiState },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("only {0} departures observed, at least 2 are required")]
    TooFewDepartures(u64),

    #[error("mean interdeparture time must be positive")]
    ZeroInterdeparture,

    #[error("state space has {count} states, limit is {limit}")]
    StateSpaceTooLarge { count: usize, limit: usize },

    #[error("value iteration did not converge in {iterations} iterations (span {span:e})")]
    NotConverged { iterations: usize, span: f64 },

    #[error("optimiser branches disagree at the threshold: interior root {root}")]
    ThresholdMismatch { root: f64 },

    #[error("unknown rule `{0}`")]
    UnknownRule(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
