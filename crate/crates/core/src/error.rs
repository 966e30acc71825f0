use std::path::PathBuf;

use thiserror::Error;

use crate::game::{Card, Phase, Seat};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("round {0} is out of range 1..=15")]
    RoundOutOfRange(u8),

    #[error("seat {0} is out of range 0..=3")]
    SeatOutOfRange(usize),

    #[error("expected phase {expected:?}, state is in {actual:?}")]
    WrongPhase { expected: Phase, actual: Phase },

    #[error("seat {seat} acted out of turn (seat {expected} is to act)")]
    OutOfTurn { seat: Seat, expected: Seat },

    #[error("bid {bid} is not in 0..={round}")]
    InvalidBid { bid: usize, round: u8 },

    #[error("card {card} is not admissible for seat {seat}")]
    InadmissibleCard { seat: Seat, card: Card },

    #[error("masked-out action {action} returned by seat {seat}")]
    IllegalAction { seat: Seat, action: usize },

    #[error("hand is empty")]
    EmptyHand,

    #[error("trick has {0} plays, a complete trick needs 4")]
    IncompleteTrick(usize),

    #[error("points {points} outside [{min}, {max}] for round {round}")]
    PointsOutOfBounds { points: i32, round: u8, min: i32, max: i32 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("action mask has no admissible action")]
    EmptyMask,

    #[error("epsilon schedule needs a positive total, got {0}")]
    ZeroHorizon(u64),

    #[error("inconsistent knowledge: {0}")]
    Inconsistent(String),

    #[error("checkpoint {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("checkpoint {path} is missing tensor `{name}`")]
    MissingTensor { path: PathBuf, name: String },

    #[error("invalid agent spec `{spec}`: {reason}")]
    AgentSpec { spec: String, reason: String },

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
