//! Deep reinforcement learning for the trick-taking card game Wizard.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: deterministic rules for one round (deck, dealing, legality,
//!   trick resolution, scoring).
//! - [`env`]: the bidding and playing decision problems as seen by one seat,
//!   with fixed-width observation vectors and action masks.
//! - [`nn`]: dense networks, an LSTM cell, Adam and the checkpoint format.
//! - [`dqn`]: replay buffer, exploration schedule and the masked DQN learner.
//! - [`agents`]: random, rule-based, DQN, history-augmented DQN and
//!   tree-search policies.
//! - [`history`]: the sequence model over played cards.
//! - [`state_model`]: card-location tables, samplers, the state estimator and
//!   the one-ply sampled-state search.
//! - [`train`] and [`eval`]: training regimes and measurement protocols.

pub mod agents;
pub mod config;
pub mod dqn;
pub mod env;
pub mod error;
pub mod eval;
pub mod game;
pub mod history;
pub mod nn;
pub mod rng;
pub mod state_model;
pub mod train;

pub use error::{Error, Result};
pub use game::{Card, CardSet, Phase, RoundState, Seat, Suit, Trump};
pub use rng::WizRng;
