//! Deep Q-learning: replay memory, exploration schedule, masked learner.

mod learner;
mod replay;
mod schedule;

pub use learner::{masked_argmax, select_action, DqnConfig, DqnLearner, UpdateOutcome};
pub use replay::{ObsCodec, ReplayBuffer, StoredTransition};
pub use schedule::{epsilon, EpsilonSchedule, EPS_END, EPS_START};
