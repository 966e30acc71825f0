//! Card-location model of the hidden state, samplers and sampled-state search.
//!
//! A [`CardLocationTable`] assigns each of the 60 cards to one of nine
//! locations: the deck (undealt cards and the revealed trump card), one of the
//! four hands, or played by one of the four seats. Cards of the current,
//! incomplete trick count as played.

mod estimator;
mod sampler;
mod search;
mod table;

pub use estimator::{
    estimator_input, estimator_target, EstimatorConfig, EstimatorSample, StateEstimator, ESTIMATOR_HIDDEN,
};
pub use sampler::{nn_sample, sample_from_rows, sample_table, uniform_sample, SamplerKind};
pub(crate) use search::best_of;
pub use search::{action_rewards, materialize, rollout_reward, tree_search, RolloutNets};
pub use table::{truth_table, CardLocationTable, Knowledge, Location, NUM_LOCATIONS};
