//! Fixtures shared by the benchmarks.

use wizard_rl::game::deal;
use wizard_rl::rng::{seeded, uniform_index};
use wizard_rl::{Card, Phase, RoundState};

/// A round of `round` cards with bidding done and `plays` random legal cards played.
pub fn midgame(round: u8, plays: usize, seed: u64) -> RoundState {
    let mut rng = seeded(seed);
    let mut state = deal(&mut rng, round, 0).expect("valid round");
    while state.phase() == Phase::Bidding {
        let seat = state.to_act().expect("bidding");
        state.step_bid(seat, uniform_index(&mut rng, round as usize + 1) as u8).expect("legal bid");
    }
    for _ in 0..plays.min(4 * round as usize - 1) {
        let seat = state.to_act().expect("playing");
        let legal: Vec<Card> = state.admissible(seat).iter().collect();
        state.step_play(seat, legal[uniform_index(&mut rng, legal.len())]).expect("legal card");
    }
    state
}
