//! Rules engine for a single Wizard round.

mod card;
mod round;
mod rules;

pub use card::{
    build_deck, Card, CardKind, CardSet, CardSetIter, Suit, DECK_SIZE, MAX_RANK, MIN_RANK, NUM_RANKS, NUM_SUITS,
    SUITS,
};
pub use round::{deal, Phase, RoundState};
pub use rules::{
    admissible, current_winner, lead_suit, lead_suit_of, normalize_reward, points_bounds, score, trick_winner,
    winning_position, would_win, Play, Trick, Trump,
};

pub const NUM_PLAYERS: usize = 4;
pub const MAX_ROUND: u8 = 15;

/// Seat index at the table, 0..4.
pub type Seat = usize;
