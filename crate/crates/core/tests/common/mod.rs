//! Independent rule oracles shared by the integration tests.
//!
//! Written directly from the card rules, without calling into the engine.

#![allow(dead_code)]

use wizard_rl::game::{CardKind, Trump};
use wizard_rl::{Card, Suit};

/// The first non-jester card fixes the obligation: a standard card sets its
/// suit, a wizard cancels it.
pub fn lead(cards: &[Card]) -> Option<Suit> {
    let first = cards.iter().find(|c| !matches!(c.kind(), CardKind::Jester(_)))?;
    match first.kind() {
        CardKind::Standard { suit, .. } => Some(suit),
        _ => None,
    }
}

fn strength(cards: &[Card], i: usize, trump: Trump) -> i64 {
    let led = lead(cards);
    match cards[i].kind() {
        CardKind::Wizard(_) => 10_000 - i as i64,
        CardKind::Jester(_) => -(i as i64) - 1,
        CardKind::Standard { suit, rank } => {
            if Some(suit) == trump.suit() {
                2_000 + rank as i64
            } else if Some(suit) == led {
                1_000 + rank as i64
            } else {
                0
            }
        }
    }
}

/// Position of the winning card: the strongest card under a total order
/// that ranks wizards (earliest first), trumps, the lead suit, off-suit
/// cards and jesters (earliest first).
pub fn winner(cards: &[Card], trump: Trump) -> usize {
    assert!(!cards.is_empty());
    (0..cards.len()).max_by_key(|&i| (strength(cards, i, trump), std::cmp::Reverse(i))).unwrap()
}

pub fn legal(hand: &[Card], trick: &[Card], card: Card) -> bool {
    let Some(led) = lead(trick) else { return true };
    let holds_led = hand.iter().any(|c| c.suit() == Some(led));
    card.is_wizard() || card.is_jester() || card.suit() == Some(led) || !holds_led
}

/// 2 suits × 10 ranks + 2 wizards + 2 jesters.
pub fn reduced_deck() -> Vec<Card> {
    let mut deck = Vec::new();
    for suit in [Suit::Red, Suit::Yellow] {
        for rank in 5..=14 {
            deck.push(Card::standard(suit, rank));
        }
    }
    deck.extend([Card::wizard(0), Card::wizard(1), Card::jester(0), Card::jester(1)]);
    deck
}

/// Every way to name trump over the reduced deck, including a suit that
/// does not occur in it.
pub fn trump_designations() -> [Trump; 4] {
    [Trump::NoTrump, Trump::Suit(Suit::Red), Trump::Suit(Suit::Yellow), Trump::Suit(Suit::Blue)]
}
