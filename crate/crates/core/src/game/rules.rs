use arrayvec::ArrayVec;

use super::card::{Card, CardKind, CardSet, Suit};
use super::{Seat, NUM_PLAYERS};
use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Trump {
    Suit(Suit),
    NoTrump,
}

impl Trump {
    /// Trump designation implied by the revealed card (none in round 15).
    pub fn from_revealed(card: Option<Card>) -> Trump {
        match card.and_then(Card::suit) {
            Some(s) => Trump::Suit(s),
            None => Trump::NoTrump,
        }
    }

    /// 0..4 for the suits, 4 for no trump.
    pub fn index(self) -> usize {
        match self {
            Trump::Suit(s) => s.index(),
            Trump::NoTrump => 4,
        }
    }

    pub fn suit(self) -> Option<Suit> {
        match self {
            Trump::Suit(s) => Some(s),
            Trump::NoTrump => None,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Play {
    pub player: Seat,
    pub card: Card,
}

/// Cards played to one trick, in seating order from the leader.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trick {
    leader: Seat,
    plays: ArrayVec<Play, NUM_PLAYERS>,
}

impl Trick {
    pub fn new(leader: Seat) -> Trick {
        assert!(leader < NUM_PLAYERS);
        Trick { leader, plays: ArrayVec::new() }
    }

    /// Builds a trick from cards in play order, the first played by `leader`.
    pub fn from_cards(leader: Seat, cards: &[Card]) -> Result<Trick> {
        let mut trick = Trick::new(leader);
        for &card in cards {
            let player = trick.next_player();
            trick.push(player, card)?;
        }
        Ok(trick)
    }

    pub fn leader(&self) -> Seat {
        self.leader
    }

    pub fn plays(&self) -> &[Play] {
        &self.plays
    }

    pub fn cards(&self) -> impl Iterator<Item = Card> + '_ {
        self.plays.iter().map(|p| p.card)
    }

    pub fn len(&self) -> usize {
        self.plays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plays.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.plays.len() == NUM_PLAYERS
    }

    pub fn next_player(&self) -> Seat {
        (self.leader + self.plays.len()) % NUM_PLAYERS
    }

    pub fn card_set(&self) -> CardSet {
        self.cards().collect()
    }

    pub fn push(&mut self, player: Seat, card: Card) -> Result<()> {
        if self.is_complete() {
            return Err(Error::Invalid("trick already has 4 plays".into()));
        }
        let expected = self.next_player();
        if player != expected {
            return Err(Error::OutOfTurn { seat: player, expected });
        }
        if self.plays.iter().any(|p| p.card == card) {
            return Err(Error::Invalid(format!("card {card} already in trick")));
        }
        self.plays.push(Play { player, card });
        Ok(())
    }
}

/// Suit of the first standard card, unless a wizard came before it.
pub fn lead_suit_of<I: IntoIterator<Item = Card>>(cards: I) -> Option<Suit> {
    for card in cards {
        match card.kind() {
            CardKind::Jester(_) => continue,
            CardKind::Wizard(_) => return None,
            CardKind::Standard { suit, .. } => return Some(suit),
        }
    }
    None
}

pub fn lead_suit(trick: &Trick) -> Option<Suit> {
    lead_suit_of(trick.cards())
}

/// Cards of `hand` that may legally be played to `trick`.
pub fn admissible(hand: CardSet, trick: &Trick) -> Result<CardSet> {
    if hand.is_empty() {
        return Err(Error::EmptyHand);
    }
    Ok(admissible_unchecked(hand, lead_suit(trick)))
}

pub(crate) fn admissible_unchecked(hand: CardSet, lead: Option<Suit>) -> CardSet {
    match lead {
        None => hand,
        Some(suit) => {
            let follow = hand.intersection(CardSet::of_suit(suit));
            if follow.is_empty() {
                hand
            } else {
                follow.union(hand.intersection(CardSet::SPECIALS))
            }
        }
    }
}

/// Position (within `cards`) of the card currently winning the trick.
///
/// First wizard, else highest trump, else highest card of the lead suit,
/// else (only jesters) the first jester. Works on partial tricks.
pub fn winning_position(cards: &[Card], trump: Trump) -> Option<usize> {
    if cards.is_empty() {
        return None;
    }
    if let Some(i) = cards.iter().position(|c| c.is_wizard()) {
        return Some(i);
    }
    let highest_of = |suit: Suit| {
        cards
            .iter()
            .enumerate()
            .filter(|(_, c)| c.suit() == Some(suit))
            .max_by_key(|(_, c)| c.rank())
            .map(|(i, _)| i)
    };
    if let Some(i) = trump.suit().and_then(highest_of) {
        return Some(i);
    }
    if let Some(i) = lead_suit_of(cards.iter().copied()).and_then(highest_of) {
        return Some(i);
    }
    Some(0)
}

/// Current winning play of a (possibly partial) trick.
pub fn current_winner(trick: &Trick, trump: Trump) -> Option<Play> {
    let cards: ArrayVec<Card, NUM_PLAYERS> = trick.cards().collect();
    winning_position(&cards, trump).map(|i| trick.plays[i])
}

pub fn trick_winner(trick: &Trick, trump: Trump) -> Result<Seat> {
    if !trick.is_complete() {
        return Err(Error::IncompleteTrick(trick.len()));
    }
    Ok(current_winner(trick, trump).expect("complete trick").player)
}

/// Whether `card`, played next, would be winning the trick afterwards.
pub fn would_win(trick: &Trick, card: Card, trump: Trump) -> bool {
    let mut cards: ArrayVec<Card, { NUM_PLAYERS + 1 }> = trick.cards().collect();
    cards.push(card);
    winning_position(&cards, trump) == Some(cards.len() - 1)
}

/// Points for bidding `bid` and taking `tricks`.
pub fn score(bid: u8, tricks: u8) -> i32 {
    if bid == tricks {
        20 + 10 * bid as i32
    } else {
        -10 * (bid as i32 - tricks as i32).abs()
    }
}

/// Lowest and highest points attainable in round `round`.
pub fn points_bounds(round: u8) -> (i32, i32) {
    (-10 * round as i32, 20 + 10 * round as i32)
}

/// Maps round points onto [0, 1] using the round's theoretical bounds.
pub fn normalize_reward(points: i32, round: u8) -> Result<f32> {
    if !(1..=15).contains(&round) {
        return Err(Error::RoundOutOfRange(round));
    }
    let (min, max) = points_bounds(round);
    if points < min || points > max {
        return Err(Error::PointsOutOfBounds { points, round, min, max });
    }
    Ok((points - min) as f32 / (max - min) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> Card {
        s.parse().unwrap()
    }

    fn trick(leader: Seat, cards: &[&str]) -> Trick {
        let cards: Vec<Card> = cards.iter().map(|s| c(s)).collect();
        Trick::from_cards(leader, &cards).unwrap()
    }

    #[test]
    fn lead_suit_cases() {
        assert_eq!(lead_suit(&Trick::new(0)), None);
        assert_eq!(lead_suit(&trick(0, &["Jester0", "Red-9"])), Some(Suit::Red));
        assert_eq!(lead_suit(&trick(0, &["Wizard0", "Red-9"])), None);
        assert_eq!(lead_suit(&trick(1, &["Jester0", "Jester1"])), None);
        assert_eq!(lead_suit(&trick(1, &["Jester0", "Wizard1", "Red-3"])), None);
    }

    #[test]
    fn admissible_cases() {
        let hand: CardSet = ["Red-5", "Blue-9", "Wizard0"].iter().map(|s| c(s)).collect();
        let led = trick(0, &["Red-10"]);
        let expect: CardSet = ["Red-5", "Wizard0"].iter().map(|s| c(s)).collect();
        assert_eq!(admissible(hand, &led).unwrap(), expect);

        let hand: CardSet = ["Blue-9", "Green-2"].iter().map(|s| c(s)).collect();
        assert_eq!(admissible(hand, &led).unwrap(), hand);
        assert_eq!(admissible(hand, &Trick::new(2)).unwrap(), hand);
        assert!(matches!(admissible(CardSet::EMPTY, &led), Err(Error::EmptyHand)));
    }

    #[test]
    fn trick_winner_cases() {
        let t = trick(0, &["Red-5", "Wizard0", "Red-13", "Blue-2"]);
        assert_eq!(trick_winner(&t, Trump::Suit(Suit::Blue)).unwrap(), 1);
        let t = trick(2, &["Red-5", "Red-9", "Jester0", "Red-13"]);
        assert_eq!(trick_winner(&t, Trump::NoTrump).unwrap(), 1);
        let t = trick(3, &["Jester0", "Jester1", "Jester2", "Jester3"]);
        assert_eq!(trick_winner(&t, Trump::Suit(Suit::Red)).unwrap(), 3);
        let t = trick(0, &["Red-5", "Blue-2", "Red-14", "Green-14"]);
        assert_eq!(trick_winner(&t, Trump::Suit(Suit::Blue)).unwrap(), 1);
        assert!(matches!(
            trick_winner(&trick(0, &["Red-5"]), Trump::NoTrump),
            Err(Error::IncompleteTrick(1))
        ));
    }

    #[test]
    fn score_formula() {
        assert_eq!(score(3, 3), 50);
        assert_eq!(score(0, 0), 20);
        assert_eq!(score(2, 5), -30);
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize_reward(30, 1).unwrap(), 1.0);
        assert_eq!(normalize_reward(-10, 1).unwrap(), 0.0);
        assert_eq!(normalize_reward(20, 1).unwrap(), 0.75);
        assert!(normalize_reward(40, 1).is_err());
        assert!(normalize_reward(-20, 1).is_err());
    }

    #[test]
    fn push_rejects_out_of_turn_and_duplicates() {
        let mut t = Trick::new(1);
        assert!(t.push(0, c("Red-2")).is_err());
        t.push(1, c("Red-2")).unwrap();
        assert!(t.push(2, c("Red-2")).is_err());
    }
}
