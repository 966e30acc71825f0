use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const DECK_SIZE: usize = 60;
pub const NUM_SUITS: usize = 4;
pub const NUM_RANKS: usize = 13;
pub const MIN_RANK: u8 = 2;
pub const MAX_RANK: u8 = 14;

const FIRST_WIZARD: u8 = 52;
const FIRST_JESTER: u8 = 56;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Suit {
    Red = 0,
    Yellow = 1,
    Green = 2,
    Blue = 3,
}

pub const SUITS: [Suit; NUM_SUITS] = [Suit::Red, Suit::Yellow, Suit::Green, Suit::Blue];

impl Suit {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Suit> {
        SUITS.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Suit::Red => "Red",
            Suit::Yellow => "Yellow",
            Suit::Green => "Green",
            Suit::Blue => "Blue",
        }
    }
}

impl fmt::Display for Suit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum CardKind {
    Standard { suit: Suit, rank: u8 },
    Wizard(u8),
    Jester(u8),
}

/// One of the 60 cards, stored as its canonical index.
///
/// Indices 0..52 are the standard cards, suit-major with ranks ascending
/// (Red-2 is 0, Red-14 is 12, Yellow-2 is 13, ...). Wizards occupy 52..56
/// and jesters 56..60.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Card(u8);

impl Card {
    pub fn from_index(index: usize) -> Option<Card> {
        (index < DECK_SIZE).then_some(Card(index as u8))
    }

    pub fn standard(suit: Suit, rank: u8) -> Card {
        assert!((MIN_RANK..=MAX_RANK).contains(&rank), "rank {rank} out of range");
        Card((suit.index() * NUM_RANKS) as u8 + rank - MIN_RANK)
    }

    pub fn wizard(i: u8) -> Card {
        assert!(i < 4);
        Card(FIRST_WIZARD + i)
    }

    pub fn jester(i: u8) -> Card {
        assert!(i < 4);
        Card(FIRST_JESTER + i)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn kind(self) -> CardKind {
        match self.0 {
            i if i < FIRST_WIZARD => CardKind::Standard {
                suit: SUITS[(i / NUM_RANKS as u8) as usize],
                rank: i % NUM_RANKS as u8 + MIN_RANK,
            },
            i if i < FIRST_JESTER => CardKind::Wizard(i - FIRST_WIZARD),
            i => CardKind::Jester(i - FIRST_JESTER),
        }
    }

    pub fn suit(self) -> Option<Suit> {
        match self.kind() {
            CardKind::Standard { suit, .. } => Some(suit),
            _ => None,
        }
    }

    pub fn rank(self) -> Option<u8> {
        match self.kind() {
            CardKind::Standard { rank, .. } => Some(rank),
            _ => None,
        }
    }

    pub fn is_wizard(self) -> bool {
        (FIRST_WIZARD..FIRST_JESTER).contains(&self.0)
    }

    pub fn is_jester(self) -> bool {
        self.0 >= FIRST_JESTER
    }

    pub fn is_special(self) -> bool {
        self.0 >= FIRST_WIZARD
    }
}

impl fmt::Display for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            CardKind::Standard { suit, rank } => write!(f, "{suit}-{rank}"),
            CardKind::Wizard(i) => write!(f, "Wizard{i}"),
            CardKind::Jester(i) => write!(f, "Jester{i}"),
        }
    }
}

impl fmt::Debug for Card {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Card {
    type Err = Error;

    /// Parses the `Display` form: `Red-9`, `Wizard0`, `Jester3`.
    fn from_str(s: &str) -> Result<Card> {
        let bad = || Error::Invalid(format!("cannot parse card `{s}`"));
        if let Some(i) = s.strip_prefix("Wizard") {
            let i: u8 = i.parse().map_err(|_| bad())?;
            return (i < 4).then(|| Card::wizard(i)).ok_or_else(bad);
        }
        if let Some(i) = s.strip_prefix("Jester") {
            let i: u8 = i.parse().map_err(|_| bad())?;
            return (i < 4).then(|| Card::jester(i)).ok_or_else(bad);
        }
        let (suit, rank) = s.split_once('-').ok_or_else(bad)?;
        let suit = SUITS.into_iter().find(|x| x.name() == suit).ok_or_else(bad)?;
        let rank: u8 = rank.parse().map_err(|_| bad())?;
        if !(MIN_RANK..=MAX_RANK).contains(&rank) {
            return Err(bad());
        }
        Ok(Card::standard(suit, rank))
    }
}

/// All 60 cards in canonical index order.
pub fn build_deck() -> Vec<Card> {
    (0..DECK_SIZE as u8).map(Card).collect()
}

/// Set of cards as a 60-bit mask over canonical indices.
#[derive(Copy, Clone, Default, PartialEq, Eq, Hash)]
pub struct CardSet(u64);

impl CardSet {
    pub const EMPTY: CardSet = CardSet(0);
    pub const FULL: CardSet = CardSet((1u64 << DECK_SIZE) - 1);
    pub const SPECIALS: CardSet = CardSet(((1u64 << 8) - 1) << FIRST_WIZARD);

    pub fn from_bits(bits: u64) -> CardSet {
        CardSet(bits & Self::FULL.0)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn of_suit(suit: Suit) -> CardSet {
        CardSet(((1u64 << NUM_RANKS) - 1) << (suit.index() * NUM_RANKS))
    }

    pub fn contains(self, card: Card) -> bool {
        self.0 & (1 << card.0) != 0
    }

    pub fn insert(&mut self, card: Card) -> bool {
        let fresh = !self.contains(card);
        self.0 |= 1 << card.0;
        fresh
    }

    pub fn remove(&mut self, card: Card) -> bool {
        let present = self.contains(card);
        self.0 &= !(1 << card.0);
        present
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: CardSet) -> CardSet {
        CardSet(self.0 | other.0)
    }

    pub fn intersection(self, other: CardSet) -> CardSet {
        CardSet(self.0 & other.0)
    }

    pub fn difference(self, other: CardSet) -> CardSet {
        CardSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: CardSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Lowest-index card, if any.
    pub fn first(self) -> Option<Card> {
        (self.0 != 0).then(|| Card(self.0.trailing_zeros() as u8))
    }

    pub fn iter(self) -> CardSetIter {
        CardSetIter(self.0)
    }
}

impl FromIterator<Card> for CardSet {
    fn from_iter<I: IntoIterator<Item = Card>>(iter: I) -> Self {
        let mut set = CardSet::EMPTY;
        for card in iter {
            set.insert(card);
        }
        set
    }
}

impl IntoIterator for CardSet {
    type Item = Card;
    type IntoIter = CardSetIter;

    fn into_iter(self) -> CardSetIter {
        self.iter()
    }
}

impl fmt::Debug for CardSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Iterates a [`CardSet`] in ascending index order.
pub struct CardSetIter(u64);

impl Iterator for CardSetIter {
    type Item = Card;

    fn next(&mut self) -> Option<Card> {
        if self.0 == 0 {
            return None;
        }
        let i = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(Card(i as u8))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.0.count_ones() as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for CardSetIter {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deck_has_sixty_distinct_cards() {
        let deck = build_deck();
        assert_eq!(deck.len(), 60);
        assert_eq!(deck.iter().filter(|c| c.is_wizard()).count(), 4);
        assert_eq!(deck.iter().filter(|c| c.is_jester()).count(), 4);
        let set: CardSet = deck.iter().copied().collect();
        assert_eq!(set, CardSet::FULL);
        assert_eq!(deck, build_deck());
        for (i, c) in deck.iter().enumerate() {
            assert_eq!(c.index(), i);
        }
    }

    #[test]
    fn index_card_bijection() {
        for i in 0..DECK_SIZE {
            let card = Card::from_index(i).unwrap();
            let round_trip = match card.kind() {
                CardKind::Standard { suit, rank } => Card::standard(suit, rank),
                CardKind::Wizard(w) => Card::wizard(w),
                CardKind::Jester(j) => Card::jester(j),
            };
            assert_eq!(round_trip, card);
            assert_eq!(card.to_string().parse::<Card>().unwrap(), card);
        }
        assert!(Card::from_index(60).is_none());
    }

    #[test]
    fn suit_masks_partition_standard_cards() {
        let mut all = CardSet::SPECIALS;
        for s in SUITS {
            let m = CardSet::of_suit(s);
            assert_eq!(m.len(), 13);
            assert!(m.iter().all(|c| c.suit() == Some(s)));
            all = all.union(m);
        }
        assert_eq!(all, CardSet::FULL);
    }
}
