use crate::error::{Error, Result};
use crate::game::{Card, CardSet, RoundState, Seat, DECK_SIZE, NUM_PLAYERS};

pub const NUM_LOCATIONS: usize = 1 + 2 * NUM_PLAYERS;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Location {
    Deck,
    Hand(Seat),
    Played(Seat),
}

impl Location {
    /// Column in the 9-wide table: deck, hands 1..=4, played 5..=8.
    pub fn column(self) -> usize {
        match self {
            Location::Deck => 0,
            Location::Hand(p) => 1 + p,
            Location::Played(p) => 1 + NUM_PLAYERS + p,
        }
    }

    pub fn from_column(column: usize) -> Option<Location> {
        match column {
            0 => Some(Location::Deck),
            c if c <= NUM_PLAYERS => Some(Location::Hand(c - 1)),
            c if c < NUM_LOCATIONS => Some(Location::Played(c - 1 - NUM_PLAYERS)),
            _ => None,
        }
    }

    fn rotate(self, observer: Seat) -> Location {
        let rel = |p: Seat| (p + NUM_PLAYERS - observer) % NUM_PLAYERS;
        match self {
            Location::Deck => Location::Deck,
            Location::Hand(p) => Location::Hand(rel(p)),
            Location::Played(p) => Location::Played(rel(p)),
        }
    }
}

/// One location per card, in canonical card order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CardLocationTable {
    locations: [Location; DECK_SIZE],
}

impl CardLocationTable {
    pub fn new(locations: [Location; DECK_SIZE]) -> Self {
        CardLocationTable { locations }
    }

    pub fn location(&self, card: Card) -> Location {
        self.locations[card.index()]
    }

    pub fn set(&mut self, card: Card, location: Location) {
        self.locations[card.index()] = location;
    }

    pub fn locations(&self) -> &[Location; DECK_SIZE] {
        &self.locations
    }

    pub fn column_counts(&self) -> [usize; NUM_LOCATIONS] {
        let mut counts = [0; NUM_LOCATIONS];
        for l in &self.locations {
            counts[l.column()] += 1;
        }
        counts
    }

    pub fn cards_at(&self, location: Location) -> CardSet {
        (0..DECK_SIZE)
            .filter(|&i| self.locations[i] == location)
            .map(|i| Card::from_index(i).expect("valid index"))
            .collect()
    }

    pub fn hands(&self) -> [CardSet; NUM_PLAYERS] {
        std::array::from_fn(|p| self.cards_at(Location::Hand(p)))
    }

    /// `60 × 9` row-major one-hot matrix.
    pub fn to_one_hot(&self) -> Vec<f32> {
        let mut m = vec![0.0; DECK_SIZE * NUM_LOCATIONS];
        for (i, l) in self.locations.iter().enumerate() {
            m[i * NUM_LOCATIONS + l.column()] = 1.0;
        }
        m
    }

    /// Same table with seats renumbered so that `observer` becomes seat 0.
    pub fn relative_to(&self, observer: Seat) -> CardLocationTable {
        CardLocationTable { locations: self.locations.map(|l| l.rotate(observer)) }
    }

    /// Inverse of [`Self::relative_to`].
    pub fn absolute_from(&self, observer: Seat) -> CardLocationTable {
        self.relative_to((NUM_PLAYERS - observer) % NUM_PLAYERS)
    }
}

/// Exact card locations of a state; the revealed trump card sits in the deck.
pub fn truth_table(state: &RoundState) -> CardLocationTable {
    let mut locations = [Location::Deck; DECK_SIZE];
    for (p, hand) in state.hands().iter().enumerate() {
        for c in *hand {
            locations[c.index()] = Location::Hand(p);
        }
    }
    for play in state.play_history() {
        locations[play.card.index()] = Location::Played(play.player);
    }
    CardLocationTable { locations }
}

/// What one seat knows about the card locations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Knowledge {
    pub observer: Seat,
    pub own_hand: CardSet,
    pub trump_card: Option<Card>,
    pub played_by: [CardSet; NUM_PLAYERS],
    pub hand_sizes: [usize; NUM_PLAYERS],
}

impl Knowledge {
    pub fn from_state(state: &RoundState, observer: Seat) -> Knowledge {
        let mut played_by = [CardSet::EMPTY; NUM_PLAYERS];
        for play in state.play_history() {
            played_by[play.player].insert(play.card);
        }
        Knowledge {
            observer,
            own_hand: state.hand(observer),
            trump_card: state.trump_card(),
            played_by,
            hand_sizes: std::array::from_fn(|p| state.hand(p).len()),
        }
    }

    pub fn known(&self) -> CardSet {
        let mut k = self.played_by.iter().fold(self.own_hand, |acc, s| acc.union(*s));
        if let Some(t) = self.trump_card {
            k.insert(t);
        }
        k
    }

    /// Cards whose location the observer cannot see.
    pub fn unknown(&self) -> CardSet {
        CardSet::FULL.difference(self.known())
    }

    pub fn opponents(&self) -> impl Iterator<Item = Seat> + '_ {
        (1..NUM_PLAYERS).map(move |k| (self.observer + k) % NUM_PLAYERS)
    }

    /// Unknown cards that must end up in the deck.
    pub fn deck_capacity(&self) -> Result<usize> {
        self.check()?;
        let hidden: usize = self.opponents().map(|p| self.hand_sizes[p]).sum();
        Ok(self.unknown().len() - hidden)
    }

    pub fn check(&self) -> Result<()> {
        if self.observer >= NUM_PLAYERS {
            return Err(Error::SeatOutOfRange(self.observer));
        }
        if self.own_hand.len() != self.hand_sizes[self.observer] {
            return Err(Error::Inconsistent("own hand does not match its stated size".into()));
        }
        let mut seen = self.own_hand;
        for s in self.played_by.iter().chain(self.trump_card.map(|c| [c].into_iter().collect::<CardSet>()).iter()) {
            if !seen.intersection(*s).is_empty() {
                return Err(Error::Inconsistent("a known card has two locations".into()));
            }
            seen = seen.union(*s);
        }
        let hidden: usize = self.opponents().map(|p| self.hand_sizes[p]).sum();
        if hidden > self.unknown().len() {
            return Err(Error::Inconsistent(format!(
                "opponents hold {hidden} cards but only {} are unaccounted for",
                self.unknown().len()
            )));
        }
        Ok(())
    }

    /// Fixed rows: own hand, played cards and the trump card.
    pub fn fixed_table(&self) -> CardLocationTable {
        let mut locations = [Location::Deck; DECK_SIZE];
        for c in self.own_hand {
            locations[c.index()] = Location::Hand(self.observer);
        }
        for (p, set) in self.played_by.iter().enumerate() {
            for c in *set {
                locations[c.index()] = Location::Played(p);
            }
        }
        CardLocationTable { locations }
    }

    /// Whether `table` agrees with everything the observer knows.
    pub fn verify(&self, table: &CardLocationTable) -> Result<()> {
        let fixed = self.fixed_table();
        for c in self.known() {
            if table.location(c) != fixed.location(c) {
                return Err(Error::Inconsistent(format!("known card {c} was moved")));
            }
        }
        let counts = table.column_counts();
        for p in 0..NUM_PLAYERS {
            if counts[Location::Hand(p).column()] != self.hand_sizes[p] {
                return Err(Error::Inconsistent(format!(
                    "seat {p} holds {} cards in the table, {} in play",
                    counts[Location::Hand(p).column()],
                    self.hand_sizes[p]
                )));
            }
            if counts[Location::Played(p).column()] != self.played_by[p].len() {
                return Err(Error::Inconsistent(format!("seat {p} has extra played cards")));
            }
        }
        Ok(())
    }
}
