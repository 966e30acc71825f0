use super::card::{build_deck, Card, CardSet, DECK_SIZE};
use super::rules::{admissible_unchecked, lead_suit, trick_winner, Trick, Trump};
use super::{Seat, MAX_ROUND, NUM_PLAYERS};
use crate::error::{Error, Result};
use crate::rng::{shuffle, WizRng};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Dealing,
    Bidding,
    Playing,
    Evaluation,
}

/// Complete ground truth of one round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundState {
    round: u8,
    first_bidder: Seat,
    hands: [CardSet; NUM_PLAYERS],
    undealt: CardSet,
    trump_card: Option<Card>,
    trump: Trump,
    bids: [Option<u8>; NUM_PLAYERS],
    tricks_taken: [u8; NUM_PLAYERS],
    current_trick: Trick,
    completed_tricks: Vec<Trick>,
    phase: Phase,
}

fn check_round(round: u8) -> Result<()> {
    if (1..=MAX_ROUND).contains(&round) {
        Ok(())
    } else {
        Err(Error::RoundOutOfRange(round))
    }
}

fn check_seat(seat: Seat) -> Result<()> {
    if seat < NUM_PLAYERS {
        Ok(())
    } else {
        Err(Error::SeatOutOfRange(seat))
    }
}

/// Shuffles a fresh deck and deals round `round`.
///
/// Seat `first_bidder + k` receives the k-th block of `round` cards of the
/// shuffled deck; below round 15 the next card is revealed as trump.
pub fn deal(rng: &mut WizRng, round: u8, first_bidder: Seat) -> Result<RoundState> {
    check_round(round)?;
    check_seat(first_bidder)?;
    let mut deck = build_deck();
    shuffle(rng, &mut deck);
    let r = round as usize;
    let mut hands = [CardSet::EMPTY; NUM_PLAYERS];
    for k in 0..NUM_PLAYERS {
        let seat = (first_bidder + k) % NUM_PLAYERS;
        hands[seat] = deck[k * r..(k + 1) * r].iter().copied().collect();
    }
    let trump_card = (round < MAX_ROUND).then(|| deck[NUM_PLAYERS * r]);
    RoundState::from_deal(round, first_bidder, hands, trump_card)
}

impl RoundState {
    /// State at the start of bidding for explicitly chosen hands.
    pub fn from_deal(
        round: u8,
        first_bidder: Seat,
        hands: [CardSet; NUM_PLAYERS],
        trump_card: Option<Card>,
    ) -> Result<RoundState> {
        check_round(round)?;
        check_seat(first_bidder)?;
        let mut seen = CardSet::EMPTY;
        for hand in &hands {
            if hand.len() != round as usize {
                return Err(Error::Inconsistent(format!(
                    "hand has {} cards in round {round}",
                    hand.len()
                )));
            }
            if !seen.intersection(*hand).is_empty() {
                return Err(Error::Inconsistent("a card is dealt twice".into()));
            }
            seen = seen.union(*hand);
        }
        match trump_card {
            Some(card) if round == MAX_ROUND => {
                return Err(Error::Inconsistent(format!("round 15 has no trump card, got {card}")))
            }
            Some(card) if seen.contains(card) => {
                return Err(Error::Inconsistent(format!("trump card {card} is also in a hand")))
            }
            None if round < MAX_ROUND => {
                return Err(Error::Inconsistent(format!("round {round} needs a trump card")))
            }
            _ => {}
        }
        if let Some(card) = trump_card {
            seen.insert(card);
        }
        Ok(RoundState {
            round,
            first_bidder,
            hands,
            undealt: CardSet::FULL.difference(seen),
            trump_card,
            trump: Trump::from_revealed(trump_card),
            bids: [None; NUM_PLAYERS],
            tricks_taken: [0; NUM_PLAYERS],
            current_trick: Trick::new(first_bidder),
            completed_tricks: Vec::with_capacity(round as usize),
            phase: Phase::Bidding,
        })
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn first_bidder(&self) -> Seat {
        self.first_bidder
    }

    pub fn hand(&self, seat: Seat) -> CardSet {
        self.hands[seat]
    }

    pub fn hands(&self) -> &[CardSet; NUM_PLAYERS] {
        &self.hands
    }

    /// Cards never dealt, excluding the revealed trump card.
    pub fn undealt(&self) -> CardSet {
        self.undealt
    }

    pub fn trump_card(&self) -> Option<Card> {
        self.trump_card
    }

    pub fn trump(&self) -> Trump {
        self.trump
    }

    pub fn bids(&self) -> &[Option<u8>; NUM_PLAYERS] {
        &self.bids
    }

    pub fn bid(&self, seat: Seat) -> Option<u8> {
        self.bids[seat]
    }

    pub fn tricks_taken(&self) -> &[u8; NUM_PLAYERS] {
        &self.tricks_taken
    }

    pub fn current_trick(&self) -> &Trick {
        &self.current_trick
    }

    pub fn completed_tricks(&self) -> &[Trick] {
        &self.completed_tricks
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    /// Position of `seat` in the bidding order (0 = first bidder).
    pub fn bidding_position(&self, seat: Seat) -> usize {
        (seat + NUM_PLAYERS - self.first_bidder) % NUM_PLAYERS
    }

    /// Seat whose decision is pending, if bidding or playing.
    pub fn to_act(&self) -> Option<Seat> {
        match self.phase {
            Phase::Bidding => {
                let placed = self.bids.iter().filter(|b| b.is_some()).count();
                Some((self.first_bidder + placed) % NUM_PLAYERS)
            }
            Phase::Playing => Some(self.current_trick.next_player()),
            _ => None,
        }
    }

    /// Every card played so far this round (completed tricks and current trick).
    pub fn played_cards(&self) -> CardSet {
        self.completed_tricks
            .iter()
            .chain(std::iter::once(&self.current_trick))
            .fold(CardSet::EMPTY, |acc, t| acc.union(t.card_set()))
    }

    /// All plays so far in chronological order.
    pub fn play_history(&self) -> impl Iterator<Item = super::Play> + '_ {
        self.completed_tricks
            .iter()
            .chain(std::iter::once(&self.current_trick))
            .flat_map(|t| t.plays().iter().copied())
    }

    pub fn admissible(&self, seat: Seat) -> CardSet {
        admissible_unchecked(self.hands[seat], lead_suit(&self.current_trick))
    }

    fn expect_turn(&self, phase: Phase, seat: Seat) -> Result<()> {
        if self.phase != phase {
            return Err(Error::WrongPhase { expected: phase, actual: self.phase });
        }
        check_seat(seat)?;
        let expected = self.to_act().expect("bidding or playing");
        if seat != expected {
            return Err(Error::OutOfTurn { seat, expected });
        }
        Ok(())
    }

    pub fn step_bid(&mut self, seat: Seat, bid: u8) -> Result<()> {
        self.expect_turn(Phase::Bidding, seat)?;
        if bid > self.round {
            return Err(Error::InvalidBid { bid: bid as usize, round: self.round });
        }
        self.bids[seat] = Some(bid);
        if self.bids.iter().all(Option::is_some) {
            self.phase = Phase::Playing;
        }
        Ok(())
    }

    pub fn step_play(&mut self, seat: Seat, card: Card) -> Result<()> {
        self.expect_turn(Phase::Playing, seat)?;
        if !self.admissible(seat).contains(card) {
            return Err(Error::InadmissibleCard { seat, card });
        }
        self.hands[seat].remove(card);
        self.current_trick.push(seat, card)?;
        if self.current_trick.is_complete() {
            let winner = trick_winner(&self.current_trick, self.trump)?;
            self.tricks_taken[winner] += 1;
            let done = std::mem::replace(&mut self.current_trick, Trick::new(winner));
            self.completed_tricks.push(done);
            if self.completed_tricks.len() == self.round as usize {
                self.phase = Phase::Evaluation;
            }
        }
        Ok(())
    }

    /// Points per seat; only meaningful once the round is over.
    pub fn points(&self) -> Option<[i32; NUM_PLAYERS]> {
        if self.phase != Phase::Evaluation {
            return None;
        }
        let mut points = [0; NUM_PLAYERS];
        for (seat, p) in points.iter_mut().enumerate() {
            *p = super::score(self.bids[seat]?, self.tricks_taken[seat]);
        }
        Some(points)
    }

    /// Same public state with the hidden hands and undealt cards replaced.
    ///
    /// The replacement must keep every hand size, leave played cards and the
    /// trump card untouched, and cover all 60 cards exactly once.
    pub fn with_hidden(&self, hands: [CardSet; NUM_PLAYERS], undealt: CardSet) -> Result<RoundState> {
        let mut seen = self.played_cards();
        if let Some(t) = self.trump_card {
            seen.insert(t);
        }
        for (seat, hand) in hands.iter().enumerate() {
            if hand.len() != self.hands[seat].len() {
                return Err(Error::Inconsistent(format!(
                    "seat {seat} needs {} cards, got {}",
                    self.hands[seat].len(),
                    hand.len()
                )));
            }
        }
        for part in hands.iter().chain(std::iter::once(&undealt)) {
            if !seen.intersection(*part).is_empty() {
                return Err(Error::Inconsistent("card assigned to two locations".into()));
            }
            seen = seen.union(*part);
        }
        if seen != CardSet::FULL {
            return Err(Error::Inconsistent(format!(
                "{} cards have no location",
                DECK_SIZE - seen.len()
            )));
        }
        let mut state = self.clone();
        state.hands = hands;
        state.undealt = undealt;
        Ok(state)
    }

    /// Checks card conservation and trick bookkeeping.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = CardSet::EMPTY;
        let mut count = 0;
        let mut add = |set: CardSet| {
            count += set.len();
            seen = seen.union(set);
        };
        self.hands.iter().for_each(|h| add(*h));
        add(self.undealt);
        add(self.trump_card.into_iter().collect());
        add(self.current_trick.card_set());
        self.completed_tricks.iter().for_each(|t| add(t.card_set()));
        if count != DECK_SIZE || seen != CardSet::FULL {
            return Err(Error::Inconsistent("card conservation violated".into()));
        }
        let taken: usize = self.tricks_taken.iter().map(|&t| t as usize).sum();
        if taken != self.completed_tricks.len() {
            return Err(Error::Inconsistent("tricks taken do not sum to completed tricks".into()));
        }
        if self.phase == Phase::Playing {
            let in_hands: usize = self.hands.iter().map(|h| h.len()).sum();
            let total = in_hands + self.current_trick.len() + 4 * self.completed_tricks.len();
            if total != 4 * self.round as usize {
                return Err(Error::Inconsistent("cards in play do not add up to 4r".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Suit;
    use crate::rng::seeded;

    fn play_out_first_admissible(state: &mut RoundState) {
        while let Some(seat) = state.to_act() {
            match state.phase() {
                Phase::Bidding => state.step_bid(seat, 0).unwrap(),
                _ => {
                    let card = state.admissible(seat).first().unwrap();
                    state.step_play(seat, card).unwrap();
                }
            }
            state.check_invariants().unwrap();
        }
    }

    #[test]
    fn deal_last_round_uses_all_cards() {
        let s = deal(&mut seeded(3), 15, 0).unwrap();
        assert_eq!(s.trump(), Trump::NoTrump);
        assert!(s.trump_card().is_none());
        assert!(s.undealt().is_empty());
        assert!(s.hands().iter().all(|h| h.len() == 15));
        assert_eq!(s.phase(), Phase::Bidding);
        s.check_invariants().unwrap();
    }

    #[test]
    fn deal_first_round_reveals_trump() {
        let s = deal(&mut seeded(3), 1, 2).unwrap();
        assert!(s.trump_card().is_some());
        assert_eq!(s.undealt().len(), 55);
        assert_eq!(s.hands().iter().map(|h| h.len()).sum::<usize>(), 4);
        assert_eq!(s.to_act(), Some(2));
    }

    #[test]
    fn deal_rejects_bad_round() {
        assert!(matches!(deal(&mut seeded(0), 0, 0), Err(Error::RoundOutOfRange(0))));
        assert!(matches!(deal(&mut seeded(0), 16, 0), Err(Error::RoundOutOfRange(16))));
    }

    #[test]
    fn special_trump_card_means_no_trump() {
        let hands = [
            ["Red-2", "Red-3", "Red-4"],
            ["Blue-2", "Blue-3", "Blue-4"],
            ["Green-2", "Green-3", "Green-4"],
            ["Yellow-2", "Yellow-3", "Yellow-4"],
        ]
        .map(|h| h.iter().map(|s| s.parse::<Card>().unwrap()).collect::<CardSet>());
        let s = RoundState::from_deal(3, 0, hands, Some(Card::jester(1))).unwrap();
        assert_eq!(s.trump(), Trump::NoTrump);
        let s = RoundState::from_deal(3, 0, hands, Some(Card::wizard(0))).unwrap();
        assert_eq!(s.trump(), Trump::NoTrump);
        let s = RoundState::from_deal(3, 0, hands, Some(Card::standard(Suit::Blue, 9))).unwrap();
        assert_eq!(s.trump(), Trump::Suit(Suit::Blue));
    }

    #[test]
    fn full_round_reaches_evaluation() {
        for seed in 0..50 {
            let r = (seed % 15 + 1) as u8;
            let mut s = deal(&mut seeded(seed), r, (seed % 4) as usize).unwrap();
            play_out_first_admissible(&mut s);
            assert_eq!(s.phase(), Phase::Evaluation);
            assert_eq!(s.tricks_taken().iter().map(|&t| t as u32).sum::<u32>(), r as u32);
            assert!(s.hands().iter().all(|h| h.is_empty()));
            assert!(s.points().is_some());
        }
    }

    #[test]
    fn winner_leads_next_trick() {
        let mut s = deal(&mut seeded(11), 5, 1).unwrap();
        for _ in 0..4 {
            let seat = s.to_act().unwrap();
            s.step_bid(seat, 1).unwrap();
        }
        for _ in 0..4 {
            let seat = s.to_act().unwrap();
            s.step_play(seat, s.admissible(seat).first().unwrap()).unwrap();
        }
        let first = &s.completed_tricks()[0];
        let winner = trick_winner(first, s.trump()).unwrap();
        assert_eq!(s.current_trick().leader(), winner);
        assert_eq!(s.to_act(), Some(winner));
    }

    #[test]
    fn inadmissible_and_out_of_turn_rejected() {
        let hands = [["Red-2", "Blue-5"], ["Red-3", "Blue-6"], ["Red-4", "Blue-7"], ["Red-5", "Blue-8"]]
            .map(|h| h.iter().map(|s| s.parse::<Card>().unwrap()).collect::<CardSet>());
        let mut s = RoundState::from_deal(2, 0, hands, Some(Card::jester(0))).unwrap();
        assert!(matches!(s.step_play(0, "Red-2".parse().unwrap()), Err(Error::WrongPhase { .. })));
        assert!(matches!(s.step_bid(1, 0), Err(Error::OutOfTurn { .. })));
        assert!(matches!(s.step_bid(0, 3), Err(Error::InvalidBid { .. })));
        for seat in 0..4 {
            s.step_bid(seat, 1).unwrap();
        }
        s.step_play(0, "Red-2".parse().unwrap()).unwrap();
        assert!(matches!(
            s.step_play(1, "Blue-6".parse().unwrap()),
            Err(Error::InadmissibleCard { .. })
        ));
    }
}
