//! The two interleaved decision problems of a round, as seen by one seat.
//!
//! Bidding is a one-step problem; playing has one decision per card. Both
//! deliver a single reward, the seat's normalized round points, on their
//! terminal transition.
//!
//! Bidding vector (75 values):
//!
//! | offset | width | content                                       |
//! |--------|-------|-----------------------------------------------|
//! | 0      | 60    | own cards, multi-hot over canonical indices   |
//! | 60     | 4     | bidding position, one-hot                     |
//! | 64     | 5     | trump suit, one-hot (index 4 = no trump)      |
//! | 69     | 6     | earlier bids: 3 × (present flag, bid / r)     |
//!
//! Playing vector (147 values) appends:
//!
//! | offset | width | content                                       |
//! |--------|-------|-----------------------------------------------|
//! | 75     | 1     | own bid / r                                   |
//! | 76     | 1     | tricks taken / r                              |
//! | 77     | 4     | position in the current trick, one-hot        |
//! | 81     | 5     | suit to follow, one-hot (index 4 = none)      |
//! | 86     | 61    | highest card in the trick (index 60 = none)   |
//!
//! Bid actions are `0..=r`; card actions are canonical card indices.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::game::{
    current_winner, lead_suit, normalize_reward, Card, CardSet, Phase, RoundState, Seat, Suit, Trump,
    DECK_SIZE, NUM_PLAYERS,
};
use crate::rng::WizRng;

pub const BID_OBS_DIM: usize = 75;
pub const PLAY_OBS_DIM: usize = 147;
pub const CARD_ACTIONS: usize = DECK_SIZE;

const OFF_POSITION: usize = 60;
const OFF_TRUMP: usize = 64;
const OFF_PREV_BIDS: usize = 69;
const OFF_OWN_BID: usize = 75;
const OFF_TAKEN: usize = 76;
const OFF_TRICK_POS: usize = 77;
const OFF_FOLLOW: usize = 81;
const OFF_HIGHEST: usize = 86;

/// Number of bid actions in round `round`.
pub fn bid_actions(round: u8) -> usize {
    round as usize + 1
}

/// Set of admissible actions, at most 64 wide.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct ActionMask {
    bits: u64,
    width: u8,
}

impl ActionMask {
    pub fn new(bits: u64, width: usize) -> ActionMask {
        assert!(width <= 64);
        let keep = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        ActionMask { bits: bits & keep, width: width as u8 }
    }

    pub fn all(width: usize) -> ActionMask {
        ActionMask::new(u64::MAX, width)
    }

    pub fn from_cards(cards: CardSet) -> ActionMask {
        ActionMask::new(cards.bits(), CARD_ACTIONS)
    }

    pub fn from_slice(allowed: &[bool]) -> ActionMask {
        let bits = allowed.iter().enumerate().fold(0u64, |b, (i, &a)| b | ((a as u64) << i));
        ActionMask::new(bits, allowed.len())
    }

    pub fn width(self) -> usize {
        self.width as usize
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn allows(self, action: usize) -> bool {
        action < self.width() && self.bits & (1 << action) != 0
    }

    pub fn count(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.bits;
        std::iter::from_fn(move || {
            (bits != 0).then(|| {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                i
            })
        })
    }

    /// The `k`-th admissible action in ascending order.
    pub fn nth(self, k: usize) -> Option<usize> {
        self.iter().nth(k)
    }

    pub fn to_vec(self) -> Vec<f32> {
        (0..self.width()).map(|i| if self.allows(i) { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiddingObservation {
    pub round: u8,
    pub own_cards: CardSet,
    pub position: usize,
    pub trump: Trump,
    /// Bids of the seats before this one in bidding order.
    pub previous_bids: [Option<u8>; 3],
}

impl BiddingObservation {
    pub fn write(&self, out: &mut [f32]) {
        assert!(out.len() >= BID_OBS_DIM);
        out[..BID_OBS_DIM].fill(0.0);
        for card in self.own_cards {
            out[card.index()] = 1.0;
        }
        out[OFF_POSITION + self.position] = 1.0;
        out[OFF_TRUMP + self.trump.index()] = 1.0;
        for (slot, bid) in self.previous_bids.iter().enumerate() {
            if let Some(b) = bid {
                out[OFF_PREV_BIDS + 2 * slot] = 1.0;
                out[OFF_PREV_BIDS + 2 * slot + 1] = *b as f32 / self.round as f32;
            }
        }
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = vec![0.0; BID_OBS_DIM];
        self.write(&mut v);
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlayingObservation {
    pub bidding: BiddingObservation,
    pub own_bid: u8,
    pub tricks_taken: u8,
    pub trick_position: usize,
    pub suit_to_follow: Option<Suit>,
    pub highest_card: Option<Card>,
}

impl PlayingObservation {
    pub fn write(&self, out: &mut [f32]) {
        assert!(out.len() >= PLAY_OBS_DIM);
        self.bidding.write(out);
        out[BID_OBS_DIM..PLAY_OBS_DIM].fill(0.0);
        let r = self.bidding.round as f32;
        out[OFF_OWN_BID] = self.own_bid as f32 / r;
        out[OFF_TAKEN] = self.tricks_taken as f32 / r;
        out[OFF_TRICK_POS + self.trick_position] = 1.0;
        out[OFF_FOLLOW + self.suit_to_follow.map_or(4, Suit::index)] = 1.0;
        out[OFF_HIGHEST + self.highest_card.map_or(DECK_SIZE, Card::index)] = 1.0;
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = vec![0.0; PLAY_OBS_DIM];
        self.write(&mut v);
        v
    }
}

fn expect_turn(state: &RoundState, phase: Phase, seat: Seat) -> Result<()> {
    if state.phase() != phase {
        return Err(Error::WrongPhase { expected: phase, actual: state.phase() });
    }
    let expected = state.to_act().expect("active phase");
    if seat != expected {
        return Err(Error::OutOfTurn { seat, expected });
    }
    Ok(())
}

fn bidding_fields(state: &RoundState, seat: Seat) -> BiddingObservation {
    let position = state.bidding_position(seat);
    let mut previous_bids = [None; 3];
    for (slot, prev) in previous_bids.iter_mut().enumerate().take(position) {
        *prev = state.bid((state.first_bidder() + slot) % NUM_PLAYERS);
    }
    BiddingObservation {
        round: state.round(),
        own_cards: state.hand(seat),
        position,
        trump: state.trump(),
        previous_bids,
    }
}

pub fn encode_bidding(state: &RoundState, seat: Seat) -> Result<(BiddingObservation, ActionMask)> {
    expect_turn(state, Phase::Bidding, seat)?;
    Ok((bidding_fields(state, seat), ActionMask::all(bid_actions(state.round()))))
}

pub fn encode_playing(state: &RoundState, seat: Seat) -> Result<(PlayingObservation, ActionMask)> {
    expect_turn(state, Phase::Playing, seat)?;
    Ok(playing_view(state, seat))
}

/// Playing encoding without the turn check (used when replaying histories).
pub(crate) fn playing_view(state: &RoundState, seat: Seat) -> (PlayingObservation, ActionMask) {
    let trick = state.current_trick();
    let obs = PlayingObservation {
        bidding: bidding_fields(state, seat),
        own_bid: state.bid(seat).unwrap_or(0),
        tricks_taken: state.tricks_taken()[seat],
        trick_position: trick.len().min(NUM_PLAYERS - 1),
        suit_to_follow: lead_suit(trick),
        highest_card: current_winner(trick, state.trump()).map(|p| p.card),
    };
    (obs, ActionMask::from_cards(state.admissible(seat)))
}

/// What a policy is asked to decide.
pub struct Decision<'a> {
    /// Ground truth of the round. Policies must restrict themselves to what
    /// `seat` can observe; only the ground-truth sampler reads hidden hands.
    pub state: &'a RoundState,
    pub seat: Seat,
    pub phase: Phase,
    /// Network input: the base encoding plus any policy augmentation.
    pub features: &'a [f32],
    pub mask: ActionMask,
}

/// A decision maker for one seat.
pub trait Policy {
    fn begin_round(&mut self, _state: &RoundState, _seat: Seat) {}

    /// Extends the playing input before a decision (history augmentation).
    fn augment_playing(&mut self, _features: &mut Vec<f32>) {}

    fn act(&mut self, decision: &Decision<'_>, rng: &mut WizRng) -> usize;

    /// Called for every card played this round, by any seat.
    fn observe_play(&mut self, _state: &RoundState, _player: Seat, _card: Card) {}
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn begin_round(&mut self, state: &RoundState, seat: Seat) {
        (**self).begin_round(state, seat)
    }

    fn augment_playing(&mut self, features: &mut Vec<f32>) {
        (**self).augment_playing(features)
    }

    fn act(&mut self, decision: &Decision<'_>, rng: &mut WizRng) -> usize {
        (**self).act(decision, rng)
    }

    fn observe_play(&mut self, state: &RoundState, player: Seat, card: Card) {
        (**self).observe_play(state, player, card)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f32>,
    pub action: usize,
    pub reward: f32,
    pub next_observation: Option<Vec<f32>>,
    pub next_mask: Option<ActionMask>,
    pub terminal: bool,
}

#[derive(Clone, Debug, Default)]
pub struct RoundRecord {
    /// Bidding transitions as (seat, transition), in bidding order.
    pub bidding: Vec<(Seat, Transition)>,
    /// Playing transitions as (seat, transition), in decision order.
    pub playing: Vec<(Seat, Transition)>,
}

#[derive(Clone, Debug)]
pub struct RoundOutcome {
    pub round: u8,
    pub first_bidder: Seat,
    pub bids: [u8; NUM_PLAYERS],
    pub tricks: [u8; NUM_PLAYERS],
    pub points: [i32; NUM_PLAYERS],
    pub rewards: [f32; NUM_PLAYERS],
    pub record: Option<RoundRecord>,
    /// Final ground truth, including the full play history.
    pub state: RoundState,
}

impl RoundOutcome {
    pub fn hit(&self, seat: Seat) -> bool {
        self.bids[seat] == self.tricks[seat]
    }
}

static DECISIONS: AtomicU64 = AtomicU64::new(0);
static REJECTED: AtomicU64 = AtomicU64::new(0);

/// Process-wide counts of (agent decisions, decisions rejected by the mask
/// check before reaching the rules engine).
pub fn action_audit() -> (u64, u64) {
    (DECISIONS.load(Ordering::Relaxed), REJECTED.load(Ordering::Relaxed))
}

fn audit(seat: Seat, action: usize, mask: ActionMask) -> Result<()> {
    DECISIONS.fetch_add(1, Ordering::Relaxed);
    if mask.allows(action) {
        Ok(())
    } else {
        REJECTED.fetch_add(1, Ordering::Relaxed);
        Err(Error::IllegalAction { seat, action })
    }
}

/// Plays one round from a fresh deal to evaluation.
///
/// With `record`, every decision is returned as a transition. Non-terminal
/// playing rewards are 0; the bidding transition and the last playing
/// transition of each seat carry the normalized round points.
pub fn run_round(
    agents: &mut [&mut dyn Policy],
    round: u8,
    first_bidder: Seat,
    rng: &mut WizRng,
    record: bool,
) -> Result<RoundOutcome> {
    let state = crate::game::deal(rng, round, first_bidder)?;
    play_round(agents, state, rng, record)
}

/// Plays a dealt round to the end; see [`run_round`].
pub fn play_round(
    agents: &mut [&mut dyn Policy],
    mut state: RoundState,
    rng: &mut WizRng,
    record: bool,
) -> Result<RoundOutcome> {
    if agents.len() != NUM_PLAYERS {
        return Err(Error::Invalid(format!("need 4 agents, got {}", agents.len())));
    }
    if state.phase() != Phase::Bidding {
        return Err(Error::WrongPhase { expected: Phase::Bidding, actual: state.phase() });
    }
    for (seat, agent) in agents.iter_mut().enumerate() {
        agent.begin_round(&state, seat);
    }
    let mut log = record.then(RoundRecord::default);
    // Index into `log.playing` of each seat's pending transition.
    let mut pending: [Option<usize>; NUM_PLAYERS] = [None; NUM_PLAYERS];
    let mut features = Vec::with_capacity(PLAY_OBS_DIM + 256);

    while let Some(seat) = state.to_act() {
        match state.phase() {
            Phase::Bidding => {
                let (obs, mask) = encode_bidding(&state, seat)?;
                features.clear();
                features.resize(BID_OBS_DIM, 0.0);
                obs.write(&mut features);
                let action = agents[seat].act(
                    &Decision { state: &state, seat, phase: Phase::Bidding, features: &features, mask },
                    rng,
                );
                audit(seat, action, mask)?;
                state.step_bid(seat, action as u8)?;
                if let Some(log) = log.as_mut() {
                    log.bidding.push((
                        seat,
                        Transition {
                            observation: features.clone(),
                            action,
                            reward: 0.0,
                            next_observation: None,
                            next_mask: None,
                            terminal: true,
                        },
                    ));
                }
            }
            Phase::Playing => {
                let (obs, mask) = encode_playing(&state, seat)?;
                features.clear();
                features.resize(PLAY_OBS_DIM, 0.0);
                obs.write(&mut features);
                agents[seat].augment_playing(&mut features);
                let action = agents[seat].act(
                    &Decision { state: &state, seat, phase: Phase::Playing, features: &features, mask },
                    rng,
                );
                audit(seat, action, mask)?;
                let card = Card::from_index(action).expect("mask is 60 wide");
                if let Some(log) = log.as_mut() {
                    if let Some(prev) = pending[seat] {
                        let t = &mut log.playing[prev].1;
                        t.next_observation = Some(features.clone());
                        t.next_mask = Some(mask);
                    }
                    pending[seat] = Some(log.playing.len());
                    log.playing.push((
                        seat,
                        Transition {
                            observation: features.clone(),
                            action,
                            reward: 0.0,
                            next_observation: None,
                            next_mask: None,
                            terminal: false,
                        },
                    ));
                }
                state.step_play(seat, card)?;
                for agent in agents.iter_mut() {
                    agent.observe_play(&state, seat, card);
                }
            }
            _ => unreachable!("to_act is only set while bidding or playing"),
        }
    }

    let points = state.points().expect("round finished");
    let round = state.round();
    let mut rewards = [0.0; NUM_PLAYERS];
    for seat in 0..NUM_PLAYERS {
        rewards[seat] = normalize_reward(points[seat], round)?;
    }
    if let Some(log) = log.as_mut() {
        for (seat, t) in log.bidding.iter_mut() {
            t.reward = rewards[*seat];
        }
        for (seat, idx) in pending.iter().enumerate() {
            if let Some(i) = idx {
                let t = &mut log.playing[*i].1;
                t.reward = rewards[seat];
                t.terminal = true;
            }
        }
    }
    Ok(RoundOutcome {
        round,
        first_bidder: state.first_bidder(),
        bids: state.bids().map(|b| b.expect("all bids placed")),
        tricks: *state.tricks_taken(),
        points,
        rewards,
        record: log,
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::deal;
    use crate::rng::{seeded, uniform_index};

    struct Uniform;

    impl Policy for Uniform {
        fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
            d.mask.nth(uniform_index(rng, d.mask.count())).unwrap()
        }
    }

    struct Cheater;

    impl Policy for Cheater {
        fn act(&mut self, d: &Decision<'_>, _rng: &mut WizRng) -> usize {
            (0..d.mask.width()).find(|&a| !d.mask.allows(a)).unwrap_or(0)
        }
    }

    fn c(s: &str) -> Card {
        s.parse().unwrap()
    }

    #[test]
    fn bidding_encoding_first_bidder() {
        let s = deal(&mut seeded(1), 1, 0).unwrap();
        let (obs, mask) = encode_bidding(&s, 0).unwrap();
        let v = obs.to_vec();
        assert_eq!(v.len(), 75);
        assert_eq!(obs.previous_bids, [None; 3]);
        assert!(v[69..75].iter().all(|&x| x == 0.0));
        assert_eq!(v[..60].iter().sum::<f32>(), 1.0);
        assert_eq!(mask, ActionMask::all(2));
        assert!(matches!(encode_bidding(&s, 1), Err(Error::OutOfTurn { .. })));
    }

    #[test]
    fn bidding_encoding_third_bidder() {
        let mut s = deal(&mut seeded(2), 2, 1).unwrap();
        s.step_bid(1, 1).unwrap();
        s.step_bid(2, 0).unwrap();
        let (obs, mask) = encode_bidding(&s, 3).unwrap();
        let v = obs.to_vec();
        assert_eq!(&v[69..75], &[1.0, 0.5, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(v[60 + 2], 1.0);
        assert_eq!(v[..60].iter().sum::<f32>(), 2.0);
        assert_eq!(mask.count(), 3);
    }

    fn two_card_state() -> RoundState {
        let hands = [["Red-10", "Blue-2"], ["Wizard0", "Red-3"], ["Red-4", "Green-7"], ["Yellow-5", "Blue-8"]]
            .map(|h| h.iter().map(|s| c(s)).collect::<CardSet>());
        let mut s = RoundState::from_deal(2, 0, hands, Some(c("Green-9"))).unwrap();
        for seat in 0..4 {
            s.step_bid(seat, 1).unwrap();
        }
        s
    }

    #[test]
    fn playing_encoding_leader_and_highest() {
        let mut s = two_card_state();
        let (obs, mask) = encode_playing(&s, 0).unwrap();
        let v = obs.to_vec();
        assert_eq!(v.len(), 147);
        assert_eq!(v[OFF_FOLLOW + 4], 1.0);
        assert_eq!(v[OFF_HIGHEST + 60], 1.0);
        assert_eq!(v[OFF_TRICK_POS], 1.0);
        assert_eq!(mask.count(), 2);

        s.step_play(0, c("Red-10")).unwrap();
        s.step_play(1, c("Wizard0")).unwrap();
        let (obs, mask) = encode_playing(&s, 2).unwrap();
        assert_eq!(obs.highest_card, Some(Card::wizard(0)));
        assert_eq!(obs.suit_to_follow, Some(Suit::Red));
        assert_eq!(obs.trick_position, 2);
        let v = obs.to_vec();
        assert_eq!(v[OFF_HIGHEST + 52], 1.0);
        assert_eq!(mask.count(), s.admissible(2).len());
        assert_eq!(mask.count(), 1);
        assert!(matches!(encode_playing(&s, 3), Err(Error::OutOfTurn { .. })));
    }

    #[test]
    fn one_hot_sections_sum_to_one() {
        let mut rng = seeded(5);
        for round in 1..=15 {
            let mut s = deal(&mut rng, round, (round % 4) as usize).unwrap();
            while let Some(seat) = s.to_act() {
                if s.phase() == Phase::Bidding {
                    s.step_bid(seat, 0).unwrap();
                    continue;
                }
                let v = encode_playing(&s, seat).unwrap().0.to_vec();
                assert_eq!(v[..60].iter().sum::<f32>(), s.hand(seat).len() as f32);
                for (start, len) in [(60, 4), (64, 5), (77, 4), (81, 5), (86, 61)] {
                    assert_eq!(v[start..start + len].iter().sum::<f32>(), 1.0);
                }
                let again = encode_playing(&s, seat).unwrap().0.to_vec();
                assert_eq!(v, again);
                s.step_play(seat, s.admissible(seat).first().unwrap()).unwrap();
            }
        }
    }

    #[test]
    fn run_round_transition_structure() {
        let mut rng = seeded(9);
        for round in [1u8, 2, 5, 15] {
            let (mut a, mut b, mut c, mut d) = (Uniform, Uniform, Uniform, Uniform);
            let mut seats: [&mut dyn Policy; 4] = [&mut a, &mut b, &mut c, &mut d];
            let out = run_round(&mut seats, round, 1, &mut rng, true).unwrap();
            let rec = out.record.as_ref().unwrap();
            assert_eq!(out.tricks.iter().map(|&t| t as u32).sum::<u32>(), round as u32);
            assert_eq!(rec.bidding.len(), 4);
            for seat in 0..4 {
                let plays: Vec<&Transition> =
                    rec.playing.iter().filter(|(s, _)| *s == seat).map(|(_, t)| t).collect();
                assert_eq!(plays.len(), round as usize);
                let last = plays.last().unwrap();
                assert!(last.terminal && last.next_observation.is_none());
                let bid_t = &rec.bidding.iter().find(|(s, _)| *s == seat).unwrap().1;
                assert_eq!(bid_t.reward, last.reward);
                assert!((0.0..=1.0).contains(&last.reward));
                for t in &plays[..plays.len() - 1] {
                    assert!(!t.terminal);
                    assert_eq!(t.reward, 0.0);
                    assert!(t.next_observation.is_some() && t.next_mask.is_some());
                }
            }
        }
    }

    #[test]
    fn masked_out_action_is_rejected() {
        let mut rng = seeded(3);
        let (mut a, mut b, mut c, mut d) = (Cheater, Uniform, Uniform, Uniform);
        let mut seats: [&mut dyn Policy; 4] = [&mut a, &mut b, &mut c, &mut d];
        // Bids are never masked, so the cheater fails once it must follow suit.
        let mut saw_error = false;
        for _ in 0..20 {
            match run_round(&mut seats, 5, 0, &mut rng, false) {
                Err(Error::IllegalAction { seat: 0, .. }) => saw_error = true,
                Err(e) => panic!("unexpected {e}"),
                Ok(_) => {}
            }
        }
        assert!(saw_error);
    }
}
