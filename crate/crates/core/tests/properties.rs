mod common;

use proptest::prelude::*;

use wizard_rl::agents::{rule_bid, rule_play, Agent};
use wizard_rl::env::{encode_bidding, encode_playing, Policy, BID_OBS_DIM, PLAY_OBS_DIM};
use wizard_rl::game::{admissible, deal, score, trick_winner, Trick, Trump, NUM_PLAYERS};
use wizard_rl::history::{sequence_from_state, T1_DIM, T2_DIM};
use wizard_rl::nn::{blend_parameters, Checkpoint, DenseNet, Tensor};
use wizard_rl::rng::{seeded, uniform_index};
use wizard_rl::state_model::{sample_from_rows, uniform_sample, Knowledge, NUM_LOCATIONS};
use wizard_rl::{Card, CardSet, Phase, RoundState, Suit};

fn trump_strategy() -> impl Strategy<Value = Trump> {
    prop_oneof![
        Just(Trump::NoTrump),
        (0usize..4).prop_map(|s| Trump::Suit(Suit::from_index(s).unwrap())),
    ]
}

fn four_cards() -> impl Strategy<Value = Vec<Card>> {
    Just((0..60).collect::<Vec<usize>>())
        .prop_shuffle()
        .prop_map(|v| v[..4].iter().map(|&i| Card::from_index(i).unwrap()).collect())
}

/// Plays `state` forward with random legal moves for `steps` decisions.
fn advance(state: &mut RoundState, steps: usize, seed: u64) {
    let mut rng = seeded(seed);
    for _ in 0..steps {
        let Some(seat) = state.to_act() else { return };
        match state.phase() {
            Phase::Bidding => {
                let bid = uniform_index(&mut rng, state.round() as usize + 1) as u8;
                state.step_bid(seat, bid).unwrap();
            }
            _ => {
                let legal: Vec<Card> = state.admissible(seat).iter().collect();
                state.step_play(seat, legal[uniform_index(&mut rng, legal.len())]).unwrap();
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn full_deck_tricks_match_oracle(cards in four_cards(), trump in trump_strategy(), leader in 0usize..4) {
        let trick = Trick::from_cards(leader, &cards).unwrap();
        let want = (leader + common::winner(&cards, trump)) % NUM_PLAYERS;
        prop_assert_eq!(trick_winner(&trick, trump).unwrap(), want);
    }

    #[test]
    fn admissible_is_a_nonempty_subset(cards in four_cards(), k in 0usize..4) {
        let prefix = Trick::from_cards(0, &cards[..k]).unwrap();
        let hand: CardSet = cards[k..].iter().copied().collect();
        let legal = admissible(hand, &prefix).unwrap();
        prop_assert!(!legal.is_empty());
        prop_assert!(legal.is_subset(hand));
        prop_assert!(hand.iter().filter(|c| c.is_special()).all(|c| legal.contains(c)));
    }

    #[test]
    fn score_is_positive_only_on_exact_bids(bid in 0u8..=15, tricks in 0u8..=15) {
        let s = score(bid, tricks);
        prop_assert_eq!(s > 0, bid == tricks);
        prop_assert_eq!(s % 10, 0);
    }

    #[test]
    fn dealt_rounds_are_partitions(seed in any::<u64>(), round in 1u8..=15, first in 0usize..4, steps in 0usize..80) {
        let mut state = deal(&mut seeded(seed), round, first).unwrap();
        advance(&mut state, steps, seed ^ 1);
        state.check_invariants().unwrap();
        let mut all = state.played_cards().union(state.undealt());
        if let Some(t) = state.trump_card() {
            prop_assert!(all.insert(t));
        }
        for h in state.hands() {
            prop_assert!(all.intersection(*h).is_empty());
            all = all.union(*h);
        }
        prop_assert_eq!(all.len(), 60);
    }

    #[test]
    fn observations_have_fixed_width_and_legal_masks(seed in any::<u64>(), round in 1u8..=15, steps in 0usize..60) {
        let mut state = deal(&mut seeded(seed), round, (seed % 4) as usize).unwrap();
        advance(&mut state, steps, seed);
        if let Some(seat) = state.to_act() {
            if state.phase() == Phase::Bidding {
                let (obs, mask) = encode_bidding(&state, seat).unwrap();
                prop_assert_eq!(obs.to_vec().len(), BID_OBS_DIM);
                prop_assert_eq!(mask.count(), round as usize + 1);
            } else {
                let (obs, mask) = encode_playing(&state, seat).unwrap();
                prop_assert_eq!(obs.to_vec().len(), PLAY_OBS_DIM);
                prop_assert_eq!(mask.bits(), state.admissible(seat).bits());
            }
        }
    }

    #[test]
    fn rule_agent_is_legal_and_bids_in_range(seed in any::<u64>(), round in 1u8..=15, steps in 0usize..60) {
        let mut state = deal(&mut seeded(seed), round, 0).unwrap();
        let bid = rule_bid(state.hand(0), state.trump(), round);
        prop_assert!(bid <= round);
        advance(&mut state, steps, seed);
        if let (Some(seat), Phase::Playing) = (state.to_act(), state.phase()) {
            let card = rule_play(
                state.hand(seat),
                state.current_trick(),
                state.trump(),
                state.bid(seat).unwrap(),
                state.tricks_taken()[seat],
            ).unwrap();
            prop_assert!(state.admissible(seat).contains(card));
        }
    }

    #[test]
    fn history_targets_are_monotone(seed in any::<u64>(), round in 1u8..=15, observer in 0usize..4) {
        let mut rng = seeded(seed);
        let mut seats = [Agent::Random, Agent::RuleBased, Agent::Random, Agent::RuleBased].map(|a| a.instantiate());
        let mut refs: Vec<&mut dyn Policy> = seats.iter_mut().map(|p| p.as_mut() as &mut dyn Policy).collect();
        let out = wizard_rl::env::run_round(&mut refs, round, 0, &mut rng, false).unwrap();
        let seq = sequence_from_state(&out.state, observer);
        for t in 0..seq.steps() {
            let cur = seq.target(t);
            for c in 0..60 {
                prop_assert!(cur[c * 4..c * 4 + 4].iter().sum::<f32>() <= 1.0);
            }
            prop_assert_eq!(cur[T1_DIM + T2_DIM..].iter().sum::<f32>(), 1.0);
            prop_assert_eq!(cur[..T1_DIM].iter().sum::<f32>(), (t + 1) as f32);
            if t > 0 {
                let prev = seq.target(t - 1);
                prop_assert!(prev[..T1_DIM + T2_DIM].iter().zip(&cur[..T1_DIM + T2_DIM]).all(|(a, b)| b >= a));
            }
        }
    }

    #[test]
    fn samplers_respect_knowledge(seed in any::<u64>(), round in 1u8..=15, steps in 0usize..60, rows in prop::collection::vec(0.0f32..1.0, 60 * NUM_LOCATIONS)) {
        let mut state = deal(&mut seeded(seed), round, 1).unwrap();
        advance(&mut state, steps, seed);
        let observer = (seed % 4) as usize;
        let k = Knowledge::from_state(&state, observer);
        let mut rng = seeded(seed ^ 7);
        k.verify(&uniform_sample(&k, &mut rng).unwrap()).unwrap();
        k.verify(&sample_from_rows(&rows, &k, &mut rng).unwrap()).unwrap();
        // Degenerate rows: all mass on the observer's own hand column.
        let mut onehot = vec![0.0; 60 * NUM_LOCATIONS];
        for c in 0..60 {
            onehot[c * NUM_LOCATIONS + 1] = 1.0;
        }
        k.verify(&sample_from_rows(&onehot, &k, &mut rng).unwrap()).unwrap();
    }

    #[test]
    fn checkpoints_round_trip_and_detect_corruption(seed in any::<u64>(), flip in any::<prop::sample::Index>()) {
        let net = DenseNet::<f32>::init(&[5, 7, 3], &mut seeded(seed)).unwrap();
        let mut ck = Checkpoint::new();
        ck.put_dense("net", &net);
        ck.insert("extra", Tensor::from_vec(vec![seed as f32, 1.5]));
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes, "mem").unwrap();
        let restored = back.dense::<f32>("net", "mem").unwrap();
        prop_assert_eq!(restored.params(), net.params());
        let mut bad = bytes.clone();
        let i = flip.index(bad.len());
        bad[i] ^= 0x10;
        prop_assert!(Checkpoint::from_bytes(&bad, "mem").is_err());
        prop_assert!(Checkpoint::from_bytes(&bytes[..i], "mem").is_err());
    }

    #[test]
    fn blending_stays_between_endpoints(a in prop::collection::vec(-10.0f64..10.0, 1..20), tau in 0.0f64..=1.0) {
        let b: Vec<f64> = a.iter().map(|x| -x + 1.0).collect();
        let mut t = a.clone();
        blend_parameters(&mut t, &b, tau).unwrap();
        for ((x, y), z) in a.iter().zip(&b).zip(&t) {
            prop_assert!(*z >= x.min(*y) - 1e-12 && *z <= x.max(*y) + 1e-12);
        }
        let mut same = a.clone();
        blend_parameters(&mut same, &a, tau).unwrap();
        prop_assert_eq!(same, a);
    }
}
