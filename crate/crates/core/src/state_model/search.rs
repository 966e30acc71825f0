use super::table::{CardLocationTable, Knowledge, Location};
use crate::dqn::masked_argmax;
use crate::env::{encode_playing, PLAY_OBS_DIM};
use crate::error::{Error, Result};
use crate::game::{normalize_reward, Card, Phase, RoundState, Seat, NUM_PLAYERS};
use crate::nn::DenseNet;

/// Playing networks used to roll a round out greedily.
pub trait RolloutNets {
    /// Playing network for round `round`, taking the 147-wide base input.
    fn playing(&self, round: u8) -> Option<&DenseNet<f32>>;
}

impl RolloutNets for DenseNet<f32> {
    fn playing(&self, _round: u8) -> Option<&DenseNet<f32>> {
        Some(self)
    }
}

/// Replaces the hidden part of `state` by the hands and deck in `table`.
pub fn materialize(state: &RoundState, table: &CardLocationTable) -> Result<RoundState> {
    let hands = table.hands();
    let mut undealt = table.cards_at(Location::Deck);
    if let Some(t) = state.trump_card() {
        if !undealt.contains(t) {
            return Err(Error::Inconsistent(format!("trump card {t} is not in the deck column")));
        }
        undealt.remove(t);
    }
    for play in state.play_history() {
        if table.location(play.card) != Location::Played(play.player) {
            return Err(Error::Inconsistent(format!("played card {} is misplaced", play.card)));
        }
    }
    state.with_hidden(hands, undealt)
}

/// Plays `state` to the end with every seat choosing its greedy admissible
/// card and returns `seat`'s normalized reward.
pub fn rollout_reward(mut state: RoundState, nets: &dyn RolloutNets, seat: Seat) -> Result<f32> {
    let net = nets.playing(state.round()).ok_or_else(|| Error::Invalid(format!("no playing net for round {}", state.round())))?;
    if net.input_dim() != PLAY_OBS_DIM {
        return Err(Error::shape(format!("rollout net takes {} inputs, expected {PLAY_OBS_DIM}", net.input_dim())));
    }
    let mut features = vec![0.0; PLAY_OBS_DIM];
    while state.phase() == Phase::Playing {
        let to_act = state.to_act().expect("playing");
        let (obs, mask) = encode_playing(&state, to_act)?;
        let action = if mask.count() == 1 {
            mask.iter().next().expect("one action")
        } else {
            obs.write(&mut features);
            masked_argmax(&net.forward(&features, 1)?, mask)?
        };
        state.step_play(to_act, Card::from_index(action).expect("card action"))?;
    }
    let points = state.points().expect("evaluated");
    normalize_reward(points[seat], state.round())
}

/// Simulated reward of every admissible card for `seat` on the state drawn
/// as `table`, in ascending card index order.
pub fn action_rewards(
    state: &RoundState,
    seat: Seat,
    table: &CardLocationTable,
    nets: &dyn RolloutNets,
) -> Result<Vec<(usize, f32)>> {
    if state.phase() != Phase::Playing {
        return Err(Error::WrongPhase { expected: Phase::Playing, actual: state.phase() });
    }
    let expected = state.to_act().expect("playing");
    if seat != expected || seat >= NUM_PLAYERS {
        return Err(Error::OutOfTurn { seat, expected });
    }
    Knowledge::from_state(state, seat).verify(table)?;
    let full = materialize(state, table)?;
    let mask = full.admissible(seat);
    let mut out = Vec::with_capacity(mask.len());
    for card in mask {
        let mut next = full.clone();
        next.step_play(seat, card)?;
        out.push((card.index(), rollout_reward(next, nets, seat)?));
    }
    Ok(out)
}

/// One-ply search: simulate each admissible card with greedy rollouts and
/// return the best; ties go to the lowest card index.
pub fn tree_search(state: &RoundState, seat: Seat, table: &CardLocationTable, nets: &dyn RolloutNets) -> Result<usize> {
    let admissible = state.admissible(seat);
    if admissible.len() == 1 && state.phase() == Phase::Playing && state.to_act() == Some(seat) {
        return Ok(admissible.first().expect("one card").index());
    }
    best_of(&action_rewards(state, seat, table, nets)?)
}

pub(crate) fn best_of(scores: &[(usize, f32)]) -> Result<usize> {
    let mut best: Option<(usize, f32)> = None;
    for &(a, v) in scores {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((a, v));
        }
    }
    best.map(|(a, _)| a).ok_or(Error::EmptyMask)
}
