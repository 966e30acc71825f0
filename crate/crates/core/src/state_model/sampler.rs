use std::sync::Arc;

use super::estimator::StateEstimator;
use super::table::{truth_table, CardLocationTable, Knowledge, Location, NUM_LOCATIONS};
use crate::error::{Error, Result};
use crate::game::{Card, RoundState, NUM_PLAYERS};
use crate::rng::{shuffle, unit, WizRng};

/// Where the tree search gets its full-information state from.
#[derive(Clone, Debug)]
pub enum SamplerKind {
    GroundTruth,
    Uniform,
    /// Estimator predictions; `history` marks an estimator trained on
    /// history-augmented inputs.
    NeuralNet { estimator: Arc<StateEstimator>, history: bool },
}

impl SamplerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SamplerKind::GroundTruth => "truth",
            SamplerKind::Uniform => "uniform",
            SamplerKind::NeuralNet { history: false, .. } => "nn",
            SamplerKind::NeuralNet { history: true, .. } => "nn+hist",
        }
    }
}

fn unknown_in_random_order(k: &Knowledge, rng: &mut WizRng) -> Vec<Card> {
    let mut cards: Vec<Card> = k.unknown().iter().collect();
    shuffle(rng, &mut cards);
    cards
}

/// Uniformly random completion of the observer's knowledge: a random
/// permutation of the unknown cards fills the opponents' hands to their
/// known sizes and leaves the rest in the deck.
pub fn uniform_sample(k: &Knowledge, rng: &mut WizRng) -> Result<CardLocationTable> {
    k.check()?;
    let cards = unknown_in_random_order(k, rng);
    let mut table = k.fixed_table();
    let mut next = cards.into_iter();
    for p in k.opponents() {
        for _ in 0..k.hand_sizes[p] {
            table.set(next.next().expect("checked capacity"), Location::Hand(p));
        }
    }
    Ok(table)
}

/// Sequential constrained sampling from estimator rows.
///
/// `rows` is the `60 × 9` prediction with seats relative to the observer.
/// Unknown cards are visited in random order; each goes to a location with
/// free capacity with probability proportional to `row[location] ·
/// capacity`. With uniform rows this is exactly [`uniform_sample`]; when every
/// feasible location has zero mass the weights fall back to capacity alone.
pub fn sample_from_rows(rows: &[f32], k: &Knowledge, rng: &mut WizRng) -> Result<CardLocationTable> {
    if rows.len() != crate::game::DECK_SIZE * NUM_LOCATIONS {
        return Err(Error::shape(format!("estimate of {} values, expected 540", rows.len())));
    }
    let mut capacity = [0usize; NUM_LOCATIONS];
    capacity[Location::Deck.column()] = k.deck_capacity()?;
    for p in k.opponents() {
        capacity[Location::Hand(p).column()] = k.hand_sizes[p];
    }
    let rel_column = |abs: usize| match Location::from_column(abs).expect("valid column") {
        Location::Hand(p) => 1 + (p + NUM_PLAYERS - k.observer) % NUM_PLAYERS,
        other => other.column(),
    };
    let mut table = k.fixed_table();
    let mut weights = [0.0f64; NUM_LOCATIONS];
    for card in unknown_in_random_order(k, rng) {
        let row = &rows[card.index() * NUM_LOCATIONS..(card.index() + 1) * NUM_LOCATIONS];
        let mut total = 0.0;
        for (col, w) in weights.iter_mut().enumerate() {
            let p = row[rel_column(col)] as f64;
            *w = if capacity[col] > 0 && p.is_finite() && p > 0.0 { p * capacity[col] as f64 } else { 0.0 };
            total += *w;
        }
        if total <= 0.0 || !total.is_finite() {
            total = 0.0;
            for (col, w) in weights.iter_mut().enumerate() {
                *w = capacity[col] as f64;
                total += *w;
            }
        }
        let mut x = unit(rng) * total;
        let mut chosen = None;
        for (col, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                chosen = Some(col);
                if x < w {
                    break;
                }
                x -= w;
            }
        }
        let col = chosen.expect("some location has capacity");
        capacity[col] -= 1;
        table.set(card, Location::from_column(col).expect("valid column"));
    }
    Ok(table)
}

pub fn nn_sample(
    estimator: &StateEstimator,
    features: &[f32],
    k: &Knowledge,
    rng: &mut WizRng,
) -> Result<CardLocationTable> {
    let rows = estimator.predict(features)?;
    sample_from_rows(&rows, k, rng)
}

/// Draws a table for `observer` in `state` with the given sampler. `features`
/// is the estimator input (ignored by the other samplers).
pub fn sample_table(
    kind: &SamplerKind,
    state: &RoundState,
    observer: crate::game::Seat,
    features: &[f32],
    rng: &mut WizRng,
) -> Result<CardLocationTable> {
    match kind {
        SamplerKind::GroundTruth => Ok(truth_table(state)),
        SamplerKind::Uniform => uniform_sample(&Knowledge::from_state(state, observer), rng),
        SamplerKind::NeuralNet { estimator, .. } => {
            nn_sample(estimator, features, &Knowledge::from_state(state, observer), rng)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::deal;
    use crate::rng::seeded;

    #[test]
    fn uniform_sample_respects_knowledge() {
        let mut rng = seeded(1);
        for r in [1u8, 3, 15] {
            let st = deal(&mut rng, r, 0).unwrap();
            let k = Knowledge::from_state(&st, 1);
            for _ in 0..50 {
                k.verify(&uniform_sample(&k, &mut rng).unwrap()).unwrap();
            }
        }
    }

    #[test]
    fn fully_known_state_is_unique() {
        let st = deal(&mut seeded(2), 15, 0).unwrap();
        let mut k = Knowledge::from_state(&st, 0);
        // Pretend the observer has seen every opponent card played.
        for p in 1..4 {
            k.played_by[p] = st.hand(p);
            k.hand_sizes[p] = 0;
        }
        let t = uniform_sample(&k, &mut seeded(3)).unwrap();
        assert_eq!(t, k.fixed_table());
    }

    #[test]
    fn one_hot_rows_reproduce_truth() {
        let mut rng = seeded(4);
        let st = deal(&mut rng, 5, 3).unwrap();
        let truth = truth_table(&st);
        let rows = truth.relative_to(2).to_one_hot();
        let k = Knowledge::from_state(&st, 2);
        for _ in 0..20 {
            assert_eq!(sample_from_rows(&rows, &k, &mut rng).unwrap(), truth);
        }
    }

    #[test]
    fn zero_mass_falls_back() {
        let st = deal(&mut seeded(5), 2, 0).unwrap();
        let k = Knowledge::from_state(&st, 0);
        let rows = vec![0.0; 540];
        k.verify(&sample_from_rows(&rows, &k, &mut seeded(6)).unwrap()).unwrap();
        let mut nan = vec![f32::NAN; 540];
        nan[0] = 1.0;
        k.verify(&sample_from_rows(&nan, &k, &mut seeded(7)).unwrap()).unwrap();
    }
}
