//! Sequence model over the cards played in a round.
//!
//! Every play, by any seat, is one step. The input is the card, the player
//! relative to the observing seat and the trump designation. The encoder is
//! trained to reconstruct three facts about the history so far, and its LSTM
//! cell state then serves as extra input to the playing network.
//!
//! | target | width | entry                                                         |
//! |--------|-------|---------------------------------------------------------------|
//! | T1     | 240   | `c·4 + p`: relative player `p` has played card `c`            |
//! | T2     | 16    | `p·4 + s`: `p` has discarded off led suit `s` (stays set)     |
//! | T3     | 4     | `p` holds the currently winning card of the current trick    |

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::env::{run_round, Policy};
use crate::error::{Error, Result};
use crate::game::{
    lead_suit_of, winning_position, Card, CardKind, RoundState, Seat, Trump, DECK_SIZE, NUM_PLAYERS, NUM_SUITS,
};
use crate::nn::{sigmoid, Adam, Checkpoint, DenseNet, LstmCell, LstmState};
use crate::rng::{shuffle, uniform_index, WizRng};

pub const HISTORY_INPUT: usize = DECK_SIZE + NUM_PLAYERS + 5;
pub const T1_DIM: usize = DECK_SIZE * NUM_PLAYERS;
pub const T2_DIM: usize = NUM_PLAYERS * NUM_SUITS;
pub const T3_DIM: usize = NUM_PLAYERS;
pub const HISTORY_TARGET: usize = T1_DIM + T2_DIM + T3_DIM;
pub const HIDDEN_SIZES: [usize; 3] = [50, 100, 150];

/// Seat `player` as seen from `observer`: 0 is the observer itself.
pub fn relative(player: Seat, observer: Seat) -> usize {
    (player + NUM_PLAYERS - observer) % NUM_PLAYERS
}

pub fn write_step_input(card: Card, rel_player: usize, trump: Trump, out: &mut [f32]) {
    out[..HISTORY_INPUT].fill(0.0);
    out[card.index()] = 1.0;
    out[DECK_SIZE + rel_player] = 1.0;
    out[DECK_SIZE + NUM_PLAYERS + trump.index()] = 1.0;
}

/// One round of plays with inputs and targets, `steps × 69` and `steps × 260`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistorySequence {
    pub round: u8,
    pub inputs: Vec<f32>,
    pub targets: Vec<f32>,
}

impl HistorySequence {
    pub fn steps(&self) -> usize {
        self.inputs.len() / HISTORY_INPUT
    }

    pub fn input(&self, t: usize) -> &[f32] {
        &self.inputs[t * HISTORY_INPUT..(t + 1) * HISTORY_INPUT]
    }

    pub fn target(&self, t: usize) -> &[f32] {
        &self.targets[t * HISTORY_TARGET..(t + 1) * HISTORY_TARGET]
    }
}

/// Incremental construction of the three targets.
#[derive(Clone, Debug)]
pub struct TargetTracker {
    observer: Seat,
    trump: Trump,
    t1: Vec<f32>,
    t2: Vec<f32>,
    trick: Vec<(Seat, Card)>,
    winner: Option<Seat>,
}

impl TargetTracker {
    pub fn new(observer: Seat, trump: Trump) -> Self {
        TargetTracker {
            observer,
            trump,
            t1: vec![0.0; T1_DIM],
            t2: vec![0.0; T2_DIM],
            trick: Vec::with_capacity(NUM_PLAYERS),
            winner: None,
        }
    }

    pub fn observe(&mut self, player: Seat, card: Card) {
        if self.trick.len() == NUM_PLAYERS {
            self.trick.clear();
        }
        let rel = relative(player, self.observer);
        if let (Some(led), CardKind::Standard { suit, .. }) =
            (lead_suit_of(self.trick.iter().map(|p| p.1)), card.kind())
        {
            if suit != led {
                self.t2[rel * NUM_SUITS + led.index()] = 1.0;
            }
        }
        self.t1[card.index() * NUM_PLAYERS + rel] = 1.0;
        self.trick.push((player, card));
        let cards: Vec<Card> = self.trick.iter().map(|p| p.1).collect();
        let pos = winning_position(&cards, self.trump).expect("non-empty trick");
        self.winner = Some(relative(self.trick[pos].0, self.observer));
    }

    pub fn write(&self, out: &mut [f32]) {
        out[..T1_DIM].copy_from_slice(&self.t1);
        out[T1_DIM..T1_DIM + T2_DIM].copy_from_slice(&self.t2);
        let t3 = &mut out[T1_DIM + T2_DIM..HISTORY_TARGET];
        t3.fill(0.0);
        if let Some(w) = self.winner {
            t3[w] = 1.0;
        }
    }
}

/// Inputs and targets for a finished round from `observer`'s point of view.
pub fn sequence_from_state(state: &RoundState, observer: Seat) -> HistorySequence {
    let plays: Vec<_> = state.play_history().collect();
    let mut inputs = vec![0.0; plays.len() * HISTORY_INPUT];
    let mut targets = vec![0.0; plays.len() * HISTORY_TARGET];
    let mut tracker = TargetTracker::new(observer, state.trump());
    for (t, play) in plays.iter().enumerate() {
        write_step_input(
            play.card,
            relative(play.player, observer),
            state.trump(),
            &mut inputs[t * HISTORY_INPUT..(t + 1) * HISTORY_INPUT],
        );
        tracker.observe(play.player, play.card);
        tracker.write(&mut targets[t * HISTORY_TARGET..(t + 1) * HISTORY_TARGET]);
    }
    HistorySequence { round: state.round(), inputs, targets }
}

/// Simulates `n_rounds` rounds of `round` with `agents` seated 0..4 and a
/// uniformly drawn first bidder; seat 0 is the observer.
pub fn generate_history_dataset(
    agents: &mut [&mut dyn Policy],
    round: u8,
    n_rounds: usize,
    rng: &mut WizRng,
) -> Result<Vec<HistorySequence>> {
    let mut out = Vec::with_capacity(n_rounds);
    for _ in 0..n_rounds {
        let first = uniform_index(rng, NUM_PLAYERS);
        let outcome = run_round(agents, round, first, rng, false)?;
        out.push(sequence_from_state(&outcome.state, 0));
    }
    Ok(out)
}

/// Flat binary export: per sequence a `u32` step count, then per step 69
/// input and 260 target `f32` values, all little-endian.
pub fn export_dataset(path: &Path, data: &[HistorySequence]) -> Result<()> {
    let mut bytes = Vec::new();
    for seq in data {
        bytes.extend_from_slice(&(seq.steps() as u32).to_le_bytes());
        for t in 0..seq.steps() {
            for v in seq.input(t).iter().chain(seq.target(t)) {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn import_dataset(path: &Path) -> Result<Vec<HistorySequence>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let corrupt = |reason: &str| Error::Corrupt { path: path.into(), reason: reason.into() };
    let row = (HISTORY_INPUT + HISTORY_TARGET) * 4;
    let mut pos = 0;
    let mut out = Vec::new();
    while pos < bytes.len() {
        let head = bytes.get(pos..pos + 4).ok_or_else(|| corrupt("truncated step count"))?;
        let steps = u32::from_le_bytes(head.try_into().expect("4 bytes")) as usize;
        pos += 4;
        let body = bytes.get(pos..pos + steps * row).ok_or_else(|| corrupt("truncated sequence"))?;
        pos += steps * row;
        let mut seq = HistorySequence { round: (steps / NUM_PLAYERS) as u8, inputs: Vec::new(), targets: Vec::new() };
        for chunk in body.chunks_exact(row) {
            let vals: Vec<f32> =
                chunk.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
            seq.inputs.extend_from_slice(&vals[..HISTORY_INPUT]);
            seq.targets.extend_from_slice(&vals[HISTORY_INPUT..]);
        }
        out.push(seq);
    }
    Ok(out)
}

/// LSTM cell followed by a linear layer with sigmoid outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryEncoder {
    pub lstm: LstmCell<f32>,
    pub head: DenseNet<f32>,
}

impl HistoryEncoder {
    pub fn new(hidden: usize, rng: &mut WizRng) -> Result<Self> {
        Ok(HistoryEncoder {
            lstm: LstmCell::init(HISTORY_INPUT, hidden, rng)?,
            head: DenseNet::init(&[hidden, HISTORY_TARGET], rng)?,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.lstm.hidden_size()
    }

    /// Sigmoid predictions for every step of one sequence.
    pub fn predict(&self, inputs: &[f32]) -> Result<Vec<f32>> {
        let steps = inputs.len() / HISTORY_INPUT;
        let trace = self.lstm.forward_sequence(inputs, steps, 1)?;
        let mut out = self.head.forward(&trace.hidden_stack(), steps)?;
        out.iter_mut().for_each(|x| *x = sigmoid(*x));
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_lstm("lstm", &self.lstm);
        ck.put_dense("head", &self.head);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, origin: &str) -> Result<Self> {
        let lstm = ck.lstm::<f32>("lstm", origin)?;
        let head = ck.dense::<f32>("head", origin)?;
        if lstm.input_size() != HISTORY_INPUT || head.sizes() != [lstm.hidden_size(), HISTORY_TARGET] {
            return Err(Error::Corrupt { path: origin.into(), reason: "not a history encoder".into() });
        }
        Ok(HistoryEncoder { lstm, head })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, &path.display().to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryTrainConfig {
    pub buffer: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for HistoryTrainConfig {
    fn default() -> Self {
        HistoryTrainConfig { buffer: 10_000, batch_size: 64, learning_rate: 0.005, epochs: 200 }
    }
}

/// Per-epoch mean training losses plus the reported final value.
#[derive(Clone, Debug, PartialEq)]
pub struct LossTrace {
    pub epochs: Vec<f32>,
}

impl LossTrace {
    /// Mean of the last 100 epochs (or all epochs if fewer).
    pub fn final_loss(&self) -> f32 {
        let n = self.epochs.len().min(100);
        if n == 0 {
            return f32::NAN;
        }
        self.epochs[self.epochs.len() - n..].iter().sum::<f32>() / n as f32
    }
}

/// One Adam step on a batch of equal-length sequences. Returns the MSE.
fn history_batch_step(
    enc: &mut HistoryEncoder,
    adam_lstm: &mut Adam<f32>,
    adam_head: &mut Adam<f32>,
    batch: &[&HistorySequence],
) -> Result<f32> {
    let steps = batch[0].steps();
    let b = batch.len();
    let mut inputs = vec![0.0; steps * b * HISTORY_INPUT];
    let mut targets = vec![0.0; steps * b * HISTORY_TARGET];
    for t in 0..steps {
        for (k, seq) in batch.iter().enumerate() {
            let row = t * b + k;
            inputs[row * HISTORY_INPUT..(row + 1) * HISTORY_INPUT].copy_from_slice(seq.input(t));
            targets[row * HISTORY_TARGET..(row + 1) * HISTORY_TARGET].copy_from_slice(seq.target(t));
        }
    }
    let trace = enc.lstm.forward_sequence(&inputs, steps, b)?;
    let hidden = trace.hidden_stack();
    let cache = enc.head.forward_train(&hidden, steps * b)?;
    let n = targets.len() as f32;
    let mut loss = 0.0f64;
    let grad: Vec<f32> = cache
        .output()
        .iter()
        .zip(&targets)
        .map(|(&z, &y)| {
            let p = sigmoid(z);
            let d = p - y;
            loss += (d * d) as f64;
            2.0 * d / n * p * (1.0 - p)
        })
        .collect();
    let head_grads = enc.head.backward(&cache, &grad, true)?;
    let lstm_grads = enc.lstm.backward_sequence(&trace, head_grads.input.as_deref().expect("requested"))?;
    adam_head.apply(enc.head.params_mut(), &head_grads.params)?;
    adam_lstm.apply(enc.lstm.params_mut(), &lstm_grads.params)?;
    Ok((loss / n as f64) as f32)
}

/// Trains on the newest `config.buffer` sequences; one epoch is one shuffled
/// pass over them in minibatches of equal sequence length.
pub fn train_history(
    enc: &mut HistoryEncoder,
    dataset: &[HistorySequence],
    config: &HistoryTrainConfig,
    rng: &mut WizRng,
) -> Result<LossTrace> {
    if dataset.is_empty() {
        return Err(Error::Invalid("history dataset is empty".into()));
    }
    if config.batch_size == 0 {
        return Err(Error::Invalid("history batch size must be positive".into()));
    }
    let data = &dataset[dataset.len().saturating_sub(config.buffer)..];
    if let Some(bad) = data.iter().find(|s| s.steps() == 0 || s.targets.len() != s.steps() * HISTORY_TARGET) {
        return Err(Error::shape(format!("malformed history sequence with {} input values", bad.inputs.len())));
    }
    let mut adam_lstm = Adam::new(enc.lstm.params().len(), config.learning_rate);
    let mut adam_head = Adam::new(enc.head.params().len(), config.learning_rate);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| data[i].steps());
    let mut epochs = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        // Shuffle within each length group, then shuffle the batch order.
        let mut batches: Vec<Vec<usize>> = Vec::new();
        let mut start = 0;
        while start < order.len() {
            let len = data[order[start]].steps();
            let end = start + order[start..].iter().take_while(|&&i| data[i].steps() == len).count();
            shuffle(rng, &mut order[start..end]);
            for chunk in order[start..end].chunks(config.batch_size) {
                batches.push(chunk.to_vec());
            }
            start = end;
        }
        shuffle(rng, &mut batches);
        let (mut sum, mut weight) = (0.0f64, 0usize);
        for idx in &batches {
            let batch: Vec<&HistorySequence> = idx.iter().map(|&i| &data[i]).collect();
            let loss = history_batch_step(enc, &mut adam_lstm, &mut adam_head, &batch)?;
            sum += loss as f64 * idx.len() as f64;
            weight += idx.len();
        }
        epochs.push((sum / weight as f64) as f32);
    }
    Ok(LossTrace { epochs })
}

/// Runs the encoder alongside a round and exposes its cell state.
#[derive(Clone, Debug)]
pub struct HistoryTracker {
    encoder: Arc<HistoryEncoder>,
    observer: Seat,
    trump: Trump,
    state: LstmState<f32>,
    input: Vec<f32>,
}

impl HistoryTracker {
    pub fn new(encoder: Arc<HistoryEncoder>) -> Self {
        let h = encoder.hidden_size();
        HistoryTracker {
            encoder,
            observer: 0,
            trump: Trump::NoTrump,
            state: LstmState::zeros(1, h),
            input: vec![0.0; HISTORY_INPUT],
        }
    }

    pub fn encoder(&self) -> &HistoryEncoder {
        &self.encoder
    }

    pub fn reset(&mut self, observer: Seat, trump: Trump) {
        self.observer = observer;
        self.trump = trump;
        self.state = LstmState::zeros(1, self.encoder.hidden_size());
    }

    pub fn observe(&mut self, player: Seat, card: Card) {
        write_step_input(card, relative(player, self.observer), self.trump, &mut self.input);
        self.state = self.encoder.lstm.step(&self.input, &self.state).expect("history input has fixed width");
    }

    /// Cell state after every play observed since the last reset.
    pub fn cell_state(&self) -> &[f32] {
        &self.state.c
    }
}

/// Base observation followed by the cell state; `expected` is the input
/// width of the network that will consume it.
pub fn augment_observation(base: &[f32], cell: &[f32], expected: usize) -> Result<Vec<f32>> {
    if base.len() + cell.len() != expected {
        return Err(Error::shape(format!(
            "augmented input {} + {} does not match network input {expected}",
            base.len(),
            cell.len()
        )));
    }
    let mut v = Vec::with_capacity(expected);
    v.extend_from_slice(base);
    v.extend_from_slice(cell);
    Ok(v)
}
