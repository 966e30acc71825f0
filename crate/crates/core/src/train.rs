//! Training regimes: self-play, retraining against fixed opponents, and the
//! supervised history and estimator stages.
//!
//! Output layout under a run directory:
//!
//! | file                                   | content                          |
//! |----------------------------------------|----------------------------------|
//! | `round_XX.wnn`                         | final bidding and playing nets   |
//! | `progress_round_XX.csv`                | windowed training progress       |
//! | `checkpoints/round_XX_tNNNNNNNN.wnn`   | intermediate nets                |
//! | `history_hH_round_XX.wnn`              | history encoder of size `H`      |
//! | `history_loss_hH_round_XX.csv`         | `epoch,loss`                     |
//! | `estimator_round_XX.wnn`               | state estimator                  |
//! | `estimator_loss_round_XX.csv`          | `epoch,loss`                     |
//!
//! Progress CSV columns: `round_index` (rounds completed), `epsilon` (at the
//! last round of the window), `bid_loss` and `play_loss` (mean training loss
//! of the window, empty before the first step), `window_accuracy` (mean over
//! learning seats) and `seat0..seat3` (hit rate per seat in the window).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agents::{round_file_name, Agent, NetBank, RoundNets};
use crate::config::Config;
use crate::dqn::{select_action, DqnConfig, DqnLearner, EpsilonSchedule, ObsCodec};
use crate::env::{
    bid_actions, play_round, Decision, Policy, Transition, BID_OBS_DIM, CARD_ACTIONS, PLAY_OBS_DIM,
};
use crate::error::{Error, Result};
use crate::game::{deal, Card, Phase, RoundState, Seat, MAX_ROUND, NUM_PLAYERS};
use crate::history::{
    generate_history_dataset, train_history, HistoryEncoder, HistoryTracker, HistoryTrainConfig, LossTrace,
};
use crate::nn::DenseNet;
use crate::rng::{derive_seed, stream, uniform_index, WizRng};
use crate::state_model::{estimator_target, EstimatorConfig, EstimatorSample, StateEstimator};

pub fn progress_file_name(round: u8) -> String {
    format!("progress_round_{round:02}.csv")
}

/// Settings of one (round, phase pair) training run.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub round: u8,
    pub total_rounds: u64,
    pub window: u64,
    /// Intermediate checkpoint interval in rounds; 0 disables.
    pub checkpoint_every: u64,
    pub epsilon_start: f64,
    pub bid: DqnConfig,
    pub play: DqnConfig,
    /// Store replay observations as exact `k / r` bytes instead of floats.
    pub quantized: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(round: u8, total_rounds: u64, seed: u64) -> Self {
        TrainConfig {
            round,
            total_rounds,
            window: 4000.min(total_rounds.max(1)),
            checkpoint_every: 0,
            epsilon_start: 1.0,
            bid: DqnConfig::bidding(),
            play: DqnConfig::playing(),
            quantized: true,
            seed,
        }
    }

    /// Reads the `train` and `dqn` sections. The seed of round `r` is
    /// derived from `seed` so that every round trains on its own streams.
    pub fn from_config(cfg: &Config, round: u8, seed: u64) -> Result<Self> {
        let dqn = |capacity_key: &str| -> Result<DqnConfig> {
            Ok(DqnConfig {
                hidden: cfg.get_list("dqn.hidden")?,
                learning_rate: cfg.get("dqn.learning_rate")?,
                gamma: cfg.get("dqn.gamma")?,
                batch_size: cfg.positive("dqn.batch_size")? as usize,
                capacity: cfg.positive(capacity_key)? as usize,
                train_every: cfg.positive("dqn.train_every")?,
                blend_every: cfg.positive("dqn.blend_every")?,
                tau: cfg.get("dqn.tau")?,
            })
        };
        let codec = cfg.raw("train.codec")?;
        let quantized = match codec {
            "quantized" => true,
            "raw" => false,
            other => {
                return Err(Error::Config { key: "train.codec".into(), reason: format!("`{other}` is not quantized or raw") })
            }
        };
        let c = TrainConfig {
            round,
            total_rounds: cfg.positive("train.rounds_total")?,
            window: cfg.positive("train.window")?,
            checkpoint_every: cfg.get("train.checkpoint_every")?,
            epsilon_start: cfg.get("train.epsilon_start")?,
            bid: dqn("dqn.bid_capacity")?,
            play: dqn("dqn.play_capacity")?,
            quantized,
            seed: derive_seed(seed, round as u64),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| Err(Error::Config { key: key.into(), reason });
        if !(1..=MAX_ROUND).contains(&self.round) {
            return Err(Error::RoundOutOfRange(self.round));
        }
        if self.total_rounds == 0 {
            return Err(Error::ZeroHorizon(0));
        }
        if self.window == 0 || self.window > self.total_rounds {
            return bad("train.window", format!("{} must be in 1..={}", self.window, self.total_rounds));
        }
        if !(self.epsilon_start > 0.0 && self.epsilon_start <= 1.0) {
            return bad("train.epsilon_start", format!("{} is not in (0, 1]", self.epsilon_start));
        }
        for (name, d) in [("bid", &self.bid), ("play", &self.play)] {
            if d.hidden.is_empty() || d.hidden.contains(&0) {
                return bad("dqn.hidden", format!("{name} hidden widths {:?}", d.hidden));
            }
            if !(d.learning_rate > 0.0 && d.learning_rate.is_finite()) {
                return bad("dqn.learning_rate", format!("{}", d.learning_rate));
            }
            if !(0.0..=1.0).contains(&d.gamma) {
                return bad("dqn.gamma", format!("{} is not in [0, 1]", d.gamma));
            }
            if !(d.tau > 0.0 && d.tau <= 1.0) {
                return bad("dqn.tau", format!("{} is not in (0, 1]", d.tau));
            }
        }
        Ok(())
    }
}

/// One progress CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressRow {
    pub round_index: u64,
    pub epsilon: f64,
    pub bid_loss: Option<f64>,
    pub play_loss: Option<f64>,
    pub window_accuracy: f64,
    pub seat0: f64,
    pub seat1: f64,
    pub seat2: f64,
    pub seat3: f64,
}

impl ProgressRow {
    pub fn seats(&self) -> [f64; NUM_PLAYERS] {
        [self.seat0, self.seat1, self.seat2, self.seat3]
    }
}

pub fn write_progress(path: &Path, rows: &[ProgressRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record([
            "round_index", "epsilon", "bid_loss", "play_loss", "window_accuracy", "seat0", "seat1", "seat2", "seat3",
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::nn::checkpoint::write_atomic(path, &bytes)
}

pub fn read_progress(path: &Path) -> Result<Vec<ProgressRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Result of one training run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub nets: RoundNets,
    pub progress: Vec<ProgressRow>,
    pub bid_steps: u64,
    pub play_steps: u64,
}

/// A learning seat acting ε-greedily from the shared online networks.
struct LearnerSeat<'a> {
    bid: &'a DenseNet<f32>,
    play: &'a DenseNet<f32>,
    epsilon: f64,
    tracker: Option<&'a mut HistoryTracker>,
}

impl Policy for LearnerSeat<'_> {
    fn begin_round(&mut self, state: &RoundState, seat: Seat) {
        if let Some(t) = self.tracker.as_mut() {
            t.reset(seat, state.trump());
        }
    }

    fn augment_playing(&mut self, features: &mut Vec<f32>) {
        if let Some(t) = self.tracker.as_ref() {
            features.extend_from_slice(t.cell_state());
        }
    }

    fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
        let net = if d.phase == Phase::Bidding { self.bid } else { self.play };
        select_action(net, d.features, d.mask, self.epsilon, rng).expect("learner shapes are fixed")
    }

    fn observe_play(&mut self, _state: &RoundState, player: Seat, card: Card) {
        if let Some(t) = self.tracker.as_mut() {
            t.observe(player, card);
        }
    }
}

/// Everything a training run needs besides its config.
#[derive(Clone, Debug, Default)]
pub struct TrainSetup {
    /// Starting networks; both online and target are initialised from them.
    pub warm_start: Option<RoundNets>,
    /// Fixed opponents filling seats `4 - opponents.len()..4`.
    pub opponents: Vec<Agent>,
    /// Extends the playing input with this encoder's cell state.
    pub history: Option<Arc<HistoryEncoder>>,
    /// Where to write nets, progress and intermediate checkpoints.
    pub out: Option<PathBuf>,
}

#[derive(Default)]
struct Window {
    rounds: u64,
    hits: [u64; NUM_PLAYERS],
    bid_loss: (f64, u64),
    play_loss: (f64, u64),
}

fn mean(acc: (f64, u64)) -> Option<f64> {
    (acc.1 > 0).then(|| acc.0 / acc.1 as f64)
}

/// Trains the bidding and playing learners of one round.
///
/// The `4 - k` opponents are fixed; the `k` learning seats share one online
/// network and one replay buffer per phase and contribute all their
/// transitions. The first bidder is drawn uniformly every round.
pub fn train_round(cfg: &TrainConfig, setup: &TrainSetup) -> Result<TrainOutcome> {
    cfg.validate()?;
    let r = cfg.round;
    let k = NUM_PLAYERS
        .checked_sub(setup.opponents.len())
        .filter(|&k| k > 0)
        .ok_or_else(|| Error::Invalid(format!("{} opponents leave no learning seat", setup.opponents.len())))?;
    for o in &setup.opponents {
        o.validate(r)?;
    }
    let extra = setup.history.as_ref().map_or(0, |h| h.hidden_size());
    let play_codec = if cfg.quantized && extra == 0 { ObsCodec::Quantized { denom: r } } else { ObsCodec::Raw };
    let bid_codec = if cfg.quantized { ObsCodec::Quantized { denom: r } } else { ObsCodec::Raw };
    let mut init_rng = stream(cfg.seed, 3);
    let (mut bid_l, mut play_l) = match &setup.warm_start {
        Some(nets) => {
            if nets.round != r {
                return Err(Error::Invalid(format!("warm start holds round {}, training round {r}", nets.round)));
            }
            nets.check(extra)?;
            (
                DqnLearner::from_online(nets.bid.clone(), bid_codec, cfg.bid.clone())?,
                DqnLearner::from_online(nets.play.clone(), play_codec, cfg.play.clone())?,
            )
        }
        None => (
            DqnLearner::new(BID_OBS_DIM, bid_actions(r), bid_codec, cfg.bid.clone(), &mut init_rng)?,
            DqnLearner::new(PLAY_OBS_DIM + extra, CARD_ACTIONS, play_codec, cfg.play.clone(), &mut init_rng)?,
        ),
    };
    let schedule = EpsilonSchedule::new(cfg.epsilon_start, cfg.total_rounds)?;
    let mut game_rng = stream(cfg.seed, 0);
    let mut bid_rng = stream(cfg.seed, 1);
    let mut play_rng = stream(cfg.seed, 2);
    let mut opponents: Vec<Box<dyn Policy + Send>> = setup.opponents.iter().map(Agent::instantiate).collect();
    let mut trackers: Vec<HistoryTracker> =
        setup.history.iter().flat_map(|h| std::iter::repeat_with(|| HistoryTracker::new(h.clone())).take(k)).collect();
    if let Some(dir) = &setup.out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut progress = Vec::with_capacity((cfg.total_rounds / cfg.window) as usize);
    let mut win = Window::default();
    for t in 0..cfg.total_rounds {
        let epsilon = schedule.value(t as f64);
        let first_bidder = uniform_index(&mut game_rng, NUM_PLAYERS);
        let state = deal(&mut game_rng, r, first_bidder)?;
        let outcome = {
            let mut learners: Vec<LearnerSeat<'_>> = Vec::with_capacity(k);
            let mut tracker_iter = trackers.iter_mut();
            for _ in 0..k {
                learners.push(LearnerSeat {
                    bid: bid_l.online(),
                    play: play_l.online(),
                    epsilon,
                    tracker: tracker_iter.next(),
                });
            }
            let mut seats: Vec<&mut dyn Policy> = Vec::with_capacity(NUM_PLAYERS);
            for l in learners.iter_mut() {
                seats.push(l);
            }
            for o in opponents.iter_mut() {
                seats.push(o.as_mut());
            }
            play_round(&mut seats, state, &mut game_rng, true)?
        };
        let record = outcome.record.as_ref().expect("recorded");
        let ingest = |learner: &mut DqnLearner, items: &[(Seat, Transition)]| -> Result<()> {
            for (seat, tr) in items {
                if *seat < k {
                    learner.push(tr)?;
                }
            }
            Ok(())
        };
        ingest(&mut bid_l, &record.bidding)?;
        ingest(&mut play_l, &record.playing)?;
        for (s, h) in win.hits.iter_mut().enumerate() {
            *h += outcome.hit(s) as u64;
        }
        win.rounds += 1;

        let done = t + 1;
        if let Some(l) = bid_l.maybe_update(done, &mut bid_rng)?.loss {
            win.bid_loss.0 += l as f64;
            win.bid_loss.1 += 1;
        }
        if let Some(l) = play_l.maybe_update(done, &mut play_rng)?.loss {
            win.play_loss.0 += l as f64;
            win.play_loss.1 += 1;
        }
        if done % cfg.window == 0 {
            let n = win.rounds as f64;
            let seat = |s: usize| win.hits[s] as f64 / n;
            progress.push(ProgressRow {
                round_index: done,
                epsilon,
                bid_loss: mean(win.bid_loss),
                play_loss: mean(win.play_loss),
                window_accuracy: win.hits[..k].iter().sum::<u64>() as f64 / (n * k as f64),
                seat0: seat(0),
                seat1: seat(1),
                seat2: seat(2),
                seat3: seat(3),
            });
            win = Window::default();
        }
        if let Some(dir) = &setup.out {
            if cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.total_rounds {
                let nets = RoundNets { round: r, bid: bid_l.online().clone(), play: play_l.online().clone() };
                let ck_dir = dir.join("checkpoints");
                std::fs::create_dir_all(&ck_dir).map_err(|e| Error::io(&ck_dir, e))?;
                nets.save(&ck_dir.join(format!("round_{r:02}_t{done:08}.wnn")))?;
            }
        }
    }

    let nets = RoundNets { round: r, bid: bid_l.online().clone(), play: play_l.online().clone() };
    if let Some(dir) = &setup.out {
        nets.save(&dir.join(round_file_name(r)))?;
        write_progress(&dir.join(progress_file_name(r)), &progress)?;
    }
    Ok(TrainOutcome { nets, progress, bid_steps: bid_l.train_steps(), play_steps: play_l.train_steps() })
}

/// All four seats learn from scratch.
pub fn self_play_train(cfg: &TrainConfig, history: Option<Arc<HistoryEncoder>>, out: Option<&Path>) -> Result<TrainOutcome> {
    let setup = TrainSetup { history, out: out.map(Path::to_path_buf), ..Default::default() };
    train_round(cfg, &setup)
}

/// Continues training `warm` against fixed opponents; `cfg.epsilon_start`
/// is the lowered exploration start.
pub fn retrain_vs(cfg: &TrainConfig, warm: RoundNets, opponents: Vec<Agent>, out: Option<&Path>) -> Result<TrainOutcome> {
    let setup = TrainSetup { warm_start: Some(warm), opponents, history: None, out: out.map(Path::to_path_buf) };
    train_round(cfg, &setup)
}

/// Policy that plays the rounds from which supervised data is collected:
/// greedy DQN when networks are available, uniform random otherwise.
pub fn data_policy(bank: Option<&Arc<NetBank>>) -> Agent {
    match bank {
        Some(b) => Agent::Dqn { bank: b.clone(), epsilon: 0.0 },
        None => Agent::Random,
    }
}

// ---------------------------------------------------------------------------
// History stage

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryStageConfig {
    pub rounds: Vec<u8>,
    pub hidden_sizes: Vec<usize>,
    pub sequences: usize,
    pub head_bias: f32,
    pub train: HistoryTrainConfig,
    pub seed: u64,
}

impl HistoryStageConfig {
    pub fn from_config(cfg: &Config, rounds: Vec<u8>, seed: u64) -> Result<Self> {
        let c = HistoryStageConfig {
            rounds,
            hidden_sizes: cfg.get_list("history.hidden_sizes")?,
            sequences: cfg.positive("history.sequences")? as usize,
            head_bias: cfg.get("history.head_bias")?,
            train: HistoryTrainConfig {
                buffer: cfg.positive("history.sequences")? as usize,
                batch_size: cfg.positive("history.batch_size")? as usize,
                learning_rate: cfg.get("history.learning_rate")?,
                epochs: cfg.positive("history.epochs")? as usize,
            },
            seed,
        };
        if c.hidden_sizes.contains(&0) {
            return Err(Error::Config { key: "history.hidden_sizes".into(), reason: "sizes must be positive".into() });
        }
        Ok(c)
    }
}

#[derive(Clone, Debug)]
pub struct HistoryStageResult {
    pub round: u8,
    pub hidden: usize,
    pub encoder: HistoryEncoder,
    pub trace: LossTrace,
}

pub fn history_file_name(hidden: usize, round: u8) -> String {
    format!("history_h{hidden}_round_{round:02}.wnn")
}

fn write_loss_csv(path: &Path, trace: &LossTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "loss"])?;
    for (i, l) in trace.epochs.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    crate::nn::checkpoint::write_atomic(path, &bytes)
}

/// Encoder with the prediction head's bias set to `head_bias`; a negative
/// start matches the mostly-zero targets.
pub fn new_history_encoder(hidden: usize, head_bias: f32, rng: &mut WizRng) -> Result<HistoryEncoder> {
    let mut enc = HistoryEncoder::new(hidden, rng)?;
    enc.head.layer_mut(0).1.iter_mut().for_each(|b| *b = head_bias);
    Ok(enc)
}

/// Generates one dataset per round and fits every hidden size to it.
pub fn train_history_stage(
    cfg: &HistoryStageConfig,
    bank: Option<&Arc<NetBank>>,
    out: Option<&Path>,
) -> Result<Vec<HistoryStageResult>> {
    let agent = data_policy(bank);
    for &r in &cfg.rounds {
        agent.validate(r)?;
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut results = Vec::new();
    for &r in &cfg.rounds {
        let seed = derive_seed(cfg.seed, r as u64);
        let mut seats: Vec<Box<dyn Policy + Send>> = (0..NUM_PLAYERS).map(|_| agent.instantiate()).collect();
        let mut refs: Vec<&mut dyn Policy> = seats.iter_mut().map(|p| p.as_mut() as &mut dyn Policy).collect();
        let data = generate_history_dataset(&mut refs, r, cfg.sequences, &mut stream(seed, 0))?;
        for &h in &cfg.hidden_sizes {
            let mut enc = new_history_encoder(h, cfg.head_bias, &mut stream(seed, 1 + h as u64))?;
            let trace = train_history(&mut enc, &data, &cfg.train, &mut stream(seed, 1000 + h as u64))?;
            if let Some(dir) = out {
                enc.save(&dir.join(history_file_name(h, r)))?;
                write_loss_csv(&dir.join(format!("history_loss_h{h}_round_{r:02}.csv")), &trace)?;
            }
            results.push(HistoryStageResult { round: r, hidden: h, encoder: enc, trace });
        }
    }
    Ok(results)
}

// ---------------------------------------------------------------------------
// Estimator stage

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorStageConfig {
    pub rounds: Vec<u8>,
    pub sample_rounds: usize,
    pub train: EstimatorConfig,
    pub seed: u64,
}

impl EstimatorStageConfig {
    pub fn from_config(cfg: &Config, rounds: Vec<u8>, seed: u64) -> Result<Self> {
        let hidden: Vec<usize> = cfg.get_list("estimator.hidden")?;
        if hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config { key: "estimator.hidden".into(), reason: "widths must be positive".into() });
        }
        Ok(EstimatorStageConfig {
            rounds,
            sample_rounds: cfg.positive("estimator.sample_rounds")? as usize,
            train: EstimatorConfig {
                hidden,
                learning_rate: cfg.get("estimator.learning_rate")?,
                batch_size: cfg.positive("estimator.batch_size")? as usize,
                buffer: cfg.positive("estimator.buffer")? as usize,
                epochs: cfg.positive("estimator.epochs")? as usize,
            },
            seed,
        })
    }
}

pub fn estimator_file_name(round: u8) -> String {
    format!("estimator_round_{round:02}.wnn")
}

/// Wraps a seat's policy and records one estimator sample per playing
/// decision. With a tracker the sample input carries the cell state while
/// the wrapped policy keeps seeing its own input.
struct Recorder {
    inner: Box<dyn Policy + Send>,
    tracker: Option<HistoryTracker>,
    samples: Vec<EstimatorSample>,
}

impl Policy for Recorder {
    fn begin_round(&mut self, state: &RoundState, seat: Seat) {
        self.inner.begin_round(state, seat);
        if let Some(t) = self.tracker.as_mut() {
            t.reset(seat, state.trump());
        }
    }

    fn augment_playing(&mut self, features: &mut Vec<f32>) {
        self.inner.augment_playing(features);
        if let Some(t) = self.tracker.as_ref() {
            features.extend_from_slice(t.cell_state());
        }
    }

    fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
        if d.phase != Phase::Playing {
            return self.inner.act(d, rng);
        }
        self.samples.push(EstimatorSample { features: d.features.to_vec(), target: estimator_target(d.state, d.seat) });
        let extra = self.tracker.as_ref().map_or(0, |t| t.cell_state().len());
        let inner = Decision { features: &d.features[..d.features.len() - extra], ..*d };
        self.inner.act(&inner, rng)
    }

    fn observe_play(&mut self, state: &RoundState, player: Seat, card: Card) {
        self.inner.observe_play(state, player, card);
        if let Some(t) = self.tracker.as_mut() {
            t.observe(player, card);
        }
    }
}

/// Plays `rounds` rounds with `agent` in every seat and returns one sample
/// per playing decision, grouped by seat within each round.
pub fn collect_estimator_samples(
    agent: &Agent,
    history: Option<&Arc<HistoryEncoder>>,
    round: u8,
    rounds: usize,
    rng: &mut WizRng,
) -> Result<Vec<EstimatorSample>> {
    agent.validate(round)?;
    let mut seats: Vec<Recorder> = (0..NUM_PLAYERS)
        .map(|_| Recorder {
            inner: agent.instantiate(),
            tracker: history.map(|h| HistoryTracker::new(h.clone())),
            samples: Vec::new(),
        })
        .collect();
    let mut out = Vec::with_capacity(rounds * round as usize * NUM_PLAYERS);
    for _ in 0..rounds {
        let first_bidder = uniform_index(rng, NUM_PLAYERS);
        let state = deal(rng, round, first_bidder)?;
        let mut refs: Vec<&mut dyn Policy> = seats.iter_mut().map(|s| s as &mut dyn Policy).collect();
        play_round(&mut refs, state, rng, false)?;
        let per_seat: Vec<Vec<EstimatorSample>> = seats.iter_mut().map(|s| std::mem::take(&mut s.samples)).collect();
        for samples in per_seat {
            out.extend(samples);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct EstimatorStageResult {
    pub round: u8,
    pub estimator: StateEstimator,
    pub trace: LossTrace,
    pub samples: usize,
}

pub fn train_estimator_stage(
    cfg: &EstimatorStageConfig,
    bank: Option<&Arc<NetBank>>,
    history: Option<&Arc<HistoryEncoder>>,
    out: Option<&Path>,
) -> Result<Vec<EstimatorStageResult>> {
    let agent = data_policy(bank);
    for &r in &cfg.rounds {
        agent.validate(r)?;
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let input = PLAY_OBS_DIM + history.map_or(0, |h| h.hidden_size());
    let mut results = Vec::new();
    for &r in &cfg.rounds {
        let seed = derive_seed(cfg.seed, r as u64);
        let data = collect_estimator_samples(&agent, history, r, cfg.sample_rounds, &mut stream(seed, 0))?;
        let mut est = StateEstimator::new(input, &cfg.train.hidden, &mut stream(seed, 1))?;
        let trace = est.train(&data, &cfg.train, &mut stream(seed, 2))?;
        if let Some(dir) = out {
            est.save(&dir.join(estimator_file_name(r)))?;
            write_loss_csv(&dir.join(format!("estimator_loss_round_{r:02}.csv")), &trace)?;
        }
        results.push(EstimatorStageResult { round: r, estimator: est, trace, samples: data.len() });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(round: u8, total: u64, seed: u64) -> TrainConfig {
        let small = |capacity| DqnConfig { hidden: vec![16, 16, 16], batch_size: 32, capacity, ..DqnConfig::playing() };
        TrainConfig { window: 50, bid: small(2000), play: small(4000), ..TrainConfig::new(round, total, seed) }
    }

    #[test]
    fn progress_rows_and_buffer_contract() {
        let out = self_play_train(&tiny(2, 200, 1), None, None).unwrap();
        assert_eq!(out.progress.len(), 4);
        assert_eq!(out.progress.last().unwrap().round_index, 200);
        // Train every 10 rounds once a batch is available.
        assert!(out.bid_steps > 0 && out.bid_steps <= 20);
        for row in &out.progress {
            assert!((0.0..=1.0).contains(&row.window_accuracy));
            let mean = row.seats().iter().sum::<f64>() / 4.0;
            assert!((mean - row.window_accuracy).abs() < 1e-12);
        }
        assert!(out.progress[0].epsilon > out.progress[3].epsilon);
    }

    #[test]
    fn deterministic_files() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let mut cfg = tiny(1, 200, 9);
        cfg.checkpoint_every = 100;
        for d in [&a, &b] {
            self_play_train(&cfg, None, Some(d.path())).unwrap();
        }
        for name in ["round_01.wnn", "progress_round_01.csv", "checkpoints/round_01_t00000100.wnn"] {
            let x = std::fs::read(a.path().join(name)).unwrap();
            assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
        }
        let rows = read_progress(&a.path().join("progress_round_01.csv")).unwrap();
        assert_eq!(rows.len(), 4);
    }

    #[test]
    fn retraining_against_random() {
        let warm = self_play_train(&tiny(1, 100, 2), None, None).unwrap().nets;
        let mut cfg = tiny(1, 100, 3);
        cfg.epsilon_start = 0.3;
        let out = retrain_vs(&cfg, warm.clone(), vec![Agent::Random; 3], None).unwrap();
        assert_eq!(out.progress[0].window_accuracy, out.progress[0].seat0);
        assert!(out.progress[0].epsilon < 0.3);
        assert!(retrain_vs(&tiny(2, 100, 3), warm.clone(), vec![], None).is_err());
        assert!(retrain_vs(&cfg, warm, vec![Agent::Random; 4], None).is_err());
    }

    #[test]
    fn history_augmented_training_uses_raw_inputs() {
        let mut rng = stream(4, 0);
        let enc = Arc::new(HistoryEncoder::new(5, &mut rng).unwrap());
        let out = self_play_train(&tiny(2, 60, 4), Some(enc), None).unwrap();
        assert_eq!(out.nets.play.input_dim(), PLAY_OBS_DIM + 5);
    }

    #[test]
    fn config_validation_names_keys() {
        let mut c = Config::default();
        c.set("train.window", "300000").unwrap();
        match TrainConfig::from_config(&c, 1, 0) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "train.window"),
            other => panic!("{other:?}"),
        }
        let mut c = Config::default();
        c.set("train.codec", "zip").unwrap();
        assert!(matches!(TrainConfig::from_config(&c, 1, 0), Err(Error::Config { key, .. }) if key == "train.codec"));
        let cfg = TrainConfig::from_config(&Config::default(), 3, 5).unwrap();
        assert_eq!(cfg.bid, DqnConfig::bidding());
        assert_eq!(cfg.play, DqnConfig::playing());
        assert_eq!(cfg.window, 4000);
    }

    #[test]
    fn estimator_samples_cover_every_decision() {
        let samples = collect_estimator_samples(&Agent::Random, None, 3, 5, &mut stream(5, 0)).unwrap();
        assert_eq!(samples.len(), 5 * 3 * 4);
        assert!(samples.iter().all(|s| s.features.len() == PLAY_OBS_DIM));
        let enc = Arc::new(HistoryEncoder::new(7, &mut stream(5, 1)).unwrap());
        let samples = collect_estimator_samples(&Agent::RuleBased, Some(&enc), 2, 3, &mut stream(5, 2)).unwrap();
        assert!(samples.iter().all(|s| s.features.len() == PLAY_OBS_DIM + 7));
    }
}
