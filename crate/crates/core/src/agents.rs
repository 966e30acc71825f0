//! Policies: random, rule-based, DQN, history-augmented DQN and tree search.
//!
//! Agents are described by [`AgentSpec`] strings, resolved into an immutable
//! [`Agent`] (networks behind `Arc`) and instantiated into per-worker
//! [`Policy`] objects.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use crate::dqn::select_action;
use crate::env::{bid_actions, Decision, Policy, BID_OBS_DIM, CARD_ACTIONS, PLAY_OBS_DIM};
use crate::error::{Error, Result};
use crate::game::{admissible, would_win, Card, CardKind, CardSet, Phase, RoundState, Seat, Trick, Trump, MAX_ROUND};
use crate::history::{HistoryEncoder, HistoryTracker};
use crate::nn::{Checkpoint, DenseNet};
use crate::rng::{uniform_index, WizRng};
use crate::state_model::{action_rewards, best_of, sample_table, RolloutNets, SamplerKind, StateEstimator};

// ---------------------------------------------------------------------------
// Random and rule-based play

pub fn random_bid(round: u8, rng: &mut WizRng) -> u8 {
    uniform_index(rng, round as usize + 1) as u8
}

pub fn random_play(mask: crate::env::ActionMask, rng: &mut WizRng) -> Result<usize> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mask.nth(uniform_index(rng, mask.count())).expect("index below count"))
}

/// Fixed estimate of a card's chance to take a trick.
pub fn heuristic_win_prob(card: Card, trump: Trump) -> f64 {
    match card.kind() {
        CardKind::Wizard(_) => 1.0,
        CardKind::Jester(_) => 0.0,
        CardKind::Standard { suit, rank } => {
            let v = (rank - 2) as f64 / 12.0;
            if trump.suit() == Some(suit) {
                0.55 + 0.35 * v
            } else {
                0.30 * v
            }
        }
    }
}

/// Sum of win probabilities rounded to nearest, halves rounded down.
pub fn rule_bid(hand: CardSet, trump: Trump, round: u8) -> u8 {
    let sum: f64 = hand.iter().map(|c| heuristic_win_prob(c, trump)).sum();
    // The tolerance keeps sums like 0.5 + 1.0 from drifting above a half.
    let bid = (sum - 0.5 - 1e-9).ceil().max(0.0) as u8;
    bid.min(round)
}

fn strength(card: Card, trump: Trump) -> (f64, usize) {
    (heuristic_win_prob(card, trump), card.index())
}

fn weakest(cards: impl Iterator<Item = Card>, trump: Trump) -> Option<Card> {
    cards.min_by(|a, b| strength(*a, trump).partial_cmp(&strength(*b, trump)).expect("finite"))
}

fn strongest(cards: impl Iterator<Item = Card>, trump: Trump) -> Option<Card> {
    cards.max_by(|a, b| strength(*a, trump).partial_cmp(&strength(*b, trump)).expect("finite"))
}

/// Chases tricks with the cheapest winning card while short of the bid,
/// otherwise dumps the strongest card that loses.
pub fn rule_play(hand: CardSet, trick: &Trick, trump: Trump, bid: u8, tricks_taken: u8) -> Result<Card> {
    let options = admissible(hand, trick)?;
    if options.is_empty() {
        return Err(Error::EmptyHand);
    }
    let winners: CardSet = options.iter().filter(|&c| would_win(trick, c, trump)).collect();
    let losers = options.difference(winners);
    let card = if bid > tricks_taken {
        weakest(winners.iter(), trump).or_else(|| weakest(options.iter(), trump))
    } else {
        strongest(losers.iter(), trump).or_else(|| weakest(options.iter(), trump))
    };
    Ok(card.expect("options non-empty"))
}

pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
        random_play(d.mask, rng).expect("engine never offers an empty mask")
    }
}

pub struct RulePolicy;

impl Policy for RulePolicy {
    fn act(&mut self, d: &Decision<'_>, _rng: &mut WizRng) -> usize {
        let s = d.state;
        match d.phase {
            Phase::Bidding => rule_bid(s.hand(d.seat), s.trump(), s.round()) as usize,
            _ => {
                let bid = s.bid(d.seat).expect("bids complete before play");
                rule_play(s.hand(d.seat), s.current_trick(), s.trump(), bid, s.tricks_taken()[d.seat])
                    .expect("seat to act holds cards")
                    .index()
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Per-round network banks

/// Bidding and playing networks for one round.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundNets {
    pub round: u8,
    pub bid: DenseNet<f32>,
    pub play: DenseNet<f32>,
}

impl RoundNets {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        ck.put_scalar("round", self.round as f32);
        ck.put_dense("bid", &self.bid);
        ck.put_dense("play", &self.play);
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint, origin: &str) -> Result<Self> {
        let round = ck.scalar("round").ok_or_else(|| Error::MissingTensor {
            path: PathBuf::from(origin),
            name: "round".into(),
        })?;
        if round.fract() != 0.0 || !(1.0..=MAX_ROUND as f32).contains(&round) {
            return Err(Error::Corrupt { path: PathBuf::from(origin), reason: format!("round value {round}") });
        }
        let nets = RoundNets { round: round as u8, bid: ck.dense("bid", origin)?, play: ck.dense("play", origin)? };
        let extra = nets.play.input_dim().saturating_sub(PLAY_OBS_DIM);
        nets.check(extra).map_err(|e| Error::Corrupt { path: PathBuf::from(origin), reason: e.to_string() })?;
        Ok(nets)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, &path.display().to_string())
    }

    /// Verifies shapes; `extra` is the width appended to the playing input.
    pub fn check(&self, extra: usize) -> Result<()> {
        let r = self.round;
        if self.bid.input_dim() != BID_OBS_DIM || self.bid.output_dim() != bid_actions(r) {
            return Err(Error::shape(format!(
                "round {r} bidding net is {}→{}, expected {BID_OBS_DIM}→{}",
                self.bid.input_dim(),
                self.bid.output_dim(),
                bid_actions(r)
            )));
        }
        if self.play.input_dim() != PLAY_OBS_DIM + extra || self.play.output_dim() != CARD_ACTIONS {
            return Err(Error::shape(format!(
                "round {r} playing net is {}→{}, expected {}→{CARD_ACTIONS}",
                self.play.input_dim(),
                self.play.output_dim(),
                PLAY_OBS_DIM + extra
            )));
        }
        Ok(())
    }
}

/// File name of a round's networks inside a checkpoint directory.
pub fn round_file_name(round: u8) -> String {
    format!("round_{round:02}.wnn")
}

/// Networks for a set of rounds.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NetBank {
    rounds: BTreeMap<u8, RoundNets>,
}

impl NetBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, nets: RoundNets) {
        self.rounds.insert(nets.round, nets);
    }

    pub fn get(&self, round: u8) -> Option<&RoundNets> {
        self.rounds.get(&round)
    }

    pub fn rounds(&self) -> impl Iterator<Item = u8> + '_ {
        self.rounds.keys().copied()
    }

    /// Loads a single round file or every `round_XX.wnn` in a directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut bank = NetBank::new();
        if path.is_dir() {
            for round in 1..=MAX_ROUND {
                let file = path.join(round_file_name(round));
                if file.exists() {
                    let nets = RoundNets::load(&file)?;
                    if nets.round != round {
                        return Err(Error::Corrupt { path: file, reason: format!("holds round {}", nets.round) });
                    }
                    bank.insert(nets);
                }
            }
            if bank.rounds.is_empty() {
                return Err(Error::Invalid(format!("no round checkpoints in {}", path.display())));
            }
        } else {
            bank.insert(RoundNets::load(path)?);
        }
        Ok(bank)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for nets in self.rounds.values() {
            nets.save(&dir.join(round_file_name(nets.round)))?;
        }
        Ok(())
    }

    pub fn require(&self, round: u8, extra: usize) -> Result<&RoundNets> {
        let nets = self.get(round).ok_or_else(|| Error::Invalid(format!("no networks for round {round}")))?;
        nets.check(extra)?;
        Ok(nets)
    }

    fn nets(&self, round: u8) -> &RoundNets {
        self.get(round).unwrap_or_else(|| panic!("no networks for round {round}; validate agents first"))
    }
}

impl RolloutNets for NetBank {
    fn playing(&self, round: u8) -> Option<&DenseNet<f32>> {
        self.get(round).map(|n| &n.play).filter(|n| n.input_dim() == PLAY_OBS_DIM)
    }
}

// ---------------------------------------------------------------------------
// Network policies

/// ε-greedy over the bank's networks.
pub struct DqnPolicy {
    bank: Arc<NetBank>,
    epsilon: f64,
}

impl DqnPolicy {
    pub fn new(bank: Arc<NetBank>, epsilon: f64) -> Self {
        DqnPolicy { bank, epsilon }
    }
}

fn dqn_act(bank: &NetBank, d: &Decision<'_>, epsilon: f64, rng: &mut WizRng) -> usize {
    let nets = bank.nets(d.state.round());
    let net = if d.phase == Phase::Bidding { &nets.bid } else { &nets.play };
    select_action(net, d.features, d.mask, epsilon, rng).expect("validated network shapes")
}

impl Policy for DqnPolicy {
    fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
        dqn_act(&self.bank, d, self.epsilon, rng)
    }
}

/// DQN whose playing input is extended by the history encoder's cell state.
pub struct DqnHistPolicy {
    bank: Arc<NetBank>,
    tracker: HistoryTracker,
    epsilon: f64,
}

impl DqnHistPolicy {
    pub fn new(bank: Arc<NetBank>, encoder: Arc<HistoryEncoder>, epsilon: f64) -> Self {
        DqnHistPolicy { bank, tracker: HistoryTracker::new(encoder), epsilon }
    }
}

impl Policy for DqnHistPolicy {
    fn begin_round(&mut self, state: &RoundState, seat: Seat) {
        self.tracker.reset(seat, state.trump());
    }

    fn augment_playing(&mut self, features: &mut Vec<f32>) {
        features.extend_from_slice(self.tracker.cell_state());
    }

    fn act(&mut self, d: &Decision<'_>, rng: &mut WizRng) -> usize {
        dqn_act(&self.bank, d, self.epsilon, rng)
    }

    fn observe_play(&mut self, _state: &RoundState, player: Seat, card: Card) {
        self.tracker.observe(player, card);
    }
}

/// Greedy bids; cards chosen by one-ply search over sampled full states.
pub struct TreeSearchPolicy {
    bank: Arc<NetBank>,
    sampler: SamplerKind,
    tracker: Option<HistoryTracker>,
    samples: usize,
}

impl TreeSearchPolicy {
    pub fn new(bank: Arc<NetBank>, sampler: SamplerKind, history: Option<Arc<HistoryEncoder>>, samples: usize) -> Self {
        TreeSearchPolicy { bank, sampler, tracker: history.map(HistoryTracker::new), samples: samples.max(1) }
    }

    fn choose(&self, d: &Decision<'_>, rng: &mut WizRng) -> Result<usize> {
        if d.mask.count() == 1 {
            return Ok(d.mask.iter().next().expect("one action"));
        }
        let mut totals: Vec<(usize, f32)> = d.mask.iter().map(|a| (a, 0.0)).collect();
        for _ in 0..self.samples {
            let table = sample_table(&self.sampler, d.state, d.seat, d.features, rng)?;
            let rewards = action_rewards(d.state, d.seat, &table, &*self.bank)?;
            for ((a, total), (b, r)) in totals.iter_mut().zip(rewards) {
                debug_assert_eq!(*a, b);
                *total += r;
            }
        }
        best_of(&totals)
    }
}

impl Policy for TreeSearchPolicy {
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
        match d.phase {
            Phase::Bidding => dqn_act(&self.bank, d, 0.0, rng),
            _ => self.choose(d, rng).expect("validated search inputs"),
        }
    }

    fn observe_play(&mut self, _state: &RoundState, player: Seat, card: Card) {
        if let Some(t) = self.tracker.as_mut() {
            t.observe(player, card);
        }
    }
}

// ---------------------------------------------------------------------------
// Specification strings

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SamplerSpec {
    Truth,
    Uniform,
    NeuralNet { estimator: PathBuf, history: Option<PathBuf> },
}

/// Parsed agent description.
///
/// Grammar: `random`, `rule`, `dqn:<ckpt>[:eps=<x>]`,
/// `dqn+hist:<ckpt>:<lstm>[:eps=<x>]`,
/// `tree:<ckpt>:<truth|uniform|nn:<est>[:<lstm>]>[:k=<n>]`.
/// `<ckpt>` is a round file or a directory of `round_XX.wnn` files.
#[derive(Clone, Debug, PartialEq)]
pub enum AgentSpec {
    Random,
    RuleBased,
    Dqn { checkpoint: PathBuf, epsilon: f64 },
    DqnHist { checkpoint: PathBuf, lstm: PathBuf, epsilon: f64 },
    TreeSearch { checkpoint: PathBuf, sampler: SamplerSpec, samples: usize },
}

fn spec_err(spec: &str, reason: impl Into<String>) -> Error {
    Error::AgentSpec { spec: spec.to_string(), reason: reason.into() }
}

fn take_option<'a>(parts: &mut Vec<&'a str>, key: &str) -> Option<&'a str> {
    let last = *parts.last()?;
    let value = last.strip_prefix(key)?.strip_prefix('=')?;
    parts.pop();
    Some(value)
}

impl FromStr for AgentSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<AgentSpec> {
        let mut parts: Vec<&str> = s.trim().split(':').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(spec_err(s, "empty field"));
        }
        let epsilon = match take_option(&mut parts, "eps") {
            Some(v) => {
                let e: f64 = v.parse().map_err(|_| spec_err(s, format!("bad epsilon `{v}`")))?;
                if !(0.0..=1.0).contains(&e) {
                    return Err(spec_err(s, "epsilon outside [0, 1]"));
                }
                Some(e)
            }
            None => None,
        };
        let samples = match take_option(&mut parts, "k") {
            Some(v) => match v.parse::<usize>() {
                Ok(k) if k > 0 => Some(k),
                _ => return Err(spec_err(s, format!("bad sample count `{v}`"))),
            },
            None => None,
        };
        let kind = parts[0];
        if epsilon.is_some() && !matches!(kind, "dqn" | "dqn+hist") {
            return Err(spec_err(s, "eps= applies to dqn agents only"));
        }
        if samples.is_some() && kind != "tree" {
            return Err(spec_err(s, "k= applies to tree agents only"));
        }
        let eps = epsilon.unwrap_or(0.0);
        let spec = match (kind, &parts[1..]) {
            ("random", []) => AgentSpec::Random,
            ("rule", []) => AgentSpec::RuleBased,
            ("dqn", [ck]) => AgentSpec::Dqn { checkpoint: ck.into(), epsilon: eps },
            ("dqn+hist", [ck, lstm]) => AgentSpec::DqnHist { checkpoint: ck.into(), lstm: lstm.into(), epsilon: eps },
            ("tree", [ck, rest @ ..]) => {
                let sampler = match rest {
                    ["truth"] => SamplerSpec::Truth,
                    ["uniform"] => SamplerSpec::Uniform,
                    ["nn", est] => SamplerSpec::NeuralNet { estimator: est.into(), history: None },
                    ["nn", est, lstm] => SamplerSpec::NeuralNet { estimator: est.into(), history: Some(lstm.into()) },
                    _ => return Err(spec_err(s, "sampler must be truth, uniform or nn:<est>[:<lstm>]")),
                };
                AgentSpec::TreeSearch { checkpoint: ck.into(), sampler, samples: samples.unwrap_or(1) }
            }
            _ => return Err(spec_err(s, "unknown agent kind or wrong number of fields")),
        };
        Ok(spec)
    }
}

impl fmt::Display for AgentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eps = |e: f64| if e > 0.0 { format!(":eps={e}") } else { String::new() };
        match self {
            AgentSpec::Random => write!(f, "random"),
            AgentSpec::RuleBased => write!(f, "rule"),
            AgentSpec::Dqn { checkpoint, epsilon } => write!(f, "dqn:{}{}", checkpoint.display(), eps(*epsilon)),
            AgentSpec::DqnHist { checkpoint, lstm, epsilon } => {
                write!(f, "dqn+hist:{}:{}{}", checkpoint.display(), lstm.display(), eps(*epsilon))
            }
            AgentSpec::TreeSearch { checkpoint, sampler, samples } => {
                write!(f, "tree:{}:", checkpoint.display())?;
                match sampler {
                    SamplerSpec::Truth => write!(f, "truth")?,
                    SamplerSpec::Uniform => write!(f, "uniform")?,
                    SamplerSpec::NeuralNet { estimator, history } => {
                        write!(f, "nn:{}", estimator.display())?;
                        if let Some(h) = history {
                            write!(f, ":{}", h.display())?;
                        }
                    }
                }
                if *samples != 1 {
                    write!(f, ":k={samples}")?;
                }
                Ok(())
            }
        }
    }
}

/// Parses a comma-separated list of exactly four specifications.
pub fn parse_agent_mix(s: &str) -> Result<[AgentSpec; 4]> {
    let specs = s.split(',').map(str::parse).collect::<Result<Vec<AgentSpec>>>()?;
    specs
        .try_into()
        .map_err(|v: Vec<AgentSpec>| spec_err(s, format!("need 4 comma-separated agents, got {}", v.len())))
}

/// A resolved agent: networks loaded and shared, ready to instantiate.
#[derive(Clone, Debug)]
pub enum Agent {
    Random,
    RuleBased,
    Dqn { bank: Arc<NetBank>, epsilon: f64 },
    DqnHist { bank: Arc<NetBank>, encoder: Arc<HistoryEncoder>, epsilon: f64 },
    TreeSearch { bank: Arc<NetBank>, sampler: SamplerKind, history: Option<Arc<HistoryEncoder>>, samples: usize },
}

impl Agent {
    pub fn load(spec: &AgentSpec) -> Result<Agent> {
        let at = |e: Error| spec_err(&spec.to_string(), e.to_string());
        Ok(match spec {
            AgentSpec::Random => Agent::Random,
            AgentSpec::RuleBased => Agent::RuleBased,
            AgentSpec::Dqn { checkpoint, epsilon } => {
                Agent::Dqn { bank: Arc::new(NetBank::load(checkpoint).map_err(at)?), epsilon: *epsilon }
            }
            AgentSpec::DqnHist { checkpoint, lstm, epsilon } => Agent::DqnHist {
                bank: Arc::new(NetBank::load(checkpoint).map_err(at)?),
                encoder: Arc::new(HistoryEncoder::load(lstm).map_err(at)?),
                epsilon: *epsilon,
            },
            AgentSpec::TreeSearch { checkpoint, sampler, samples } => {
                let bank = Arc::new(NetBank::load(checkpoint).map_err(at)?);
                let (sampler, history) = match sampler {
                    SamplerSpec::Truth => (SamplerKind::GroundTruth, None),
                    SamplerSpec::Uniform => (SamplerKind::Uniform, None),
                    SamplerSpec::NeuralNet { estimator, history } => {
                        let est = Arc::new(StateEstimator::load(estimator).map_err(at)?);
                        let enc = match history {
                            Some(p) => Some(Arc::new(HistoryEncoder::load(p).map_err(at)?)),
                            None => None,
                        };
                        (SamplerKind::NeuralNet { estimator: est, history: enc.is_some() }, enc)
                    }
                };
                Agent::TreeSearch { bank, sampler, history, samples: *samples }
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Agent::Random => "random",
            Agent::RuleBased => "rule",
            Agent::Dqn { .. } => "dqn",
            Agent::DqnHist { .. } => "dqn+hist",
            Agent::TreeSearch { .. } => "tree",
        }
    }

    /// Checks that every network this agent needs for `round` exists and
    /// has compatible shapes.
    pub fn validate(&self, round: u8) -> Result<()> {
        match self {
            Agent::Random | Agent::RuleBased => Ok(()),
            Agent::Dqn { bank, .. } => bank.require(round, 0).map(|_| ()),
            Agent::DqnHist { bank, encoder, .. } => bank.require(round, encoder.hidden_size()).map(|_| ()),
            Agent::TreeSearch { bank, sampler, history, .. } => {
                bank.require(round, 0)?;
                if let SamplerKind::NeuralNet { estimator, .. } = sampler {
                    let want = PLAY_OBS_DIM + history.as_ref().map_or(0, |h| h.hidden_size());
                    if estimator.input_dim() != want {
                        return Err(Error::shape(format!(
                            "estimator takes {} inputs, this agent provides {want}",
                            estimator.input_dim()
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn instantiate(&self) -> Box<dyn Policy + Send> {
        match self {
            Agent::Random => Box::new(RandomPolicy),
            Agent::RuleBased => Box::new(RulePolicy),
            Agent::Dqn { bank, epsilon } => Box::new(DqnPolicy::new(bank.clone(), *epsilon)),
            Agent::DqnHist { bank, encoder, epsilon } => {
                Box::new(DqnHistPolicy::new(bank.clone(), encoder.clone(), *epsilon))
            }
            Agent::TreeSearch { bank, sampler, history, samples } => {
                Box::new(TreeSearchPolicy::new(bank.clone(), sampler.clone(), history.clone(), *samples))
            }
        }
    }
}
