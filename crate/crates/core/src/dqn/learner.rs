use super::replay::{ObsCodec, ReplayBuffer};
use crate::env::{ActionMask, Transition};
use crate::error::{Error, Result};
use crate::nn::{Adam, DenseNet};
use crate::rng::{uniform_index, unit, WizRng};

#[derive(Clone, Debug, PartialEq)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub capacity: usize,
    /// Train once every this many rounds.
    pub train_every: u64,
    /// Blend the target network every this many rounds.
    pub blend_every: u64,
    pub tau: f64,
}

impl DqnConfig {
    fn base(capacity: usize) -> DqnConfig {
        DqnConfig {
            hidden: vec![256, 256, 256],
            learning_rate: 0.0005,
            gamma: 1.0,
            batch_size: 1024,
            capacity,
            train_every: 10,
            blend_every: 20,
            tau: 0.1,
        }
    }

    pub fn bidding() -> DqnConfig {
        Self::base(300_000)
    }

    pub fn playing() -> DqnConfig {
        Self::base(600_000)
    }

    pub fn layer_sizes(&self, input: usize, output: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend(&self.hidden);
        sizes.push(output);
        sizes
    }
}

/// What [`DqnLearner::maybe_update`] did.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct UpdateOutcome {
    pub loss: Option<f32>,
    pub blended: bool,
}

/// Greedy action over the admissible entries of `q`; ties go to the lowest
/// index and masked-out values are never read.
pub fn masked_argmax(q: &[f32], mask: ActionMask) -> Result<usize> {
    let mut best: Option<(usize, f32)> = None;
    for a in mask.iter() {
        let v = *q.get(a).ok_or_else(|| Error::shape(format!("mask allows {a}, only {} values", q.len())))?;
        match best {
            Some((_, b)) if !(v > b) => {}
            _ => best = Some((a, v)),
        }
    }
    best.map(|(a, _)| a).ok_or(Error::EmptyMask)
}

/// ε-greedy choice among the actions `mask` allows.
pub fn select_action(
    net: &DenseNet<f32>,
    features: &[f32],
    mask: ActionMask,
    eps: f64,
    rng: &mut WizRng,
) -> Result<usize> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    if eps > 0.0 && unit(rng) < eps {
        return Ok(mask.nth(uniform_index(rng, n)).expect("index below count"));
    }
    if n == 1 {
        return Ok(mask.iter().next().expect("one action"));
    }
    let q = net.forward(features, 1)?;
    masked_argmax(&q, mask)
}

/// Online and target network, optimizer and replay memory for one
/// (round, phase) pair.
#[derive(Clone, Debug)]
pub struct DqnLearner {
    config: DqnConfig,
    online: DenseNet<f32>,
    target: DenseNet<f32>,
    adam: Adam<f32>,
    buffer: ReplayBuffer,
    train_steps: u64,
}

impl DqnLearner {
    pub fn new(input: usize, actions: usize, codec: ObsCodec, config: DqnConfig, rng: &mut WizRng) -> Result<Self> {
        let online = DenseNet::init(&config.layer_sizes(input, actions), rng)?;
        Self::from_online(online, codec, config)
    }

    /// Learner whose online and target networks both start from `online`.
    pub fn from_online(online: DenseNet<f32>, codec: ObsCodec, config: DqnConfig) -> Result<Self> {
        if config.batch_size == 0 || config.train_every == 0 || config.blend_every == 0 {
            return Err(Error::Invalid("batch size and update cadences must be positive".into()));
        }
        let buffer = ReplayBuffer::new(config.capacity, online.input_dim(), codec)?;
        let adam = Adam::new(online.params().len(), config.learning_rate);
        Ok(DqnLearner { target: online.clone(), online, adam, buffer, train_steps: 0, config })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn online(&self) -> &DenseNet<f32> {
        &self.online
    }

    pub fn target(&self) -> &DenseNet<f32> {
        &self.target
    }

    pub fn target_mut(&mut self) -> &mut DenseNet<f32> {
        &mut self.target
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        if t.action >= self.online.output_dim() {
            return Err(Error::Invalid(format!("action {} outside {} outputs", t.action, self.online.output_dim())));
        }
        self.buffer.push(t)
    }

    /// Regression targets for the given buffer slots:
    /// `r` if terminal, else `r + γ · max_{a' ∈ mask'} Q_target(s', a')`.
    pub fn targets(&self, slots: &[usize]) -> Result<Vec<f32>> {
        let mut obs = Vec::new();
        let mut next = Vec::new();
        self.buffer.gather(slots, &mut obs, &mut next);
        self.targets_from(slots, &next)
    }

    fn targets_from(&self, slots: &[usize], next: &[f32]) -> Result<Vec<f32>> {
        let w = self.buffer.width();
        let live: Vec<usize> = (0..slots.len()).filter(|&k| !self.buffer.is_terminal(slots[k])).collect();
        let mut y: Vec<f32> = slots.iter().map(|&s| self.buffer.reward(s)).collect();
        if live.is_empty() {
            return Ok(y);
        }
        let mut input = Vec::with_capacity(live.len() * w);
        for &k in &live {
            input.extend_from_slice(&next[k * w..(k + 1) * w]);
        }
        let q = self.target.forward(&input, live.len())?;
        let n = self.target.output_dim();
        let gamma = self.config.gamma as f32;
        for (j, &k) in live.iter().enumerate() {
            let row = &q[j * n..(j + 1) * n];
            let best = masked_argmax(row, self.buffer.next_mask(slots[k]))?;
            y[k] += gamma * row[best];
        }
        Ok(y)
    }

    /// One minibatch step on the squared TD error. `None` while the buffer
    /// holds fewer transitions than a batch.
    pub fn train_step(&mut self, rng: &mut WizRng) -> Result<Option<f32>> {
        let b = self.config.batch_size;
        if self.buffer.len() < b {
            return Ok(None);
        }
        let slots = self.buffer.sample_slots(b, rng);
        let mut obs = Vec::new();
        let mut next = Vec::new();
        self.buffer.gather(&slots, &mut obs, &mut next);
        let y = self.targets_from(&slots, &next)?;
        let cache = self.online.forward_train(&obs, b)?;
        let n = self.online.output_dim();
        let q = cache.output();
        let mut grad = vec![0.0f32; b * n];
        let mut loss = 0.0f64;
        let scale = 2.0 / b as f32;
        for k in 0..b {
            let a = self.buffer.action(slots[k]);
            let d = q[k * n + a] - y[k];
            loss += (d as f64) * (d as f64);
            grad[k * n + a] = scale * d;
        }
        let grads = self.online.backward(&cache, &grad, false)?;
        self.adam.apply(self.online.params_mut(), &grads.params)?;
        self.train_steps += 1;
        Ok(Some((loss / b as f64) as f32))
    }

    /// Training and target cadence after `rounds_elapsed` rounds (1-based).
    pub fn maybe_update(&mut self, rounds_elapsed: u64, rng: &mut WizRng) -> Result<UpdateOutcome> {
        let mut out = UpdateOutcome::default();
        if rounds_elapsed > 0 && rounds_elapsed % self.config.train_every == 0 {
            out.loss = self.train_step(rng)?;
        }
        if rounds_elapsed > 0 && rounds_elapsed % self.config.blend_every == 0 {
            self.target.blend_from(&self.online, self.config.tau as f32)?;
            out.blended = true;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn small(batch: usize) -> DqnConfig {
        DqnConfig { hidden: vec![16, 16, 16], batch_size: batch, capacity: 64, learning_rate: 0.01, ..DqnConfig::playing() }
    }

    #[test]
    fn masked_argmax_cases() {
        assert_eq!(masked_argmax(&[5.0, 9.0, 1.0], ActionMask::from_slice(&[true, false, true])).unwrap(), 0);
        assert_eq!(masked_argmax(&[2.0, 2.0, 2.0], ActionMask::all(3)).unwrap(), 0);
        assert_eq!(masked_argmax(&[0.0, 3.0, 3.0], ActionMask::all(3)).unwrap(), 1);
        assert!(matches!(masked_argmax(&[1.0], ActionMask::new(0, 1)), Err(Error::EmptyMask)));
    }

    #[test]
    fn select_action_single_and_empty() {
        let net = DenseNet::init(&[4, 8, 3], &mut seeded(0)).unwrap();
        let mut rng = seeded(1);
        let only = ActionMask::from_slice(&[false, true, false]);
        assert_eq!(select_action(&net, &[0.0; 4], only, 0.0, &mut rng).unwrap(), 1);
        assert!(select_action(&net, &[0.0; 4], ActionMask::new(0, 3), 0.0, &mut rng).is_err());
    }

    fn terminal(obs: f32, action: usize, reward: f32) -> Transition {
        Transition {
            observation: vec![obs, 1.0 - obs],
            action,
            reward,
            next_observation: None,
            next_mask: None,
            terminal: true,
        }
    }

    #[test]
    fn terminal_targets_are_rewards() {
        let mut l = DqnLearner::new(2, 3, ObsCodec::Raw, small(3), &mut seeded(2)).unwrap();
        for (i, r) in [0.25f32, 0.5, 1.0].iter().enumerate() {
            l.push(&terminal(i as f32 / 2.0, i, *r)).unwrap();
        }
        assert_eq!(l.targets(&[0, 1, 2]).unwrap(), vec![0.25, 0.5, 1.0]);
    }

    #[test]
    fn nonterminal_target_is_masked_max() {
        let mut l = DqnLearner::new(2, 3, ObsCodec::Raw, small(1), &mut seeded(3)).unwrap();
        let next = vec![0.3f32, 0.7];
        let mask = ActionMask::from_slice(&[true, false, true]);
        l.push(&Transition {
            observation: vec![1.0, 0.0],
            action: 0,
            reward: 0.0,
            next_observation: Some(next.clone()),
            next_mask: Some(mask),
            terminal: false,
        })
        .unwrap();
        let q = l.target().forward(&next, 1).unwrap();
        assert_eq!(l.targets(&[0]).unwrap(), vec![q[0].max(q[2])]);
    }

    #[test]
    fn memorizes_three_transitions() {
        let mut l = DqnLearner::new(2, 3, ObsCodec::Raw, small(3), &mut seeded(4)).unwrap();
        l.push(&terminal(0.0, 0, 0.2)).unwrap();
        l.push(&terminal(0.5, 1, 0.9)).unwrap();
        l.push(&terminal(1.0, 2, 0.4)).unwrap();
        let mut rng = seeded(5);
        let mut loss = f32::MAX;
        for _ in 0..3000 {
            loss = l.train_step(&mut rng).unwrap().unwrap();
        }
        assert!(loss < 1e-4, "loss {loss}");
    }

    #[test]
    fn cadence() {
        let mut l = DqnLearner::new(2, 3, ObsCodec::Raw, small(1), &mut seeded(6)).unwrap();
        l.push(&terminal(0.0, 0, 0.5)).unwrap();
        let mut rng = seeded(7);
        for r in 1..10 {
            assert_eq!(l.maybe_update(r, &mut rng).unwrap(), UpdateOutcome::default());
        }
        let o = l.maybe_update(20, &mut rng).unwrap();
        assert!(o.loss.is_some() && o.blended);
        let o = l.maybe_update(30, &mut rng).unwrap();
        assert!(o.loss.is_some() && !o.blended);
        assert_eq!(l.train_steps(), 2);
    }

    #[test]
    fn insufficient_buffer_is_noop() {
        let mut l = DqnLearner::new(2, 3, ObsCodec::Raw, small(2), &mut seeded(8)).unwrap();
        l.push(&terminal(0.0, 0, 0.5)).unwrap();
        let before = l.online().clone();
        assert_eq!(l.train_step(&mut seeded(9)).unwrap(), None);
        assert_eq!(l.online(), &before);
    }
}
