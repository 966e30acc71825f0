use std::path::Path;

use super::table::{truth_table, NUM_LOCATIONS};
use crate::error::{Error, Result};
use crate::game::{RoundState, Seat, DECK_SIZE};
use crate::history::LossTrace;
use crate::nn::{softmax_cross_entropy, softmax_rows, Adam, Checkpoint, DenseNet};
use crate::rng::{shuffle, WizRng};

pub const ESTIMATOR_HIDDEN: [usize; 3] = [200, 200, 300];
const OUTPUTS: usize = DECK_SIZE * NUM_LOCATIONS;

/// One supervised example: the observer's network input and the true
/// location column of every card, with seats relative to the observer.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSample {
    pub features: Vec<f32>,
    pub target: [u8; DECK_SIZE],
}

/// Network input of the estimator: exactly the features the playing network sees.
pub fn estimator_input(features: &[f32]) -> &[f32] {
    features
}

pub fn estimator_target(state: &RoundState, observer: Seat) -> [u8; DECK_SIZE] {
    truth_table(state).relative_to(observer).locations().map(|l| l.column() as u8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub buffer: usize,
    pub epochs: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            hidden: ESTIMATOR_HIDDEN.to_vec(),
            learning_rate: 0.001,
            batch_size: 1024,
            buffer: 600_000,
            epochs: 100,
        }
    }
}

/// Dense network predicting a 9-way location distribution for every card.
#[derive(Clone, Debug, PartialEq)]
pub struct StateEstimator {
    net: DenseNet<f32>,
}

impl StateEstimator {
    /// Output weights start small so initial rows are close to uniform.
    pub fn new(input: usize, hidden: &[usize], rng: &mut WizRng) -> Result<Self> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(OUTPUTS);
        let mut net = DenseNet::init(&sizes, rng)?;
        let last = net.num_layers() - 1;
        net.layer_mut(last).0.iter_mut().for_each(|w| *w *= 0.01);
        Ok(StateEstimator { net })
    }

    pub fn from_net(net: DenseNet<f32>) -> Result<Self> {
        if net.output_dim() != OUTPUTS {
            return Err(Error::shape(format!("estimator needs {OUTPUTS} outputs, got {}", net.output_dim())));
        }
        Ok(StateEstimator { net })
    }

    pub fn net(&self) -> &DenseNet<f32> {
        &self.net
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Row-stochastic `60 × 9` estimate.
    pub fn predict(&self, features: &[f32]) -> Result<Vec<f32>> {
        let logits = self.net.forward(features, 1)?;
        Ok(softmax_rows(&logits, NUM_LOCATIONS))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut ck = Checkpoint::new();
        ck.put_dense("estimator", &self.net);
        ck.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        Self::from_net(ck.dense("estimator", &path.display().to_string())?)
    }

    fn batch_step(&mut self, adam: &mut Adam<f32>, batch: &[&EstimatorSample]) -> Result<f32> {
        let w = self.input_dim();
        let mut input = Vec::with_capacity(batch.len() * w);
        let mut target = vec![0.0; batch.len() * OUTPUTS];
        for (k, s) in batch.iter().enumerate() {
            if s.features.len() != w {
                return Err(Error::shape(format!("estimator sample of width {}, net takes {w}", s.features.len())));
            }
            input.extend_from_slice(&s.features);
            for (card, &col) in s.target.iter().enumerate() {
                target[k * OUTPUTS + card * NUM_LOCATIONS + col as usize] = 1.0;
            }
        }
        let cache = self.net.forward_train(&input, batch.len())?;
        let (loss, _, grad) = softmax_cross_entropy(cache.output(), &target, NUM_LOCATIONS)?;
        let grads = self.net.backward(&cache, &grad, false)?;
        adam.apply(self.net.params_mut(), &grads.params)?;
        Ok(loss)
    }

    /// Minimizes the mean per-card cross-entropy over the newest
    /// `config.buffer` samples; one epoch is one shuffled pass.
    pub fn train(&mut self, data: &[EstimatorSample], config: &EstimatorConfig, rng: &mut WizRng) -> Result<LossTrace> {
        if data.is_empty() || config.batch_size == 0 {
            return Err(Error::Invalid("estimator training needs samples and a positive batch size".into()));
        }
        let data = &data[data.len().saturating_sub(config.buffer)..];
        let mut adam = Adam::new(self.net.params().len(), config.learning_rate);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut epochs = Vec::with_capacity(config.epochs);
        for _ in 0..config.epochs {
            shuffle(rng, &mut order);
            let (mut sum, mut n) = (0.0f64, 0usize);
            for idx in order.chunks(config.batch_size) {
                let batch: Vec<&EstimatorSample> = idx.iter().map(|&i| &data[i]).collect();
                sum += self.batch_step(&mut adam, &batch)? as f64 * idx.len() as f64;
                n += idx.len();
            }
            epochs.push((sum / n as f64) as f32);
        }
        Ok(LossTrace { epochs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::deal;
    use crate::rng::seeded;

    #[test]
    fn untrained_rows_are_near_uniform() {
        let est = StateEstimator::new(147, &ESTIMATOR_HIDDEN, &mut seeded(1)).unwrap();
        let x: Vec<f32> = (0..147).map(|i| (i % 3 == 0) as u8 as f32).collect();
        let rows = est.predict(&x).unwrap();
        let max_entropy = (NUM_LOCATIONS as f32).ln();
        for row in rows.chunks(NUM_LOCATIONS) {
            assert!((row.iter().sum::<f32>() - 1.0).abs() < 1e-6);
            let h: f32 = -row.iter().map(|p| p * p.ln()).sum::<f32>();
            assert!(h > 0.99 * max_entropy, "entropy {h}");
        }
    }

    #[test]
    fn memorizes_ten_samples() {
        let mut rng = seeded(2);
        let data: Vec<EstimatorSample> = (0..10)
            .map(|i| {
                let st = deal(&mut rng, 3, i % 4).unwrap();
                let mut features = vec![0.0; 20];
                features[i] = 1.0;
                EstimatorSample { features, target: estimator_target(&st, 0) }
            })
            .collect();
        let mut est = StateEstimator::new(20, &[32, 32, 32], &mut rng).unwrap();
        let cfg = EstimatorConfig { batch_size: 10, epochs: 1500, learning_rate: 0.003, ..Default::default() };
        let trace = est.train(&data, &cfg, &mut rng).unwrap();
        assert!(*trace.epochs.last().unwrap() < 1e-3, "{}", trace.epochs.last().unwrap());
    }
}
