//! Layered run configuration.
//!
//! Values are addressed as `section.key`. Built-in defaults are overridden by
//! a config file, which is overridden by explicit settings (command-line
//! flags). The file format is line based:
//!
//! ```text
//! # comment
//! [dqn]
//! learning_rate = 0.0005
//! hidden = 256, 256, 256
//! ```

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Every recognised key with its default and a one-line description.
pub const DEFAULTS: &[(&str, &str, &str)] = &[
    ("train.rounds_total", "200000", "self-play rounds per round number"),
    ("train.window", "4000", "rounds per progress CSV row"),
    ("train.checkpoint_every", "0", "intermediate checkpoint interval in rounds, 0 = off"),
    ("train.epsilon_start", "1.0", "initial exploration rate"),
    ("train.codec", "quantized", "replay observation storage: quantized or raw"),
    ("dqn.hidden", "256,256,256", "hidden layer widths"),
    ("dqn.learning_rate", "0.0005", "Adam learning rate"),
    ("dqn.gamma", "1.0", "discount factor"),
    ("dqn.batch_size", "1024", "minibatch size"),
    ("dqn.train_every", "10", "rounds between training steps"),
    ("dqn.blend_every", "20", "rounds between target blends"),
    ("dqn.tau", "0.1", "target blend factor"),
    ("dqn.bid_capacity", "300000", "bidding replay capacity"),
    ("dqn.play_capacity", "600000", "playing replay capacity"),
    ("retrain.epsilon_start", "0.3", "initial exploration rate when warm starting"),
    ("retrain.opponents", "random,random,random", "fixed opponents, comma separated agent specs"),
    ("history.hidden_sizes", "50,100,150", "encoder sizes trained in one sweep"),
    ("history.sequences", "10000", "sequences generated and kept per round"),
    ("history.batch_size", "64", "minibatch size"),
    ("history.learning_rate", "0.005", "Adam learning rate"),
    ("history.epochs", "200", "passes over the sequence buffer"),
    ("history.head_bias", "-4.0", "initial output bias of the prediction head"),
    ("estimator.hidden", "200,200,300", "hidden layer widths"),
    ("estimator.learning_rate", "0.001", "Adam learning rate"),
    ("estimator.batch_size", "1024", "minibatch size"),
    ("estimator.buffer", "600000", "newest samples kept for training"),
    ("estimator.epochs", "100", "passes over the sample buffer"),
    ("estimator.sample_rounds", "20000", "rounds played to collect samples"),
    ("eval.rounds_per_position", "10000", "evaluation rounds per bidding position"),
    ("eval.games", "1000", "full games for winning shares"),
    ("run.workers", "0", "simulation threads, 0 = all cores"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config { values: DEFAULTS.iter().map(|(k, v, _)| (k.to_string(), v.to_string())).collect() }
    }
}

fn config_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Config { key: key.to_string(), reason: reason.into() }
}

impl Config {
    /// Overrides one value; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(v) => {
                *v = value.trim().to_string();
                Ok(())
            }
            None => Err(config_err(key, "unknown key")),
        }
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(assignment, "expected section.key=value"))?;
        self.set(k.trim(), v)
    }

    /// Applies the contents of a config file on top of the current values.
    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        let mut section = String::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, format!("line {}: unterminated section header", n + 1)))?;
                section = name.trim().to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("line {}: expected key = value", n + 1)))?;
            let k = k.trim();
            let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
            self.set(&key, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text)
    }

    pub fn raw(&self, key: &str) -> Result<&str> {
        self.values.get(key).map(String::as_str).ok_or_else(|| config_err(key, "unknown key"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.parse().map_err(|e: T::Err| config_err(key, format!("`{raw}`: {e}")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let raw = self.raw(key)?;
        raw.split(',')
            .map(|s| s.trim().parse().map_err(|e: T::Err| config_err(key, format!("`{}`: {e}", s.trim()))))
            .collect()
    }

    pub fn positive(&self, key: &str) -> Result<u64> {
        match self.get::<u64>(key)? {
            0 => Err(config_err(key, "must be positive")),
            v => Ok(v),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}
