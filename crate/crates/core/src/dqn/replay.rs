use crate::env::{ActionMask, Transition};
use crate::error::{Error, Result};
use crate::rng::{uniform_index, WizRng};

/// How observation vectors are stored.
///
/// Base observations only contain values `k / r` with `0 ≤ k ≤ r`, so
/// `Quantized { denom: r }` stores one byte per entry and decodes them to the
/// identical `f32`. History-augmented vectors are continuous and stay raw.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum ObsCodec {
    Quantized { denom: u8 },
    Raw,
}

#[derive(Clone, Debug)]
enum Store {
    Bytes(Vec<u8>),
    Floats(Vec<f32>),
}

impl Store {
    fn new(codec: ObsCodec) -> Store {
        match codec {
            ObsCodec::Quantized { .. } => Store::Bytes(Vec::new()),
            ObsCodec::Raw => Store::Floats(Vec::new()),
        }
    }
}

/// Decoded view of one stored transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredTransition {
    pub observation: Vec<f32>,
    pub action: usize,
    pub reward: f32,
    pub next_observation: Option<Vec<f32>>,
    pub next_mask: ActionMask,
    pub terminal: bool,
}

/// Fixed-capacity ring of transitions with uniform sampling.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    width: usize,
    codec: ObsCodec,
    obs: Store,
    next_obs: Store,
    actions: Vec<u16>,
    rewards: Vec<f32>,
    next_masks: Vec<ActionMask>,
    terminal: Vec<bool>,
    head: usize,
    inserted: u64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, width: usize, codec: ObsCodec) -> Result<Self> {
        if capacity == 0 || width == 0 {
            return Err(Error::Invalid(format!("replay buffer of capacity {capacity} and width {width}")));
        }
        if matches!(codec, ObsCodec::Quantized { denom: 0 }) {
            return Err(Error::Invalid("quantized codec needs a positive denominator".into()));
        }
        Ok(ReplayBuffer {
            capacity,
            width,
            codec,
            obs: Store::new(codec),
            next_obs: Store::new(codec),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_masks: Vec::new(),
            terminal: Vec::new(),
            head: 0,
            inserted: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Total insertions including evicted ones.
    pub fn inserted(&self) -> u64 {
        self.inserted
    }

    fn write(codec: ObsCodec, store: &mut Store, slot: usize, width: usize, values: Option<&[f32]>) -> Result<()> {
        let zeros;
        let values = match values {
            Some(v) => v,
            None => {
                zeros = vec![0.0; width];
                &zeros
            }
        };
        match (store, codec) {
            (Store::Bytes(buf), ObsCodec::Quantized { denom }) => {
                if buf.len() < (slot + 1) * width {
                    buf.resize((slot + 1) * width, 0);
                }
                let d = denom as f32;
                for (b, &x) in buf[slot * width..(slot + 1) * width].iter_mut().zip(values) {
                    let code = (x * d).round();
                    if !(0.0..=d).contains(&code) || code / d != x {
                        return Err(Error::Invalid(format!("value {x} is not a multiple of 1/{denom} in [0, 1]")));
                    }
                    *b = code as u8;
                }
            }
            (Store::Floats(buf), ObsCodec::Raw) => {
                if buf.len() < (slot + 1) * width {
                    buf.resize((slot + 1) * width, 0.0);
                }
                buf[slot * width..(slot + 1) * width].copy_from_slice(values);
            }
            _ => unreachable!("store matches codec"),
        }
        Ok(())
    }

    fn read(&self, store: &Store, slot: usize, out: &mut [f32]) {
        let w = self.width;
        match (store, self.codec) {
            (Store::Bytes(buf), ObsCodec::Quantized { denom }) => {
                let d = denom as f32;
                for (o, &b) in out.iter_mut().zip(&buf[slot * w..(slot + 1) * w]) {
                    *o = b as f32 / d;
                }
            }
            (Store::Floats(buf), ObsCodec::Raw) => out.copy_from_slice(&buf[slot * w..(slot + 1) * w]),
            _ => unreachable!("store matches codec"),
        }
    }

    /// Appends a transition, evicting the oldest one when full.
    pub fn push(&mut self, t: &Transition) -> Result<()> {
        let next_len = t.next_observation.as_ref().map_or(self.width, Vec::len);
        if t.observation.len() != self.width || next_len != self.width {
            return Err(Error::shape(format!(
                "transition of width {}/{next_len}, buffer stores {}",
                t.observation.len(),
                self.width
            )));
        }
        if t.action > u16::MAX as usize {
            return Err(Error::Invalid(format!("action {} too large", t.action)));
        }
        let slot = self.head;
        Self::write(self.codec, &mut self.obs, slot, self.width, Some(&t.observation))?;
        Self::write(self.codec, &mut self.next_obs, slot, self.width, t.next_observation.as_deref())?;
        let mask = t.next_mask.unwrap_or(ActionMask::new(0, 0));
        if slot == self.actions.len() {
            self.actions.push(t.action as u16);
            self.rewards.push(t.reward);
            self.next_masks.push(mask);
            self.terminal.push(t.terminal);
        } else {
            self.actions[slot] = t.action as u16;
            self.rewards[slot] = t.reward;
            self.next_masks[slot] = mask;
            self.terminal[slot] = t.terminal;
        }
        self.head = (self.head + 1) % self.capacity;
        self.inserted += 1;
        Ok(())
    }

    /// Decodes slot `i` (0 is the oldest surviving entry).
    pub fn get(&self, i: usize) -> Option<StoredTransition> {
        if i >= self.len() {
            return None;
        }
        let slot = if self.len() < self.capacity { i } else { (self.head + i) % self.capacity };
        let mut observation = vec![0.0; self.width];
        self.read(&self.obs, slot, &mut observation);
        let next_observation = (!self.terminal[slot]).then(|| {
            let mut v = vec![0.0; self.width];
            self.read(&self.next_obs, slot, &mut v);
            v
        });
        Some(StoredTransition {
            observation,
            action: self.actions[slot] as usize,
            reward: self.rewards[slot],
            next_observation,
            next_mask: self.next_masks[slot],
            terminal: self.terminal[slot],
        })
    }

    /// Draws `n` slot indices uniformly with replacement.
    pub fn sample_slots(&self, n: usize, rng: &mut WizRng) -> Vec<usize> {
        (0..n).map(|_| uniform_index(rng, self.len())).collect()
    }

    /// Batched decode of the given physical slots.
    pub(crate) fn gather(&self, slots: &[usize], obs: &mut Vec<f32>, next_obs: &mut Vec<f32>) {
        let w = self.width;
        obs.resize(slots.len() * w, 0.0);
        next_obs.resize(slots.len() * w, 0.0);
        for (k, &s) in slots.iter().enumerate() {
            self.read(&self.obs, s, &mut obs[k * w..(k + 1) * w]);
            self.read(&self.next_obs, s, &mut next_obs[k * w..(k + 1) * w]);
        }
    }

    pub(crate) fn action(&self, slot: usize) -> usize {
        self.actions[slot] as usize
    }

    pub(crate) fn reward(&self, slot: usize) -> f32 {
        self.rewards[slot]
    }

    pub(crate) fn next_mask(&self, slot: usize) -> ActionMask {
        self.next_masks[slot]
    }

    pub(crate) fn is_terminal(&self, slot: usize) -> bool {
        self.terminal[slot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn t(obs: Vec<f32>, action: usize, terminal: bool) -> Transition {
        let w = obs.len();
        Transition {
            observation: obs,
            action,
            reward: if terminal { 0.5 } else { 0.0 },
            next_observation: (!terminal).then(|| vec![1.0; w]),
            next_mask: (!terminal).then(|| ActionMask::all(3)),
            terminal,
        }
    }

    #[test]
    fn quantized_round_trip_is_exact() {
        let mut buf = ReplayBuffer::new(4, 3, ObsCodec::Quantized { denom: 3 }).unwrap();
        let obs = vec![1.0, 2.0 / 3.0, 0.0];
        buf.push(&t(obs.clone(), 2, false)).unwrap();
        let back = buf.get(0).unwrap();
        assert_eq!(back.observation, obs);
        assert_eq!(back.next_observation, Some(vec![1.0; 3]));
        assert!(buf.push(&t(vec![0.5, 0.0, 0.0], 0, true)).is_err());
    }

    #[test]
    fn eviction_keeps_newest() {
        let mut buf = ReplayBuffer::new(3, 1, ObsCodec::Raw).unwrap();
        for i in 0..30 {
            buf.push(&t(vec![i as f32], i, true)).unwrap();
            assert!(buf.len() <= 3);
        }
        let kept: Vec<usize> = (0..3).map(|i| buf.get(i).unwrap().action).collect();
        assert_eq!(kept, vec![27, 28, 29]);
        assert_eq!(buf.inserted(), 30);
    }

    #[test]
    fn sampling_covers_contents() {
        let mut buf = ReplayBuffer::new(10, 1, ObsCodec::Raw).unwrap();
        for i in 0..4 {
            buf.push(&t(vec![0.0], i, true)).unwrap();
        }
        let mut seen = [0usize; 4];
        for s in buf.sample_slots(4000, &mut seeded(1)) {
            seen[s] += 1;
        }
        assert!(seen.iter().all(|&c| c > 850 && c < 1150), "{seen:?}");
    }
}
