use crate::error::{Error, Result};

pub const EPS_START: f64 = 1.0;
pub const EPS_END: f64 = 0.01;
/// Fraction of training over which ε decays to its floor.
pub const DECAY_FRACTION: f64 = 0.9;

/// Exponential decay `ε(t) = max(end, start · (end / start)^(t / (0.9 · total)))`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub total: u64,
}

impl EpsilonSchedule {
    pub fn new(start: f64, total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::ZeroHorizon(total));
        }
        if !(start > 0.0 && start <= 1.0) {
            return Err(Error::Config { key: "epsilon_start".into(), reason: format!("{start} is not in (0, 1]") });
        }
        Ok(EpsilonSchedule { start, end: EPS_END, total })
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.start <= self.end {
            return self.end;
        }
        let horizon = DECAY_FRACTION * self.total as f64;
        let x = self.start * (self.end / self.start).powf(t.max(0.0) / horizon);
        x.max(self.end)
    }
}

/// ε at round `t` of `total` for the default 1.0 → 0.01 schedule.
pub fn epsilon(t: f64, total: u64) -> Result<f64> {
    Ok(EpsilonSchedule::new(EPS_START, total)?.value(t))
}
