//! Step-size sequences for the smoothing (`alpha`) and tracking (`beta`) updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// `offset / (offset + l)`.
    Harmonic { offset: f64 },
    /// `(1 + l)^(-exponent)`.
    Power { exponent: f64 },
    Constant { value: f64 },
}

impl Schedule {
    pub fn at(&self, l: usize) -> f64 {
        let l = l as f64;
        match *self {
            Schedule::Harmonic { offset } => offset / (offset + l),
            Schedule::Power { exponent } => (1.0 + l).powf(-exponent),
            Schedule::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedules {
    pub alpha: Schedule,
    pub beta: Schedule,
}

impl Default for StepSchedules {
    fn default() -> Self {
        default_schedules()
    }
}

/// `alpha = 5 / (5 + l)`, `beta = (1 + l)^(-2/3)`.
pub fn default_schedules() -> StepSchedules {
    StepSchedules {
        alpha: Schedule::Harmonic { offset: 5.0 },
        beta: Schedule::Power { exponent: 2.0 / 3.0 },
    }
}

impl StepSchedules {
    pub fn alpha(&self, l: usize) -> f64 {
        self.alpha.at(l)
    }

    pub fn beta(&self, l: usize) -> f64 {
        self.beta.at(l)
    }

    /// Checks the convergence conditions numerically over `horizon` iterations:
    /// both sequences in `(0, 1]` and nonincreasing, and `alpha / beta`
    /// decaying to at most a tenth of its initial value.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        let horizon = horizon.max(2);
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for l in 0..horizon {
            let (a, b) = (self.alpha(l), self.beta(l));
            if !(a > 0.0 && a <= 1.0 && b > 0.0 && b <= 1.0) {
                return Err(Error::Config(format!("step sizes at l = {l} outside (0, 1]: alpha {a}, beta {b}")));
            }
            if a > prev.0 || b > prev.1 {
                return Err(Error::Config(format!("step sizes increase at l = {l}")));
            }
            prev = (a, b);
        }
        // the ratio condition is asymptotic, so check it far beyond the run horizon
        let far = horizon.max(1_000_000);
        let ratio0 = self.alpha(0) / self.beta(0);
        let ratio = self.alpha(far) / self.beta(far);
        if !(ratio < 0.1 * ratio0) {
            return Err(Error::Config(format!(
                "alpha / beta does not decay: {ratio0} at l = 0, {ratio} at l = {far}"
            )));
        }
        Ok(())
    }
}
