use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::SchemeId;
use crate::channel::{ChannelProcessConfig, CELL_RADIUS_M, MIN_DISTANCE_M};
use crate::error::{Error, Result};
use crate::frontend::{Codebook, Layout, QuantizerModel, SystemModel};
use crate::solver::{dbm_to_mw, DualOptions, RateEstimator, RsscaOptions, StepSchedules};

/// Everything that determines one experiment. Read from TOML; every key can
/// be overridden with a dotted `key=value` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Receive antennas `M`.
    pub antennas: usize,
    /// RF chains `S`.
    pub chains: usize,
    /// DFT codewords `N`.
    pub codewords: usize,
    /// Users `K`.
    pub users: usize,
    /// ADC resolution `q`.
    pub bits: u32,
    pub noise_dbm: f64,
    pub p_max_dbm: f64,
    /// Common rate target in bps/Hz, used when `targets` is empty.
    pub target: f64,
    /// Per-user targets; overrides `target` when non-empty.
    pub targets: Vec<f64>,
    /// Training frames `L_f` before rounding.
    pub frames: usize,
    /// Frames after rounding with the selection held fixed.
    pub refine_frames: usize,
    pub eval_samples: usize,
    /// Samples used to fix the blocks of the baselines.
    pub burn_in: usize,
    pub tau: f64,
    /// Slack below the target still counted as meeting it.
    pub tolerance: f64,
    pub seed: u64,
    pub replications: usize,
    pub scheme: SchemeId,
    /// Slots of the feasibility experiment.
    pub realizations: usize,
    pub min_radius_m: f64,
    pub cell_radius_m: f64,
    pub estimator: RateEstimator,
    pub schedules: StepSchedules,
    pub dual: DualOptions,
    pub channel: ChannelProcessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            antennas: 64,
            chains: 12,
            codewords: 16,
            users: 12,
            bits: 3,
            noise_dbm: -114.0,
            p_max_dbm: 10.0,
            target: 1.0,
            targets: Vec::new(),
            frames: 150,
            refine_frames: 300,
            eval_samples: 500,
            burn_in: 100,
            tau: 1e-2,
            tolerance: 0.05,
            seed: 0,
            replications: 20,
            scheme: SchemeId::Shc,
            realizations: 500,
            min_radius_m: MIN_DISTANCE_M,
            cell_radius_m: CELL_RADIUS_M,
            estimator: RateEstimator::AllSamples,
            schedules: StepSchedules::default(),
            dual: DualOptions::default(),
            channel: ChannelProcessConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the TOML
    /// form (`channel.ar_coefficient=0.5`); values are parsed as TOML and
    /// fall back to plain strings (`scheme=mm`).
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut table = toml::Table::try_from(self).map_err(|e| Error::Parse(e.to_string()))?;
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("override `{item}` is not key=value")))?;
            set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
        }
        let cfg: Self = table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, s, n, k) = (self.antennas, self.chains, self.codewords, self.users);
        if !(k >= 1 && k <= s && s <= n && n <= m) {
            return Err(Error::Config(format!(
                "dimensions must satisfy 1 <= K <= S <= N <= M, got K={k} S={s} N={n} M={m}"
            )));
        }
        if self.bits == 0 {
            return Err(Error::Config("bits must be at least 1".into()));
        }
        if self.frames == 0 {
            return Err(Error::Config("frames must be at least 1".into()));
        }
        if self.eval_samples < 100 {
            return Err(Error::Config(format!("eval_samples must be at least 100, got {}", self.eval_samples)));
        }
        if self.burn_in == 0 || self.replications == 0 {
            return Err(Error::Config("burn_in and replications must be positive".into()));
        }
        if !self.targets.is_empty() && self.targets.len() != k {
            return Err(Error::dim("targets", k, self.targets.len()));
        }
        if self.rate_targets().iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("rate targets must be finite and nonnegative".into()));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.min_radius_m > 0.0 && self.min_radius_m <= self.cell_radius_m) {
            return Err(Error::Config("radii must satisfy 0 < min_radius_m <= cell_radius_m".into()));
        }
        self.schedules.validate(self.frames.max(self.refine_frames))?;
        self.channel.validate()
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let text = self.to_toml().unwrap_or_default();
        Sha256::digest(text.as_bytes())[..8]
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn layout(&self) -> Result<Layout> {
        Layout::new(self.users, self.codewords, self.chains)
    }

    pub fn model(&self) -> Result<SystemModel> {
        SystemModel::new(
            Codebook::dft(self.antennas, self.codewords)?,
            QuantizerModel::from_bits(self.bits)?,
            dbm_to_mw(self.noise_dbm),
        )
    }

    pub fn rate_targets(&self) -> Vec<f64> {
        if self.targets.is_empty() {
            vec![self.target; self.users]
        } else {
            self.targets.clone()
        }
    }

    pub fn p_max(&self) -> Vec<f64> {
        vec![dbm_to_mw(self.p_max_dbm); self.users]
    }

    pub fn solver_options(&self) -> RsscaOptions {
        RsscaOptions {
            tau: self.tau,
            schedules: self.schedules,
            estimator: self.estimator,
            dual: self.dual,
            refine_iterations: self.refine_frames,
            ..RsscaOptions::new(self.rate_targets(), self.p_max(), self.frames)
        }
    }

    /// Seeds of the replications: `seed, seed + 1, ...`.
    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.seed;
        (0..self.replications as u64).map(move |r| base + r)
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            current.insert(part.to_string(), value);
            return Ok(());
        }
        current = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{part}` in `{key}` is not a table")))?;
    }
    Err(Error::Parse("empty override key".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = ExperimentConfig::from_toml("users = 4\n[channel]\npath_count = 3\n").unwrap();
        assert_eq!(cfg.users, 4);
        assert_eq!(cfg.channel.path_count, 3);
        assert_eq!(cfg.antennas, 64);
        assert!(ExperimentConfig::from_toml("nonsense = 1").is_err());
    }

    #[test]
    fn overrides() {
        let cfg = ExperimentConfig::default()
            .with_overrides(&["users=4", "scheme=mm", "channel.ar_coefficient=0.5", "noise_dbm=-100"])
            .unwrap();
        assert_eq!(cfg.users, 4);
        assert_eq!(cfg.scheme, SchemeId::Mm);
        assert_eq!(cfg.channel.ar_coefficient, 0.5);
        assert_eq!(cfg.noise_dbm, -100.0);
        assert_ne!(cfg.hash(), ExperimentConfig::default().hash());
        assert!(ExperimentConfig::default().with_overrides(&["users=13"]).is_err());
        assert!(ExperimentConfig::default().with_overrides(&["users"]).is_err());
    }

    #[test]
    fn targets_and_seeds() {
        let cfg = ExperimentConfig { users: 2, chains: 2, seed: 7, replications: 3, ..Default::default() };
        assert_eq!(cfg.rate_targets(), vec![1.0, 1.0]);
        assert_eq!(cfg.seeds().collect::<Vec<_>>(), vec![7, 8, 9]);
        assert!(ExperimentConfig { targets: vec![1.0], ..cfg }.validate().is_err());
    }
}
