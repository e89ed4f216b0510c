use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::icsi::delayed_icsi_design;
use crate::baselines::{run_baseline, SchemeId, SchemeSpec};
use crate::channel::{draw_channel, evolve_channel, ChannelSample, ChannelStream, UserGeometry};
use crate::error::{Error, Result};
use crate::frontend::{DesignPoint, Layout, SystemModel};
use crate::solver::{mw_to_dbm, run_rssca, OpCounts, SolveTrace};

/// Random stream ids under one seed. Every consumer owns its stream, so
/// training and evaluation samples never overlap.
pub mod streams {
    pub const GEOMETRY: u64 = 0;
    pub const TRAINING: u64 = 1;
    pub const EVALUATION: u64 = 2;
    pub const BURN_IN: u64 = 3;
    pub const SCHEME: u64 = 4;
    pub const SLOTS: u64 = 5;
}

/// Relative band used to locate the settling frame of a trace.
pub const SETTLING_BAND: f64 = 0.02;

/// One user drop and the system it is observed through.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ExperimentConfig,
    pub seed: u64,
    pub model: SystemModel,
    pub layout: Layout,
    pub geometry: UserGeometry,
}

impl Scenario {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeded(seed, streams::GEOMETRY);
        let geometry = UserGeometry::drop_uniform(&mut rng, cfg.users, cfg.min_radius_m, cfg.cell_radius_m)?;
        Ok(Self {
            cfg: cfg.clone(),
            seed,
            model: cfg.model()?,
            layout: cfg.layout()?,
            geometry,
        })
    }

    pub fn stream(&self, id: u64) -> Result<ChannelStream> {
        ChannelStream::new(self.seed, id, self.geometry.clone(), self.cfg.channel.clone(), self.cfg.antennas)
    }

    pub fn evaluation_samples(&self) -> Result<Vec<ChannelSample>> {
        self.stream(streams::EVALUATION)?.take_samples(self.cfg.eval_samples)
    }

    pub fn burn_in_samples(&self) -> Result<Vec<ChannelSample>> {
        self.stream(streams::BURN_IN)?.take_samples(self.cfg.burn_in)
    }

    /// Held-out average rates and whether each meets its target within the tolerance.
    pub fn evaluate(&self, design: &DesignPoint) -> Result<(Vec<f64>, bool)> {
        let rates = self.model.average_rates(design, &self.evaluation_samples()?)?;
        let feasible = meets_targets(&rates, &self.cfg.rate_targets(), self.cfg.tolerance);
        Ok((rates, feasible))
    }
}

fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn meets_targets(rates: &[f64], targets: &[f64], tolerance: f64) -> bool {
    rates.iter().zip(targets).all(|(r, t)| *r >= t - tolerance)
}

/// Summary of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub scheme: SchemeId,
    pub power_mw: f64,
    pub power_dbm: f64,
    /// Held-out average rate of every user.
    pub rates: Vec<f64>,
    pub feasible: bool,
    pub frames: usize,
    /// First frame after which the objective stays within [`SETTLING_BAND`] of its final value.
    pub settling_frame: Option<usize>,
    pub ops: OpCounts,
}

impl RunRecord {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub design: DesignPoint,
    pub trace: SolveTrace,
}

/// Trains `scheme` on the drop of `seed` and evaluates it on held-out samples.
/// A `warm` start replaces the scheme's own initialization.
pub fn run_scheme(cfg: &ExperimentConfig, seed: u64, scheme: SchemeId, warm: Option<&DesignPoint>) -> Result<RunOutput> {
    run_inner(cfg, seed, scheme, warm).map_err(|e| e.at_seed(seed))
}

fn run_inner(cfg: &ExperimentConfig, seed: u64, scheme: SchemeId, warm: Option<&DesignPoint>) -> Result<RunOutput> {
    let scenario = Scenario::new(cfg, seed)?;
    let spec = SchemeSpec::new(scheme);
    let training = scenario.stream(streams::TRAINING)?;
    let mut options = cfg.solver_options();
    let out = match warm {
        Some(initial) => {
            options.frozen = spec.frozen_blocks.clone();
            run_rssca(&scenario.model, initial, training, &options)?
        }
        None => {
            let burn_in = scenario.burn_in_samples()?;
            let mut rng = seeded(seed, streams::SCHEME);
            run_baseline(&spec, &scenario.model, scenario.layout, &options, &burn_in, &mut rng, training)?
        }
    };
    let (rates, feasible) = scenario.evaluate(&out.design)?;
    let power_mw = out.design.total_power();
    Ok(RunOutput {
        record: RunRecord {
            seed,
            scheme,
            power_mw,
            power_dbm: mw_to_dbm(power_mw),
            rates,
            feasible,
            frames: out.trace.len(),
            settling_frame: out.trace.settling_iteration(SETTLING_BAND),
            ops: out.ops,
        },
        design: out.design,
        trace: out.trace,
    })
}

/// Aggregate over the replications of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config_hash: String,
    pub scheme: SchemeId,
    pub replications: usize,
    pub completed: usize,
    /// Mean total power over completed runs.
    pub mean_power_mw: f64,
    pub mean_power_dbm: f64,
    /// Mean total power over runs that met every target.
    pub mean_feasible_power_dbm: Option<f64>,
    pub feasible_fraction: f64,
    pub records: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    pub trace_files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

impl ExperimentResult {
    pub fn from_runs(cfg: &ExperimentConfig, scheme: SchemeId, runs: &[Result<RunOutput>]) -> Self {
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (seed, run) in cfg.seeds().zip(runs) {
            match run {
                Ok(out) => records.push(out.record.clone()),
                Err(e) => failures.push(RunFailure {
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        let mean = |rs: &[&RunRecord]| rs.iter().map(|r| r.power_mw).sum::<f64>() / rs.len() as f64;
        let all: Vec<&RunRecord> = records.iter().collect();
        let feasible: Vec<&RunRecord> = records.iter().filter(|r| r.feasible).collect();
        let mean_power_mw = if all.is_empty() { f64::NAN } else { mean(&all) };
        Self {
            config_hash: cfg.hash(),
            scheme,
            replications: cfg.replications,
            completed: records.len(),
            mean_power_mw,
            mean_power_dbm: mw_to_dbm(mean_power_mw),
            mean_feasible_power_dbm: (!feasible.is_empty()).then(|| mw_to_dbm(mean(&feasible))),
            feasible_fraction: if all.is_empty() { 0.0 } else { feasible.len() as f64 / all.len() as f64 },
            records,
            failures,
            trace_files: Vec::new(),
        }
    }
}

/// Every replication of `cfg.scheme`, in seed order.
pub fn run_replications(cfg: &ExperimentConfig, warm: Option<&DesignPoint>) -> Vec<Result<RunOutput>> {
    let seeds: Vec<u64> = cfg.seeds().collect();
    seeds.par_iter().map(|&seed| run_scheme(cfg, seed, cfg.scheme, warm)).collect()
}

/// Convergence experiment: full traces of every replication.
pub fn run_convergence(cfg: &ExperimentConfig, warm: Option<&DesignPoint>) -> (ExperimentResult, Vec<Result<RunOutput>>) {
    let runs = run_replications(cfg, warm);
    (ExperimentResult::from_runs(cfg, cfg.scheme, &runs), runs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    Users,
    Antennas,
    Bits,
}

impl SweepAxis {
    pub fn apply(&self, cfg: &ExperimentConfig, value: usize) -> Result<ExperimentConfig> {
        let mut cfg = cfg.clone();
        match self {
            SweepAxis::Users => cfg.users = value,
            SweepAxis::Antennas => cfg.antennas = value,
            SweepAxis::Bits => cfg.bits = value as u32,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "users" => Ok(SweepAxis::Users),
            "antennas" => Ok(SweepAxis::Antennas),
            "bits" => Ok(SweepAxis::Bits),
            _ => Err(Error::Parse(format!("unknown axis `{s}` (expected users, antennas or bits)"))),
        }
    }
}

/// One `(axis value, scheme, seed)` record. Failed runs keep their row with
/// `power_dbm = NaN`, `feasible = false` and the error text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: usize,
    pub scheme: SchemeId,
    pub seed: u64,
    pub power_dbm: f64,
    pub feasible: bool,
    pub min_rate: f64,
    pub config_hash: String,
    pub error: String,
}

/// Runs every scheme at every axis value on common seeds.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis, values: &[usize], schemes: &[SchemeId]) -> Result<Vec<SweepRow>> {
    let mut jobs = Vec::new();
    for &value in values {
        let point = axis.apply(cfg, value)?;
        for &scheme in schemes {
            for seed in point.seeds() {
                jobs.push((value, point.clone(), scheme, seed));
            }
        }
    }
    Ok(jobs
        .par_iter()
        .map(|(value, point, scheme, seed)| {
            let config_hash = point.hash();
            match run_scheme(point, *seed, *scheme, None) {
                Ok(out) => SweepRow {
                    axis_value: *value,
                    scheme: *scheme,
                    seed: *seed,
                    power_dbm: out.record.power_dbm,
                    feasible: out.record.feasible,
                    min_rate: out.record.min_rate(),
                    config_hash,
                    error: String::new(),
                },
                Err(e) => SweepRow {
                    axis_value: *value,
                    scheme: *scheme,
                    seed: *seed,
                    power_dbm: f64::NAN,
                    feasible: false,
                    min_rate: f64::NAN,
                    config_hash,
                    error: e.to_string(),
                },
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub config_hash: String,
    pub realizations: usize,
    pub ar_coefficient: f64,
    pub shc_probability: f64,
    /// Present when the delayed contender was evaluated.
    pub delayed_probability: Option<f64>,
    pub shc_mean_power_dbm: f64,
    pub delayed_mean_power_dbm: Option<f64>,
    pub failures: Vec<RunFailure>,
}

/// Fraction of slots in which every user's instantaneous rate meets its
/// target within the tolerance.
///
/// The realizations are split evenly over the replications. Each drop trains
/// one statistical design; each slot then draws a fresh channel, evolves it
/// one autoregressive step and evaluates on the evolved channel. With
/// `delayed`, a per-slot design computed from the pre-evolution channel is
/// judged on the same slots.
pub fn feasibility_experiment(cfg: &ExperimentConfig, delayed: bool) -> Result<FeasibilityReport> {
    if cfg.realizations == 0 {
        return Err(Error::Config("the feasibility experiment needs at least one realization".into()));
    }
    let per_seed = cfg.realizations.div_ceil(cfg.replications);
    let seeds: Vec<u64> = cfg.seeds().collect();
    let outcomes: Vec<Result<SlotTally>> = seeds
        .par_iter()
        .map(|&seed| feasibility_drop(cfg, seed, per_seed, delayed).map_err(|e| e.at_seed(seed)))
        .collect();
    let mut total = SlotTally::default();
    let mut failures = Vec::new();
    for (seed, outcome) in seeds.iter().zip(outcomes) {
        match outcome {
            Ok(t) => total.add(&t),
            Err(e) => failures.push(RunFailure {
                seed: *seed,
                error: e.to_string(),
            }),
        }
    }
    if total.slots == 0 {
        return Err(Error::Config("no realization completed".into()));
    }
    let n = total.slots as f64;
    Ok(FeasibilityReport {
        config_hash: cfg.hash(),
        realizations: total.slots,
        ar_coefficient: cfg.channel.ar_coefficient,
        shc_probability: total.shc_ok as f64 / n,
        delayed_probability: delayed.then(|| total.delayed_ok as f64 / n),
        shc_mean_power_dbm: mw_to_dbm(total.shc_power / total.drops as f64),
        delayed_mean_power_dbm: delayed.then(|| mw_to_dbm(total.delayed_power / n)),
        failures,
    })
}

#[derive(Debug, Clone, Default)]
struct SlotTally {
    drops: usize,
    slots: usize,
    shc_ok: usize,
    delayed_ok: usize,
    shc_power: f64,
    delayed_power: f64,
}

impl SlotTally {
    fn add(&mut self, other: &SlotTally) {
        self.drops += other.drops;
        self.slots += other.slots;
        self.shc_ok += other.shc_ok;
        self.delayed_ok += other.delayed_ok;
        self.shc_power += other.shc_power;
        self.delayed_power += other.delayed_power;
    }
}

fn feasibility_drop(cfg: &ExperimentConfig, seed: u64, slots: usize, delayed: bool) -> Result<SlotTally> {
    let shc = run_inner(cfg, seed, SchemeId::Shc, None)?;
    let scenario = Scenario::new(cfg, seed)?;
    let targets = cfg.rate_targets();
    let p_max = cfg.p_max();
    let mut rng = seeded(seed, streams::SLOTS);
    let prep = scenario.model.prepare(&shc.design)?;
    let mut tally = SlotTally {
        drops: 1,
        shc_power: shc.design.total_power(),
        ..Default::default()
    };
    for slot in 0..slots {
        let before = draw_channel(&mut rng, &scenario.geometry, &cfg.channel, cfg.antennas, slot as u64)?;
        let now = evolve_channel(&before, &mut rng, &scenario.geometry, &cfg.channel)?;
        let beam = scenario.model.beamspace(&now)?;
        let rates = scenario.model.rates(&prep, &beam)?;
        tally.slots += 1;
        tally.shc_ok += usize::from(meets_targets(&rates, &targets, cfg.tolerance));
        if delayed {
            let x = delayed_icsi_design(&scenario.model, &before, cfg.chains, &targets, &p_max)?;
            let rates = scenario.model.rates(&scenario.model.prepare(&x)?, &beam)?;
            tally.delayed_ok += usize::from(meets_targets(&rates, &targets, cfg.tolerance));
            tally.delayed_power += x.total_power();
        }
    }
    Ok(tally)
}

/// Per-frame kernel counts of one scheme next to its leading-order model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCountRow {
    pub scheme: SchemeId,
    pub frames: usize,
    pub rate_evaluations: f64,
    pub gradient_evaluations: f64,
    pub closed_form_solves: f64,
    pub dual_iterations: f64,
    pub hessian_builds: f64,
    /// Closed-form solves times the free coordinates they update.
    pub coordinate_updates: f64,
    /// Leading-order flop model of one frame, without the accuracy factor.
    pub order_model: f64,
}

/// Runs every scheme once on `cfg.seed`.
pub fn op_count_report(cfg: &ExperimentConfig) -> Result<Vec<OpCountRow>> {
    SchemeId::ALL
        .par_iter()
        .map(|&scheme| {
            let out = run_scheme(cfg, cfg.seed, scheme, None)?;
            Ok(op_count_row(cfg, scheme, out.record.frames, &out.record.ops))
        })
        .collect()
}

pub fn op_count_row(cfg: &ExperimentConfig, scheme: SchemeId, frames: usize, ops: &OpCounts) -> OpCountRow {
    let per = |v: u64| if frames == 0 { 0.0 } else { v as f64 / frames as f64 };
    let (k, n, s) = (cfg.users as f64, cfg.codewords as f64, cfg.chains as f64);
    let free = free_coordinates(cfg, scheme) as f64;
    let order_model = match scheme {
        SchemeId::Shc => n.powi(3) * s.powi(3) + n * n * s.powi(4) + n * s.powi(4) + s * s * k * k + s * s * k + s * (n * k + k * k),
        SchemeId::Mm | SchemeId::Random => 4.0 * s * s * k * k + 4.0 * s * k.powi(3) + s * s * k + s * k * k,
        SchemeId::Zf | SchemeId::Mrc => {
            n.powi(3) * s.powi(3) + n * n * s.powi(3) * k + n * s.powi(3) + s * s * k * k + s * (k * k + n * k) + k.powi(3)
        }
    };
    OpCountRow {
        scheme,
        frames,
        rate_evaluations: per(ops.rate_evaluations),
        gradient_evaluations: per(ops.gradient_evaluations),
        closed_form_solves: per(ops.closed_form_solves),
        dual_iterations: per(ops.dual_iterations),
        hessian_builds: per(ops.hessian_builds),
        coordinate_updates: per(ops.closed_form_solves) * free,
        order_model: if frames == 0 { 0.0 } else { order_model },
    }
}

/// Coordinates of the stacked design not held by the scheme.
pub fn free_coordinates(cfg: &ExperimentConfig, scheme: SchemeId) -> usize {
    let (k, n, s) = (cfg.users, cfg.codewords, cfg.chains);
    let selection = n * s;
    let digital = s * s + s * k;
    k + match scheme {
        SchemeId::Shc => selection + digital,
        SchemeId::Mm | SchemeId::Random => digital,
        SchemeId::Zf | SchemeId::Mrc => selection,
    }
}

/// Pilot symbols of the statistical and per-slot designs and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotOverhead {
    pub statistical: u64,
    pub instantaneous: u64,
    pub ratio: f64,
}

/// `K M L_c` against `K M L_f L_s`, with `L_c` the frames the statistical
/// design needed.
pub fn pilot_overhead_report(l_c: u64, l_f: u64, l_s: u64, antennas: u64, users: u64) -> PilotOverhead {
    PilotOverhead {
        statistical: users * antennas * l_c,
        instantaneous: users * antennas * l_f * l_s,
        ratio: l_c as f64 / (l_f * l_s) as f64,
    }
}
