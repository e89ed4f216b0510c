//! The stochastic successive convex approximation loop.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dual::{self, DualFailure, DualOptions, DualSolution, DualState, Mode, SurrogateQp};
use super::rounding::round_selection;
use super::schedule::StepSchedules;
use super::surrogate::{build_qp, from_real, update_surrogate, RateEstimator, SurrogateState};
use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::frontend::{Block, DesignPoint, SystemModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsscaOptions {
    /// Frames `L_f`, one sample and one update each.
    pub iterations: usize,
    pub tau: f64,
    pub targets: Vec<f64>,
    pub p_max: Vec<f64>,
    pub schedules: StepSchedules,
    pub estimator: RateEstimator,
    pub dual: DualOptions,
    /// Blocks held at their initial value.
    pub frozen: Vec<Block>,
    /// The objective subproblem is attempted when the feasibility value is
    /// below `-feasibility_margin`.
    pub feasibility_margin: f64,
    /// Extra frames after rounding, with the selection held fixed, so that the
    /// remaining blocks adapt to the binary selection. Unused when the
    /// selection is frozen from the start.
    pub refine_iterations: usize,
    /// Largest selection-coupling violation accepted from an unfinished
    /// feasibility solve.
    pub inexact_tolerance: f64,
}

impl RsscaOptions {
    pub fn new(targets: Vec<f64>, p_max: Vec<f64>, iterations: usize) -> Self {
        Self {
            iterations,
            tau: 1e-2,
            targets,
            p_max,
            schedules: StepSchedules::default(),
            estimator: RateEstimator::AllSamples,
            dual: DualOptions::default(),
            frozen: Vec::new(),
            feasibility_margin: 1e-9,
            refine_iterations: 300,
            inexact_tolerance: 1e-4,
        }
    }
}

/// Kernel invocation counts of one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCounts {
    pub rate_evaluations: u64,
    pub gradient_evaluations: u64,
    pub closed_form_solves: u64,
    pub dual_iterations: u64,
    pub hessian_builds: u64,
    /// Subproblems that stopped short and used a fallback point.
    pub inexact_solves: u64,
}

impl OpCounts {
    fn absorb(&mut self, sol: &DualSolution) {
        self.closed_form_solves += sol.evaluations as u64;
        self.dual_iterations += sol.iterations as u64;
        self.hessian_builds += sol.hessian_builds as u64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    /// `sum_k p_k` at the expansion point, mW.
    pub objective: f64,
    /// `max_k (gamma_k - r_hat_k)` at the expansion point.
    pub max_constraint: f64,
    /// True when the feasibility subproblem supplied the step.
    pub feasibility_mode: bool,
    pub dual_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    /// First iteration after which the objective stays within `rel` of its final value.
    pub fn settling_iteration(&self, rel: f64) -> Option<usize> {
        let last = self.records.last()?.objective;
        let mut settled = self.records.len();
        for r in self.records.iter().rev() {
            if (r.objective - last).abs() > rel * last.abs() {
                break;
            }
            settled = r.iteration;
        }
        Some(settled)
    }

    /// `iteration,objective_dBm_sum,max_constraint,feasibility_mode,dual_iters`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["iteration", "objective_dBm_sum", "max_constraint", "feasibility_mode", "dual_iters"])?;
        for r in &self.records {
            out.write_record(&[
                r.iteration.to_string(),
                format!("{:.10}", mw_to_dbm(r.objective)),
                format!("{:.10e}", r.max_constraint),
                u8::from(r.feasibility_mode).to_string(),
                r.dual_iters.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[derive(Debug, Clone)]
pub struct RsscaOutput {
    /// Final point with a binary selection.
    pub design: DesignPoint,
    /// Point reached after `iterations` frames, before rounding.
    pub relaxed: DesignPoint,
    pub trace: SolveTrace,
    pub ops: OpCounts,
}

/// `(1 - alpha) x + alpha x_bar`.
pub fn smooth_update(x: &[Complex64], x_bar: &[Complex64], alpha: f64) -> Vec<Complex64> {
    x.iter().zip(x_bar).map(|(a, b)| a * (1.0 - alpha) + b * alpha).collect()
}

fn into_error(f: DualFailure, state: &SurrogateState) -> Error {
    Error::DualNonConvergence {
        iterations: f.iterations,
        residual: f.residual,
        best: from_real(state.layout, &f.best),
    }
}

struct Step {
    point: Vec<f64>,
    feasibility_mode: bool,
    dual_iters: usize,
}

/// One convex step: feasibility problem first, objective problem when the
/// surrogate constraints admit a strictly feasible point.
///
/// A feasibility solve that stops short is still usable when its best point
/// nearly meets the selection couplings, since any such point bounds the
/// subproblem value. A failed objective solve falls back to the feasibility
/// point, which meets every surrogate constraint.
fn convex_step(
    qp: &SurrogateQp,
    state: &SurrogateState,
    options: &RsscaOptions,
    warm: &mut (Option<DualState>, Option<DualState>),
    ops: &mut OpCounts,
) -> Result<Step> {
    let (feas_x, feas_value, feas_iters) = match dual::solve(qp, Mode::Feasibility, &options.dual, warm.0.as_ref()) {
        Ok(sol) => {
            ops.absorb(&sol);
            warm.0 = Some(sol.dual.clone());
            (sol.x, sol.value, sol.iterations)
        }
        Err(f) if qp.coupling_violation(&f.best) <= options.inexact_tolerance => {
            ops.dual_iterations += f.iterations as u64;
            ops.inexact_solves += 1;
            warm.0 = None;
            let value = qp.max_surrogate(&f.best);
            (f.best, value, f.iterations)
        }
        Err(f) => return Err(into_error(f, state)),
    };
    if feas_value > -options.feasibility_margin {
        return Ok(Step {
            point: feas_x,
            feasibility_mode: true,
            dual_iters: feas_iters,
        });
    }
    match dual::solve(qp, Mode::Objective, &options.dual, warm.1.as_ref()) {
        Ok(obj) => {
            ops.absorb(&obj);
            warm.1 = Some(obj.dual.clone());
            Ok(Step {
                point: obj.x,
                feasibility_mode: false,
                dual_iters: feas_iters + obj.iterations,
            })
        }
        Err(f) => {
            ops.dual_iterations += f.iterations as u64;
            ops.inexact_solves += 1;
            warm.1 = None;
            Ok(Step {
                point: feas_x,
                feasibility_mode: true,
                dual_iters: feas_iters + f.iterations,
            })
        }
    }
}

/// Runs `options.iterations` frames from `initial`, drawing one sample per
/// frame, rounds the selection and runs the refinement frames.
pub fn run_rssca<I>(model: &SystemModel, initial: &DesignPoint, samples: I, options: &RsscaOptions) -> Result<RsscaOutput>
where
    I: IntoIterator<Item = Result<ChannelSample>>,
{
    let layout = initial.validate_shape()?;
    if options.iterations == 0 {
        return Err(Error::Config("at least one frame is required".into()));
    }
    if options.targets.len() != layout.users || options.p_max.len() != layout.users {
        return Err(Error::dim("targets and power caps", layout.users, options.targets.len()));
    }
    options.schedules.validate(options.iterations)?;
    initial.check_box(&options.p_max)?;

    let mut stream = samples.into_iter();
    let mut trace = SolveTrace::default();
    let mut ops = OpCounts::default();
    let relaxed = run_phase(model, initial, &mut stream, options, &options.frozen, options.iterations, &mut trace, &mut ops)?;
    if options.frozen.contains(&Block::Selection) {
        return Ok(RsscaOutput {
            design: relaxed.clone(),
            relaxed,
            trace,
            ops,
        });
    }
    let mut design = relaxed.clone();
    design.selection = round_selection(&relaxed.selection)?.matrix;
    if options.refine_iterations > 0 {
        let mut frozen = options.frozen.clone();
        frozen.push(Block::Selection);
        design = run_phase(model, &design, &mut stream, options, &frozen, options.refine_iterations, &mut trace, &mut ops)?;
    }
    Ok(RsscaOutput {
        design,
        relaxed,
        trace,
        ops,
    })
}

/// One pass of the surrogate loop with its own surrogate state and step
/// schedules. Trace records continue the numbering already in `trace`.
#[allow(clippy::too_many_arguments)]
fn run_phase<I>(
    model: &SystemModel,
    initial: &DesignPoint,
    stream: &mut I,
    options: &RsscaOptions,
    frozen: &[Block],
    iterations: usize,
    trace: &mut SolveTrace,
    ops: &mut OpCounts,
) -> Result<DesignPoint>
where
    I: Iterator<Item = Result<ChannelSample>>,
{
    let layout = initial.layout();
    let mut state = SurrogateState::new(
        layout,
        options.targets.clone(),
        vec![options.tau; layout.users],
        iterations,
        options.estimator,
    )?;
    let fixed: Vec<std::ops::Range<usize>> = frozen.iter().map(|b| layout.range(*b)).collect();
    let mut x = initial.clone();
    let mut warm = (None, None);
    let offset = trace.len();

    for l in 0..iterations {
        let frame = offset + l;
        let ctx = |e: Error| e.at_iteration(frame);
        let sample = stream
            .next()
            .ok_or_else(|| Error::Config(format!("channel stream exhausted after {frame} frames")))?
            .map_err(ctx)?;
        let beam = model.beamspace(&sample).map_err(ctx)?;
        let beta = options.schedules.beta(l);
        update_surrogate(&mut state, model, &x, beam, beta, frozen).map_err(ctx)?;
        ops.gradient_evaluations += layout.users as u64;
        ops.rate_evaluations += match options.estimator {
            RateEstimator::AllSamples => state.samples.len() as u64,
            RateEstimator::Recursive => 1,
        } * layout.users as u64;

        let qp = build_qp(&state, &options.p_max, frozen);
        let step = convex_step(&qp, &state, options, &mut warm, ops).map_err(ctx)?;
        trace.records.push(TraceRecord {
            iteration: frame,
            objective: x.total_power(),
            max_constraint: state
                .targets
                .iter()
                .zip(&state.r_hat)
                .map(|(g, r)| g - r)
                .fold(f64::NEG_INFINITY, f64::max),
            feasibility_mode: step.feasibility_mode,
            dual_iters: step.dual_iters,
        });

        let x_bar = from_real(layout, &step.point);
        let current = x.stack();
        let mut next = smooth_update(&current, &x_bar, options.schedules.alpha(l));
        for r in &fixed {
            next[r.clone()].copy_from_slice(&current[r.clone()]);
        }
        for (t, v) in next[layout.range(Block::Power)].iter_mut().enumerate() {
            v.re = v.re.clamp(0.0, options.p_max[t]);
        }
        for v in &mut next[layout.range(Block::Selection)] {
            v.re = v.re.clamp(0.0, 1.0);
        }
        x = DesignPoint::unstack(layout, &next)?;
        x.check_box(&options.p_max).map_err(ctx)?;
    }
    Ok(x)
}
