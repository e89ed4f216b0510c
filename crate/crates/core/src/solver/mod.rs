//! Power minimization under average-rate constraints.
//!
//! Each frame the solver absorbs one channel sample into per-user quadratic
//! surrogates of the rate constraints, solves a convex subproblem through its
//! Lagrange dual and moves a smoothed step towards the subproblem solution.

pub mod dual;
pub mod gradient;
mod qp;
pub mod rounding;
pub mod rssca;
pub mod schedule;
pub mod surrogate;

pub use dual::{DualMethod, DualOptions, DualState, Mode, SurrogateQp};
pub use gradient::{rate_and_gradient, rate_gradient, rates_and_gradients};
pub use rounding::round_selection;
pub use rssca::{dbm_to_mw, mw_to_dbm, run_rssca, smooth_update, OpCounts, RsscaOptions, RsscaOutput, SolveTrace, TraceRecord};
pub use schedule::{default_schedules, Schedule, StepSchedules};
pub use surrogate::{surrogate_value, update_surrogate, RateEstimator, SurrogateState};
