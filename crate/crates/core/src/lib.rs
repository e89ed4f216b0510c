//! Stochastic hybrid combining for the uplink of quantized massive-MIMO
//! systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`channel`] draws geometric multipath channel samples,
//! * [`frontend`] models the DFT-codebook RF combiner, the low-resolution
//!   ADCs and the per-user SINR,
//! * [`solver`] minimizes total transmit power under average-rate
//!   constraints with relaxed stochastic successive convex approximation,
//! * [`baselines`] freezes blocks of the design to obtain the comparison
//!   schemes,
//! * [`harness`] runs seeded Monte Carlo experiments and writes their
//!   outputs.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        let tol: f64 = $tol;
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }};
}

pub mod baselines;
pub mod channel;
pub mod error;
pub mod frontend;
pub mod harness;
pub mod solver;

pub use channel::{ChannelProcessConfig, ChannelSample, ChannelStream, UserGeometry};
pub use error::{Error, Result};
pub use frontend::{Codebook, DesignPoint, Layout, QuantizerModel, SelectionMatrix, SystemModel};
pub use baselines::{SchemeId, SchemeSpec};
pub use harness::{ExperimentConfig, ExperimentResult, SweepAxis};
pub use solver::{RsscaOptions, RsscaOutput, SolveTrace};
