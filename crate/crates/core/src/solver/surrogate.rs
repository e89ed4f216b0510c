//! Quadratic surrogates of the stochastic rate constraints and their
//! recursive tracking.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dual::{Coupling, CouplingKind, Domain, SurrogateQp};
use super::gradient::rates_and_gradients;
use crate::error::{Error, Result};
use crate::frontend::{BeamspaceChannel, Block, DesignPoint, Layout, SystemModel};

/// How the constraint value `r_hat` is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateEstimator {
    /// Current iterate evaluated on every stored sample.
    #[default]
    AllSamples,
    /// `(1 - beta) r_hat + beta r(x; H)`, constant memory.
    Recursive,
}

#[derive(Debug, Clone)]
pub struct SurrogateState {
    pub layout: Layout,
    pub targets: Vec<f64>,
    pub tau: Vec<f64>,
    /// Tracked gradients of `gamma_k - r_k` in stacked layout.
    pub kappa: Vec<Vec<Complex64>>,
    pub r_hat: Vec<f64>,
    /// Expansion point `x^l`.
    pub center: Vec<Complex64>,
    /// Number of updates applied so far.
    pub iteration: usize,
    pub samples: Vec<BeamspaceChannel>,
    pub capacity: usize,
    pub estimator: RateEstimator,
}

impl SurrogateState {
    pub fn new(
        layout: Layout,
        targets: Vec<f64>,
        tau: Vec<f64>,
        capacity: usize,
        estimator: RateEstimator,
    ) -> Result<Self> {
        if targets.len() != layout.users || tau.len() != layout.users {
            return Err(Error::dim("surrogate targets", layout.users, targets.len().min(tau.len())));
        }
        if let Some(t) = tau.iter().find(|&&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::Config(format!("surrogate weight tau must be positive, got {t}")));
        }
        Ok(Self {
            layout,
            targets,
            tau,
            kappa: vec![vec![Complex64::new(0.0, 0.0); layout.len()]; layout.users],
            r_hat: vec![0.0; layout.users],
            center: vec![Complex64::new(0.0, 0.0); layout.len()],
            iteration: 0,
            samples: Vec::new(),
            capacity,
            estimator,
        })
    }
}

/// Absorb a new sample at the iterate `x`; `frozen` entries of the gradient are zeroed.
pub fn update_surrogate(
    state: &mut SurrogateState,
    model: &SystemModel,
    x: &DesignPoint,
    sample: BeamspaceChannel,
    beta: f64,
    frozen: &[Block],
) -> Result<()> {
    if state.estimator == RateEstimator::AllSamples && state.samples.len() >= state.capacity {
        return Err(Error::Config(format!(
            "sample store capacity {} exceeded",
            state.capacity
        )));
    }
    if x.layout() != state.layout {
        return Err(Error::dim("surrogate layout", format!("{:?}", state.layout), format!("{:?}", x.layout())));
    }
    let prep = model.prepare(x)?;
    let (rates_now, grads) = rates_and_gradients(model, &prep, &sample)?;
    let frozen_ranges: Vec<_> = frozen.iter().map(|b| state.layout.range(*b)).collect();
    for (kappa, eta) in state.kappa.iter_mut().zip(&grads) {
        for (t, (kt, et)) in kappa.iter_mut().zip(eta).enumerate() {
            if frozen_ranges.iter().any(|r| r.contains(&t)) {
                *kt = Complex64::new(0.0, 0.0);
            } else {
                *kt = *kt * (1.0 - beta) - *et * beta;
            }
        }
    }
    match state.estimator {
        RateEstimator::AllSamples => {
            state.samples.push(sample);
            let mut total = vec![0.0; state.layout.users];
            for (i, s) in state.samples.iter().enumerate() {
                let r = if i + 1 == state.samples.len() {
                    rates_now.clone()
                } else {
                    model.rates(&prep, s)?
                };
                total.iter_mut().zip(r).for_each(|(t, r)| *t += r);
            }
            let n = state.samples.len() as f64;
            state.r_hat = total.into_iter().map(|t| t / n).collect();
        }
        RateEstimator::Recursive => {
            for (r, now) in state.r_hat.iter_mut().zip(&rates_now) {
                *r = if state.iteration == 0 { *now } else { (1.0 - beta) * *r + beta * now };
            }
        }
    }
    state.center = x.stack();
    state.iteration += 1;
    Ok(())
}

/// `gamma_k - r_hat_k + Re[kappa_k^H (x - x^l)] + tau_k |x - x^l|^2`.
pub fn surrogate_value(state: &SurrogateState, k: usize, x: &[Complex64]) -> f64 {
    let mut lin = 0.0;
    let mut quad = 0.0;
    for ((xi, ci), ki) in x.iter().zip(&state.center).zip(&state.kappa[k]) {
        let d = xi - ci;
        lin += (ki.conj() * d).re;
        quad += d.norm_sqr();
    }
    state.targets[k] - state.r_hat[k] + lin + state.tau[k] * quad
}

/// Real coordinates: `p` and `c` as-is, complex blocks as interleaved `(re, im)`.
pub fn real_len(layout: Layout) -> usize {
    let real = layout.range(Block::Selection).end;
    real + 2 * (layout.len() - real)
}

pub fn to_real(layout: Layout, x: &[Complex64]) -> Vec<f64> {
    let real = layout.range(Block::Selection).end;
    let mut out = Vec::with_capacity(real_len(layout));
    out.extend(x[..real].iter().map(|z| z.re));
    for z in &x[real..] {
        out.push(z.re);
        out.push(z.im);
    }
    out
}

pub fn from_real(layout: Layout, y: &[f64]) -> Vec<Complex64> {
    let real = layout.range(Block::Selection).end;
    let mut out: Vec<Complex64> = y[..real].iter().map(|&r| Complex64::new(r, 0.0)).collect();
    out.extend(y[real..].chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
    out
}

/// Real-coordinate indices covered by a block.
fn real_range(layout: Layout, block: Block) -> std::ops::Range<usize> {
    let real = layout.range(Block::Selection).end;
    let r = layout.range(block);
    if r.start < real {
        r
    } else {
        real + 2 * (r.start - real)..real + 2 * (r.end - real)
    }
}

/// The convex subproblem around the current expansion point.
pub fn build_qp(state: &SurrogateState, p_max: &[f64], frozen: &[Block]) -> SurrogateQp {
    let layout = state.layout;
    let n = real_len(layout);
    let mut domains = vec![Domain::Free; n];
    for (t, d) in domains[real_range(layout, Block::Power)].iter_mut().enumerate() {
        *d = Domain::Interval(0.0, p_max[t]);
    }
    for d in &mut domains[real_range(layout, Block::Selection)] {
        *d = Domain::Interval(0.0, 1.0);
    }
    for b in frozen {
        domains[real_range(layout, *b)].iter_mut().for_each(|d| *d = Domain::Fixed);
    }
    let mut cost = vec![0.0; n];
    cost[real_range(layout, Block::Power)].iter_mut().for_each(|c| *c = 1.0);

    let mut couplings = Vec::new();
    if !frozen.contains(&Block::Selection) {
        for row in 0..layout.codewords {
            couplings.push(Coupling {
                coords: (0..layout.chains).map(|col| layout.selection_index(row, col)).collect(),
                kind: CouplingKind::AtMost,
                rhs: 1.0,
            });
        }
        for col in 0..layout.chains {
            couplings.push(Coupling {
                coords: (0..layout.codewords).map(|row| layout.selection_index(row, col)).collect(),
                kind: CouplingKind::Equal,
                rhs: 1.0,
            });
        }
    }
    SurrogateQp {
        center: to_real(layout, &state.center),
        domains,
        offsets: state.targets.iter().zip(&state.r_hat).map(|(g, r)| g - r).collect(),
        kappa: state.kappa.iter().map(|k| to_real(layout, k)).collect(),
        tau: state.tau.clone(),
        cost,
        couplings,
    }
}
