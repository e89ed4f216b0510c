//! Per-slot contender driven by outdated instantaneous channel knowledge.
//!
//! Each slot it selects the strongest beams of the delayed channel, then
//! alternates MMSE combining with fixed-point power control until the SINR
//! targets hold on that delayed channel. The resulting design is judged on the
//! channel that is actually in effect.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::baselines::mm_select;
use crate::channel::ChannelSample;
use crate::error::Result;
use crate::frontend::{DesignPoint, SystemModel};

/// Alternations of combiner and power updates per slot.
pub const POWER_CONTROL_ROUNDS: usize = 40;

/// Design computed from `delayed` for rate targets `targets` (bps/Hz).
pub fn delayed_icsi_design(
    model: &SystemModel,
    delayed: &ChannelSample,
    chains: usize,
    targets: &[f64],
    p_max: &[f64],
) -> Result<DesignPoint> {
    let users = targets.len();
    let selection = mm_select(&model.codebook, std::slice::from_ref(delayed), chains)?.matrix;
    let mut x = DesignPoint {
        powers: p_max.to_vec(),
        selection,
        digital_combiner: DMatrix::identity(chains, chains),
        beamformers: DMatrix::zeros(chains, users),
    };
    let beam = model.beamspace(delayed)?;
    let sinr_targets: Vec<f64> = targets.iter().map(|t| 2f64.powf(*t) - 1.0).collect();
    for _ in 0..POWER_CONTROL_ROUNDS {
        x.beamformers = mmse_beamformers(model, &x, &beam.matrix)?;
        let sinrs: Vec<f64> = {
            let prep = model.prepare(&x)?;
            let rf = model.rf_sample(&prep, &beam)?;
            (0..users).map(|k| model.user_terms(&prep, &rf, k).sinr()).collect()
        };
        let mut moved = 0.0f64;
        for (k, &sinr) in sinrs.iter().enumerate() {
            let next = if sinr > 0.0 {
                (x.powers[k] * sinr_targets[k] / sinr).min(p_max[k])
            } else {
                p_max[k]
            };
            moved = moved.max((next - x.powers[k]).abs() / p_max[k]);
            x.powers[k] = next;
        }
        if moved < 1e-9 {
            break;
        }
    }
    x.beamformers = mmse_beamformers(model, &x, &beam.matrix)?;
    Ok(x)
}

/// `w_k = Sigma^{-1} g_k` with `Sigma` the full covariance of the quantized
/// RF outputs for the current powers and selection.
fn mmse_beamformers(model: &SystemModel, x: &DesignPoint, beam: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let c = x.selection.map(|v| Complex64::new(v, 0.0));
    let g = c.transpose() * beam;
    let rf_gram = c.transpose() * model.gram() * &c;
    let gain = model.gain();
    let s = g.nrows();
    let mut cov = rf_gram.map(|z| z * (gain * gain * model.noise_power));
    for (i, col) in g.column_iter().enumerate() {
        cov += col * col.adjoint() * Complex64::new(gain * gain * x.powers[i], 0.0);
    }
    let scale = model.quantizer.noise_scale();
    for j in 0..s {
        let load: f64 = g.row(j).iter().zip(&x.powers).map(|(v, p)| p * v.norm_sqr()).sum::<f64>()
            + model.noise_power * rf_gram[(j, j)].re;
        cov[(j, j)] += Complex64::new(scale * load, 0.0);
    }
    let floor = 1e-12 * cov.diagonal().iter().map(|z| z.re).fold(0.0, f64::max);
    for j in 0..s {
        cov[(j, j)] += Complex64::new(floor, 0.0);
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| crate::error::Error::Domain("receive covariance is not positive definite".into()))?;
    Ok(chol.solve(&g))
}
