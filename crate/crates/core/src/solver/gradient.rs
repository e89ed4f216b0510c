//! Gradient of the instantaneous rate with respect to the stacked variable.
//!
//! Complex blocks use the conjugate convention: for a real function `f` the
//! returned `eta` satisfies `f(x + d) ~ f(x) + Re[eta^H d]`, i.e. `eta` is
//! twice the derivative with respect to the conjugate coordinate. Real blocks
//! (`p`, `c`) carry ordinary partial derivatives with zero imaginary part.
//!
//! The rate is split as `log2(T) - log2(I)` where `T` is the total received
//! power at the detector output and `I = T - signal`, so only the gradients
//! of the two quadratic-in-`u` quantities are needed.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::frontend::{
    BeamspaceChannel, Block, DesignPoint, PreparedDesign, RfSample, SystemModel,
};

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Rate and stacked rate gradient of user `k` on a beamspace sample.
pub fn rate_and_gradient(
    model: &SystemModel,
    prep: &PreparedDesign<'_>,
    beam: &BeamspaceChannel,
    rf: &RfSample,
    k: usize,
) -> Result<(f64, Vec<Complex64>)> {
    let design = prep.design;
    let layout = design.layout();
    let g = model.gain();
    let g2 = g * g;
    let cq = model.quantizer.noise_scale();
    let sigma2 = model.noise_power;
    let powers = &design.powers;
    let rf_ch = &rf.rf_channel;
    let u = prep.combined.column(k).into_owned();

    // s_i = u^H g_i
    let s: Vec<Complex64> = rf_ch.column_iter().map(|gi| u.dotc(&gi)).collect();
    let a: Vec<f64> = s.iter().map(|z| z.norm_sqr()).collect();
    let uu_u = &prep.rf_gram * &u;
    let thermal_quad = u.dotc(&uu_u).re;
    let u_abs2: Vec<f64> = u.iter().map(|z| z.norm_sqr()).collect();
    let quant: f64 = u_abs2.iter().zip(&rf.quant_load).map(|(x, d)| x * d).sum();

    let received: f64 = (0..layout.users).map(|i| g2 * powers[i] * a[i]).sum();
    let total = received + g2 * sigma2 * thermal_quad + cq * quant;
    let signal = g2 * powers[k] * a[k];
    let interference = total - signal;
    if !(interference > 0.0) {
        return Err(Error::Domain(format!(
            "rate gradient of user {k} undefined: interference-plus-noise is {interference}"
        )));
    }
    let rate = (total / interference).ln() / std::f64::consts::LN_2;

    // Gradient of T.
    // p: g2 a_i + cq sum_j |u_j|^2 |G_ji|^2
    let mut grad_p_total = vec![0.0; layout.users];
    for (i, gp) in grad_p_total.iter_mut().enumerate() {
        let q: f64 = rf_ch
            .column(i)
            .iter()
            .zip(&u_abs2)
            .map(|(gji, uj)| uj * gji.norm_sqr())
            .sum();
        *gp = g2 * a[i] + cq * q;
    }
    // u: 2 g2 sum_i p_i g_i conj(s_i) + 2 g2 sigma2 UU u + 2 cq d.u
    let mut eta_u_total = DVector::<Complex64>::zeros(layout.chains);
    for (i, gi) in rf_ch.column_iter().enumerate() {
        eta_u_total.axpy(c(2.0 * g2 * powers[i]) * s[i].conj(), &gi, c(1.0));
    }
    eta_u_total.axpy(c(2.0 * g2 * sigma2), &uu_u, c(1.0));
    for (j, e) in eta_u_total.iter_mut().enumerate() {
        *e += c(2.0 * cq * rf.quant_load[j]) * u[j];
    }
    // C: Re[2 (B z) u^H + 2 g2 sigma2 (Gd C) u u^H + 2 cq (B P G^H + sigma2 Gd C) diag(|u|^2)]
    let b = &beam.matrix;
    let z = DVector::from_iterator(layout.users, (0..layout.users).map(|i| c(g2 * powers[i]) * s[i].conj()));
    let bz = b * &z;
    let gdc_u = &prep.gram_selection * &u;
    let pg_h = {
        let mut m = rf_ch.adjoint();
        for (i, mut row) in m.row_iter_mut().enumerate() {
            row *= c(powers[i]);
        }
        m
    };
    let load = b * pg_h + prep.gram_selection.map(|x| x * sigma2);
    let ua = u.adjoint();
    let mut grad_c_total: DMatrix<f64> = (&bz * &ua + &gdc_u * &ua * c(g2 * sigma2)).map(|x| 2.0 * x.re);
    for (j, mut col) in grad_c_total.column_iter_mut().enumerate() {
        let scale = 2.0 * cq * u_abs2[j];
        for (n, v) in col.iter_mut().enumerate() {
            *v += scale * load[(n, j)].re;
        }
    }

    // Gradient of the signal term g2 p_k a_k.
    let gk = rf_ch.column(k);
    let eta_u_signal = gk.map(|x| x * c(2.0 * g2 * powers[k]) * s[k].conj());
    let grad_c_signal: DMatrix<f64> =
        (b.column(k) * &ua).map(|x| 2.0 * g2 * powers[k] * (x * s[k].conj()).re);

    let inv_t = 1.0 / total;
    let inv_i = 1.0 / interference;
    let ln2 = std::f64::consts::LN_2;
    // d log2(T) - d log2(I) with I = T - signal
    let wt = (inv_t - inv_i) / ln2;
    let ws = inv_i / ln2;

    let mut eta = vec![c(0.0); layout.len()];
    for (i, slot) in eta[layout.range(Block::Power)].iter_mut().enumerate() {
        let signal_part = if i == k { g2 * a[k] } else { 0.0 };
        *slot = c(wt * grad_p_total[i] + ws * signal_part);
    }
    let c_range = layout.range(Block::Selection);
    for (slot, (t, sg)) in eta[c_range]
        .iter_mut()
        .zip(grad_c_total.iter().zip(grad_c_signal.iter()))
    {
        *slot = c(wt * t + ws * sg);
    }
    let eta_u = eta_u_total.map(|x| x * wt) + eta_u_signal.map(|x| x * ws);
    // V: eta_u w_k^H ; w_k: V^H eta_u
    let w_k = design.beamformers.column(k);
    let eta_v = &eta_u * w_k.adjoint();
    for (slot, val) in eta[layout.range(Block::Combiner)].iter_mut().zip(eta_v.iter()) {
        *slot = *val;
    }
    let eta_w = design.digital_combiner.adjoint() * &eta_u;
    let w_start = layout.range(Block::Beamformer).start + k * layout.chains;
    eta[w_start..w_start + layout.chains].copy_from_slice(eta_w.as_slice());
    Ok((rate, eta))
}

fn check_point(model: &SystemModel, design: &DesignPoint) -> Result<()> {
    if !(model.noise_power > 0.0) {
        return Err(Error::Domain("rate gradient requires a positive noise power".into()));
    }
    if let Some(p) = design.powers.iter().find(|&&p| !(p >= 0.0)) {
        return Err(Error::Domain(format!("power {p} outside the feasible box")));
    }
    if let Some(c) = design.selection.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(Error::Domain(format!("selection entry {c} outside [0, 1]")));
    }
    Ok(())
}

/// Stacked gradient `[d/dp; d/dc; d/dv; d/dw]` of `r_k` at `design` on `sample`.
pub fn rate_gradient(
    model: &SystemModel,
    design: &DesignPoint,
    sample: &ChannelSample,
    k: usize,
) -> Result<Vec<Complex64>> {
    check_point(model, design)?;
    if k >= design.powers.len() {
        return Err(Error::Domain(format!("user index {k} out of range")));
    }
    let prep = model.prepare(design)?;
    let beam = model.beamspace(sample)?;
    let rf = model.rf_sample(&prep, &beam)?;
    Ok(rate_and_gradient(model, &prep, &beam, &rf, k)?.1)
}

/// Rates and gradients of every user on one sample.
pub fn rates_and_gradients(
    model: &SystemModel,
    prep: &PreparedDesign<'_>,
    beam: &BeamspaceChannel,
) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    check_point(model, prep.design)?;
    let rf = model.rf_sample(prep, beam)?;
    let mut rates = Vec::with_capacity(prep.design.powers.len());
    let mut grads = Vec::with_capacity(prep.design.powers.len());
    for k in 0..prep.design.powers.len() {
        let (r, g) = rate_and_gradient(model, prep, beam, &rf, k)?;
        rates.push(r);
        grads.push(g);
    }
    Ok((rates, grads))
}
