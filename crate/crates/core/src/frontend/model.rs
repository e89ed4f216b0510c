//! Quantized receive chain under the additive quantization noise model.
//!
//! For a combined beamformer `u_k = V w_k` and RF outputs `g_i = U^H h_i`
//! (`U = D C`), the SINR of user `k` is
//!
//! ```text
//!            gamma^2 p_k |u_k^H g_k|^2
//! ------------------------------------------------------------------
//! gamma^2 sum_{i != k} p_i |u_k^H g_i|^2 + gamma^2 sigma^2 u_k^H U^H U u_k
//!   + gamma (1 - gamma) sum_j |u_kj|^2 (sum_i p_i |g_ij|^2 + sigma^2 [U^H U]_jj)
//! ```
//!
//! Everything is evaluated in beamspace: a sample is reduced once to
//! `B = D^H H` (`N x K`), after which `U^H H = C^T B` and
//! `U^H U = C^T (D^H D) C` never touch the antenna dimension.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{Codebook, DesignPoint, QuantizerModel};
use crate::channel::ChannelSample;
use crate::error::{Error, Result};

/// `R_q = gamma (1 - gamma) Diag(U^H H P H^H U + sigma^2 U^H U)`, evaluated
/// literally in the antenna domain.
pub fn quantization_noise_cov(
    combiner: &DMatrix<Complex64>,
    channel: &DMatrix<Complex64>,
    powers: &[f64],
    noise_power: f64,
    gain: f64,
) -> Result<DMatrix<Complex64>> {
    if combiner.nrows() != channel.nrows() {
        return Err(Error::dim("quantization_noise_cov", combiner.nrows(), channel.nrows()));
    }
    if powers.len() != channel.ncols() {
        return Err(Error::dim("quantization_noise_cov", channel.ncols(), powers.len()));
    }
    if let Some(p) = powers.iter().find(|&&p| p < 0.0) {
        return Err(Error::Domain(format!("negative power {p}")));
    }
    let p = DMatrix::from_diagonal(&DVector::from_iterator(
        powers.len(),
        powers.iter().map(|&p| Complex64::new(p, 0.0)),
    ));
    let uh = combiner.adjoint();
    let received = &uh * channel * p * channel.adjoint() * combiner;
    let noise = (&uh * combiner).map(|z| z * noise_power);
    let full = received + noise;
    let scale = gain * (1.0 - gain);
    let rq = DMatrix::from_diagonal(&DVector::from_iterator(
        full.nrows(),
        full.diagonal().iter().map(|z| Complex64::new(scale * z.re, 0.0)),
    ));
    debug_assert!(rq.diagonal().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
    Ok(rq)
}

/// Beamspace view `D^H H` of one channel sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamspaceChannel {
    /// `N x K`.
    pub matrix: DMatrix<Complex64>,
}

/// Codebook, ADC model and noise level shared by every evaluation.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub codebook: Codebook,
    pub quantizer: QuantizerModel,
    /// Thermal noise power `sigma^2`, in the same unit as the user powers.
    pub noise_power: f64,
    gram: DMatrix<Complex64>,
}

/// Per-user decomposition of the SINR terms on one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserTerms {
    pub signal: f64,
    pub interference: f64,
    pub thermal: f64,
    pub quantization: f64,
}

impl UserTerms {
    pub fn denominator(&self) -> f64 {
        self.interference + self.thermal + self.quantization
    }

    pub fn sinr(&self) -> f64 {
        if self.signal == 0.0 {
            return 0.0;
        }
        let den = self.denominator();
        if den == 0.0 {
            // only reachable without noise and quantization and with one user
            return f64::INFINITY;
        }
        self.signal / den
    }

    pub fn rate(&self) -> f64 {
        self.sinr().ln_1p() / std::f64::consts::LN_2
    }
}

/// Design-dependent quantities reused across samples.
#[derive(Debug, Clone)]
pub struct PreparedDesign<'a> {
    pub design: &'a DesignPoint,
    /// `(D^H D) C`.
    pub gram_selection: DMatrix<Complex64>,
    /// `C^T (D^H D) C`.
    pub rf_gram: DMatrix<Complex64>,
    /// `V W`, column `k` is `u_k`.
    pub combined: DMatrix<Complex64>,
}

/// Per-sample RF-domain quantities for a prepared design.
#[derive(Debug, Clone)]
pub struct RfSample {
    /// `U^H H = C^T B`, `S x K`.
    pub rf_channel: DMatrix<Complex64>,
    /// `sum_i p_i |g_ij|^2 + sigma^2 [U^H U]_jj`, the diagonal inside `R_q`.
    pub quant_load: Vec<f64>,
}

impl SystemModel {
    pub fn new(codebook: Codebook, quantizer: QuantizerModel, noise_power: f64) -> Result<Self> {
        if !(noise_power >= 0.0) || !noise_power.is_finite() {
            return Err(Error::Domain(format!("noise power must be finite and >= 0, got {noise_power}")));
        }
        let gram = codebook.gram();
        Ok(Self {
            codebook,
            quantizer,
            noise_power,
            gram,
        })
    }

    pub fn gain(&self) -> f64 {
        self.quantizer.gain
    }

    pub fn antennas(&self) -> usize {
        self.codebook.antennas()
    }

    pub fn codewords(&self) -> usize {
        self.codebook.len()
    }

    /// `D^H D`.
    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    pub fn beamspace(&self, sample: &ChannelSample) -> Result<BeamspaceChannel> {
        if sample.antennas() != self.antennas() {
            return Err(Error::dim("beamspace", self.antennas(), sample.antennas()));
        }
        Ok(BeamspaceChannel {
            matrix: self.codebook.matrix.adjoint() * &sample.matrix,
        })
    }

    /// `U = D C` in the antenna domain.
    pub fn rf_combiner(&self, design: &DesignPoint) -> DMatrix<Complex64> {
        &self.codebook.matrix * design.selection.map(|c| Complex64::new(c, 0.0))
    }

    pub fn prepare<'a>(&self, design: &'a DesignPoint) -> Result<PreparedDesign<'a>> {
        let layout = design.validate_shape()?;
        if layout.codewords != self.codewords() {
            return Err(Error::dim("selection rows", self.codewords(), layout.codewords));
        }
        let c = design.selection.map(|c| Complex64::new(c, 0.0));
        let gram_selection = &self.gram * &c;
        let rf_gram = c.transpose() * &gram_selection;
        Ok(PreparedDesign {
            design,
            gram_selection,
            rf_gram,
            combined: design.combined_beamformers(),
        })
    }

    pub fn rf_sample(&self, prep: &PreparedDesign<'_>, beam: &BeamspaceChannel) -> Result<RfSample> {
        let design = prep.design;
        if beam.matrix.shape() != (self.codewords(), design.powers.len()) {
            return Err(Error::dim(
                "beamspace channel",
                format!("{}x{}", self.codewords(), design.powers.len()),
                format!("{:?}", beam.matrix.shape()),
            ));
        }
        let c = design.selection.map(|c| Complex64::new(c, 0.0));
        let rf_channel = c.transpose() * &beam.matrix;
        let quant_load = (0..rf_channel.nrows())
            .map(|j| {
                let rx: f64 = rf_channel
                    .row(j)
                    .iter()
                    .zip(&design.powers)
                    .map(|(g, p)| p * g.norm_sqr())
                    .sum();
                rx + self.noise_power * prep.rf_gram[(j, j)].re
            })
            .collect();
        Ok(RfSample {
            rf_channel,
            quant_load,
        })
    }

    pub fn user_terms(&self, prep: &PreparedDesign<'_>, rf: &RfSample, k: usize) -> UserTerms {
        let g = self.gain();
        let g2 = g * g;
        let u = prep.combined.column(k);
        let powers = &prep.design.powers;
        let mut signal = 0.0;
        let mut interference = 0.0;
        for (i, g_i) in rf.rf_channel.column_iter().enumerate() {
            let a = u.dotc(&g_i).norm_sqr();
            if i == k {
                signal = g2 * powers[i] * a;
            } else {
                interference += g2 * powers[i] * a;
            }
        }
        let thermal = g2 * self.noise_power * u.dotc(&(&prep.rf_gram * u)).re.max(0.0);
        let quantization = self.quantizer.noise_scale()
            * u.iter()
                .zip(&rf.quant_load)
                .map(|(uj, d)| uj.norm_sqr() * d)
                .sum::<f64>();
        UserTerms {
            signal,
            interference,
            thermal,
            quantization,
        }
    }

    fn check_user(&self, design: &DesignPoint, k: usize) -> Result<()> {
        if k >= design.powers.len() {
            return Err(Error::Domain(format!("user index {k} out of range {}", design.powers.len())));
        }
        Ok(())
    }

    /// SINR of user `k` on one channel sample.
    pub fn sinr(&self, design: &DesignPoint, sample: &ChannelSample, k: usize) -> Result<f64> {
        self.check_user(design, k)?;
        let prep = self.prepare(design)?;
        let rf = self.rf_sample(&prep, &self.beamspace(sample)?)?;
        Ok(self.user_terms(&prep, &rf, k).sinr())
    }

    /// `log2(1 + SINR_k)` on one channel sample.
    pub fn instantaneous_rate(&self, design: &DesignPoint, sample: &ChannelSample, k: usize) -> Result<f64> {
        Ok(self.sinr(design, sample, k)?.ln_1p() / std::f64::consts::LN_2)
    }

    /// Rates of all users on a beamspace sample.
    pub fn rates(&self, prep: &PreparedDesign<'_>, beam: &BeamspaceChannel) -> Result<Vec<f64>> {
        let rf = self.rf_sample(prep, beam)?;
        Ok((0..prep.design.powers.len())
            .map(|k| self.user_terms(prep, &rf, k).rate())
            .collect())
    }

    /// Monte Carlo estimate of the average rate of user `k`.
    pub fn average_rate(&self, design: &DesignPoint, samples: &[ChannelSample], k: usize) -> Result<f64> {
        Ok(self.average_rates(design, samples)?[k])
    }

    /// Sample-mean rates of all users.
    pub fn average_rates(&self, design: &DesignPoint, samples: &[ChannelSample]) -> Result<Vec<f64>> {
        if samples.is_empty() {
            return Err(Error::Domain("average rate needs at least one sample".into()));
        }
        let prep = self.prepare(design)?;
        let mut total = vec![0.0; design.powers.len()];
        for sample in samples {
            let rates = self.rates(&prep, &self.beamspace(sample)?)?;
            total.iter_mut().zip(rates).for_each(|(t, r)| *t += r);
        }
        Ok(total.into_iter().map(|t| t / samples.len() as f64).collect())
    }
}
