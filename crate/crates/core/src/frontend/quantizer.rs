use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mean-squared error of the optimal (Lloyd-Max) scalar quantizer for a
/// unit-variance Gaussian input, for 1 to 5 bits, from a converged Lloyd
/// iteration. The often quoted 0.03454, 0.009497 and 0.002499 are slightly
/// below the true optima.
pub const LLOYD_MAX_DISTORTION: [f64; 5] = [0.3634, 0.1175, 0.03455, 0.009501, 0.002505];

/// Above this resolution the high-rate approximation is used instead of the table.
pub const TABLE_MAX_BITS: u32 = 5;

/// Additive quantization noise model of a `q`-bit ADC pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantizerModel {
    /// Bits per real dimension; `None` for a model built directly from a gain.
    pub bits: Option<u32>,
    pub distortion: f64,
    pub gain: f64,
}

impl QuantizerModel {
    pub fn from_bits(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::Domain("quantizer needs at least one bit".into()));
        }
        let distortion = if bits <= TABLE_MAX_BITS {
            LLOYD_MAX_DISTORTION[bits as usize - 1]
        } else {
            high_rate_distortion(bits)
        };
        Ok(Self {
            bits: Some(bits),
            distortion,
            gain: 1.0 - distortion,
        })
    }

    /// Model with an explicit gain in `(0, 1]`; a gain of one is an ideal ADC.
    pub fn from_gain(gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain <= 1.0) {
            return Err(Error::Domain(format!("quantizer gain must lie in (0, 1], got {gain}")));
        }
        Ok(Self {
            bits: None,
            distortion: 1.0 - gain,
            gain,
        })
    }

    pub fn ideal() -> Self {
        Self {
            bits: None,
            distortion: 0.0,
            gain: 1.0,
        }
    }

    /// `gamma * (1 - gamma)`, the scale of the quantization noise covariance.
    pub fn noise_scale(&self) -> f64 {
        self.gain * (1.0 - self.gain)
    }
}

/// `(pi * sqrt(3) / 2) * 2^(-2q)`.
pub fn high_rate_distortion(bits: u32) -> f64 {
    std::f64::consts::PI * 3f64.sqrt() / 2.0 * 2f64.powi(-2 * bits as i32)
}
