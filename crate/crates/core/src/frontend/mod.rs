//! DFT-codebook RF combining, low-resolution ADCs and the resulting
//! per-user SINR and rates.

mod codebook;
mod design;
mod model;
mod quantizer;

pub use codebook::Codebook;
pub use design::{zero_stacked, Block, DesignPoint, Layout, SelectionMatrix};
pub use model::{
    quantization_noise_cov, BeamspaceChannel, PreparedDesign, RfSample, SystemModel, UserTerms,
};
pub use quantizer::{high_rate_distortion, QuantizerModel, LLOYD_MAX_DISTORTION, TABLE_MAX_BITS};
