//! Comparison schemes, each a run of the same solver with some blocks of the
//! design held fixed.
//!
//! | scheme   | fixed blocks | fixed values                                  |
//! |----------|--------------|-----------------------------------------------|
//! | `shc`    | none         |                                               |
//! | `mm`     | `c`          | strongest average beams                       |
//! | `random` | `c`          | uniformly random beams                        |
//! | `zf`     | `v`, `w`     | zero forcing on the long-term effective channel |
//! | `mrc`    | `v`, `w`     | matched filter on the long-term effective channel |

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::frontend::{Block, Codebook, DesignPoint, Layout, SelectionMatrix, SystemModel};
use crate::solver::{run_rssca, RsscaOptions, RsscaOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeId {
    Shc,
    Mm,
    Random,
    Zf,
    Mrc,
}

impl SchemeId {
    pub const ALL: [SchemeId; 5] = [SchemeId::Shc, SchemeId::Mm, SchemeId::Random, SchemeId::Zf, SchemeId::Mrc];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeId::Shc => "shc",
            SchemeId::Mm => "mm",
            SchemeId::Random => "random",
            SchemeId::Zf => "zf",
            SchemeId::Mrc => "mrc",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown scheme `{s}` (expected shc, mm, random, zf or mrc)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub scheme_id: SchemeId,
    pub frozen_blocks: Vec<Block>,
}

impl SchemeSpec {
    pub fn new(scheme_id: SchemeId) -> Self {
        let frozen_blocks = match scheme_id {
            SchemeId::Shc => vec![],
            SchemeId::Mm | SchemeId::Random => vec![Block::Selection],
            SchemeId::Zf | SchemeId::Mrc => vec![Block::Combiner, Block::Beamformer],
        };
        Self {
            scheme_id,
            frozen_blocks,
        }
    }
}

/// Average beam energy `mean ||d_n^H H||^2` of every codeword.
pub fn beam_scores(codebook: &Codebook, samples: &[ChannelSample]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Domain("beam scoring needs at least one sample".into()));
    }
    let mut scores = vec![0.0; codebook.len()];
    for sample in samples {
        if sample.antennas() != codebook.antennas() {
            return Err(Error::dim("beam scoring", codebook.antennas(), sample.antennas()));
        }
        let beam = codebook.matrix.adjoint() * &sample.matrix;
        for (n, s) in scores.iter_mut().enumerate() {
            *s += beam.row(n).norm_squared();
        }
    }
    let count = samples.len() as f64;
    Ok(scores.into_iter().map(|s| s / count).collect())
}

/// The `chains` strongest codewords, the strongest on the first chain.
pub fn mm_select(codebook: &Codebook, samples: &[ChannelSample], chains: usize) -> Result<SelectionMatrix> {
    if codebook.len() < chains {
        return Err(Error::Config(format!(
            "cannot select {chains} of {} codewords",
            codebook.len()
        )));
    }
    let scores = beam_scores(codebook, samples)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    SelectionMatrix::from_assignment(codebook.len(), &order[..chains])
}

/// `chains` distinct codewords drawn uniformly without replacement.
pub fn random_select<R: Rng + ?Sized>(rng: &mut R, codewords: usize, chains: usize) -> Result<SelectionMatrix> {
    if codewords < chains {
        return Err(Error::Config(format!("cannot select {chains} of {codewords} codewords")));
    }
    let rows = rand::seq::index::sample(rng, codewords, chains).into_vec();
    SelectionMatrix::from_assignment(codewords, &rows)
}

/// Long-term effective channel `S x K` seen by the digital stage.
///
/// The per-sample effective channel `gamma U^H h_k` has zero mean under the
/// random path gains, so each column is the dominant eigenvector of its
/// sample covariance scaled by the square root of the eigenvalue.
pub fn effective_channel(model: &SystemModel, selection: &DMatrix<f64>, samples: &[ChannelSample]) -> Result<DMatrix<Complex64>> {
    if samples.is_empty() {
        return Err(Error::Domain("effective channel needs at least one sample".into()));
    }
    let (chains, users) = (selection.ncols(), samples[0].users());
    let c = selection.map(|v| Complex64::new(v, 0.0));
    let mut cov = vec![DMatrix::<Complex64>::zeros(chains, chains); users];
    for sample in samples {
        let g = c.transpose() * model.beamspace(sample)?.matrix * Complex64::new(model.gain(), 0.0);
        for (k, cov_k) in cov.iter_mut().enumerate() {
            let col = g.column(k);
            *cov_k += &col * col.adjoint();
        }
    }
    let mut heff = DMatrix::zeros(chains, users);
    for (k, cov_k) in cov.into_iter().enumerate() {
        let eig = SymmetricEigen::new(cov_k / Complex64::new(samples.len() as f64, 0.0));
        let (top, value) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        heff.set_column(k, &(eig.eigenvectors.column(top) * Complex64::new(value.max(0.0).sqrt(), 0.0)));
    }
    Ok(heff)
}

/// `V = I`, `W` the conjugate transpose of the left pseudo-inverse, so `W^H H = I`.
pub fn zf_combiner(heff: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let (s, k) = heff.shape();
    if k > s {
        return Err(Error::Config(format!("zero forcing needs K <= S, got K = {k}, S = {s}")));
    }
    // Gram-Schmidt pass to name the dependent columns
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut deficient = Vec::new();
    for (j, col) in heff.column_iter().enumerate() {
        let mut r = col.into_owned();
        for q in &basis {
            let proj = q.dotc(&r);
            r -= q * proj;
        }
        let norm = r.norm();
        if norm <= 1e-10 * col.norm().max(f64::MIN_POSITIVE) {
            deficient.push(j);
        } else {
            basis.push(r / Complex64::new(norm, 0.0));
        }
    }
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }
    let gram = heff.adjoint() * heff;
    let inv = gram.try_inverse().ok_or(Error::RankDeficient { columns: (0..k).collect() })?;
    let w = heff * inv.adjoint();
    Ok((DMatrix::identity(s, s), w))
}

/// `V = I`, `w_k = h_k / ||h_k||`.
pub fn mrc_combiner(heff: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let s = heff.nrows();
    let mut w = heff.clone();
    let zero: Vec<usize> = heff.column_iter().enumerate().filter(|(_, c)| c.norm() == 0.0).map(|(j, _)| j).collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    for mut col in w.column_iter_mut() {
        let n = col.norm();
        col /= Complex64::new(n, 0.0);
    }
    Ok((DMatrix::identity(s, s), w))
}

/// Starting point of a scheme; fixed blocks receive their final values.
pub fn initial_design<R: Rng + ?Sized>(
    spec: &SchemeSpec,
    model: &SystemModel,
    layout: Layout,
    p_max: &[f64],
    burn_in: &[ChannelSample],
    rng: &mut R,
) -> Result<DesignPoint> {
    let mut x = DesignPoint::initial(layout, p_max)?;
    match spec.scheme_id {
        SchemeId::Shc => {}
        SchemeId::Mm => x.selection = mm_select(&model.codebook, burn_in, layout.chains)?.matrix,
        SchemeId::Random => x.selection = random_select(rng, layout.codewords, layout.chains)?.matrix,
        SchemeId::Zf | SchemeId::Mrc => {
            x.selection = mm_select(&model.codebook, burn_in, layout.chains)?.matrix;
            let heff = effective_channel(model, &x.selection, burn_in)?;
            let (v, w) = if spec.scheme_id == SchemeId::Zf {
                zf_combiner(&heff)?
            } else {
                mrc_combiner(&heff)?
            };
            x.digital_combiner = v;
            x.beamformers = w;
        }
    }
    Ok(x)
}

/// Runs the solver for `spec`; `options.frozen` is replaced by the scheme's blocks.
pub fn run_baseline<R, I>(
    spec: &SchemeSpec,
    model: &SystemModel,
    layout: Layout,
    options: &RsscaOptions,
    burn_in: &[ChannelSample],
    rng: &mut R,
    samples: I,
) -> Result<RsscaOutput>
where
    R: Rng + ?Sized,
    I: IntoIterator<Item = Result<ChannelSample>>,
{
    let initial = initial_design(spec, model, layout, &options.p_max, burn_in, rng)?;
    let options = RsscaOptions {
        frozen: spec.frozen_blocks.clone(),
        ..options.clone()
    };
    run_rssca(model, &initial, samples, &options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn frozen_blocks_per_scheme() {
        assert!(SchemeSpec::new(SchemeId::Shc).frozen_blocks.is_empty());
        assert_eq!(SchemeSpec::new(SchemeId::Random).frozen_blocks, vec![Block::Selection]);
        assert_eq!(SchemeSpec::new(SchemeId::Mrc).frozen_blocks, vec![Block::Combiner, Block::Beamformer]);
        assert_eq!("ZF".parse::<SchemeId>().unwrap(), SchemeId::Zf);
        assert!("foo".parse::<SchemeId>().is_err());
    }

    #[test]
    fn mm_picks_matching_codeword() {
        let d = Codebook::dft(8, 8).unwrap();
        let h = ChannelSample {
            matrix: d.matrix.columns(3, 1).into_owned(),
            frame_index: 0,
        };
        let sel = mm_select(&d, &[h], 1).unwrap();
        assert_eq!(sel.assignment().unwrap(), vec![3]);
        let all = mm_select(&d, &[ChannelSample { matrix: DMatrix::zeros(8, 1), frame_index: 0 }], 8).unwrap();
        all.validate().unwrap();
    }

    #[test]
    fn random_selection_valid_and_seeded() {
        let a = random_select(&mut ChaCha8Rng::seed_from_u64(4), 16, 12).unwrap();
        let b = random_select(&mut ChaCha8Rng::seed_from_u64(4), 16, 12).unwrap();
        a.validate().unwrap();
        assert_eq!(a, b);
        assert!(random_select(&mut ChaCha8Rng::seed_from_u64(4), 3, 4).is_err());
    }

    #[test]
    fn zf_on_identity_and_scaled() {
        let (v, w) = zf_combiner(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(v, DMatrix::identity(3, 3));
        assert!((w - DMatrix::<Complex64>::identity(3, 3)).camax() < 1e-15);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![c(2.0), c(2.0)]));
        let (_, w) = zf_combiner(&h).unwrap();
        assert!((w[(0, 0)] - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn zf_names_dependent_columns() {
        let h = DMatrix::from_column_slice(3, 3, &[c(1.0), c(0.0), c(0.0), c(0.0), c(1.0), c(0.0), c(2.0), c(3.0), c(0.0)]);
        match zf_combiner(&h) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec![2]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mrc_normalizes() {
        let h = DMatrix::from_column_slice(2, 1, &[c(3.0), c(0.0)]);
        let (_, w) = mrc_combiner(&h).unwrap();
        assert!((w[(0, 0)] - c(1.0)).norm() < 1e-15);
        assert!(mrc_combiner(&DMatrix::zeros(2, 1)).is_err());
    }
}
