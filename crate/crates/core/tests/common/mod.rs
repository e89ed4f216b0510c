//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

pub mod criteria;
pub mod oracle;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;

use shc_core::frontend::Block;
use shc_core::{Codebook, ChannelProcessConfig, ChannelSample, ChannelStream, DesignPoint, Layout, UserGeometry};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Literal SINR: `U = D C`, `R_q` built entry by entry in the antenna domain,
/// every term of the ratio written out without reuse.
pub fn literal_sinr(
    d: &DMatrix<Complex64>,
    x: &DesignPoint,
    h: &DMatrix<Complex64>,
    noise: f64,
    gain: f64,
    k: usize,
) -> f64 {
    let c = x.selection.map(|v| Complex64::new(v, 0.0));
    let u = d * c;
    let s = u.ncols();
    let users = h.ncols();
    // a_k^H = w_k^H V^H gamma U^H
    let w = x.beamformers.column(k).into_owned();
    let a_h = w.adjoint() * x.digital_combiner.adjoint() * u.adjoint() * Complex64::new(gain, 0.0);
    let term = |i: usize| -> f64 {
        let hi = h.column(i).into_owned();
        (&a_h * hi)[(0, 0)].norm_sqr() * x.powers[i]
    };
    let signal = term(k);
    let interference: f64 = (0..users).filter(|&i| i != k).map(term).sum();
    let thermal = noise * a_h.norm_squared();
    let mut rq = DMatrix::<Complex64>::zeros(s, s);
    for j in 0..s {
        let uj = u.column(j).into_owned();
        let mut v = 0.0;
        for i in 0..users {
            v += x.powers[i] * uj.dotc(&h.column(i).into_owned()).norm_sqr();
        }
        v += noise * uj.norm_squared();
        rq[(j, j)] = Complex64::new(gain * (1.0 - gain) * v, 0.0);
    }
    let vw = &x.digital_combiner * &w;
    let quant = (vw.adjoint() * rq * &vw)[(0, 0)].re;
    let denom = interference + thermal + quant;
    if signal == 0.0 {
        0.0
    } else {
        signal / denom
    }
}

pub fn literal_rate(d: &DMatrix<Complex64>, x: &DesignPoint, h: &DMatrix<Complex64>, noise: f64, gain: f64, k: usize) -> f64 {
    (1.0 + literal_sinr(d, x, h, noise, gain, k)).log2()
}

/// Random relaxed design with powers in `[0.1, p_max]`.
pub fn random_design<R: Rng>(rng: &mut R, layout: Layout, p_max: f64) -> DesignPoint {
    let (k, n, s) = (layout.users, layout.codewords, layout.chains);
    DesignPoint {
        powers: (0..k).map(|_| rng.random_range(0.1..p_max)).collect(),
        selection: DMatrix::from_fn(n, s, |_, _| rng.random_range(0.05..0.95)),
        digital_combiner: DMatrix::from_fn(s, s, |_, _| cgauss(rng)),
        beamformers: DMatrix::from_fn(s, k, |_, _| cgauss(rng)),
    }
}

/// Channel sample from the geometric generator for a random drop.
pub fn random_channel<R: Rng>(rng: &mut R, antennas: usize, users: usize, seed: u64) -> ChannelSample {
    let geometry = UserGeometry::drop_uniform(rng, users, 35.0, 200.0).unwrap();
    ChannelStream::new(seed, 0, geometry, ChannelProcessConfig::default(), antennas)
        .unwrap()
        .next_sample()
        .unwrap()
}

pub fn dbm(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn vec_c(v: &[f64]) -> DVector<Complex64> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub const STEP: f64 = 1e-6;

/// Central differences of the literal rate along every real direction;
/// complex coordinates are probed along `1` and `i`.
pub fn fd_gradient(d: &Codebook, x: &DesignPoint, h: &DMatrix<Complex64>, noise: f64, gain: f64, k: usize) -> Vec<Complex64> {
    fd_gradient_with(d, x, h, noise, gain, k, STEP, false)
}

/// Same as [`fd_gradient`] with a chosen step; `five_point` uses the
/// fourth-order stencil.
#[allow(clippy::too_many_arguments)]
pub fn fd_gradient_with(
    d: &Codebook,
    x: &DesignPoint,
    h: &DMatrix<Complex64>,
    noise: f64,
    gain: f64,
    k: usize,
    step: f64,
    five_point: bool,
) -> Vec<Complex64> {
    let layout = x.layout();
    let base = x.stack();
    let real_end = layout.range(Block::Selection).end;
    let eval = |v: &[Complex64]| {
        let y = DesignPoint::unstack(layout, v).unwrap();
        literal_rate(&d.matrix, &y, h, noise, gain, k)
    };
    (0..base.len())
        .map(|t| {
            let dir = |unit: Complex64| {
                let at = |s: f64| {
                    let mut v = base.clone();
                    v[t] += unit * s;
                    eval(&v)
                };
                if five_point {
                    (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step)
                } else {
                    (at(step) - at(-step)) / (2.0 * step)
                }
            };
            let re = dir(Complex64::new(1.0, 0.0));
            let im = if t < real_end { 0.0 } else { dir(Complex64::new(0.0, 1.0)) };
            Complex64::new(re, im)
        })
        .collect()
}

/// `|a - b| / |b|` over the whole stacked gradient.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let norm: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (diff / norm).sqrt()
}

pub fn block_error(layout: Layout, a: &[Complex64], b: &[Complex64]) -> Vec<(Block, f64)> {
    [Block::Power, Block::Selection, Block::Combiner, Block::Beamformer]
        .into_iter()
        .map(|blk| {
            let r = layout.range(blk);
            let diff: f64 = a[r.clone()].iter().zip(&b[r.clone()]).map(|(x, y)| (x - y).norm_sqr()).sum();
            let norm: f64 = b[r].iter().map(|y| y.norm_sqr()).sum();
            (blk, (diff / norm).sqrt())
        })
        .collect()
}
