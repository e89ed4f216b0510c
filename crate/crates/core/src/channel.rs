//! Geometric multipath uplink channels.
//!
//! Each user column is a sum of `N_p` plane waves impinging on a
//! half-wavelength uniform linear array, scaled by the large-scale gain of
//! the distance pathloss law `30.6 + 36.7 log10(d)` dB. Path gains are
//! standard complex Gaussian and redrawn on every call, so the sample stream
//! carries the small-scale fading the stochastic solver averages over.
//!
//! Path angles live in the sine domain. By default every path angle is drawn
//! uniformly on `[-1, 1)`. With an angular spread configured, each user owns a
//! cluster centre (part of its [`UserGeometry`], fixed for a drop) and path
//! angles are jittered around it, which gives the channel distribution the
//! user-specific spatial structure that statistical beam selection exploits.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CELL_RADIUS_M: f64 = 200.0;
pub const MIN_DISTANCE_M: f64 = 35.0;
pub const PATHLOSS_OFFSET_DB: f64 = 30.6;
pub const PATHLOSS_SLOPE: f64 = 36.7;

/// Pathloss in dB at `distance_m` meters using the default law.
pub fn pathloss_db(distance_m: f64) -> Result<f64> {
    pathloss_db_with(distance_m, PATHLOSS_OFFSET_DB, PATHLOSS_SLOPE)
}

pub fn pathloss_db_with(distance_m: f64, offset_db: f64, slope: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(Error::Domain(format!(
            "pathloss distance must be positive and finite, got {distance_m}"
        )));
    }
    Ok(offset_db + slope * distance_m.log10())
}

/// Linear power gain corresponding to a loss of `loss_db`.
pub fn db_to_gain(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

/// Half-wavelength ULA response, normalized to unit Euclidean norm.
pub fn ula_steering(antennas: usize, sine: f64) -> Result<DVector<Complex64>> {
    if antennas == 0 {
        return Err(Error::Config("steering vector needs at least one antenna".into()));
    }
    if !(-1.0..=1.0).contains(&sine) {
        return Err(Error::Domain(format!(
            "sine of the arrival angle must lie in [-1, 1], got {sine}"
        )));
    }
    let scale = 1.0 / (antennas as f64).sqrt();
    Ok(DVector::from_fn(antennas, |m, _| {
        Complex64::from_polar(scale, -std::f64::consts::PI * m as f64 * sine)
    }))
}

/// One user column: `sqrt(beta) * sqrt(M / N_p) * sum_p gain_p * a(sine_p)`.
pub fn channel_column(
    antennas: usize,
    large_scale_gain: f64,
    path_gains: &[Complex64],
    path_sines: &[f64],
) -> Result<DVector<Complex64>> {
    if path_gains.len() != path_sines.len() || path_gains.is_empty() {
        return Err(Error::dim(
            "channel_column",
            "equal, nonzero path gain and angle counts",
            format!("{} gains, {} angles", path_gains.len(), path_sines.len()),
        ));
    }
    let scale = (large_scale_gain * antennas as f64 / path_gains.len() as f64).sqrt();
    let mut column = DVector::zeros(antennas);
    for (&gain, &sine) in path_gains.iter().zip(path_sines) {
        column.axpy(gain * scale, &ula_steering(antennas, sine)?, Complex64::new(1.0, 0.0));
    }
    Ok(column)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelProcessConfig {
    pub path_count: usize,
    /// Frame-to-frame correlation of the autoregressive evolution.
    pub ar_coefficient: f64,
    pub pathloss_offset_db: f64,
    pub pathloss_slope: f64,
    /// Half-width (sine domain) of each user's path cluster. `None` draws every
    /// path angle uniformly over the whole sine domain.
    pub angular_spread: Option<f64>,
}

impl Default for ChannelProcessConfig {
    fn default() -> Self {
        Self {
            path_count: 8,
            ar_coefficient: 0.9,
            pathloss_offset_db: PATHLOSS_OFFSET_DB,
            pathloss_slope: PATHLOSS_SLOPE,
            angular_spread: Some(0.1),
        }
    }
}

impl ChannelProcessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.path_count == 0 {
            return Err(Error::Config("path_count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.ar_coefficient) {
            return Err(Error::Config(format!(
                "ar_coefficient must lie in [0, 1], got {}",
                self.ar_coefficient
            )));
        }
        if let Some(spread) = self.angular_spread {
            if !(0.0..=1.0).contains(&spread) {
                return Err(Error::Config(format!(
                    "angular_spread must lie in [0, 1], got {spread}"
                )));
            }
        }
        Ok(())
    }

    pub fn large_scale_gain(&self, distance_m: f64) -> Result<f64> {
        pathloss_db_with(distance_m, self.pathloss_offset_db, self.pathloss_slope).map(db_to_gain)
    }
}

/// User drop: distances to the base station and cluster centres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserGeometry {
    pub distances_m: Vec<f64>,
    /// Sine-domain centre of each user's path cluster.
    pub cluster_sines: Vec<f64>,
}

impl UserGeometry {
    pub fn new(distances_m: Vec<f64>, cluster_sines: Vec<f64>) -> Result<Self> {
        let geometry = Self {
            distances_m,
            cluster_sines,
        };
        geometry.validate(CELL_RADIUS_M)?;
        Ok(geometry)
    }

    /// Users at the given distances with broadside cluster centres.
    pub fn at_distances(distances_m: Vec<f64>) -> Result<Self> {
        let users = distances_m.len();
        Self::new(distances_m, vec![0.0; users])
    }

    /// Uniform (by area) drop in the annulus `[min_radius, max_radius]`.
    pub fn drop_uniform<R: Rng + ?Sized>(
        rng: &mut R,
        users: usize,
        min_radius: f64,
        max_radius: f64,
    ) -> Result<Self> {
        if !(min_radius > 0.0 && min_radius <= max_radius) {
            return Err(Error::Config(format!(
                "annulus [{min_radius}, {max_radius}] is not a valid drop region"
            )));
        }
        let (lo2, hi2) = (min_radius * min_radius, max_radius * max_radius);
        let mut distances_m = Vec::with_capacity(users);
        let mut cluster_sines = Vec::with_capacity(users);
        for _ in 0..users {
            let u: f64 = rng.random();
            distances_m.push((lo2 + u * (hi2 - lo2)).sqrt());
            cluster_sines.push(rng.random_range(-1.0..1.0));
        }
        let geometry = Self {
            distances_m,
            cluster_sines,
        };
        geometry.validate(max_radius)?;
        Ok(geometry)
    }

    pub fn validate(&self, cell_radius: f64) -> Result<()> {
        if self.distances_m.is_empty() {
            return Err(Error::Config("geometry needs at least one user".into()));
        }
        if self.distances_m.len() != self.cluster_sines.len() {
            return Err(Error::dim(
                "UserGeometry",
                self.distances_m.len(),
                self.cluster_sines.len(),
            ));
        }
        for &d in &self.distances_m {
            if !(d > 0.0 && d <= cell_radius) {
                return Err(Error::Domain(format!(
                    "user distance {d} m outside (0, {cell_radius}]"
                )));
            }
        }
        for &s in &self.cluster_sines {
            if !(-1.0..=1.0).contains(&s) {
                return Err(Error::Domain(format!("cluster sine {s} outside [-1, 1]")));
            }
        }
        Ok(())
    }

    pub fn user_count(&self) -> usize {
        self.distances_m.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    /// `M x K` uplink channel.
    pub matrix: DMatrix<Complex64>,
    pub frame_index: u64,
}

impl ChannelSample {
    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn users(&self) -> usize {
        self.matrix.ncols()
    }
}

fn wrap_sine(s: f64) -> f64 {
    let wrapped = s - 2.0 * ((s + 1.0) / 2.0).floor();
    // floor can land exactly on the excluded upper edge through rounding
    if wrapped >= 1.0 {
        wrapped - 2.0
    } else {
        wrapped
    }
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws one `M x K` channel for the given drop.
pub fn draw_channel<R: Rng + ?Sized>(
    rng: &mut R,
    geometry: &UserGeometry,
    cfg: &ChannelProcessConfig,
    antennas: usize,
    frame_index: u64,
) -> Result<ChannelSample> {
    cfg.validate()?;
    if antennas == 0 {
        return Err(Error::Config("antenna count must be positive".into()));
    }
    let users = geometry.user_count();
    let mut matrix = DMatrix::zeros(antennas, users);
    let mut gains = vec![Complex64::new(0.0, 0.0); cfg.path_count];
    let mut sines = vec![0.0; cfg.path_count];
    for k in 0..users {
        for p in 0..cfg.path_count {
            gains[p] = complex_gaussian(rng);
            sines[p] = match cfg.angular_spread {
                None => rng.random_range(-1.0..1.0),
                Some(spread) => {
                    let jitter: f64 = rng.random_range(-1.0..1.0);
                    wrap_sine(geometry.cluster_sines[k] + spread * jitter)
                }
            };
        }
        let beta = cfg.large_scale_gain(geometry.distances_m[k])?;
        let column = channel_column(antennas, beta, &gains, &sines)?;
        matrix.set_column(k, &column);
    }
    Ok(ChannelSample {
        matrix,
        frame_index,
    })
}

/// First-order autoregressive step `rho * H_prev + sqrt(1 - rho^2) * H_innov`.
pub fn evolve_channel<R: Rng + ?Sized>(
    prev: &ChannelSample,
    rng: &mut R,
    geometry: &UserGeometry,
    cfg: &ChannelProcessConfig,
) -> Result<ChannelSample> {
    if prev.users() != geometry.user_count() {
        return Err(Error::dim(
            "evolve_channel",
            format!("{} users", geometry.user_count()),
            format!("{} users", prev.users()),
        ));
    }
    let rho = cfg.ar_coefficient;
    let innovation = draw_channel(rng, geometry, cfg, prev.antennas(), prev.frame_index + 1)?;
    if rho == 1.0 {
        return Ok(ChannelSample {
            matrix: prev.matrix.clone(),
            frame_index: prev.frame_index + 1,
        });
    }
    let fresh = (1.0 - rho * rho).sqrt();
    let matrix = prev.matrix.map(|h| h * rho) + innovation.matrix.map(|h| h * fresh);
    Ok(ChannelSample {
        matrix,
        frame_index: prev.frame_index + 1,
    })
}

/// Seeded source of channel samples for one drop.
///
/// In independent mode each frame is a fresh draw; in correlated mode
/// consecutive frames follow the autoregressive evolution.
#[derive(Debug, Clone)]
pub struct ChannelStream {
    rng: ChaCha8Rng,
    geometry: UserGeometry,
    cfg: ChannelProcessConfig,
    antennas: usize,
    correlated: bool,
    last: Option<ChannelSample>,
    next_frame: u64,
}

impl ChannelStream {
    pub fn new(
        seed: u64,
        stream_id: u64,
        geometry: UserGeometry,
        cfg: ChannelProcessConfig,
        antennas: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Ok(Self {
            rng,
            geometry,
            cfg,
            antennas,
            correlated: false,
            last: None,
            next_frame: 0,
        })
    }

    pub fn correlated(mut self) -> Self {
        self.correlated = true;
        self
    }

    pub fn geometry(&self) -> &UserGeometry {
        &self.geometry
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn next_sample(&mut self) -> Result<ChannelSample> {
        let sample = match (&self.last, self.correlated) {
            (Some(prev), true) => evolve_channel(prev, &mut self.rng, &self.geometry, &self.cfg)?,
            _ => draw_channel(
                &mut self.rng,
                &self.geometry,
                &self.cfg,
                self.antennas,
                self.next_frame,
            )?,
        };
        self.next_frame = sample.frame_index + 1;
        if self.correlated {
            self.last = Some(sample.clone());
        }
        Ok(sample)
    }

    pub fn take_samples(&mut self, count: usize) -> Result<Vec<ChannelSample>> {
        (0..count).map(|_| self.next_sample()).collect()
    }
}

impl Iterator for ChannelStream {
    type Item = Result<ChannelSample>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.next_sample())
    }
}

/// Debug dump: one row per entry, `frame_index,row,col,re,im`.
pub fn write_samples_csv<W: Write>(writer: W, samples: &[ChannelSample]) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["frame_index", "row", "col", "re", "im"])?;
    for sample in samples {
        for col in 0..sample.matrix.ncols() {
            for row in 0..sample.matrix.nrows() {
                let h = sample.matrix[(row, col)];
                out.write_record(&[
                    sample.frame_index.to_string(),
                    row.to_string(),
                    col.to_string(),
                    format!("{:e}", h.re),
                    format!("{:e}", h.im),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}
