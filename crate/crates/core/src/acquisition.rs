//! Simulated acquisition rig.
//!
//! A stepwise turntable holds each grid azimuth for `dwell_ms` of usable
//! samples while a piecewise-constant yaw jitter is added on top. Whenever the
//! jitter exceeds the pause threshold, the samples are still recorded but flagged
//! paused, and the dwell is extended until the bin has accumulated its full
//! unpaused quota. The ear signals follow `y(n) = h(n)ᵀ x(n) + v(n)`, where
//! `h(n)` is the truth HRIR nearest to the instantaneous (unbinned) azimuth.
//!
//! All randomness comes from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`. Independent word streams separate the quantities:
//! stream 0 is the excitation, stream 1 the yaw jitter, and streams 2 and 3 the
//! left and right measurement noise. Normal variates use
//! `rand_distr::StandardNormal` (ziggurat).

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{bin_direction, normalize_azimuth, Direction, DirectionGrid, HrirSet, Signal};
use crate::scalar::{dot, Real};

pub const STREAM_EXCITATION: u64 = 0;
pub const STREAM_JITTER: u64 = 1;
pub const STREAM_NOISE_LEFT: u64 = 2;
pub const STREAM_NOISE_RIGHT: u64 = 3;

/// Coarsest truth grid the simulator accepts.
pub const MAX_TRUTH_STEP_DEG: f64 = 1.0;

/// Sessions longer than this multiple of the nominal unpaused length are abandoned.
const MAX_PAUSE_OVERHEAD: u64 = 50;

fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JitterConfig {
    pub enabled: bool,
    pub yaw_std_deg: f64,
    pub update_interval_ms: f64,
}

impl Default for JitterConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            yaw_std_deg: 1.0,
            update_interval_ms: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub sample_rate_hz: u32,
    pub dwell_ms: f64,
    pub step_deg: f64,
    /// Session SNR per ear in dB; `+inf` records noiseless audio.
    #[serde(with = "snr_repr")]
    pub snr_db: f64,
    pub jitter: JitterConfig,
    pub pause_threshold_deg: f64,
    pub seed: u64,
    pub distance_m: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: crate::model::DEFAULT_SAMPLE_RATE_HZ,
            dwell_ms: 600.0,
            step_deg: crate::model::DEFAULT_STEP_DEG,
            snr_db: 40.0,
            jitter: JitterConfig::default(),
            pause_threshold_deg: 2.0,
            seed: 42,
            distance_m: 0.4,
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.sample_rate_hz == 0 {
            return bad("sample rate must be positive".into());
        }
        if !(self.dwell_ms.is_finite() && self.dwell_ms > 0.0) {
            return bad(format!("dwell {} ms must be positive", self.dwell_ms));
        }
        if !(self.pause_threshold_deg.is_finite() && self.pause_threshold_deg > 0.0) {
            return bad(format!("pause threshold {} deg must be positive", self.pause_threshold_deg));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad(format!("snr {} dB is not usable", self.snr_db));
        }
        if self.jitter.enabled
            && !(self.jitter.yaw_std_deg >= 0.0
                && self.jitter.yaw_std_deg.is_finite()
                && self.jitter.update_interval_ms > 0.0
                && self.jitter.update_interval_ms.is_finite())
        {
            return bad(format!("invalid jitter settings {:?}", self.jitter));
        }
        DirectionGrid::new(self.step_deg)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<DirectionGrid> {
        DirectionGrid::new(self.step_deg)
    }

    pub fn dwell_samples(&self) -> u64 {
        ((self.dwell_ms * self.sample_rate_hz as f64 / 1000.0).round() as u64).max(1)
    }

    fn jitter_block_samples(&self) -> u64 {
        ((self.jitter.update_interval_ms * self.sample_rate_hz as f64 / 1000.0).round() as u64).max(1)
    }
}

/// JSON has no infinity; noiseless sessions serialize their SNR as the string `"inf"`.
mod snr_repr {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub start_sample: u64,
    /// Exclusive.
    pub end_sample: u64,
    pub instantaneous_azimuth_deg: f64,
    pub grid_bin: Direction,
    pub paused: bool,
}

impl Segment {
    pub fn len(&self) -> u64 {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.end_sample == self.start_sample
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trajectory {
    pub segments: Vec<Segment>,
}

impl Trajectory {
    pub fn total_samples(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.end_sample)
    }

    pub fn unpaused_samples(&self) -> u64 {
        self.segments.iter().filter(|s| !s.paused).map(Segment::len).sum()
    }

    pub fn paused_segments(&self) -> usize {
        self.segments.iter().filter(|s| s.paused).count()
    }

    /// Checks contiguity from sample zero and, for unpaused segments, that the
    /// recorded bin matches the binned instantaneous azimuth.
    pub fn validate(&self, grid: &DirectionGrid) -> Result<()> {
        let mut cursor = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.start_sample != cursor || s.end_sample <= s.start_sample {
                return Err(Error::InvalidArgument(format!(
                    "trajectory segment {i} [{}, {}) breaks contiguity at sample {cursor}",
                    s.start_sample, s.end_sample
                )));
            }
            if !s.paused && bin_direction(s.instantaneous_azimuth_deg, grid)? != s.grid_bin {
                return Err(Error::InvalidArgument(format!(
                    "trajectory segment {i} bin {} does not match azimuth {}",
                    s.grid_bin.azimuth_deg, s.instantaneous_azimuth_deg
                )));
            }
            cursor = s.end_sample;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinauralRecording<T> {
    pub excitation: Signal<T>,
    pub left: Signal<T>,
    pub right: Signal<T>,
    pub trajectory: Trajectory,
    pub config: SessionConfig,
}

impl<T: Real> BinauralRecording<T> {
    pub fn len(&self) -> usize {
        self.excitation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excitation.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.excitation.len();
        for (what, sig) in [("left", &self.left), ("right", &self.right)] {
            if sig.len() != n {
                return Err(Error::LengthMismatch {
                    what: format!("{what} channel"),
                    expected: n,
                    actual: sig.len(),
                });
            }
        }
        for sig in [&self.excitation, &self.left, &self.right] {
            if sig.sample_rate_hz != self.config.sample_rate_hz {
                return Err(Error::InvalidArgument(format!(
                    "signal rate {} Hz differs from session rate {} Hz",
                    sig.sample_rate_hz, self.config.sample_rate_hz
                )));
            }
        }
        if self.trajectory.total_samples() != n as u64 {
            return Err(Error::LengthMismatch {
                what: "trajectory".into(),
                expected: n,
                actual: self.trajectory.total_samples() as usize,
            });
        }
        self.trajectory.validate(&self.config.grid()?)
    }
}

/// White Gaussian excitation with unit variance.
pub fn gen_excitation<T: Real>(seed: u64, duration_samples: usize, sample_rate_hz: u32) -> Result<Signal<T>> {
    if duration_samples == 0 {
        return Err(Error::InvalidArgument("excitation duration must be positive".into()));
    }
    let mut rng = stream_rng(seed, STREAM_EXCITATION);
    let samples = (0..duration_samples)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::from_f64_lossy(v)
        })
        .collect();
    Signal::new(sample_rate_hz, samples)
}

/// Seeded trajectory; yaw offsets come from jitter stream of `config.seed`.
pub fn gen_trajectory(config: &SessionConfig) -> Result<Trajectory> {
    let mut rng = stream_rng(config.seed, STREAM_JITTER);
    let std = config.jitter.yaw_std_deg;
    gen_trajectory_with_yaw(config, |_| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * std
    })
}

/// Trajectory driven by an explicit yaw source, called once per jitter block in order.
///
/// The yaw source is only consulted when jitter is enabled.
pub fn gen_trajectory_with_yaw(config: &SessionConfig, mut yaw_for_block: impl FnMut(u64) -> f64) -> Result<Trajectory> {
    config.validate()?;
    let grid = config.grid()?;
    let dwell = config.dwell_samples();
    let block = config.jitter_block_samples();
    let nominal = dwell * grid.len() as u64;
    let cap = nominal.saturating_mul(MAX_PAUSE_OVERHEAD);

    let start = grid.index_of(0.0)?;
    let mut segments: Vec<Segment> = Vec::new();
    let mut t = 0u64;
    let mut current_block = None;
    let mut yaw = 0.0;

    for k in 0..grid.len() {
        let turntable = grid.bins()[(start + k) % grid.len()].azimuth_deg;
        let mut unpaused = 0u64;
        while unpaused < dwell {
            let block_end = if config.jitter.enabled {
                let b = t / block;
                if current_block != Some(b) {
                    yaw = yaw_for_block(b);
                    current_block = Some(b);
                }
                (b + 1) * block
            } else {
                u64::MAX
            };
            let paused = yaw.abs() > config.pause_threshold_deg;
            let remaining = block_end - t;
            let len = if paused { remaining } else { remaining.min(dwell - unpaused) };
            let inst = normalize_azimuth(turntable + yaw)?;
            let grid_bin = bin_direction(inst, &grid)?;

            match segments.last_mut() {
                Some(prev)
                    if prev.paused == paused
                        && prev.instantaneous_azimuth_deg == inst
                        && prev.grid_bin == grid_bin =>
                {
                    prev.end_sample += len;
                }
                _ => segments.push(Segment {
                    start_sample: t,
                    end_sample: t + len,
                    instantaneous_azimuth_deg: inst,
                    grid_bin,
                    paused,
                }),
            }
            t += len;
            if !paused {
                unpaused += len;
            }
            if t > cap {
                return Err(Error::InvalidArgument(format!(
                    "session exceeded {cap} samples; jitter std {} deg is too large for pause threshold {} deg",
                    config.jitter.yaw_std_deg, config.pause_threshold_deg
                )));
            }
        }
    }
    Ok(Trajectory { segments })
}

/// Time-reversed excitation with `taps - 1` leading zeros, so that the
/// newest-first window `[x(n), x(n-1), …, x(n-L+1)]` is the contiguous slice
/// starting at `len - 1 - n`.
#[derive(Debug, Clone)]
pub struct ReversedExcitation<T> {
    rev: Vec<T>,
    len: usize,
    taps: usize,
}

impl<T: Real> ReversedExcitation<T> {
    pub fn new(x: &[T], taps: usize) -> Self {
        let mut rev = Vec::with_capacity(x.len() + taps.saturating_sub(1));
        rev.extend(x.iter().rev().copied());
        rev.extend(std::iter::repeat_n(T::zero(), taps.saturating_sub(1)));
        Self { rev, len: x.len(), taps }
    }

    /// Newest-first window ending at sample `n`.
    #[inline]
    pub fn window(&self, n: usize) -> &[T] {
        let start = self.len - 1 - n;
        &self.rev[start..start + self.taps]
    }
}

/// Ear signals for `excitation` played along `trajectory` through the `truth` set.
///
/// Noise is white Gaussian, rescaled so the empirical session SNR per ear equals
/// `snr_db` exactly; an infinite SNR yields the noiseless convolution.
pub fn simulate_recording<T: Real>(
    truth: &HrirSet<T>,
    trajectory: &Trajectory,
    excitation: &Signal<T>,
    snr_db: f64,
    seed: u64,
) -> Result<(Signal<T>, Signal<T>)> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument(format!("snr {snr_db} dB is not usable")));
    }
    if truth.grid.step_deg() > MAX_TRUTH_STEP_DEG + 1e-12 {
        return Err(Error::GridTooCoarse {
            step_deg: truth.grid.step_deg(),
        });
    }
    if trajectory.total_samples() != excitation.len() as u64 {
        return Err(Error::LengthMismatch {
            what: "excitation".into(),
            expected: trajectory.total_samples() as usize,
            actual: excitation.len(),
        });
    }
    if excitation.sample_rate_hz != truth.sample_rate_hz {
        return Err(Error::InvalidArgument(format!(
            "excitation rate {} Hz differs from truth rate {} Hz",
            excitation.sample_rate_hz, truth.sample_rate_hz
        )));
    }
    truth.validate()?;
    let n = excitation.len();
    let xr = ReversedExcitation::new(&excitation.samples, truth.num_taps);
    let mut left = vec![T::zero(); n];
    let mut right = vec![T::zero(); n];
    for seg in &trajectory.segments {
        let idx = truth.grid.index_of(seg.instantaneous_azimuth_deg)?;
        if truth.missing[idx] {
            return Err(Error::InvalidArgument(format!(
                "truth set has no HRIR at {} deg",
                truth.grid.bins()[idx].azimuth_deg
            )));
        }
        let (hl, hr) = (&truth.left[idx], &truth.right[idx]);
        for i in seg.start_sample as usize..seg.end_sample as usize {
            let w = xr.window(i);
            left[i] = dot(hl, w);
            right[i] = dot(hr, w);
        }
    }
    if snr_db.is_finite() {
        add_noise(&mut left, snr_db, seed, STREAM_NOISE_LEFT);
        add_noise(&mut right, snr_db, seed, STREAM_NOISE_RIGHT);
    }
    Ok((
        Signal::new(excitation.sample_rate_hz, left)?,
        Signal::new(excitation.sample_rate_hz, right)?,
    ))
}

fn add_noise<T: Real>(y: &mut [T], snr_db: f64, seed: u64, stream: u64) {
    let signal_power = mean_power(y);
    if signal_power == 0.0 || y.is_empty() {
        return;
    }
    let mut rng = stream_rng(seed, stream);
    let noise: Vec<f64> = (0..y.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let raw_power = noise.iter().map(|v| v * v).sum::<f64>() / noise.len() as f64;
    let target = signal_power / 10f64.powf(snr_db / 10.0);
    let gain = (target / raw_power).sqrt();
    for (s, v) in y.iter_mut().zip(noise) {
        *s = *s + T::from_f64_lossy(gain * v);
    }
}

fn mean_power<T: Real>(y: &[T]) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    y.iter()
        .map(|s| {
            let v = s.to_f64_lossy();
            v * v
        })
        .sum::<f64>()
        / y.len() as f64
}

/// Full simulated session: trajectory, excitation and both ear signals from `config`.
pub fn acquire<T: Real>(truth: &HrirSet<T>, config: &SessionConfig) -> Result<BinauralRecording<T>> {
    config.validate()?;
    if truth.sample_rate_hz != config.sample_rate_hz {
        return Err(Error::InvalidArgument(format!(
            "truth rate {} Hz differs from session rate {} Hz",
            truth.sample_rate_hz, config.sample_rate_hz
        )));
    }
    let trajectory = gen_trajectory(config)?;
    let excitation = gen_excitation(config.seed, trajectory.total_samples() as usize, config.sample_rate_hz)?;
    let (left, right) = simulate_recording(truth, &trajectory, &excitation, config.snr_db, config.seed)?;
    Ok(BinauralRecording {
        excitation,
        left,
        right,
        trajectory,
        config: *config,
    })
}
