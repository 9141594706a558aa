//! Rigid-sphere ground-truth HRIRs.
//!
//! Each ear sees a delayed, 1/r-attenuated impulse whose delay follows the
//! shortest path around a sphere (straight line while the ear is visible,
//! tangent plus arc once it is shadowed), followed by a first-order
//! one-pole/one-zero head-shadow filter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{angular_distance, Direction, DirectionGrid, HrirSet, Provenance};
use crate::scalar::Real;

/// Half-width of the windowed-sinc fractional delay kernel (64 taps total).
pub const FRACTIONAL_DELAY_HALF_WIDTH: usize = 32;
/// Reference distance for the 1/r spreading gain.
pub const REFERENCE_DISTANCE_M: f64 = 1.0;
/// Residual magnitude below which the shadow-filter tail is considered decayed.
const TAIL_DECAY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadModel {
    pub head_radius_m: f64,
    /// Left-ear azimuth; the right ear sits at the mirrored azimuth.
    pub ear_azimuth_deg: f64,
    pub speed_of_sound_mps: f64,
    pub shadow_alpha_min: f64,
    pub shadow_theta_min_deg: f64,
}

impl Default for HeadModel {
    fn default() -> Self {
        Self {
            head_radius_m: 0.0875,
            ear_azimuth_deg: 90.0,
            speed_of_sound_mps: 343.0,
            shadow_alpha_min: 0.1,
            shadow_theta_min_deg: 150.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ear {
    Left,
    Right,
}

impl HeadModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.head_radius_m.is_finite()
            && self.head_radius_m > 0.0
            && self.speed_of_sound_mps.is_finite()
            && self.speed_of_sound_mps > 0.0
            && self.shadow_alpha_min > 0.0
            && self.shadow_alpha_min <= 2.0
            && self.shadow_theta_min_deg > 0.0
            && self.shadow_theta_min_deg <= 180.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid head model {self:?}")))
        }
    }

    pub fn ear_azimuth(&self, ear: Ear) -> f64 {
        match ear {
            Ear::Left => self.ear_azimuth_deg,
            Ear::Right => -self.ear_azimuth_deg,
        }
    }

    /// Great-circle angle between the source direction and the ear axis.
    pub fn ear_angle_rad(&self, ear: Ear, source_azimuth_deg: f64) -> f64 {
        angular_distance(source_azimuth_deg, self.ear_azimuth(ear)).to_radians()
    }

    fn check_distance(&self, distance_m: f64) -> Result<()> {
        if !(distance_m.is_finite() && distance_m > self.head_radius_m) {
            return Err(Error::SourceInsideHead {
                distance_m,
                head_radius_m: self.head_radius_m,
            });
        }
        Ok(())
    }
}

/// Shortest acoustic path from a source at `source_distance_m` to an ear on the sphere.
pub fn path_length(model: &HeadModel, source_distance_m: f64, theta_rad: f64) -> Result<f64> {
    model.check_distance(source_distance_m)?;
    if !(0.0..=std::f64::consts::PI).contains(&theta_rad) {
        return Err(Error::InvalidArgument(format!(
            "ear angle {theta_rad} rad outside [0, pi]"
        )));
    }
    let a = model.head_radius_m;
    let r = source_distance_m;
    let tangent = (a / r).acos();
    if theta_rad <= tangent {
        Ok((r * r + a * a - 2.0 * a * r * theta_rad.cos()).sqrt())
    } else {
        Ok((r * r - a * a).sqrt() + a * (theta_rad - tangent))
    }
}

/// First-order digital section `y[n] = b0 x[n] + b1 x[n-1] - a1 y[n-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShadowFilter {
    pub b0: f64,
    pub b1: f64,
    pub a1: f64,
    /// Zero/pole frequency ratio of the analog prototype; equals the gain at high frequency.
    pub alpha: f64,
}

impl ShadowFilter {
    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        let w = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz as f64;
        let (c, s) = (w.cos(), w.sin());
        // H(e^jw) = (b0 + b1 e^-jw) / (1 + a1 e^-jw)
        let num = ((self.b0 + self.b1 * c).powi(2) + (self.b1 * s).powi(2)).sqrt();
        let den = ((1.0 + self.a1 * c).powi(2) + (self.a1 * s).powi(2)).sqrt();
        num / den
    }

    pub fn pole(&self) -> f64 {
        -self.a1
    }

    /// Filters `x` in place with zero initial state.
    pub fn apply(&self, x: &mut [f64]) {
        let (mut x1, mut y1) = (0.0, 0.0);
        for v in x.iter_mut() {
            let y = self.b0 * *v + self.b1 * x1 - self.a1 * y1;
            x1 = *v;
            y1 = y;
            *v = y;
        }
    }
}

/// Shadow-filter shape factor in `[alpha_min, 2]`: 2 facing the source, `alpha_min` at `theta_min`.
pub fn shadow_alpha(model: &HeadModel, theta_rad: f64) -> f64 {
    let am = model.shadow_alpha_min;
    let theta_min = model.shadow_theta_min_deg.to_radians();
    let alpha = (1.0 + am / 2.0) + (1.0 - am / 2.0) * (std::f64::consts::PI * theta_rad / theta_min).cos();
    alpha.clamp(am, 2.0)
}

/// Bilinear-transformed head shadow `(1 + s/wz) / (1 + s/wp)` with `wp = 2c/a`, `wz = wp/alpha`.
pub fn shadow_filter(model: &HeadModel, theta_rad: f64, sample_rate_hz: u32) -> Result<ShadowFilter> {
    if !(0.0..=std::f64::consts::PI).contains(&theta_rad) {
        return Err(Error::InvalidArgument(format!(
            "ear angle {theta_rad} rad outside [0, pi]"
        )));
    }
    if sample_rate_hz == 0 {
        return Err(Error::InvalidArgument("sample rate must be positive".into()));
    }
    let alpha = shadow_alpha(model, theta_rad);
    let wp = 2.0 * model.speed_of_sound_mps / model.head_radius_m;
    let wz = wp / alpha;
    let k = 2.0 * sample_rate_hz as f64;
    let a0 = 1.0 + k / wp;
    Ok(ShadowFilter {
        b0: (1.0 + k / wz) / a0,
        b1: (1.0 - k / wz) / a0,
        a1: (1.0 - k / wp) / a0,
        alpha,
    })
}

/// Hann-windowed sinc for a delay of `delay` samples, added into `out` with gain `gain`.
fn add_fractional_impulse(out: &mut [f64], delay: f64, gain: f64) {
    let half = FRACTIONAL_DELAY_HALF_WIDTH as f64;
    let first = (delay - half).ceil().max(0.0) as usize;
    let last = (delay + half).floor() as usize;
    for n in first..=last.min(out.len().saturating_sub(1)) {
        let t = n as f64 - delay;
        if t.abs() >= half {
            continue;
        }
        let sinc = if t == 0.0 {
            1.0
        } else {
            let pt = std::f64::consts::PI * t;
            pt.sin() / pt
        };
        let window = 0.5 * (1.0 + (std::f64::consts::PI * t / half).cos());
        out[n] += gain * sinc * window;
    }
}

/// Samples of shadow-filter tail until the impulse response falls below [`TAIL_DECAY`].
fn tail_length(filter: &ShadowFilter) -> usize {
    let p = filter.pole().abs();
    if p < 1e-12 {
        1
    } else {
        (TAIL_DECAY.ln() / p.ln()).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarResponse {
    pub path_m: f64,
    pub delay_s: f64,
    pub gain: f64,
    pub filter: ShadowFilter,
}

/// Geometry of one ear for a source direction, without rendering taps.
pub fn ear_response(
    model: &HeadModel,
    ear: Ear,
    direction: Direction,
    distance_m: f64,
    sample_rate_hz: u32,
) -> Result<EarResponse> {
    let theta = model.ear_angle_rad(ear, direction.azimuth_deg);
    let path_m = path_length(model, distance_m, theta)?;
    Ok(EarResponse {
        path_m,
        delay_s: path_m / model.speed_of_sound_mps,
        gain: REFERENCE_DISTANCE_M / path_m,
        filter: shadow_filter(model, theta, sample_rate_hz)?,
    })
}

fn render_ear(resp: &EarResponse, sample_rate_hz: u32, num_taps: usize) -> Result<Vec<f64>> {
    let delay = resp.delay_s * sample_rate_hz as f64;
    let required = delay.ceil() as usize + FRACTIONAL_DELAY_HALF_WIDTH + tail_length(&resp.filter);
    if required > num_taps {
        return Err(Error::TooFewTaps {
            required,
            available: num_taps,
        });
    }
    let mut taps = vec![0.0; num_taps];
    add_fractional_impulse(&mut taps, delay, resp.gain);
    resp.filter.apply(&mut taps);
    Ok(taps)
}

/// Left and right HRIRs for one direction.
pub fn synth_hrir<T: Real>(
    model: &HeadModel,
    direction: Direction,
    distance_m: f64,
    sample_rate_hz: u32,
    num_taps: usize,
) -> Result<(Vec<T>, Vec<T>)> {
    model.validate()?;
    let render = |ear| -> Result<Vec<T>> {
        let resp = ear_response(model, ear, direction, distance_m, sample_rate_hz)?;
        Ok(render_ear(&resp, sample_rate_hz, num_taps)?
            .into_iter()
            .map(T::from_f64_lossy)
            .collect())
    };
    Ok((render(Ear::Left)?, render(Ear::Right)?))
}

/// One [`synth_hrir`] per grid bin.
pub fn synth_hrir_set<T: Real>(
    model: &HeadModel,
    grid: &DirectionGrid,
    distance_m: f64,
    sample_rate_hz: u32,
    num_taps: usize,
) -> Result<HrirSet<T>> {
    let mut left = Vec::with_capacity(grid.len());
    let mut right = Vec::with_capacity(grid.len());
    for &dir in grid.bins() {
        let (l, r) = synth_hrir(model, dir, distance_m, sample_rate_hz, num_taps)?;
        left.push(l);
        right.push(r);
    }
    Ok(HrirSet {
        sample_rate_hz,
        num_taps,
        distance_m,
        grid: grid.clone(),
        left,
        right,
        missing: vec![false; grid.len()],
        provenance: Provenance::Synthesized,
        quality: None,
    })
}
