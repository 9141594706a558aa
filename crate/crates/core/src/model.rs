//! Domain types shared by every stage: directions, the azimuth grid, HRIR sets and signals.
//!
//! Azimuths are in degrees, counterclockwise positive (left ear at +90), kept in
//! `[-180, 180)`. Elevation is carried on [`Direction`] but is always zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 48_000;
pub const DEFAULT_NUM_TAPS: usize = 256;
pub const DEFAULT_STEP_DEG: f64 = 5.0;

/// Wraps `az` into `[-180, 180)`.
pub fn normalize_azimuth(az: f64) -> Result<f64> {
    if !az.is_finite() {
        return Err(Error::InvalidArgument(format!("azimuth {az} is not finite")));
    }
    let mut r = (az + 180.0).rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs.
    if r >= 360.0 {
        r = 0.0;
    }
    Ok(r - 180.0)
}

/// Unsigned angle between two azimuths, in `[0, 180]` degrees.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl Direction {
    pub fn horizontal(azimuth_deg: f64) -> Result<Self> {
        Ok(Self {
            azimuth_deg: normalize_azimuth(azimuth_deg)?,
            elevation_deg: 0.0,
        })
    }
}

/// Uniform full-circle azimuth grid in the horizontal plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionGrid {
    step_deg: f64,
    bins: Vec<Direction>,
}

impl DirectionGrid {
    pub fn new(step_deg: f64) -> Result<Self> {
        if !(step_deg.is_finite() && step_deg > 0.0 && step_deg <= 360.0) {
            return Err(Error::InvalidArgument(format!(
                "grid step {step_deg} deg must be in (0, 360]"
            )));
        }
        let count = (360.0 / step_deg).round();
        if (count * step_deg - 360.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "grid step {step_deg} deg does not divide 360"
            )));
        }
        let bins = (0..count as usize)
            .map(|i| Direction {
                azimuth_deg: -180.0 + i as f64 * step_deg,
                elevation_deg: 0.0,
            })
            .collect();
        Ok(Self { step_deg, bins })
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn bins(&self) -> &[Direction] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn azimuths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|d| d.azimuth_deg)
    }

    /// Index of the bin nearest to `az`; exact midpoints go to the larger azimuth.
    pub fn index_of(&self, az: f64) -> Result<usize> {
        let az = normalize_azimuth(az)?;
        let k = (az / self.step_deg + 0.5).floor();
        let offset = (180.0 / self.step_deg).round();
        let n = self.bins.len() as i64;
        Ok(((k as i64 + offset as i64).rem_euclid(n)) as usize)
    }

    /// Index of a bin whose azimuth equals `az` exactly (after normalization).
    pub fn exact_index(&self, az: f64) -> Option<usize> {
        let i = self.index_of(az).ok()?;
        (angular_distance(self.bins[i].azimuth_deg, az) < 1e-9).then_some(i)
    }
}

/// Quantizes a continuous azimuth onto the grid.
pub fn bin_direction(az: f64, grid: &DirectionGrid) -> Result<Direction> {
    Ok(grid.bins[grid.index_of(az)?])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthesized,
    Estimated,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Synthesized => "synthesized",
            Provenance::Estimated => "estimated",
        }
    }
}

/// Per-bin estimation quality carried by estimated sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SetQuality {
    /// NMSE of the selected visit; `None` for missing bins, `+inf` when only sub-L visits exist.
    pub nmse_left: Vec<Option<f64>>,
    pub nmse_right: Vec<Option<f64>>,
    /// Bins whose selected visit was shorter than the filter length in either ear.
    pub low_confidence: Vec<bool>,
}

/// Direction-indexed left/right HRIRs at one source distance.
#[derive(Debug, Clone, PartialEq)]
pub struct HrirSet<T> {
    pub sample_rate_hz: u32,
    pub num_taps: usize,
    pub distance_m: f64,
    pub grid: DirectionGrid,
    pub left: Vec<Vec<T>>,
    pub right: Vec<Vec<T>>,
    /// Bins without a measurement; their taps are zero-filled.
    pub missing: Vec<bool>,
    pub provenance: Provenance,
    pub quality: Option<SetQuality>,
}

impl<T: Real> HrirSet<T> {
    /// Checks shapes against the grid and that every tap is finite.
    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        for (what, len) in [
            ("left", self.left.len()),
            ("right", self.right.len()),
            ("missing", self.missing.len()),
        ] {
            if len != n {
                return Err(Error::LengthMismatch {
                    what: format!("{what} direction list"),
                    expected: n,
                    actual: len,
                });
            }
        }
        for (i, taps) in self.left.iter().chain(&self.right).enumerate() {
            if taps.len() != self.num_taps {
                return Err(Error::LengthMismatch {
                    what: format!("HRIR #{i}"),
                    expected: self.num_taps,
                    actual: taps.len(),
                });
            }
            if let Some(j) = taps.iter().position(|t| !t.is_finite()) {
                return Err(Error::NonFinite {
                    what: "HRIR tap",
                    index: j,
                });
            }
        }
        if let Some(q) = &self.quality {
            if q.nmse_left.len() != n || q.nmse_right.len() != n || q.low_confidence.len() != n {
                return Err(Error::LengthMismatch {
                    what: "quality table".into(),
                    expected: n,
                    actual: q.nmse_left.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Left and right HRIR of the bin exactly at `az`, if present and measured.
    pub fn pair_at(&self, az: f64) -> Option<(&[T], &[T])> {
        let i = self.grid.exact_index(az)?;
        (!self.missing[i]).then(|| (self.left[i].as_slice(), self.right[i].as_slice()))
    }

    /// Converts the tap type, e.g. an `f64` truth set into `f32`.
    pub fn cast<U: Real>(&self) -> HrirSet<U> {
        let conv = |v: &Vec<Vec<T>>| -> Vec<Vec<U>> {
            v.iter()
                .map(|t| t.iter().map(|x| U::from_f64_lossy(x.to_f64_lossy())).collect())
                .collect()
        };
        HrirSet {
            sample_rate_hz: self.sample_rate_hz,
            num_taps: self.num_taps,
            distance_m: self.distance_m,
            grid: self.grid.clone(),
            left: conv(&self.left),
            right: conv(&self.right),
            missing: self.missing.clone(),
            provenance: self.provenance,
            quality: self.quality.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal<T> {
    pub sample_rate_hz: u32,
    pub samples: Vec<T>,
}

impl<T: Real> Signal<T> {
    pub fn new(sample_rate_hz: u32, samples: Vec<T>) -> Result<Self> {
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite {
                what: "signal sample",
                index: i,
            });
        }
        Ok(Self {
            sample_rate_hz,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples
            .iter()
            .map(|s| {
                let v = s.to_f64_lossy();
                v * v
            })
            .sum::<f64>()
            / self.samples.len() as f64
    }
}
