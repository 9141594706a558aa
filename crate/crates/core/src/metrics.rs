//! Consistency metrics between HRIR sets.
//!
//! * Spectral difference (SD): per warped-ERB band, the squared magnitude error
//!   normalized by the reference band energy. The total is the mean of the
//!   per-band ratios over bands `band_lo..=band_hi`, in dB.
//! * Correlation coefficient (CC): zero-lag Pearson correlation of two HRIRs.
//! * Interaural time difference (ITD): lag maximizing the mean-removed,
//!   normalized cross-correlation of the left and right HRIRs, in seconds.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HrirSet;
use crate::scalar::Real;

/// Lower bound on reported dB values; identical spectra would otherwise give -inf.
pub const SD_FLOOR_DB: f64 = -100.0;
pub const DEFAULT_NFFT: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErbBank {
    pub warp_gamma: f64,
    pub q_factor: f64,
    pub min_bandwidth_hz: f64,
    pub num_bands: usize,
    pub band_lo: usize,
    pub band_hi: usize,
}

impl Default for ErbBank {
    fn default() -> Self {
        Self {
            warp_gamma: 1.0,
            q_factor: 9.265,
            min_bandwidth_hz: 24.7,
            num_bands: 40,
            band_lo: 5,
            band_hi: 39,
        }
    }
}

impl ErbBank {
    pub fn validate(&self) -> Result<()> {
        let ok = self.warp_gamma > 0.0
            && self.q_factor > 0.0
            && self.min_bandwidth_hz > 0.0
            && self.band_lo >= 1
            && self.band_lo <= self.band_hi
            && self.band_hi <= self.num_bands;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid ERB bank {self:?}")))
        }
    }

    /// Bands included in the SD sum.
    pub fn bands(&self) -> std::ops::RangeInclusive<usize> {
        self.band_lo..=self.band_hi
    }

    pub fn band_count(&self) -> usize {
        self.band_hi - self.band_lo + 1
    }
}

/// Center frequency and bandwidth of ERB band `k` (1-based), in Hz.
///
/// `f_c = Q·BW·(e^{kγ/Q} − 1)`, `f_bw = γ·BW·e^{kγ/Q}`.
pub fn erb_band(k: usize, bank: &ErbBank) -> Result<(f64, f64)> {
    if k == 0 || k > bank.num_bands {
        return Err(Error::InvalidArgument(format!(
            "ERB band {k} outside 1..={}",
            bank.num_bands
        )));
    }
    let growth = (k as f64 * bank.warp_gamma / bank.q_factor).exp();
    let center = bank.q_factor * bank.min_bandwidth_hz * (growth - 1.0);
    let bandwidth = bank.warp_gamma * bank.min_bandwidth_hz * growth;
    Ok((center, bandwidth))
}

/// Inclusive DFT-bin range of each selected band.
///
/// A band takes every bin whose center frequency lies in `[f_c − f_bw/2, f_c + f_bw/2]`.
/// Bands narrower than the bin spacing that catch no bin center fall back to the
/// single bin nearest `f_c`.
pub fn band_bins(bank: &ErbBank, nfft: usize, sample_rate_hz: u32) -> Result<Vec<(usize, usize)>> {
    bank.validate()?;
    let df = sample_rate_hz as f64 / nfft as f64;
    let last_bin = nfft / 2;
    let mut out = Vec::with_capacity(bank.band_count());
    for k in bank.bands() {
        let (fc, bw) = erb_band(k, bank)?;
        let lo = ((fc - 0.5 * bw) / df).ceil().max(0.0) as usize;
        let hi = ((fc + 0.5 * bw) / df).floor() as usize;
        if hi > last_bin {
            return Err(Error::InvalidArgument(format!(
                "ERB band {k} reaches {} Hz, above Nyquist",
                fc + 0.5 * bw
            )));
        }
        if lo <= hi {
            out.push((lo, hi));
        } else {
            let nearest = ((fc / df).round() as usize).min(last_bin);
            out.push((nearest, nearest));
        }
    }
    Ok(out)
}

/// `|H(f)|` on the `nfft/2 + 1` non-negative frequency bins of the zero-padded response.
pub fn magnitude_spectrum<T: Real>(hrir: &[T], nfft: usize) -> Result<Vec<T>> {
    if !nfft.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("nfft {nfft} is not a power of two")));
    }
    if nfft < hrir.len() {
        return Err(Error::InvalidArgument(format!(
            "nfft {nfft} is shorter than the {}-tap response",
            hrir.len()
        )));
    }
    let mut buf: Vec<Complex<T>> = hrir.iter().map(|&v| Complex::new(v, T::zero())).collect();
    buf.resize(nfft, Complex::new(T::zero(), T::zero()));
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    Ok(buf[..=nfft / 2].iter().map(|c| c.norm()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDifference {
    pub total_db: f64,
    /// One entry per band `band_lo..=band_hi`.
    pub per_band_db: Vec<f64>,
    /// Linear error ratio per band before the dB conversion.
    pub per_band_ratio: Vec<f64>,
}

fn to_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(SD_FLOOR_DB)
    } else {
        SD_FLOOR_DB
    }
}

/// SD between two magnitude spectra sharing length and sample rate.
pub fn spectral_difference<T: Real>(
    reference: &[T],
    measured: &[T],
    bank: &ErbBank,
    sample_rate_hz: u32,
) -> Result<SpectralDifference> {
    if reference.len() != measured.len() {
        return Err(Error::LengthMismatch {
            what: "measured spectrum".into(),
            expected: reference.len(),
            actual: measured.len(),
        });
    }
    if reference.len() < 2 {
        return Err(Error::InvalidArgument("spectrum needs at least two bins".into()));
    }
    let nfft = 2 * (reference.len() - 1);
    let ranges = band_bins(bank, nfft, sample_rate_hz)?;
    let mut ratios = Vec::with_capacity(ranges.len());
    for (k, &(lo, hi)) in bank.bands().zip(&ranges) {
        let mut err = 0.0;
        let mut energy = 0.0;
        for f in lo..=hi {
            let r = reference[f].to_f64_lossy();
            let d = r - measured[f].to_f64_lossy();
            err += d * d;
            energy += r * r;
        }
        if energy == 0.0 {
            return Err(Error::EmptyBand { band: k });
        }
        ratios.push(err / energy);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    Ok(SpectralDifference {
        total_db: to_db(mean),
        per_band_db: ratios.iter().map(|&r| to_db(r)).collect(),
        per_band_ratio: ratios,
    })
}

fn centered<T: Real>(h: &[T], what: &'static str) -> Result<(Vec<f64>, f64)> {
    if h.is_empty() {
        return Err(Error::ZeroVariance(what));
    }
    let mean = h.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / h.len() as f64;
    let c: Vec<f64> = h.iter().map(|v| v.to_f64_lossy() - mean).collect();
    let energy = c.iter().map(|v| v * v).sum::<f64>();
    if energy <= 0.0 || !energy.is_finite() {
        return Err(Error::ZeroVariance(what));
    }
    Ok((c, energy))
}

/// Zero-lag Pearson correlation.
pub fn correlation_coefficient<T: Real>(a: &[T], b: &[T]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            what: "second HRIR".into(),
            expected: a.len(),
            actual: b.len(),
        });
    }
    let (ca, ea) = centered(a, "first HRIR")?;
    let (cb, eb) = centered(b, "second HRIR")?;
    let num: f64 = ca.iter().zip(&cb).map(|(x, y)| x * y).sum();
    Ok((num / (ea * eb).sqrt()).clamp(-1.0, 1.0))
}

/// Lag `τ` maximizing `Σ_i l(i)·r(i − τ)` over `|τ| ≤ max_lag` for mean-removed HRIRs.
///
/// Ties prefer the smallest `|τ|`, then the negative lag.
pub fn itd_lag<T: Real>(left: &[T], right: &[T], max_lag: Option<usize>) -> Result<i64> {
    if left.len() != right.len() {
        return Err(Error::LengthMismatch {
            what: "right HRIR".into(),
            expected: left.len(),
            actual: right.len(),
        });
    }
    let len = left.len();
    let max_lag = max_lag.unwrap_or(len.saturating_sub(1));
    if max_lag >= len {
        return Err(Error::InvalidArgument(format!(
            "max lag {max_lag} must be below the {len}-tap length"
        )));
    }
    let (l, el) = centered(left, "left HRIR")?;
    let (r, er) = centered(right, "right HRIR")?;
    let norm = (el * er).sqrt();
    let corr = |tau: i64| -> f64 {
        // r(i - tau) is zero outside [0, len)
        let (lo, hi) = if tau >= 0 {
            (tau as usize, len)
        } else {
            (0, (len as i64 + tau) as usize)
        };
        (lo..hi).map(|i| l[i] * r[(i as i64 - tau) as usize]).sum::<f64>() / norm
    };
    let mut best_tau = 0i64;
    let mut best = corr(0);
    for m in 1..=max_lag as i64 {
        for tau in [-m, m] {
            let c = corr(tau);
            if c > best {
                best = c;
                best_tau = tau;
            }
        }
    }
    Ok(best_tau)
}

/// ITD in seconds; negative when the right ear lags.
pub fn itd<T: Real>(left: &[T], right: &[T], sample_rate_hz: u32, max_lag: Option<usize>) -> Result<f64> {
    Ok(itd_lag(left, right, max_lag)? as f64 / sample_rate_hz as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinMetrics {
    pub sd_left: SpectralDifference,
    pub sd_right: SpectralDifference,
    pub cc_left: f64,
    pub cc_right: f64,
    pub itd_est_s: f64,
    pub itd_ref_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub azimuth_deg: f64,
    /// `None` when either set lacks the bin.
    pub metrics: Option<BinMetrics>,
    pub nmse_left: Option<f64>,
    pub nmse_right: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub bank: ErbBank,
    pub nfft: usize,
    pub rows: Vec<ReportRow>,
}

impl MetricsReport {
    pub fn present(&self) -> impl Iterator<Item = (f64, &BinMetrics)> {
        self.rows.iter().filter_map(|r| r.metrics.as_ref().map(|m| (r.azimuth_deg, m)))
    }

    pub fn missing_azimuths(&self) -> Vec<f64> {
        self.rows.iter().filter(|r| r.metrics.is_none()).map(|r| r.azimuth_deg).collect()
    }

    pub fn max_sd_db(&self) -> Option<f64> {
        self.present().map(|(_, m)| m.sd_left.total_db.max(m.sd_right.total_db)).reduce(f64::max)
    }

    pub fn mean_sd_db(&self) -> Option<f64> {
        let v: Vec<f64> = self.present().map(|(_, m)| m.sd_left.total_db).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn min_cc(&self) -> Option<f64> {
        self.present().map(|(_, m)| m.cc_left.min(m.cc_right)).reduce(f64::min)
    }

    pub fn max_itd_error_s(&self) -> Option<f64> {
        self.present().map(|(_, m)| (m.itd_est_s - m.itd_ref_s).abs()).reduce(f64::max)
    }

    pub fn max_nmse(&self) -> Option<f64> {
        self.rows
            .iter()
            .flat_map(|r| [r.nmse_left, r.nmse_right])
            .flatten()
            .reduce(f64::max)
    }
}

fn check_compatible<T: Real>(reference: &HrirSet<T>, estimate: &HrirSet<T>) -> Result<()> {
    if reference.grid != estimate.grid {
        return Err(Error::GridMismatch(format!(
            "reference grid has {} bins at {} deg, estimate {} bins at {} deg",
            reference.grid.len(),
            reference.grid.step_deg(),
            estimate.grid.len(),
            estimate.grid.step_deg()
        )));
    }
    if reference.sample_rate_hz != estimate.sample_rate_hz {
        return Err(Error::GridMismatch(format!(
            "sample rates differ: {} Hz vs {} Hz",
            reference.sample_rate_hz, estimate.sample_rate_hz
        )));
    }
    if reference.num_taps != estimate.num_taps {
        return Err(Error::GridMismatch(format!(
            "tap counts differ: {} vs {}",
            reference.num_taps, estimate.num_taps
        )));
    }
    Ok(())
}

/// Per-bin SD, CC and ITD of `estimate` against `reference`.
pub fn build_report<T: Real>(
    reference: &HrirSet<T>,
    estimate: &HrirSet<T>,
    bank: &ErbBank,
    nfft: usize,
) -> Result<MetricsReport> {
    bank.validate()?;
    reference.validate()?;
    estimate.validate()?;
    check_compatible(reference, estimate)?;
    let fs = reference.sample_rate_hz;
    let mut rows = Vec::with_capacity(reference.len());
    for (i, az) in reference.grid.azimuths().enumerate() {
        let quality = estimate.quality.as_ref();
        let mut row = ReportRow {
            azimuth_deg: az,
            metrics: None,
            nmse_left: quality.and_then(|q| q.nmse_left[i]),
            nmse_right: quality.and_then(|q| q.nmse_right[i]),
            low_confidence: quality.is_some_and(|q| q.low_confidence[i]),
        };
        if !(reference.missing[i] || estimate.missing[i]) {
            let sd = |r: &[T], e: &[T]| -> Result<SpectralDifference> {
                spectral_difference(&magnitude_spectrum(r, nfft)?, &magnitude_spectrum(e, nfft)?, bank, fs)
            };
            row.metrics = Some(BinMetrics {
                sd_left: sd(&reference.left[i], &estimate.left[i])?,
                sd_right: sd(&reference.right[i], &estimate.right[i])?,
                cc_left: correlation_coefficient(&reference.left[i], &estimate.left[i])?,
                cc_right: correlation_coefficient(&reference.right[i], &estimate.right[i])?,
                itd_est_s: itd(&estimate.left[i], &estimate.right[i], fs, None)?,
                itd_ref_s: itd(&reference.left[i], &reference.right[i], fs, None)?,
            });
        }
        rows.push(row);
    }
    Ok(MetricsReport {
        bank: *bank,
        nfft,
        rows,
    })
}

/// Mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatRow {
    pub azimuth_deg: f64,
    pub runs: usize,
    pub sd_left_db: Option<Spread>,
    pub sd_right_db: Option<Spread>,
    pub cc_left: Option<Spread>,
    pub cc_right: Option<Spread>,
    pub itd_est_s: Option<Spread>,
}

/// Per-bin mean and spread across reports sharing one grid.
pub fn summarize_reports(reports: &[MetricsReport]) -> Result<Vec<RepeatRow>> {
    let Some(first) = reports.first() else {
        return Ok(Vec::new());
    };
    if reports.iter().any(|r| r.rows.len() != first.rows.len()) {
        return Err(Error::GridMismatch("reports cover different grids".into()));
    }
    let mut out = Vec::with_capacity(first.rows.len());
    for (i, row) in first.rows.iter().enumerate() {
        let present: Vec<&BinMetrics> = reports.iter().filter_map(|r| r.rows[i].metrics.as_ref()).collect();
        let pick = |f: &dyn Fn(&BinMetrics) -> f64| Spread::of(&present.iter().map(|m| f(m)).collect::<Vec<_>>());
        out.push(RepeatRow {
            azimuth_deg: row.azimuth_deg,
            runs: present.len(),
            sd_left_db: pick(&|m| m.sd_left.total_db),
            sd_right_db: pick(&|m| m.sd_right.total_db),
            cc_left: pick(&|m| m.cc_left),
            cc_right: pick(&|m| m.cc_right),
            itd_est_s: pick(&|m| m.itd_est_s),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn impulse(len: usize, at: usize, gain: f64) -> Vec<f64> {
        let mut h = vec![0.0; len];
        h[at] = gain;
        h
    }

    #[test]
    fn flat_spectra() {
        for (h, expect) in [(impulse(256, 0, 1.0), 1.0), (impulse(256, 10, 1.0), 1.0), (impulse(256, 0, 2.0), 2.0)] {
            let m = magnitude_spectrum(&h, 1024).unwrap();
            assert_eq!(m.len(), 513);
            assert!(m.iter().all(|v| (v - expect).abs() < 1e-12));
        }
        assert!(magnitude_spectrum(&impulse(256, 0, 1.0), 128).is_err());
        assert!(magnitude_spectrum(&impulse(256, 0, 1.0), 1000).is_err());
    }

    #[test]
    fn erb_examples() {
        let bank = ErbBank::default();
        let (fc1, bw1) = erb_band(1, &bank).unwrap();
        assert!((fc1 - 26.08).abs() < 0.01, "{fc1}");
        assert!((bw1 - 27.52).abs() < 0.01, "{bw1}");
        assert!((erb_band(5, &bank).unwrap().0 - 163.7).abs() < 0.1);
        assert!((erb_band(39, &bank).unwrap().0 - 15180.0).abs() < 10.0);
        assert!(erb_band(0, &bank).is_err());
        assert!(erb_band(41, &bank).is_err());
    }

    #[test]
    fn erb_monotone_below_nyquist() {
        let bank = ErbBank::default();
        let mut prev = (0.0, 0.0);
        for k in 1..=40 {
            let (fc, bw) = erb_band(k, &bank).unwrap();
            assert!(fc > prev.0 && bw > prev.1);
            if k <= 39 {
                assert!(fc + 0.5 * bw < 24_000.0);
            }
            prev = (fc, bw);
        }
    }

    #[test]
    fn every_band_gets_bins() {
        let bank = ErbBank::default();
        for nfft in [512, 1024, 4096] {
            let bins = band_bins(&bank, nfft, 48_000).unwrap();
            assert_eq!(bins.len(), 35);
            assert!(bins.iter().all(|(lo, hi)| lo <= hi));
        }
        // band 5 at nfft 1024 falls between bins 3 and 4 and uses the nearest one
        assert_eq!(band_bins(&bank, 1024, 48_000).unwrap()[0], (3, 3));
    }

    #[test]
    fn sd_examples() {
        let bank = ErbBank::default();
        let h: Vec<f64> = (0..256).map(|i| (-(i as f64) / 20.0).exp() * ((i as f64) * 0.7).cos()).collect();
        let href = magnitude_spectrum(&h, 1024).unwrap();
        let same = spectral_difference(&href, &href, &bank, 48_000).unwrap();
        assert_eq!(same.total_db, SD_FLOOR_DB);
        assert!(same.per_band_db.iter().all(|v| *v == SD_FLOOR_DB));
        let double: Vec<f64> = href.iter().map(|v| 2.0 * v).collect();
        assert!(spectral_difference(&href, &double, &bank, 48_000).unwrap().total_db.abs() < 1e-9);
        let plus10: Vec<f64> = href.iter().map(|v| 1.1 * v).collect();
        let sd = spectral_difference(&href, &plus10, &bank, 48_000).unwrap();
        assert!((sd.total_db + 20.0).abs() < 1e-9);
        assert_eq!(sd.per_band_db.len(), 35);
    }

    #[test]
    fn sd_zero_reference_band_is_named() {
        let zeros = vec![0.0; 513];
        let err = spectral_difference(&zeros, &zeros, &ErbBank::default(), 48_000).unwrap_err();
        assert!(matches!(err, Error::EmptyBand { band: 5 }));
    }

    #[test]
    fn cc_examples() {
        let h: Vec<f64> = (0..256).map(|i| ((i * 37 % 11) as f64) - 5.0).collect();
        assert!((correlation_coefficient(&h, &h).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        assert!((correlation_coefficient(&h, &neg).unwrap() + 1.0).abs() < 1e-12);
        let a = impulse(256, 0, 1.0);
        let b = impulse(256, 1, 1.0);
        // direct evaluation: (-2/256 + 254/65536) / (1 - 1/256) = -1/255
        let cc = correlation_coefficient(&a, &b).unwrap();
        assert!((cc + 1.0 / 255.0).abs() < 1e-12);
        assert!(cc.abs() < 0.01);
        assert!(matches!(correlation_coefficient(&[1.0; 8], &h[..8]), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn itd_examples() {
        let h: Vec<f64> = (0..128).map(|i| (-(i as f64 - 20.0).powi(2) / 8.0).exp()).collect();
        assert_eq!(itd(&h, &h, 48_000, None).unwrap(), 0.0);
        let mut delayed = vec![0.0; 128];
        delayed[10..].copy_from_slice(&h[..118]);
        let lag = itd_lag(&h, &delayed, None).unwrap();
        assert_eq!(lag, -10);
        assert!((itd(&h, &delayed, 48_000, None).unwrap() + 208.333e-6).abs() < 1e-9);
        assert_eq!(itd_lag(&delayed, &h, None).unwrap(), 10);
        assert!(itd_lag(&h, &h, Some(128)).is_err());
        assert!(matches!(itd_lag(&[0.0; 4], &[1.0, 0.0, 0.0, 0.0], None), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn itd_ties_prefer_negative_lag() {
        // symmetric two-lobe cross-correlation at lags -1 and +1
        // dyadic values keep both lag sums exact
        let l = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let r = [0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        assert_eq!(itd_lag(&l, &r, None).unwrap(), -1);
    }

    #[test]
    fn spread_basics() {
        let s = Spread::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(Spread::of(&[5.0]).unwrap().std, 0.0);
        assert!(Spread::of(&[]).is_none());
    }
}
