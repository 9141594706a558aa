//! Continuous HRIR estimation with a variable-step NLMS filter.
//!
//! One filter runs per ear over every unpaused sample of the session. The filter
//! is zero-initialized once and carried across direction changes; only the step
//! size is reset to `mu_max` when a new visit starts, then decays by `delta_mu`
//! per sample down to `mu_min`. When a visit ends, its final filter is re-applied
//! over the visit span to score it by NMSE, and the lowest-NMSE visit of each
//! bin becomes that bin's HRIR.

use serde::{Deserialize, Serialize};

use crate::acquisition::{BinauralRecording, ReversedExcitation, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Direction, DirectionGrid, HrirSet, Provenance, SetQuality, Signal};
use crate::scalar::{axpy, dot, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlmsParams {
    pub num_taps: usize,
    pub mu_max: f64,
    pub mu_min: f64,
    /// Per-sample step-size decrement.
    pub delta_mu: f64,
    /// Added to the excitation energy in the update denominator.
    pub regularization_eps: f64,
}

impl Default for NlmsParams {
    fn default() -> Self {
        Self {
            num_taps: crate::model::DEFAULT_NUM_TAPS,
            mu_max: 1.0,
            mu_min: 0.05,
            delta_mu: 1e-4,
            regularization_eps: 1e-10,
        }
    }
}

impl NlmsParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.num_taps > 0
            && self.mu_min > 0.0
            && self.mu_min <= self.mu_max
            && self.mu_max <= 2.0
            && self.delta_mu > 0.0
            && self.delta_mu.is_finite()
            && self.regularization_eps >= 0.0
            && self.regularization_eps.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid NLMS parameters {self:?}")))
        }
    }
}

/// Variable step-size schedule: reset on a direction change, otherwise linear decay to the floor.
pub fn step_size_update<T: Real>(prev_mu: T, direction_changed: bool, params: &NlmsParams) -> T {
    if direction_changed {
        T::from_f64_lossy(params.mu_max)
    } else {
        (prev_mu - T::from_f64_lossy(params.delta_mu)).max(T::from_f64_lossy(params.mu_min))
    }
}

/// Adaptive filter state for one ear.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmsFilter<T> {
    taps: Vec<T>,
    mu: T,
    eps: T,
    params: NlmsParams,
    iterations: usize,
}

impl<T: Real> NlmsFilter<T> {
    pub fn new(params: NlmsParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            taps: vec![T::zero(); params.num_taps],
            mu: T::from_f64_lossy(params.mu_max),
            eps: T::from_f64_lossy(params.regularization_eps),
            params,
            iterations: 0,
        })
    }

    /// Starts from the given coefficients instead of zeros.
    pub fn with_taps(params: NlmsParams, taps: Vec<T>) -> Result<Self> {
        let mut f = Self::new(params)?;
        if taps.len() != params.num_taps {
            return Err(Error::LengthMismatch {
                what: "initial filter".into(),
                expected: params.num_taps,
                actual: taps.len(),
            });
        }
        f.taps = taps;
        Ok(f)
    }

    pub fn taps(&self) -> &[T] {
        &self.taps
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn set_mu(&mut self, mu: T) {
        self.mu = mu;
    }

    pub fn params(&self) -> &NlmsParams {
        &self.params
    }

    /// Applies the step-size schedule before the next sample.
    pub fn advance_step_size(&mut self, direction_changed: bool) {
        self.mu = step_size_update(self.mu, direction_changed, &self.params);
    }

    /// Filter output for the newest-first window `x`.
    pub fn predict(&self, x: &[T]) -> T {
        dot(&self.taps, x)
    }

    /// One update with the newest-first window `x = [x(n), …, x(n-L+1)]`; returns the prior residual.
    pub fn step(&mut self, x: &[T], y: T) -> Result<T> {
        if x.len() != self.taps.len() {
            return Err(Error::LengthMismatch {
                what: "excitation window".into(),
                expected: self.taps.len(),
                actual: x.len(),
            });
        }
        let index = self.iterations;
        if !y.is_finite() {
            return Err(Error::NonFinite {
                what: "recorded sample",
                index,
            });
        }
        let energy = dot(x, x);
        if !energy.is_finite() {
            return Err(Error::NonFinite {
                what: "excitation window",
                index,
            });
        }
        let e = y - self.predict(x);
        let scale = self.mu * e / (energy + self.eps);
        if !(e.is_finite() && scale.is_finite()) {
            return Err(Error::NonFinite {
                what: "filter update",
                index,
            });
        }
        axpy(scale, x, &mut self.taps);
        self.iterations += 1;
        Ok(e)
    }
}

/// Functional form of [`NlmsFilter::step`].
pub fn nlms_step<T: Real>(mut state: NlmsFilter<T>, x: &[T], y: T) -> Result<(NlmsFilter<T>, T)> {
    let e = state.step(x, y)?;
    Ok((state, e))
}

/// Residual energy of `filter` over samples `start..end`, normalized by the recorded energy.
pub fn compute_nmse<T: Real>(
    y: &[T],
    excitation: &ReversedExcitation<T>,
    filter: &[T],
    start: usize,
    end: usize,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, yv) in y.iter().enumerate().take(end).skip(start) {
        let yn = yv.to_f64_lossy();
        let r = yn - dot(filter, excitation.window(n)).to_f64_lossy();
        num += r * r;
        den += yn * yn;
    }
    if den == 0.0 {
        return Err(Error::SilentSpan { start, end });
    }
    Ok(num / den)
}

/// One contiguous dwell of the estimator in one direction bin.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitRecord<T> {
    pub bin: Direction,
    pub start_sample: usize,
    /// Exclusive; the last adapted sample is `end_sample - 1`.
    pub end_sample: usize,
    pub filter: Vec<T>,
    /// `+inf` when the visit is shorter than the filter.
    pub nmse: f64,
}

impl<T> VisitRecord<T> {
    pub fn len(&self) -> usize {
        self.end_sample - self.start_sample
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_short(&self) -> bool {
        self.nmse.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEstimate<T> {
    pub sample_rate_hz: u32,
    pub distance_m: f64,
    pub num_taps: usize,
    pub grid: DirectionGrid,
    pub left: Vec<VisitRecord<T>>,
    pub right: Vec<VisitRecord<T>>,
}

struct OpenVisit {
    bin: Direction,
    start: usize,
    end: usize,
}

/// NLMS over one ear. `on_sample(n, mu)` observes the step size used at every adapted sample.
pub fn estimate_channel<T: Real>(
    y: &Signal<T>,
    excitation: &ReversedExcitation<T>,
    trajectory: &Trajectory,
    params: &NlmsParams,
    mut on_sample: impl FnMut(usize, T),
) -> Result<Vec<VisitRecord<T>>> {
    let mut filter = NlmsFilter::<T>::new(*params)?;
    let mut visits = Vec::new();
    let mut open: Option<OpenVisit> = None;

    let close = |v: OpenVisit, filter: &NlmsFilter<T>, visits: &mut Vec<VisitRecord<T>>| -> Result<()> {
        let nmse = if v.end - v.start < params.num_taps {
            f64::INFINITY
        } else {
            compute_nmse(&y.samples, excitation, filter.taps(), v.start, v.end)?
        };
        visits.push(VisitRecord {
            bin: v.bin,
            start_sample: v.start,
            end_sample: v.end,
            filter: filter.taps().to_vec(),
            nmse,
        });
        Ok(())
    };

    for seg in &trajectory.segments {
        if seg.paused {
            if let Some(v) = open.take() {
                close(v, &filter, &mut visits)?;
            }
            continue;
        }
        let (s, e) = (seg.start_sample as usize, seg.end_sample as usize);
        let continues = matches!(&open, Some(v) if v.bin == seg.grid_bin && v.end == s);
        if !continues {
            if let Some(v) = open.take() {
                close(v, &filter, &mut visits)?;
            }
            open = Some(OpenVisit {
                bin: seg.grid_bin,
                start: s,
                end: s,
            });
        }
        for n in s..e {
            let first_of_visit = open.as_ref().is_some_and(|v| v.end == v.start);
            filter.advance_step_size(first_of_visit);
            on_sample(n, filter.mu());
            filter.step(excitation.window(n), y.samples[n]).map_err(|err| match err {
                Error::NonFinite { what, .. } => Error::NonFinite { what, index: n },
                other => other,
            })?;
            if let Some(v) = open.as_mut() {
                v.end = n + 1;
            }
        }
    }
    if let Some(v) = open.take() {
        close(v, &filter, &mut visits)?;
    }
    Ok(visits)
}

fn check_recording<T: Real>(recording: &BinauralRecording<T>) -> Result<()> {
    recording.validate()?;
    for (what, sig) in [
        ("excitation", &recording.excitation),
        ("left", &recording.left),
        ("right", &recording.right),
    ] {
        if let Some(i) = sig.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: match what {
                    "excitation" => "excitation sample",
                    "left" => "left-ear sample",
                    _ => "right-ear sample",
                },
                index: i,
            });
        }
    }
    Ok(())
}

/// Runs both ears sequentially over a recording.
pub fn estimate_session<T: Real>(recording: &BinauralRecording<T>, params: &NlmsParams) -> Result<SessionEstimate<T>> {
    params.validate()?;
    check_recording(recording)?;
    let grid = recording.config.grid()?;
    let mut out = SessionEstimate {
        sample_rate_hz: recording.config.sample_rate_hz,
        distance_m: recording.config.distance_m,
        num_taps: params.num_taps,
        grid,
        left: Vec::new(),
        right: Vec::new(),
    };
    if recording.is_empty() {
        return Ok(out);
    }
    let xr = ReversedExcitation::new(&recording.excitation.samples, params.num_taps);
    out.left = estimate_channel(&recording.left, &xr, &recording.trajectory, params, |_, _| {})?;
    out.right = estimate_channel(&recording.right, &xr, &recording.trajectory, params, |_, _| {})?;
    Ok(out)
}

/// Index of the lowest-NMSE visit; ties resolve to the earliest one.
pub fn best_visit<T>(visits: &[&VisitRecord<T>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in visits.iter().enumerate() {
        match best {
            Some(b) if visits[b].nmse <= v.nmse => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Visits of one ear grouped by grid bin, in session order.
pub fn visits_by_bin<'a, T>(visits: &'a [VisitRecord<T>], grid: &DirectionGrid) -> Result<Vec<Vec<&'a VisitRecord<T>>>> {
    let mut groups = vec![Vec::new(); grid.len()];
    for v in visits {
        let i = grid
            .exact_index(v.bin.azimuth_deg)
            .ok_or_else(|| Error::GridMismatch(format!("visit bin {} deg is not on the grid", v.bin.azimuth_deg)))?;
        groups[i].push(v);
    }
    Ok(groups)
}

/// Per bin and ear, the final filter of the minimum-NMSE visit.
pub fn select_best_visits<T: Real>(estimate: &SessionEstimate<T>) -> Result<HrirSet<T>> {
    let grid = &estimate.grid;
    let n = grid.len();
    let mut set = HrirSet {
        sample_rate_hz: estimate.sample_rate_hz,
        num_taps: estimate.num_taps,
        distance_m: estimate.distance_m,
        grid: grid.clone(),
        left: vec![vec![T::zero(); estimate.num_taps]; n],
        right: vec![vec![T::zero(); estimate.num_taps]; n],
        missing: vec![true; n],
        provenance: Provenance::Estimated,
        quality: None,
    };
    let mut quality = SetQuality {
        nmse_left: vec![None; n],
        nmse_right: vec![None; n],
        low_confidence: vec![false; n],
    };
    let left = visits_by_bin(&estimate.left, grid)?;
    let right = visits_by_bin(&estimate.right, grid)?;
    for i in 0..n {
        let (Some(bl), Some(br)) = (best_visit(&left[i]), best_visit(&right[i])) else {
            continue;
        };
        let (vl, vr) = (left[i][bl], right[i][br]);
        set.left[i] = vl.filter.clone();
        set.right[i] = vr.filter.clone();
        set.missing[i] = false;
        quality.nmse_left[i] = Some(vl.nmse);
        quality.nmse_right[i] = Some(vr.nmse);
        quality.low_confidence[i] = vl.is_short() || vr.is_short();
    }
    set.quality = Some(quality);
    Ok(set)
}
