//! Continuous near-field HRIR measurement, in software.
//!
//! The crate simulates a rotating-listener acquisition around a rigid-sphere
//! head, recovers per-direction HRIRs from the continuous binaural stream with a
//! variable-step NLMS filter, and scores the result with warped-ERB spectral
//! difference, correlation and ITD metrics.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the common choices.

pub mod acquisition;
pub mod error;
pub mod estimator;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod synth;

pub use acquisition::{
    acquire, gen_excitation, gen_trajectory, gen_trajectory_with_yaw, simulate_recording, BinauralRecording,
    JitterConfig, Segment, SessionConfig, Trajectory,
};
pub use error::{Error, Result};
pub use estimator::{
    compute_nmse, estimate_session, nlms_step, select_best_visits, step_size_update, NlmsFilter, NlmsParams,
    SessionEstimate, VisitRecord,
};
pub use metrics::{
    build_report, correlation_coefficient, erb_band, itd, magnitude_spectrum, spectral_difference, ErbBank,
    MetricsReport,
};
pub use model::{bin_direction, normalize_azimuth, Direction, DirectionGrid, HrirSet, Provenance, Signal};
pub use scalar::Real;
pub use synth::{path_length, shadow_filter, synth_hrir, synth_hrir_set, HeadModel};

pub type HrirSet64 = HrirSet<f64>;
pub type HrirSet32 = HrirSet<f32>;
pub type Signal64 = Signal<f64>;
pub type Signal32 = Signal<f32>;
pub type Recording64 = BinauralRecording<f64>;
pub type Recording32 = BinauralRecording<f32>;
pub type Nlms64 = NlmsFilter<f64>;
pub type Nlms32 = NlmsFilter<f32>;
