//! Pipeline configuration: defaults, then an optional TOML/JSON file, then command-line flags.

use std::path::Path;

use clap::Args;
use nfhrtf::{ErbBank, HeadModel, NlmsParams, SessionConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub head: HeadModel,
    pub session: SessionConfig,
    pub nlms: NlmsParams,
    pub erb: ErbBank,
    pub nfft: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            head: HeadModel::default(),
            session: SessionConfig::default(),
            nlms: NlmsParams::default(),
            erb: ErbBank::default(),
            nfft: nfhrtf::metrics::DEFAULT_NFFT,
        }
    }
}

impl PipelineConfig {
    /// Reads a `.json` file as JSON and anything else as TOML. Unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.head.validate()?;
        self.session.validate()?;
        self.nlms.validate()?;
        self.erb.validate()?;
        if !self.nfft.is_power_of_two() || self.nfft < self.nlms.num_taps {
            return Err(CliError::Config(format!(
                "nfft {} must be a power of two no smaller than {} taps",
                self.nfft, self.nlms.num_taps
            )));
        }
        Ok(())
    }
}

/// Flags shared by every subcommand; each overrides the matching config value.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// TOML or JSON pipeline configuration.
    #[arg(long, value_name = "PATH")]
    pub config: Option<std::path::PathBuf>,
    /// Session seed for excitation, jitter and noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Source distance in meters.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Azimuth grid step in degrees.
    #[arg(long)]
    pub step_deg: Option<f64>,
    /// Unpaused dwell per grid bin in milliseconds.
    #[arg(long)]
    pub dwell_ms: Option<f64>,
    /// Session SNR in dB; `inf` for noiseless audio.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Yaw jitter standard deviation; a positive value enables jitter.
    #[arg(long)]
    pub jitter_std_deg: Option<f64>,
    /// Yaw magnitude above which acquisition pauses.
    #[arg(long)]
    pub pause_threshold_deg: Option<f64>,
    /// Filter length L.
    #[arg(long)]
    pub taps: Option<usize>,
    /// Step size right after a direction change.
    #[arg(long)]
    pub mu_max: Option<f64>,
    /// Step size floor.
    #[arg(long)]
    pub mu_min: Option<f64>,
    /// Per-sample step size decrement.
    #[arg(long)]
    pub delta_mu: Option<f64>,
    /// FFT length for spectral metrics.
    #[arg(long)]
    pub nfft: Option<usize>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut PipelineConfig) {
        let s = &mut cfg.session;
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.distance {
            s.distance_m = v;
        }
        if let Some(v) = self.step_deg {
            s.step_deg = v;
        }
        if let Some(v) = self.dwell_ms {
            s.dwell_ms = v;
        }
        if let Some(v) = self.snr_db {
            s.snr_db = v;
        }
        if let Some(v) = self.jitter_std_deg {
            s.jitter.yaw_std_deg = v;
            s.jitter.enabled = v > 0.0;
        }
        if let Some(v) = self.pause_threshold_deg {
            s.pause_threshold_deg = v;
        }
        let n = &mut cfg.nlms;
        if let Some(v) = self.taps {
            n.num_taps = v;
        }
        if let Some(v) = self.mu_max {
            n.mu_max = v;
        }
        if let Some(v) = self.mu_min {
            n.mu_min = v;
        }
        if let Some(v) = self.delta_mu {
            n.delta_mu = v;
        }
        if let Some(v) = self.nfft {
            cfg.nfft = v;
        }
    }
}
