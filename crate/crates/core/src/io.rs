//! On-disk formats.
//!
//! * HRIR sets: one JSON document (`kind: "hrir_set"`, `format_version: "1"`).
//! * Sessions: a directory with `excitation.wav`, `left.wav`, `right.wav`
//!   (mono IEEE float32 RIFF/WAVE) and a `trajectory.json` sidecar.
//! * Reports: CSV tables.
//!
//! Every writer is deterministic: no timestamps, fixed key order, shortest
//! round-trip float formatting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::{BinauralRecording, Segment, SessionConfig, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, RepeatRow, Spread};
use crate::model::{DirectionGrid, HrirSet, Provenance, SetQuality, Signal};
use crate::scalar::Real;

pub const FORMAT_VERSION: &str = "1";
pub const EXCITATION_WAV: &str = "excitation.wav";
pub const LEFT_WAV: &str = "left.wav";
pub const RIGHT_WAV: &str = "right.wav";
pub const TRAJECTORY_JSON: &str = "trajectory.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

/// Parses JSON text, then checks `kind` and `format_version` before the full schema.
fn parse_document(path: &Path, text: &str, kind: &str) -> Result<serde_json::Value> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let version = value.get("format_version").ok_or_else(|| malformed(path, "missing format_version"))?;
    if version.as_str() != Some(FORMAT_VERSION) {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found: version.to_string(),
        });
    }
    match value.get("kind").and_then(|k| k.as_str()) {
        Some(k) if k == kind => Ok(value),
        other => Err(malformed(path, format!("expected kind {kind:?}, found {other:?}"))),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    step_deg: f64,
    azimuths: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NmseFile {
    left: Vec<Option<f64>>,
    right: Vec<Option<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HrirSetFile {
    format_version: String,
    kind: String,
    sample_rate_hz: u32,
    num_taps: usize,
    distance_m: f64,
    provenance: Provenance,
    grid: GridFile,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
    missing: Vec<f64>,
    /// Estimated sets only. `null` entries are missing bins or visits shorter than the filter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nmse: Option<NmseFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    low_confidence: Option<Vec<f64>>,
}

fn taps_to_f64<T: Real>(v: &[Vec<T>]) -> Vec<Vec<f64>> {
    v.iter().map(|t| t.iter().map(|x| x.to_f64_lossy()).collect()).collect()
}

fn finite_or_none(v: Option<f64>) -> Option<f64> {
    v.filter(|x| x.is_finite())
}

pub fn hrir_set_to_json<T: Real>(set: &HrirSet<T>) -> Result<String> {
    set.validate()?;
    let pick = |flags: &[bool]| -> Vec<f64> {
        set.grid
            .azimuths()
            .zip(flags)
            .filter(|(_, m)| **m)
            .map(|(az, _)| az)
            .collect()
    };
    let file = HrirSetFile {
        format_version: FORMAT_VERSION.into(),
        kind: "hrir_set".into(),
        sample_rate_hz: set.sample_rate_hz,
        num_taps: set.num_taps,
        distance_m: set.distance_m,
        provenance: set.provenance,
        grid: GridFile {
            step_deg: set.grid.step_deg(),
            azimuths: set.grid.azimuths().collect(),
        },
        left: taps_to_f64(&set.left),
        right: taps_to_f64(&set.right),
        missing: pick(&set.missing),
        nmse: set.quality.as_ref().map(|q| NmseFile {
            left: q.nmse_left.iter().map(|v| finite_or_none(*v)).collect(),
            right: q.nmse_right.iter().map(|v| finite_or_none(*v)).collect(),
        }),
        low_confidence: set.quality.as_ref().map(|q| pick(&q.low_confidence)),
    };
    let mut text = serde_json::to_string(&file).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

pub fn write_hrir_set<T: Real>(set: &HrirSet<T>, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &hrir_set_to_json(set)?)
}

fn flags_from(path: &Path, grid: &DirectionGrid, azimuths: &[f64], what: &str) -> Result<Vec<bool>> {
    let mut flags = vec![false; grid.len()];
    for &az in azimuths {
        let i = grid
            .exact_index(az)
            .ok_or_else(|| malformed(path, format!("{what} azimuth {az} is not on the grid")))?;
        flags[i] = true;
    }
    Ok(flags)
}

pub fn hrir_set_from_json<T: Real>(text: &str, path: &Path) -> Result<HrirSet<T>> {
    let value = parse_document(path, text, "hrir_set")?;
    let file: HrirSetFile = serde_json::from_value(value).map_err(|e| malformed(path, e.to_string()))?;
    let grid = DirectionGrid::new(file.grid.step_deg).map_err(|e| malformed(path, e.to_string()))?;
    if file.grid.azimuths.len() != grid.len() || file.grid.azimuths.iter().zip(grid.azimuths()).any(|(a, b)| *a != b) {
        return Err(malformed(path, "grid azimuths do not match step_deg"));
    }
    let shape_ok = |v: &Vec<Vec<f64>>| v.len() == grid.len() && v.iter().all(|t| t.len() == file.num_taps);
    if !shape_ok(&file.left) || !shape_ok(&file.right) {
        return Err(malformed(
            path,
            format!("tap arrays must be {} directions x {} taps", grid.len(), file.num_taps),
        ));
    }
    let missing = flags_from(path, &grid, &file.missing, "missing")?;
    let quality = match (file.nmse, file.low_confidence) {
        (None, None) => None,
        (Some(nmse), low) => {
            if nmse.left.len() != grid.len() || nmse.right.len() != grid.len() {
                return Err(malformed(path, "nmse arrays do not match the grid"));
            }
            let low_confidence = flags_from(path, &grid, low.as_deref().unwrap_or(&[]), "low_confidence")?;
            let restore = |v: &[Option<f64>], i: usize| match v[i] {
                Some(x) => Some(x),
                None if missing[i] => None,
                None => Some(f64::INFINITY),
            };
            Some(SetQuality {
                nmse_left: (0..grid.len()).map(|i| restore(&nmse.left, i)).collect(),
                nmse_right: (0..grid.len()).map(|i| restore(&nmse.right, i)).collect(),
                low_confidence,
            })
        }
        (None, Some(_)) => return Err(malformed(path, "low_confidence given without nmse")),
    };
    let conv = |v: Vec<Vec<f64>>| -> Vec<Vec<T>> {
        v.into_iter()
            .map(|t| t.into_iter().map(T::from_f64_lossy).collect())
            .collect()
    };
    let set = HrirSet {
        sample_rate_hz: file.sample_rate_hz,
        num_taps: file.num_taps,
        distance_m: file.distance_m,
        grid,
        left: conv(file.left),
        right: conv(file.right),
        missing,
        provenance: file.provenance,
        quality,
    };
    set.validate().map_err(|e| malformed(path, e.to_string()))?;
    Ok(set)
}

pub fn read_hrir_set<T: Real>(path: impl AsRef<Path>) -> Result<HrirSet<T>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    hrir_set_from_json(&text, path)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryFile {
    format_version: String,
    kind: String,
    num_samples: u64,
    config: SessionConfig,
    segments: Vec<Segment>,
}

fn wav_spec(sample_rate_hz: u32) -> hound::WavSpec {
    hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    }
}

fn write_wav<T: Real>(path: &Path, signal: &Signal<T>) -> Result<()> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut w = hound::WavWriter::create(path, wav_spec(signal.sample_rate_hz)).map_err(wav_err)?;
    for s in &signal.samples {
        w.write_sample(s.to_f64_lossy() as f32).map_err(wav_err)?;
    }
    w.finalize().map_err(wav_err)
}

fn read_wav<T: Real>(path: &Path) -> Result<Signal<T>> {
    let wav_err = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut r = hound::WavReader::open(path).map_err(wav_err)?;
    let spec = r.spec();
    if spec != wav_spec(spec.sample_rate) {
        return Err(malformed(path, format!("expected mono float32 WAV, found {spec:?}")));
    }
    let samples = r
        .samples::<f32>()
        .map(|s| s.map(|v| T::from_f64_lossy(v as f64)))
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(wav_err)?;
    Signal::new(spec.sample_rate, samples)
}

/// Writes a session directory; samples are stored as float32.
pub fn write_session<T: Real>(recording: &BinauralRecording<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    recording.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_wav(&dir.join(EXCITATION_WAV), &recording.excitation)?;
    write_wav(&dir.join(LEFT_WAV), &recording.left)?;
    write_wav(&dir.join(RIGHT_WAV), &recording.right)?;
    let sidecar = TrajectoryFile {
        format_version: FORMAT_VERSION.into(),
        kind: "session".into(),
        num_samples: recording.len() as u64,
        config: recording.config,
        segments: recording.trajectory.segments.clone(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    text.push('\n');
    write_text(&dir.join(TRAJECTORY_JSON), &text)
}

pub fn read_session<T: Real>(dir: impl AsRef<Path>) -> Result<BinauralRecording<T>> {
    let dir = dir.as_ref();
    let sidecar_path = dir.join(TRAJECTORY_JSON);
    let text = fs::read_to_string(&sidecar_path).map_err(io_err(&sidecar_path))?;
    let value = parse_document(&sidecar_path, &text, "session")?;
    let sidecar: TrajectoryFile = serde_json::from_value(value).map_err(|e| malformed(&sidecar_path, e.to_string()))?;
    let trajectory = Trajectory {
        segments: sidecar.segments,
    };
    if trajectory.total_samples() != sidecar.num_samples {
        return Err(Error::LengthMismatch {
            what: format!("{} segments", sidecar_path.display()),
            expected: sidecar.num_samples as usize,
            actual: trajectory.total_samples() as usize,
        });
    }
    let load = |name: &str| -> Result<Signal<T>> {
        let path = dir.join(name);
        let sig = read_wav::<T>(&path)?;
        if sig.len() as u64 != sidecar.num_samples {
            return Err(Error::LengthMismatch {
                what: path.display().to_string(),
                expected: sidecar.num_samples as usize,
                actual: sig.len(),
            });
        }
        if sig.sample_rate_hz != sidecar.config.sample_rate_hz {
            return Err(malformed(
                &path,
                format!(
                    "sample rate {} Hz differs from sidecar {} Hz",
                    sig.sample_rate_hz, sidecar.config.sample_rate_hz
                ),
            ));
        }
        Ok(sig)
    };
    let recording = BinauralRecording {
        excitation: load(EXCITATION_WAV)?,
        left: load(LEFT_WAV)?,
        right: load(RIGHT_WAV)?,
        trajectory,
        config: sidecar.config,
    };
    recording.validate().map_err(|e| malformed(&sidecar_path, e.to_string()))?;
    Ok(recording)
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_infinite() && x > 0.0 => "inf".into(),
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn write_rows(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "azimuth_deg",
    "sd_left_db",
    "sd_right_db",
    "cc_left",
    "cc_right",
    "itd_est_us",
    "itd_ref_us",
    "nmse_left",
    "nmse_right",
];

/// Companion per-band file next to `path`: `report.csv` → `report_bands.csv`.
pub fn bands_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_bands.csv"))
}

/// Writes the per-bin table and its per-band left-ear SD companion; returns the companion path.
pub fn write_report_csv(report: &MetricsReport, path: impl AsRef<Path>) -> Result<PathBuf> {
    let path = path.as_ref();
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let m = r.metrics.as_ref();
            vec![
                r.azimuth_deg.to_string(),
                fmt_opt(m.map(|m| m.sd_left.total_db)),
                fmt_opt(m.map(|m| m.sd_right.total_db)),
                fmt_opt(m.map(|m| m.cc_left)),
                fmt_opt(m.map(|m| m.cc_right)),
                fmt_opt(m.map(|m| m.itd_est_s * 1e6)),
                fmt_opt(m.map(|m| m.itd_ref_s * 1e6)),
                fmt_opt(r.nmse_left),
                fmt_opt(r.nmse_right),
            ]
        })
        .collect();
    write_rows(path, REPORT_COLUMNS.iter().map(|s| s.to_string()).collect(), rows)?;

    let companion = bands_path(path);
    let mut header = vec!["azimuth_deg".to_string()];
    header.extend(report.bank.bands().map(|k| format!("band_{k}_db")));
    let rows = report
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.azimuth_deg.to_string()];
            match &r.metrics {
                Some(m) => row.extend(m.sd_left.per_band_db.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), report.bank.band_count())),
            }
            row
        })
        .collect();
    write_rows(&companion, header, rows)?;
    Ok(companion)
}

pub const REPEAT_COLUMNS: [&str; 12] = [
    "azimuth_deg",
    "runs",
    "sd_left_mean_db",
    "sd_left_std_db",
    "sd_right_mean_db",
    "sd_right_std_db",
    "cc_left_mean",
    "cc_left_std",
    "cc_right_mean",
    "cc_right_std",
    "itd_est_mean_us",
    "itd_est_std_us",
];

/// Mean/std table across repeated runs.
pub fn write_repeat_csv(rows: &[RepeatRow], path: impl AsRef<Path>) -> Result<()> {
    let spread = |s: Option<Spread>, scale: f64| -> [String; 2] {
        [fmt_opt(s.map(|s| s.mean * scale)), fmt_opt(s.map(|s| s.std * scale))]
    };
    let body = rows
        .iter()
        .map(|r| {
            let mut row = vec![r.azimuth_deg.to_string(), r.runs.to_string()];
            row.extend(spread(r.sd_left_db, 1.0));
            row.extend(spread(r.sd_right_db, 1.0));
            row.extend(spread(r.cc_left, 1.0));
            row.extend(spread(r.cc_right, 1.0));
            row.extend(spread(r.itd_est_s, 1e6));
            row
        })
        .collect();
    write_rows(path.as_ref(), REPEAT_COLUMNS.iter().map(|s| s.to_string()).collect(), body)
}
