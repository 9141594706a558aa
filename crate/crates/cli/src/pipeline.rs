//! The experiment flow as library calls, shared by the subcommands and the tests.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nfhrtf::acquisition::MAX_TRUTH_STEP_DEG;
use nfhrtf::io::{read_session, write_hrir_set, write_report_csv, write_session};
use nfhrtf::metrics::{summarize_reports, RepeatRow};
use nfhrtf::{
    acquire, build_report, estimate_session, select_best_visits, synth_hrir_set, BinauralRecording, DirectionGrid,
    HrirSet, MetricsReport, Result,
};

use crate::config::PipelineConfig;

pub const REF_JSON: &str = "ref.json";
pub const TRUTH_JSON: &str = "truth.json";
pub const SESSION_DIR: &str = "session";
pub const EST_JSON: &str = "est.json";
pub const REPORT_CSV: &str = "report.csv";

/// Ground truth on the session grid, used as the evaluation reference.
pub fn reference_set(cfg: &PipelineConfig) -> Result<HrirSet<f64>> {
    synth_on(cfg, &cfg.session.grid()?)
}

/// Ground truth on the fine grid that drives the simulated acquisition.
pub fn truth_set(cfg: &PipelineConfig) -> Result<HrirSet<f64>> {
    synth_on(cfg, &DirectionGrid::new(MAX_TRUTH_STEP_DEG)?)
}

fn synth_on(cfg: &PipelineConfig, grid: &DirectionGrid) -> Result<HrirSet<f64>> {
    synth_hrir_set(
        &cfg.head,
        grid,
        cfg.session.distance_m,
        cfg.session.sample_rate_hz,
        cfg.nlms.num_taps,
    )
}

pub fn estimate(recording: &BinauralRecording<f64>, cfg: &PipelineConfig) -> Result<HrirSet<f64>> {
    select_best_visits(&estimate_session(recording, &cfg.nlms)?)
}

/// Acquires and estimates one session in memory.
pub fn measure(truth: &HrirSet<f64>, cfg: &PipelineConfig) -> Result<HrirSet<f64>> {
    estimate(&acquire(truth, &cfg.session)?, cfg)
}

#[derive(Debug, Clone)]
pub struct RunAllOutcome {
    pub out_dir: PathBuf,
    pub reference: HrirSet<f64>,
    pub estimate: HrirSet<f64>,
    pub report: MetricsReport,
    pub elapsed: Duration,
}

/// Synthesizes, acquires, stores the session, estimates from the stored copy and scores it.
pub fn run_all(cfg: &PipelineConfig, out_dir: &Path) -> Result<RunAllOutcome> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|source| nfhrtf::Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let reference = reference_set(cfg)?;
    let truth = truth_set(cfg)?;
    write_hrir_set(&reference, out_dir.join(REF_JSON))?;
    write_hrir_set(&truth, out_dir.join(TRUTH_JSON))?;
    let session_dir = out_dir.join(SESSION_DIR);
    write_session(&acquire(&truth, &cfg.session)?, &session_dir)?;
    let estimate = estimate(&read_session(&session_dir)?, cfg)?;
    write_hrir_set(&estimate, out_dir.join(EST_JSON))?;
    let report = build_report(&reference, &estimate, &cfg.erb, cfg.nfft)?;
    write_report_csv(&report, out_dir.join(REPORT_CSV))?;
    Ok(RunAllOutcome {
        out_dir: out_dir.to_path_buf(),
        reference,
        estimate,
        report,
        elapsed: started.elapsed(),
    })
}

/// Seeds `seed, seed + 1, ...` for `runs` sessions, measured in parallel.
pub fn measure_repeats(truth: &HrirSet<f64>, cfg: &PipelineConfig, runs: usize) -> Result<Vec<HrirSet<f64>>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, runs.max(1));
    let seeds: Vec<u64> = (0..runs as u64).map(|i| cfg.session.seed.wrapping_add(i)).collect();
    let mut results: Vec<Option<Result<HrirSet<f64>>>> = (0..runs).map(|_| None).collect();
    let chunk = runs.div_ceil(workers).max(1);
    std::thread::scope(|scope| {
        for (chunk_seeds, chunk_out) in seeds.chunks(chunk).zip(results.chunks_mut(chunk)) {
            scope.spawn(move || {
                for (seed, slot) in chunk_seeds.iter().zip(chunk_out.iter_mut()) {
                    let mut run_cfg = *cfg;
                    run_cfg.session.seed = *seed;
                    *slot = Some(measure(truth, &run_cfg));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every repeat slot is filled")).collect()
}

/// Reports of each repeat against `reference`, or against the first repeat when none is given.
pub fn repeat_reports(
    cfg: &PipelineConfig,
    reference: Option<&HrirSet<f64>>,
    runs: usize,
) -> Result<(Vec<MetricsReport>, Vec<RepeatRow>)> {
    let truth = truth_set(cfg)?;
    let sets = measure_repeats(&truth, cfg, runs)?;
    let (reference, compared) = match reference {
        Some(r) => (r, &sets[..]),
        None => match sets.split_first() {
            Some((first, rest)) => (first, rest),
            None => return Ok((Vec::new(), Vec::new())),
        },
    };
    let reports = compared
        .iter()
        .map(|est| build_report(reference, est, &cfg.erb, cfg.nfft))
        .collect::<Result<Vec<_>>>()?;
    let rows = summarize_reports(&reports)?;
    Ok((reports, rows))
}

/// Pairwise comparison of two sessions that differ only in seed.
pub fn pairwise_report(cfg: &PipelineConfig, seed_a: u64, seed_b: u64) -> Result<MetricsReport> {
    let truth = truth_set(cfg)?;
    let mut a_cfg = *cfg;
    a_cfg.session.seed = seed_a;
    let mut b_cfg = *cfg;
    b_cfg.session.seed = seed_b;
    let (a, b) = std::thread::scope(|s| {
        let a = s.spawn(|| measure(&truth, &a_cfg));
        let b = measure(&truth, &b_cfg);
        (a.join().expect("measurement thread panicked"), b)
    });
    build_report(&a?, &b?, &cfg.erb, cfg.nfft)
}
