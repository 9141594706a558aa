//! Command-line driver for the near-field HRIR pipeline.
//!
//! `dispatch` returns the process exit code: 0 on success, 1 for usage errors
//! and 2 for data or validation errors.

pub mod config;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nfhrtf::io::{read_hrir_set, read_session, write_hrir_set, write_repeat_csv, write_report_csv, write_session};
use nfhrtf::{acquire, build_report, HrirSet, MetricsReport};

pub use config::{Overrides, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Data(#[from] nfhrtf::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) | CliError::Data(_) => EXIT_DATA,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "nfhrtf", version, about = "Simulated continuous near-field HRIR measurement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a ground-truth HRIR set on the session grid.
    Synth {
        #[command(flatten)]
        opts: Overrides,
        /// Output HRIR set.
        #[arg(long, default_value = "truth.json")]
        out: PathBuf,
    },
    /// Record a session bundle from a fine-grid truth set.
    Acquire {
        #[command(flatten)]
        opts: Overrides,
        /// HRIR set on a grid of 1 degree or finer.
        #[arg(long)]
        truth: PathBuf,
        /// Output session directory.
        #[arg(long, default_value = "session")]
        out: PathBuf,
    },
    /// Estimate an HRIR set from a session bundle.
    Estimate {
        #[command(flatten)]
        opts: Overrides,
        /// Session directory.
        #[arg(long)]
        session: PathBuf,
        /// Output HRIR set.
        #[arg(long, default_value = "est.json")]
        out: PathBuf,
    },
    /// Score an estimate against a reference, or summarize seeded repeats.
    Evaluate {
        #[command(flatten)]
        opts: Overrides,
        /// Reference HRIR set.
        #[arg(long = "ref", value_name = "PATH")]
        reference: Option<PathBuf>,
        /// Estimated HRIR set.
        #[arg(long, value_name = "PATH")]
        est: Option<PathBuf>,
        /// Run N seeded sessions and write per-bin mean and standard deviation.
        #[arg(long, value_name = "N")]
        repeat: Option<usize>,
        /// Output CSV [default: report.csv, or repeat.csv with --repeat].
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize, acquire, estimate and evaluate in one go.
    RunAll {
        #[command(flatten)]
        opts: Overrides,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

/// Parses `argv` (including the program name), runs the subcommand and returns the exit code.
pub fn dispatch<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    match run(cli.command, &mut stdout.lock()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match command {
        Command::Synth { opts, out: path } => {
            let cfg = opts.resolve()?;
            let set = pipeline::reference_set(&cfg)?;
            write_hrir_set(&set, &path)?;
            say(out, format_args!("wrote {} bins to {}", set.len(), path.display()));
        }
        Command::Acquire { opts, truth, out: dir } => {
            let mut cfg = opts.resolve()?;
            let truth: HrirSet<f64> = read_hrir_set(&truth)?;
            if opts.distance.is_none() {
                cfg.session.distance_m = truth.distance_m;
            }
            let recording = acquire(&truth, &cfg.session)?;
            write_session(&recording, &dir)?;
            say(
                out,
                format_args!(
                    "wrote {} samples ({:.1} s) to {}",
                    recording.len(),
                    recording.len() as f64 / cfg.session.sample_rate_hz as f64,
                    dir.display()
                ),
            );
        }
        Command::Estimate { opts, session, out: path } => {
            let cfg = opts.resolve()?;
            let recording = read_session(&session)?;
            let set = pipeline::estimate(&recording, &cfg)?;
            write_hrir_set(&set, &path)?;
            let missing = set.missing.iter().filter(|m| **m).count();
            say(
                out,
                format_args!("wrote {} bins ({missing} missing) to {}", set.len(), path.display()),
            );
        }
        Command::Evaluate {
            opts,
            reference,
            est,
            repeat,
            out: path,
        } => {
            let cfg = opts.resolve()?;
            match repeat {
                Some(runs) => {
                    if est.is_some() {
                        return Err(CliError::Usage("--est cannot be combined with --repeat".into()));
                    }
                    if runs < 1 || (reference.is_none() && runs < 2) {
                        return Err(CliError::Usage(
                            "--repeat needs at least 2 runs, or 1 with --ref".into(),
                        ));
                    }
                    let reference = reference.map(|p| read_hrir_set::<f64>(&p)).transpose()?;
                    let (reports, rows) = pipeline::repeat_reports(&cfg, reference.as_ref(), runs)?;
                    let path = path.unwrap_or_else(|| PathBuf::from("repeat.csv"));
                    write_repeat_csv(&rows, &path)?;
                    say(
                        out,
                        format_args!("wrote {} comparisons over {} bins to {}", reports.len(), rows.len(), path.display()),
                    );
                }
                None => {
                    let (Some(reference), Some(est)) = (reference, est) else {
                        return Err(CliError::Usage("evaluate needs --ref and --est (or --repeat N)".into()));
                    };
                    let reference: HrirSet<f64> = read_hrir_set(&reference)?;
                    let est: HrirSet<f64> = read_hrir_set(&est)?;
                    let report = build_report(&reference, &est, &cfg.erb, cfg.nfft)?;
                    let path = path.unwrap_or_else(|| PathBuf::from(pipeline::REPORT_CSV));
                    let bands = write_report_csv(&report, &path)?;
                    print_summary(out, &report, None);
                    say(out, format_args!("wrote {} and {}", path.display(), bands.display()));
                }
            }
        }
        Command::RunAll { opts, out: dir } => {
            let cfg = opts.resolve()?;
            let outcome = pipeline::run_all(&cfg, &dir)?;
            print_summary(out, &outcome.report, Some(outcome.elapsed.as_secs_f64()));
            say(out, format_args!("artifacts in {}", dir.display()));
        }
    }
    Ok(())
}

fn say(out: &mut dyn Write, args: std::fmt::Arguments<'_>) {
    let _ = writeln!(out, "{args}");
}

fn fmt_opt(v: Option<f64>, scale: f64, unit: &str, prec: usize) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{:.prec$} {unit}", v * scale),
        Some(v) => format!("{v} {unit}"),
        None => "n/a".into(),
    }
}

/// Summary table: worst SD, CC and ITD error over present bins.
pub fn print_summary(out: &mut dyn Write, report: &MetricsReport, elapsed_s: Option<f64>) {
    let present = report.present().count();
    let missing = report.rows.len() - present;
    let worst_sd = report
        .present()
        .map(|(_, m)| m.sd_left.total_db.max(m.sd_right.total_db))
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))));
    say(out, format_args!("{:<16}{} ({} missing)", "bins", report.rows.len(), missing));
    say(out, format_args!("{:<16}{}", "max SD", fmt_opt(worst_sd, 1.0, "dB", 2)));
    say(out, format_args!("{:<16}{}", "min CC", fmt_opt(report.min_cc(), 1.0, "", 6).trim_end()));
    say(out, format_args!("{:<16}{}", "max |ITD error|", fmt_opt(report.max_itd_error_s(), 1e6, "us", 2)));
    say(out, format_args!("{:<16}{}", "max NMSE", match report.max_nmse() {
        Some(v) => format!("{v:.3e}"),
        None => "n/a".into(),
    }));
    if let Some(s) = elapsed_s {
        say(out, format_args!("{:<16}{s:.2} s", "elapsed"));
    }
}
