//! Monte Carlo campaign driver: samples channels, runs detection per sample,
//! aggregates verdict statistics and writes deterministic artifacts.
//!
//! Determinism contract: `records.csv` is a pure function of the experiment
//! configuration. Sample `i` always uses stream id `i` of the campaign seed,
//! results are collected in sample order regardless of thread count, and the
//! one nondeterministic quantity (wall time) lives only in the `meta` block
//! of `summary.json`; the `wall_ms` CSV column is fixed at 0 by design.

pub mod cli;

use crate::channels::ChannelError;
use crate::detection::{
    coherent_information, detect, maximize_ic, perturbation_curve, DetectConfig, DetectionError,
    EpsGrid, Verdict,
};
use crate::numkernel::{outer, schmidt_rank, CMatrix, NumError};
use crate::sampling::{sample_channel_with_diagnostics, SamplingError, SeededStream};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};
use thiserror::Error;

/// Schema token stamped into every CSV row.
pub const RECORDS_SCHEMA: &str = "capdetect-v1";
/// Exact header of `records.csv`.
pub const RECORDS_HEADER: &str = "schema,sample_index,stream_id,rank_J,rank_phi_id,d_star_out,d_star_env,max_rank_found,verdict,trace_gap,ic_at_eps,ic_lower_bound,wall_ms";

/// Stream tag for the per-sample detection search.
const TAG_SEARCH: u64 = 1;
/// Stream tag for the per-sample maximization.
const TAG_MAXIMIZE: u64 = 2;
/// Singular values within this factor of the rank cutoff count as borderline.
const BORDERLINE_BAND: f64 = 10.0;
/// Perturbation size for the `ic_at_eps` column.
const EPS_STAR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {detail}")]
    InvalidConfig { detail: String },
    #[error("sample {sample_index}: verdict {verdict} without borderline rank evidence in a d_out != d_env campaign")]
    UnexplainedInconclusive { sample_index: usize, verdict: String },
    #[error("non-positive fraction {fraction:.4} ({count}/{n}) exceeds the 1% allowance")]
    InconclusiveBudget { fraction: f64, count: usize, n: usize },
    #[error("thread pool: {detail}")]
    ThreadPool { detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Num(#[from] NumError),
}

/// What each campaign sample does beyond detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Detection only.
    Detect,
    /// Additionally fit the perturbation-curve slope against the trace gap
    /// when the gap is safely away from zero.
    SlopeCheck,
    /// Additionally verify that every isometry column has full Schmidt rank.
    SupportCheck,
    /// Additionally run gradient-ascent maximization for a lower bound.
    Maximize,
}

/// Full description of a campaign; `records.csv` is a pure function of it.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub d: usize,
    pub d_out: usize,
    pub d_env: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Random trials per sample in the max-rank search.
    pub tries: usize,
    /// Hill-climb steps per sample when trials fall short.
    pub hill_steps: usize,
    pub eps_grid: EpsGrid,
    pub maximize_restarts: usize,
    pub maximize_iters: usize,
    /// Worker threads; 0 means available parallelism.
    pub threads: usize,
    /// Where to write `records.csv` and `summary.json`; not part of the
    /// config echo in the summary.
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(d: usize, d_out: usize, d_env: usize, n_samples: usize, seed: u64) -> Self {
        Self {
            d,
            d_out,
            d_env,
            n_samples,
            seed,
            mode: Mode::Detect,
            tries: 64,
            hill_steps: 200,
            eps_grid: EpsGrid::default(),
            maximize_restarts: 2,
            maximize_iters: 200,
            threads: 0,
            output_dir: None,
        }
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.d < 2 || self.d_out == 0 || self.d_env == 0 || self.d > self.d_out * self.d_env {
            return Err(HarnessError::InvalidConfig {
                detail: format!(
                    "need 2 <= d <= d_out*d_env, got d={} d_out={} d_env={}",
                    self.d, self.d_out, self.d_env
                ),
            });
        }
        if self.n_samples == 0 {
            return Err(HarnessError::InvalidConfig { detail: "n_samples must be positive".into() });
        }
        Ok(())
    }
}

/// One row of campaign output.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentRecord {
    pub sample_index: usize,
    pub stream_id: u64,
    pub rank_j: usize,
    pub rank_phi_id: usize,
    pub d_star_out: usize,
    pub d_star_env: usize,
    pub max_rank_found: usize,
    pub verdict: Verdict,
    pub trace_gap: f64,
    /// Coherent information of the certified side at the witness state
    /// perturbed by `eps = 1e-3` (negated for complement verdicts).
    pub ic_at_eps: f64,
    /// Present in `Maximize` mode.
    pub ic_lower_bound: Option<f64>,
    /// Measured per-sample wall time. Reported through the summary `meta`
    /// block only; the CSV column is pinned to 0 for byte determinism.
    #[serde(skip)]
    pub wall_ms: u64,
    /// Minimal dimensions match the generic `min()` formulas.
    pub support_ok: bool,
    /// The rank search attained `min(d*_out, d*_env)`.
    pub max_rank_ok: bool,
    /// Some rank decision had a singular value within 10x of its cutoff.
    pub borderline: bool,
    /// Rank-deficient Ginibre draws discarded while sampling this channel.
    pub resamples: u32,
    /// Description of any numerical anomaly hit while processing the sample.
    pub anomaly: Option<String>,
}

impl ExperimentRecord {
    fn blank(sample_index: usize, stream_id: u64) -> Self {
        Self {
            sample_index,
            stream_id,
            rank_j: 0,
            rank_phi_id: 0,
            d_star_out: 0,
            d_star_env: 0,
            max_rank_found: 0,
            verdict: Verdict::Inconclusive,
            trace_gap: 0.0,
            ic_at_eps: 0.0,
            ic_lower_bound: None,
            wall_ms: 0,
            support_ok: false,
            max_rank_ok: false,
            borderline: false,
            resamples: 0,
            anomaly: None,
        }
    }
}

/// Timing and provenance data excluded from determinism comparisons.
#[derive(Clone, Debug, Serialize)]
pub struct RunMeta {
    pub generated_at_unix_ms: u64,
    pub threads: usize,
    pub total_wall_ms: u64,
    pub mean_sample_wall_ms: f64,
    pub max_sample_wall_ms: u64,
}

/// Aggregated campaign statistics.
#[derive(Clone, Debug, Serialize)]
pub struct CampaignSummary {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub n_samples: usize,
    pub fraction_channel_positive: f64,
    pub fraction_complement_positive: f64,
    pub fraction_inconclusive: f64,
    pub fraction_support_ok: f64,
    pub fraction_maxrank_ok: f64,
    pub mean_abs_trace_gap: f64,
    pub min_abs_trace_gap: f64,
    pub anomaly_count: usize,
    pub borderline_count: usize,
    pub resample_total: u64,
    /// Nondeterministic block: timing and timestamp only.
    pub meta: RunMeta,
}

fn analyze_sample(
    cfg: &ExperimentConfig,
    stream: SeededStream,
    record: &mut ExperimentRecord,
) -> Result<(), HarnessError> {
    let (ch, diag) = sample_channel_with_diagnostics(cfg.d, cfg.d_out, cfg.d_env, stream)?;
    record.resamples = diag.ginibre_resamples;

    let det_cfg = DetectConfig {
        tries: cfg.tries,
        hill_steps: cfg.hill_steps,
        gap_threshold: 1e-7,
        stream: stream.substream(TAG_SEARCH),
    };
    let report = detect(&ch, &det_cfg)?;

    record.rank_j = report.minimal_dims.rank_j.rank;
    record.rank_phi_id = report.minimal_dims.rank_phi_id.rank;
    record.d_star_out = report.minimal_dims.d_star_out;
    record.d_star_env = report.minimal_dims.d_star_env;
    record.max_rank_found = report.witness_rank;
    record.verdict = report.verdict;
    record.trace_gap = report.trace_gap;
    record.support_ok = record.d_star_out == cfg.d_out.min(cfg.d * cfg.d_env)
        && record.d_star_env == cfg.d_env.min(cfg.d * cfg.d_out);
    record.max_rank_ok =
        report.witness_rank == report.minimal_dims.d_star_out.min(report.minimal_dims.d_star_env);
    record.borderline = report.minimal_dims.rank_j.is_borderline(BORDERLINE_BAND)
        || report.minimal_dims.rank_phi_id.is_borderline(BORDERLINE_BAND)
        || report.witness_rank_evidence.is_borderline(BORDERLINE_BAND);

    let mixed = CMatrix::identity(cfg.d).scale(1.0 / cfg.d as f64);
    if let Some(psi) = &report.witness_psi {
        let rho = &outer(psi, psi).scale(1.0 - EPS_STAR) + &mixed.scale(EPS_STAR);
        let ic = coherent_information(&ch, &rho)?;
        record.ic_at_eps = match report.verdict {
            Verdict::ComplementPositive => -ic,
            _ => ic,
        };
    }

    match cfg.mode {
        Mode::Detect => {}
        Mode::SlopeCheck => {
            if report.trace_gap.abs() > 0.05 {
                let psi = report.witness_psi.as_ref().expect("witness exists");
                let curve = perturbation_curve(&ch, psi, &mixed, &cfg.eps_grid)?;
                let rel = (curve.fitted_slope - curve.slope_prediction).abs()
                    / curve.slope_prediction.abs();
                if rel > 0.05 {
                    record.anomaly = Some(format!(
                        "slope mismatch: fitted {} vs predicted {} (relative error {:.4})",
                        curve.fitted_slope, curve.slope_prediction, rel
                    ));
                }
            }
        }
        Mode::SupportCheck => {
            let full = cfg.d_out.min(cfg.d_env);
            for col in 0..cfg.d {
                let column = ch.isometry().column(col);
                let rank = schmidt_rank(&column, cfg.d_out, cfg.d_env)?.rank;
                if rank != full {
                    record.anomaly = Some(format!(
                        "isometry column {col} has Schmidt rank {rank}, expected {full}"
                    ));
                    break;
                }
            }
        }
        Mode::Maximize => {
            let out = maximize_ic(
                &ch,
                cfg.maximize_restarts,
                cfg.maximize_iters,
                stream.substream(TAG_MAXIMIZE),
            )?;
            record.ic_lower_bound = Some(out.ic_lower_bound);
        }
    }
    Ok(())
}

fn run_sample(cfg: &ExperimentConfig, sample_index: usize) -> ExperimentRecord {
    let start = Instant::now();
    let stream = SeededStream::new(cfg.seed, sample_index as u64);
    let mut record = ExperimentRecord::blank(sample_index, stream.stream_id);
    if let Err(err) = analyze_sample(cfg, stream, &mut record) {
        record.anomaly = Some(err.to_string());
    }
    record.wall_ms = start.elapsed().as_millis() as u64;
    record
}

fn enforce_verdict_policy(
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
) -> Result<(), HarnessError> {
    if cfg.d_out == cfg.d_env {
        return Ok(());
    }
    let expected = if cfg.d_out > cfg.d_env {
        Verdict::ChannelPositive
    } else {
        Verdict::ComplementPositive
    };
    let mut off_count = 0;
    for r in records {
        if r.verdict != expected {
            off_count += 1;
            if !r.borderline {
                return Err(HarnessError::UnexplainedInconclusive {
                    sample_index: r.sample_index,
                    verdict: r.verdict.to_string(),
                });
            }
        }
    }
    let fraction = off_count as f64 / records.len() as f64;
    if fraction > 0.01 {
        return Err(HarnessError::InconclusiveBudget {
            fraction,
            count: off_count,
            n: records.len(),
        });
    }
    Ok(())
}

fn summarize(
    cfg: &ExperimentConfig,
    records: &[ExperimentRecord],
    threads: usize,
    total_wall_ms: u64,
) -> CampaignSummary {
    let n = records.len();
    let nf = n as f64;
    let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count() as f64;
    let gaps: Vec<f64> = records.iter().map(|r| r.trace_gap.abs()).collect();
    CampaignSummary {
        schema: RECORDS_SCHEMA,
        config: cfg.clone(),
        n_samples: n,
        fraction_channel_positive: count(Verdict::ChannelPositive) / nf,
        fraction_complement_positive: count(Verdict::ComplementPositive) / nf,
        fraction_inconclusive: count(Verdict::Inconclusive) / nf,
        fraction_support_ok: records.iter().filter(|r| r.support_ok).count() as f64 / nf,
        fraction_maxrank_ok: records.iter().filter(|r| r.max_rank_ok).count() as f64 / nf,
        mean_abs_trace_gap: gaps.iter().sum::<f64>() / nf,
        min_abs_trace_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        anomaly_count: records.iter().filter(|r| r.anomaly.is_some()).count(),
        borderline_count: records.iter().filter(|r| r.borderline).count(),
        resample_total: records.iter().map(|r| r.resamples as u64).sum(),
        meta: RunMeta {
            generated_at_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
            threads,
            total_wall_ms,
            mean_sample_wall_ms: records.iter().map(|r| r.wall_ms as f64).sum::<f64>() / nf,
            max_sample_wall_ms: records.iter().map(|r| r.wall_ms).max().unwrap_or(0),
        },
    }
}

/// Runs a full campaign: samples `n_samples` channels on stream ids
/// `0..n_samples`, analyzes each according to the mode, validates the verdict
/// policy and writes artifacts when an output directory is configured.
pub fn run_campaign(
    cfg: &ExperimentConfig,
) -> Result<(Vec<ExperimentRecord>, CampaignSummary), HarnessError> {
    cfg.validate()?;
    let threads = if cfg.threads == 0 {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    } else {
        cfg.threads
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::ThreadPool { detail: e.to_string() })?;
    let start = Instant::now();
    let records: Vec<ExperimentRecord> =
        pool.install(|| (0..cfg.n_samples).into_par_iter().map(|i| run_sample(cfg, i)).collect());
    let total_wall_ms = start.elapsed().as_millis() as u64;

    enforce_verdict_policy(cfg, &records)?;
    let summary = summarize(cfg, &records, threads, total_wall_ms);

    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        write_records_csv(&records, &mut csv)?;
        std::fs::write(dir.join("records.csv"), csv)?;
        let json = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
        std::fs::write(dir.join("summary.json"), json)?;
    }
    Ok((records, summary))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes `records.csv` rows in sample order with the pinned header.
pub fn write_records_csv(
    records: &[ExperimentRecord],
    out: &mut impl Write,
) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},0",
            RECORDS_SCHEMA,
            r.sample_index,
            r.stream_id,
            r.rank_j,
            r.rank_phi_id,
            r.d_star_out,
            r.d_star_env,
            r.max_rank_found,
            r.verdict,
            r.trace_gap,
            r.ic_at_eps,
            fmt_opt(r.ic_lower_bound),
        )?;
    }
    Ok(())
}

/// Interior test for the flat measure on channels with `d_out = d` and
/// `d_env = d^2`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundarySummary {
    pub d: usize,
    pub n_samples: usize,
    pub seed: u64,
    /// Fraction of samples with full Choi rank `d^2`.
    pub interior_fraction: f64,
    /// Among interior samples, fraction certified `complement_positive`.
    pub complement_positive_fraction: f64,
}

/// Samples channels from the flat measure (environment dimension `d^2`),
/// checks interior membership (`rank J = d^2`) and that interior channels
/// are certified complement-positive, i.e. their own coherent information
/// cannot be pinned at zero away from the boundary.
pub fn boundary_check(d: usize, n_samples: usize, seed: u64) -> Result<BoundarySummary, HarnessError> {
    if d < 2 || n_samples == 0 {
        return Err(HarnessError::InvalidConfig {
            detail: format!("boundary check needs d >= 2 and n_samples >= 1, got d={d} n={n_samples}"),
        });
    }
    let mut interior = 0usize;
    let mut complement_positive = 0usize;
    for i in 0..n_samples {
        let stream = SeededStream::new(seed, i as u64);
        let (ch, _) = sample_channel_with_diagnostics(d, d, d * d, stream)?;
        let dims = ch.minimal_dims()?;
        if dims.rank_j.rank == d * d {
            interior += 1;
            let report = detect(&ch, &DetectConfig::new(stream.substream(TAG_SEARCH)))?;
            if report.verdict == Verdict::ComplementPositive {
                complement_positive += 1;
            }
        }
    }
    Ok(BoundarySummary {
        d,
        n_samples,
        seed,
        interior_fraction: interior as f64 / n_samples as f64,
        complement_positive_fraction: if interior == 0 {
            0.0
        } else {
            complement_positive as f64 / interior as f64
        },
    })
}
