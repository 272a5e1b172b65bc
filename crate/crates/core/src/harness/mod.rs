//! Monte Carlo experiment runner: trial fan-out, event-class frequencies
//! with Wilson intervals, conditional branch decomposition for small
//! probabilities, and the power/feedback audits.
//!
//! Trials are embarrassingly parallel; every trial owns streams derived
//! from `(master_seed, trial index)`, so the aggregate is a deterministic
//! function of the master seed and the config no matter how the work is
//! scheduled. Aggregation collects per-trial summaries and folds them in
//! trial order, which also makes it invariant under any permutation of the
//! results.

mod branch;

pub use branch::{branch_estimate, branch_estimate_with_noise, BranchEstimates, FactorEstimate, ProductEstimate};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{feedback_usage, power_usage};
use crate::error::Error;
use crate::schemes::{EventClass, Scheme, SchemeConfig, Variant};
use crate::stats::{wilson, MeanWithError, Proportion};
use crate::Result;

/// Noise model used by the runner. `Zero` exists for tests that need a
/// silent channel through the whole harness path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Gaussian,
    Zero,
}

/// Frequencies of the error-event classes with 95% Wilson intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub trials: u64,
    pub ok: Proportion,
    pub false_negative: Proportion,
    pub false_positive: Proportion,
    pub wrong_decoding: Proportion,
    pub error_misdetection: Proportion,
    pub subblock_error: Proportion,
    /// Trials whose scheme run failed outright; must be zero for a valid
    /// experiment.
    pub failed_trials: u64,
    /// Union of the anomalous branches: `1 - freq(OK)`. Counts the
    /// measure-small cases where a false alarm happens to re-decode the
    /// right message, so it can sit a hair above `message_error`.
    pub total_error: Proportion,
    /// Strict decoding-error frequency, `Pr{decoded != message}`.
    pub message_error: Proportion,
    pub mean_power: MeanWithError,
    /// Feedback spent: mean total nats per trial, the largest total seen
    /// in any trial, and the largest single-use nats in any transcript.
    pub feedback_total_mean: f64,
    pub feedback_total_max: f64,
    pub feedback_max_per_use: f64,
    /// Resolved retransmission-trigger probability, when the variant has one.
    pub gamma: Option<f64>,
    /// Product-form conditional estimates, when the variant supports them.
    pub branch_estimates: Option<BranchEstimates>,
}

/// Per-trial summary used during aggregation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TrialRecord {
    pub class: Option<EventClass>, // None = failed trial
    pub final_correct: bool,
    pub power: f64,
    pub feedback_total: f64,
    pub feedback_max: f64,
}

/// Runs `trials` independent trials of the scheme under `cfg` and returns
/// the aggregated breakdown. Deterministic given `(cfg, master_seed)`.
pub fn estimate(cfg: &SchemeConfig, trials: u64, master_seed: u64) -> Result<ErrorBreakdown> {
    estimate_with_noise(cfg, trials, master_seed, NoiseKind::Gaussian)
}

/// As [`estimate`], with an explicit noise model.
pub fn estimate_with_noise(
    cfg: &SchemeConfig,
    trials: u64,
    master_seed: u64,
    noise: NoiseKind,
) -> Result<ErrorBreakdown> {
    if trials == 0 {
        return Err(Error::invalid("estimate needs at least one trial"));
    }
    let scheme = Scheme::build(cfg)?;
    let records: Vec<TrialRecord> = (0..trials)
        .into_par_iter()
        .map(|trial| run_one(&scheme, master_seed, trial, noise))
        .collect();
    Ok(aggregate(&records, scheme.resolved_gamma()))
}

fn run_one(scheme: &Scheme, master_seed: u64, trial: u64, noise: NoiseKind) -> TrialRecord {
    use rand::Rng;
    let outcome = match noise {
        NoiseKind::Gaussian => scheme.run_trial(master_seed, trial),
        NoiseKind::Zero => {
            let cfg = scheme.config();
            let mut message_rng = crate::streams::rng(master_seed, "message", trial);
            let message = message_rng.gen_range(0..cfg.num_messages);
            let partition = if matches!(cfg.variant, Variant::CompressedFb) {
                let mut rng = crate::streams::rng(master_seed, "partition", trial);
                Some(crate::schemes::sample_equal_partition(cfg.num_messages, cfg.num_bins, &mut rng))
            } else {
                None
            };
            match partition {
                Some(Err(e)) => Err(e),
                Some(Ok(p)) => scheme.run(message, Some(&p), &mut crate::channel::ZeroNoise),
                None => scheme.run(message, None, &mut crate::channel::ZeroNoise),
            }
        }
    };
    match outcome {
        Ok(out) => {
            let (fb_total, fb_max) = feedback_usage(&out.transcript);
            TrialRecord {
                class: Some(out.event_class),
                final_correct: out.final_correct,
                power: power_usage(&out.transcript),
                feedback_total: fb_total,
                feedback_max: fb_max,
            }
        }
        Err(_) => TrialRecord {
            class: None,
            final_correct: false,
            power: 0.0,
            feedback_total: 0.0,
            feedback_max: 0.0,
        },
    }
}

/// Aggregates trial records. Counting is order-free; the floating-point
/// sums run over canonically sorted copies of the values, so any
/// permutation of the input yields the bit-identical breakdown.
pub(crate) fn aggregate(records: &[TrialRecord], gamma: Option<f64>) -> ErrorBreakdown {
    let mut counts = [0u64; 6];
    let mut failed = 0u64;
    let mut wrong_final = 0u64;
    let mut powers = Vec::with_capacity(records.len());
    let mut fb_totals = Vec::with_capacity(records.len());
    let mut fb_total_max = 0.0f64;
    let mut fb_max = 0.0f64;
    for rec in records {
        match rec.class {
            None => {
                failed += 1;
                continue;
            }
            Some(class) => {
                let idx = match class {
                    EventClass::Ok => 0,
                    EventClass::FalseNegative => 1,
                    EventClass::FalsePositive => 2,
                    EventClass::WrongDecoding => 3,
                    EventClass::ErrorMisdetection => 4,
                    EventClass::SubblockError(_) => 5,
                };
                counts[idx] += 1;
            }
        }
        if !rec.final_correct {
            wrong_final += 1;
        }
        powers.push(rec.power);
        fb_totals.push(rec.feedback_total);
        fb_total_max = fb_total_max.max(rec.feedback_total);
        fb_max = fb_max.max(rec.feedback_max);
    }
    let completed = powers.len() as u64;
    let trials = records.len() as u64;
    let mean_power = if completed == 0 {
        MeanWithError { samples: 0, mean: 0.0, std_error: 0.0 }
    } else {
        let n = completed as f64;
        let mean = canonical_sum(&mut powers) / n;
        let mut sq: Vec<f64> = powers.iter().map(|p| (p - mean) * (p - mean)).collect();
        let var = if completed > 1 { canonical_sum(&mut sq) / (n - 1.0) } else { 0.0 };
        MeanWithError { samples: completed, mean, std_error: (var / n).sqrt() }
    };
    let anomalous = completed - counts[0];
    ErrorBreakdown {
        trials,
        ok: wilson(counts[0], completed),
        false_negative: wilson(counts[1], completed),
        false_positive: wilson(counts[2], completed),
        wrong_decoding: wilson(counts[3], completed),
        error_misdetection: wilson(counts[4], completed),
        subblock_error: wilson(counts[5], completed),
        failed_trials: failed,
        total_error: wilson(anomalous, completed),
        message_error: wilson(wrong_final, completed),
        mean_power,
        feedback_total_mean: if completed == 0 {
            0.0
        } else {
            canonical_sum(&mut fb_totals) / completed as f64
        },
        feedback_total_max: fb_total_max,
        feedback_max_per_use: fb_max,
        gamma,
        branch_estimates: None,
    }
}

/// Sum after sorting, so the result depends only on the multiset of values.
fn canonical_sum(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    values.iter().sum()
}

/// Outcome of a constraint audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditResult {
    pub pass: bool,
    /// Allowed level the measurement is compared against.
    pub limit: f64,
    /// Measured value.
    pub measured: f64,
    /// `limit - measured`; negative margins fail.
    pub margin: f64,
}

/// Power audit: passes iff `mean_power <= P + 3 * SE`.
pub fn power_audit(breakdown: &ErrorBreakdown, cfg: &SchemeConfig) -> Result<AuditResult> {
    if breakdown.mean_power.samples < 1000 {
        return Err(Error::invalid(format!(
            "power audit needs at least 1000 trials, got {}",
            breakdown.mean_power.samples
        )));
    }
    let limit = cfg.power + 3.0 * breakdown.mean_power.std_error;
    let measured = breakdown.mean_power.mean;
    Ok(AuditResult { pass: measured <= limit, limit, measured, margin: limit - measured })
}

/// Feedback audit. Average-rate variants must keep every trial's total
/// within `n * R_FB`; the per-channel-use variant must keep every single
/// use within `R_FB`.
pub fn feedback_audit(breakdown: &ErrorBreakdown, cfg: &SchemeConfig) -> AuditResult {
    const TOL: f64 = 1e-9;
    match cfg.variant {
        Variant::BlockMarkov => {
            let limit = cfg.feedback_rate + TOL;
            let measured = breakdown.feedback_max_per_use;
            AuditResult { pass: measured <= limit, limit, measured, margin: limit - measured }
        }
        _ => {
            let limit = cfg.n as f64 * cfg.feedback_rate + TOL;
            let measured = breakdown.feedback_total_max;
            AuditResult { pass: measured <= limit, limit, measured, margin: limit - measured }
        }
    }
}
