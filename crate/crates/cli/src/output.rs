//! CSV and JSON emission. Column orders here are the documented formats;
//! non-finite values never appear raw (the unbounded token in CSV is the
//! literal `inf`, JSON uses tagged variants).

use std::io::Write;
use std::path::Path;

use anyhow::Result;
use serde::{Deserialize, Serialize};

use fbexp_core::channel::Transcript;
use fbexp_core::exponent::{BoundPoint, Regime};
use fbexp_core::harness::{AuditResult, ErrorBreakdown};
use fbexp_core::schemes::{
    expected_collision_probability, GammaSpec, PartitionMap, Scheme, SchemeConfig, Variant,
};

/// Bound-curve CSV: `r_fb,lower,upper,regime,max_order,status`.
pub fn write_bounds_csv(path: &Path, rows: &[BoundPoint], scale: f64) -> Result<()> {
    let mut out = String::from("r_fb,lower,upper,regime,max_order,status\n");
    for row in rows {
        let order = match row.regime {
            Regime::Subcritical { max_order } => max_order.to_string(),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.feedback_rate / scale,
            row.lower.csv_cell(scale),
            row.upper.csv_cell(scale),
            row.regime.token(),
            order,
            row.status.token(),
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn breakdown_json(breakdown: &ErrorBreakdown) -> Result<String> {
    Ok(serde_json::to_string_pretty(breakdown)? + "\n")
}

/// Columns of the flat breakdown row shared by `simulate` and `sweep`.
pub const BREAKDOWN_COLUMNS: &str = "variant,n,num_messages,power,r_fb,epsilon,gamma,threshold,\
num_bins,k,collision_expected,trials,failed,ok,false_negative,false_positive,wrong_decoding,\
error_misdetection,subblock_error,total_error,total_error_lo,total_error_hi,message_error,\
mean_power,power_se,fb_total_mean,fb_total_max,fb_max_per_use,power_audit,feedback_audit";

fn breakdown_row(
    cfg: &SchemeConfig,
    b: &ErrorBreakdown,
    power_audit: Option<&AuditResult>,
    feedback_audit: Option<&AuditResult>,
) -> String {
    let gamma = b.gamma.map(|g| g.to_string()).unwrap_or_default();
    let threshold = scheme_threshold(cfg, b.gamma).map(|t| t.to_string()).unwrap_or_default();
    let collision = if cfg.variant == Variant::CompressedFb {
        expected_collision_probability(cfg.num_messages, cfg.num_bins)
            .map(|c| c.to_string())
            .unwrap_or_default()
    } else {
        String::new()
    };
    let epsilon = if cfg.variant == Variant::NoFeedback { String::new() } else { cfg.epsilon.to_string() };
    let audit_cell = |a: Option<&AuditResult>| match a {
        Some(a) if a.pass => "PASS".to_string(),
        Some(_) => "FAIL".to_string(),
        None => String::new(),
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        cfg.variant.token(),
        cfg.n,
        cfg.num_messages,
        cfg.power,
        cfg.feedback_rate,
        epsilon,
        gamma,
        threshold,
        if cfg.variant == Variant::CompressedFb { cfg.num_bins.to_string() } else { String::new() },
        if cfg.variant == Variant::BlockMarkov { cfg.k.to_string() } else { String::new() },
        collision,
        b.trials,
        b.failed_trials,
        b.ok.events,
        b.false_negative.events,
        b.false_positive.events,
        b.wrong_decoding.events,
        b.error_misdetection.events,
        b.subblock_error.events,
        b.total_error.rate,
        b.total_error.lo,
        b.total_error.hi,
        b.message_error.rate,
        b.mean_power.mean,
        b.mean_power.std_error,
        b.feedback_total_mean,
        b.feedback_total_max,
        b.feedback_max_per_use,
        audit_cell(power_audit),
        audit_cell(feedback_audit),
    )
}

/// Alarm threshold implied by the resolved gamma, for variants that have one.
fn scheme_threshold(cfg: &SchemeConfig, resolved_gamma: Option<f64>) -> Option<f64> {
    match cfg.variant {
        Variant::NoFeedback => None,
        Variant::MultiPhase { .. } => {
            cfg.gammas.first().map(|g| (cfg.power / g).sqrt() / 2.0)
        }
        _ => resolved_gamma.map(|g| (cfg.power / g).sqrt() / 2.0),
    }
}

pub fn write_breakdown_csv(
    path: &Path,
    cfg: &SchemeConfig,
    b: &ErrorBreakdown,
    power_audit: Option<&AuditResult>,
    feedback_audit: &AuditResult,
) -> Result<()> {
    let mut out = String::from(BREAKDOWN_COLUMNS);
    out.push('\n');
    out.push_str(&breakdown_row(cfg, b, power_audit, Some(feedback_audit)));
    out.push('\n');
    std::fs::write(path, out)?;
    Ok(())
}

/// One point of a sweep.
pub struct SweepRow {
    pub key: String,
    pub value: String,
    pub status: String,
    pub detail: Option<String>,
    pub cfg: Option<SchemeConfig>,
    pub breakdown: Option<ErrorBreakdown>,
    pub power_audit: Option<AuditResult>,
    pub feedback_audit: Option<AuditResult>,
}

/// Sweep CSV: `swept_key,swept_value,status,detail,` + breakdown columns.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = format!("swept_key,swept_value,status,detail,{BREAKDOWN_COLUMNS}\n");
    for row in rows {
        let detail = row.detail.as_deref().unwrap_or("").replace(',', ";");
        match (&row.cfg, &row.breakdown) {
            (Some(cfg), Some(b)) => {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    row.key,
                    row.value,
                    row.status,
                    detail,
                    breakdown_row(cfg, b, row.power_audit.as_ref(), row.feedback_audit.as_ref())
                ));
            }
            _ => {
                let empty = BREAKDOWN_COLUMNS.split(',').map(|_| "").collect::<Vec<_>>().join(",");
                out.push_str(&format!("{},{},{},{},{}\n", row.key, row.value, row.status, detail, empty));
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One line of the transcript dump; `replay` consumes this format.
#[derive(Debug, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub config: SchemeConfig,
    /// Present for compressed feedback (the partition the trial used).
    pub partition: Option<PartitionMap>,
    pub transcript: Transcript,
}

/// Re-runs the first `count` trials single-threaded and dumps their
/// transcripts as line-delimited JSON.
pub fn write_transcripts(path: &Path, cfg: &SchemeConfig, master_seed: u64, count: u64) -> Result<()> {
    let scheme = Scheme::build(cfg)?;
    let pinned = resolved_config(cfg, &scheme);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    for trial in 0..count {
        let (outcome, partition) = scheme.run_trial_with_artifacts(master_seed, trial)?;
        let record = TranscriptRecord {
            config: pinned.clone(),
            partition,
            transcript: outcome.transcript,
        };
        writeln!(file, "{}", serde_json::to_string(&record)?)?;
    }
    Ok(())
}

/// Pins the pilot gamma into the dumped config so replays rebuild the
/// identical scheme without re-running the pilot.
fn resolved_config(cfg: &SchemeConfig, scheme: &Scheme) -> SchemeConfig {
    let mut cfg = cfg.clone();
    if matches!(cfg.gamma, GammaSpec::Pilot) {
        if let Some(g) = scheme.resolved_gamma() {
            cfg.gamma = GammaSpec::Fixed(g);
        }
    }
    cfg
}
