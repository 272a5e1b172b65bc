//! `fbexp` — batch front end for the feedback-coding simulator.
//!
//! Subcommands:
//! * `bounds`   — error-exponent bound curves over a feedback-rate grid (CSV);
//! * `simulate` — Monte Carlo run of one scheme config (JSON + CSV row);
//! * `sweep`    — one config key swept over a grid, one CSV row per point;
//! * `replay`   — re-derive receiver decisions from recorded transcripts.
//!
//! Rates are nats per channel use unless `--units bits` is given. Every
//! output file gets a sibling `<file>.manifest.json` recording the command,
//! the resolved config and the seed, so a run can be reproduced bit for bit.

mod manifest;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use fbexp_core::exponent;
use fbexp_core::harness;
use fbexp_core::schemes::{parse_kv_text, Scheme, SchemeConfig, Variant};

#[derive(Parser)]
#[command(name = "fbexp", version, about = "AWGN rate-limited-feedback coding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Units {
    Nats,
    Bits,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate exponent bound curves over a feedback-rate grid.
    Bounds {
        /// Forward rate (nats/use unless --units bits).
        #[arg(long = "R")]
        rate: f64,
        /// Power budget (SNR, noise variance 1).
        #[arg(long = "P")]
        power: f64,
        /// Feedback-rate grid: `start:stop:step`, a comma list, or one value.
        #[arg(long)]
        rfb: String,
        #[arg(long, value_enum, default_value = "nats")]
        units: Units,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run Monte Carlo trials of one scheme config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: u64,
        /// Master seed for trial randomness (messages, noise, partitions).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output prefix: writes `<out>.json`, `<out>.csv` and manifests.
        #[arg(long)]
        out: PathBuf,
        /// Conditioned samples per branch factor (two_phase/compressed_fb);
        /// defaults to trials/5. Zero skips the decomposition.
        #[arg(long)]
        branch_trials: Option<u64>,
        /// Also dump the first N trial transcripts to `<out>.transcripts.jsonl`.
        #[arg(long, default_value_t = 0)]
        transcripts: u64,
    },
    /// Sweep exactly one multi-valued config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-derive receiver decisions from a transcript dump.
    Replay {
        /// Line-delimited JSON transcript records.
        path: PathBuf,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("FBEXP_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("fbexp: FBEXP_THREADS must be a positive integer, got `{threads}`");
                return ExitCode::from(2);
            }
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("fbexp: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let started = Instant::now();
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Bounds { rate, power, rfb, units, out } => {
            let scale = unit_scale(units);
            let grid = parse_grid(&rfb).context("invalid --rfb grid spec")?;
            if grid.is_empty() {
                bail!("empty feedback-rate grid");
            }
            // convert inputs to nats, compute, convert outputs on the way out
            let grid_nats: Vec<f64> = grid.iter().map(|v| v * scale).collect();
            let rows = exponent::bound_curve(rate * scale, power, &grid_nats)?;
            output::write_bounds_csv(&out, &rows, scale)?;
            manifest::write(&out, &argv, None, None, &[&out], started)?;
            println!("bounds: {} rows -> {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { config, trials, seed, out, branch_trials, transcripts } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read config {}", config.display()))?;
            let cfg = SchemeConfig::from_kv_text(&text)?;
            let mut breakdown = harness::estimate(&cfg, trials, seed)?;
            let branch = branch_trials.unwrap_or(trials.div_ceil(5));
            if branch > 0 && matches!(cfg.variant, Variant::TwoPhase | Variant::CompressedFb) {
                breakdown.branch_estimates = Some(harness::branch_estimate(&cfg, branch, seed)?);
            }
            let power_audit = harness::power_audit(&breakdown, &cfg).ok();
            let feedback_audit = harness::feedback_audit(&breakdown, &cfg);

            let json_path = out.with_extension("json");
            let csv_path = out.with_extension("csv");
            std::fs::write(&json_path, output::breakdown_json(&breakdown)?)?;
            output::write_breakdown_csv(&csv_path, &cfg, &breakdown, power_audit.as_ref(), &feedback_audit)?;
            let mut outputs: Vec<&PathBuf> = vec![&json_path, &csv_path];

            let transcript_path = out.with_extension("transcripts.jsonl");
            if transcripts > 0 {
                output::write_transcripts(&transcript_path, &cfg, seed, transcripts)?;
                outputs.push(&transcript_path);
            }
            manifest::write(&out, &argv, Some(&cfg), breakdown.gamma, &outputs, started)?;

            let audits_pass = power_audit.map_or(true, |a| a.pass) && feedback_audit.pass;
            let ok = audits_pass && breakdown.failed_trials == 0;
            println!(
                "simulate: {} trials, total_error {:.6e} [{:.3e}, {:.3e}], mean power {:.4}, audits {}",
                breakdown.trials,
                breakdown.total_error.rate,
                breakdown.total_error.lo,
                breakdown.total_error.hi,
                breakdown.mean_power.mean,
                if ok { "PASS" } else { "FAIL" }
            );
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Sweep { config, trials, seed, out } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("cannot read config {}", config.display()))?;
            let points = sweep_points(&text)?;
            let mut all_ok = true;
            let mut rows = Vec::new();
            for (key, value, cfg) in &points {
                match cfg {
                    Ok(cfg) => {
                        let mut breakdown = harness::estimate(cfg, trials, seed)?;
                        if matches!(cfg.variant, Variant::TwoPhase | Variant::CompressedFb) {
                            breakdown.branch_estimates =
                                Some(harness::branch_estimate(cfg, trials.div_ceil(5), seed)?);
                        }
                        let pa = harness::power_audit(&breakdown, cfg).ok();
                        let fa = harness::feedback_audit(&breakdown, cfg);
                        all_ok &= pa.as_ref().map_or(true, |a| a.pass) && fa.pass
                            && breakdown.failed_trials == 0;
                        rows.push(output::SweepRow {
                            key: key.clone(),
                            value: value.clone(),
                            status: "OK".to_string(),
                            detail: None,
                            cfg: Some(cfg.clone()),
                            breakdown: Some(breakdown),
                            power_audit: pa,
                            feedback_audit: Some(fa),
                        });
                    }
                    Err(err) => {
                        all_ok = false;
                        rows.push(output::SweepRow {
                            key: key.clone(),
                            value: value.clone(),
                            status: "ERROR".to_string(),
                            detail: Some(err.to_string()),
                            cfg: None,
                            breakdown: None,
                            power_audit: None,
                            feedback_audit: None,
                        });
                    }
                }
            }
            output::write_sweep_csv(&out, &rows)?;
            manifest::write(&out, &argv, None, None, &[&out], started)?;
            println!("sweep: {} points -> {}", rows.len(), out.display());
            Ok(if all_ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Replay { path } => {
            let text = std::fs::read_to_string(&path)
                .with_context(|| format!("cannot read transcripts {}", path.display()))?;
            let mut checked = 0u64;
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: output::TranscriptRecord = serde_json::from_str(line)
                    .with_context(|| format!("line {}: bad transcript record", lineno + 1))?;
                let scheme = Scheme::build(&record.config)?;
                let trace =
                    scheme.receiver_trace(&record.transcript.outputs, record.partition.as_ref())?;
                if trace.decoded != record.transcript.decoded {
                    println!(
                        "line {}: MISMATCH decoded {} vs recorded {}",
                        lineno + 1,
                        trace.decoded,
                        record.transcript.decoded
                    );
                    return Ok(ExitCode::FAILURE);
                }
                if trace.feedback != record.transcript.feedback {
                    println!("line {}: MISMATCH in feedback symbols", lineno + 1);
                    return Ok(ExitCode::FAILURE);
                }
                checked += 1;
            }
            println!("replay: {checked} transcript(s) reproduce their decisions");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn unit_scale(units: Units) -> f64 {
    match units {
        Units::Nats => 1.0,
        Units::Bits => std::f64::consts::LN_2,
    }
}

/// Parses `start:stop:step`, a comma list, or a single value.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.is_empty() {
        bail!("empty grid spec");
    }
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            bail!("range spec must be start:stop:step, got `{spec}`");
        }
        let start: f64 = parts[0].parse().context("bad range start")?;
        let stop: f64 = parts[1].parse().context("bad range stop")?;
        let step: f64 = parts[2].parse().context("bad range step")?;
        if !(step > 0.0) || stop < start {
            bail!("range needs step > 0 and stop >= start");
        }
        let count = ((stop - start) / step).round() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad grid value `{v}`")))
        .collect()
}

/// Expands a config whose single multi-valued key defines the sweep.
#[allow(clippy::type_complexity)]
fn sweep_points(
    text: &str,
) -> Result<Vec<(String, String, std::result::Result<SchemeConfig, fbexp_core::Error>)>> {
    let pairs = parse_kv_text(text)?;
    let mut swept: Option<(usize, String, Vec<String>)> = None;
    for (idx, (key, value)) in pairs.iter().enumerate() {
        // `gammas` is legitimately a list; a swept gammas key is not supported
        if key == "gammas" {
            continue;
        }
        let values: Vec<String> = if value.contains(',') {
            value.split(',').map(|v| v.trim().to_string()).collect()
        } else if value.contains(':') && key != "variant" && key != "gamma" {
            parse_grid(value)?.iter().map(|v| v.to_string()).collect()
        } else {
            continue;
        };
        if swept.is_some() {
            bail!("config declares more than one swept key");
        }
        swept = Some((idx, key.clone(), values));
    }
    let Some((idx, key, values)) = swept else {
        bail!("sweep config needs exactly one key with a comma list or start:stop:step grid");
    };
    if values.is_empty() {
        bail!("swept key `{key}` has an empty grid");
    }
    Ok(values
        .into_iter()
        .map(|v| {
            let mut point = pairs.clone();
            point[idx] = (key.clone(), v.clone());
            (key.clone(), v, SchemeConfig::from_pairs(&point))
        })
        .collect())
}
