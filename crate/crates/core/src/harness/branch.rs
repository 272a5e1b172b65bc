//! Conditional Monte Carlo decomposition of the error-event classes.
//!
//! The joint probabilities of the rare classes are products of factors
//! that are each cheap to estimate under exact conditioning:
//!
//! * `gamma_hat` — initial decode error rate (phase 1 in isolation);
//! * `false_alarm` — probability the silent alarm slot crosses the
//!   threshold (conditioned on a correct initial decode);
//! * `missed_alarm` — probability a transmitted alarm stays below the
//!   threshold (conditioned on a wrong decode);
//! * `retx_error` — retransmission decode error under a forced phase-1
//!   error, obtained by rejection (phase 1 reruns until an error occurs),
//!   so the conditional law is exact rather than noise-biased;
//! * `collision` — feedback-bin collision rate given a wrong decode, with
//!   a fresh random partition per conditioned sample.
//!
//! Assembled products (the two-phase decomposition; these are exact for
//! the full-feedback scheme, and for compressed feedback the mis-detection
//! product is exact while the alarm products do not subtract the collision
//! overlap):
//!
//! ```text
//! P(FALSE_NEGATIVE)     ~ (1 - gamma_hat) * false_alarm
//! P(FALSE_POSITIVE)     ~ gamma_hat * missed_alarm
//! P(WRONG_DECODING)     ~ gamma_hat * (1 - missed_alarm) * retx_error
//! P(ERROR_MISDETECTION) ~ gamma_hat * collision
//! ```
//!
//! A branch that never triggers inside its attempt budget is flagged as
//! starved instead of reporting a silent zero.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{transmit, GaussianNoise, NoiseSource};
use crate::codec::ml_decode;
use crate::error::Error;
use crate::schemes::{sample_equal_partition, RetxScheme, Scheme, SchemeConfig, Variant};
use crate::stats::wilson;
use crate::{streams, Result};

/// Rejection budget per conditioned sample.
const ATTEMPT_CAP: u64 = 4_000;

/// One estimated factor with its Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorEstimate {
    pub samples: u64,
    pub events: u64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
    /// The conditioning branch failed to collect the requested samples.
    pub starved: bool,
}

impl FactorEstimate {
    fn from_counts(events: u64, samples: u64, requested: u64) -> FactorEstimate {
        let w = wilson(events, samples);
        FactorEstimate {
            samples,
            events,
            rate: w.rate,
            lo: w.lo,
            hi: w.hi,
            starved: samples < requested,
        }
    }

    fn complement(&self) -> FactorEstimate {
        FactorEstimate {
            samples: self.samples,
            events: self.samples - self.events,
            rate: 1.0 - self.rate,
            lo: 1.0 - self.hi,
            hi: 1.0 - self.lo,
            starved: self.starved,
        }
    }

    fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

/// A product of factors with a first-order propagated interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductEstimate {
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    /// Set when any factor was starved.
    pub starved: bool,
}

fn product(factors: &[&FactorEstimate]) -> ProductEstimate {
    let value: f64 = factors.iter().map(|f| f.rate).product();
    let starved = factors.iter().any(|f| f.starved);
    if factors.iter().any(|f| f.rate == 0.0) {
        // delta method degenerates; fall back to the interval product
        let hi: f64 = factors.iter().map(|f| f.hi).product();
        return ProductEstimate { value, lo: 0.0, hi, starved };
    }
    let rel: f64 = factors.iter().map(|f| (f.half_width() / f.rate).powi(2)).sum::<f64>().sqrt();
    let half = value * rel;
    ProductEstimate { value, lo: (value - half).max(0.0), hi: (value + half).min(1.0), starved }
}

/// Product-form estimates of the error-event classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEstimates {
    pub trials_per_branch: u64,
    /// Resolved retransmission-trigger probability of the scheme.
    pub gamma_config: f64,
    pub gamma_hat: FactorEstimate,
    /// Conditioned false-negative rate (silent alarm slot crosses the
    /// threshold).
    pub false_alarm: FactorEstimate,
    /// Conditioned false-positive rate (sent alarm misses the threshold).
    pub missed_alarm: FactorEstimate,
    /// Retransmission decode error rate under a forced phase-1 error.
    pub retx_error: FactorEstimate,
    /// Bin collision rate given a phase-1 error (compressed feedback only).
    pub collision: Option<FactorEstimate>,
    pub false_negative: ProductEstimate,
    pub false_positive: ProductEstimate,
    pub wrong_decoding: ProductEstimate,
    pub error_misdetection: Option<ProductEstimate>,
}

/// Estimates every factor of the two-phase decomposition with
/// `trials_per_branch` conditioned samples per factor.
pub fn branch_estimate(
    cfg: &SchemeConfig,
    trials_per_branch: u64,
    master_seed: u64,
) -> Result<BranchEstimates> {
    branch_estimate_with_noise(cfg, trials_per_branch, master_seed, super::NoiseKind::Gaussian)
}

/// As [`branch_estimate`], with an explicit noise model; under `Zero`
/// every factor is zero and the conditioned branches starve.
pub fn branch_estimate_with_noise(
    cfg: &SchemeConfig,
    trials_per_branch: u64,
    master_seed: u64,
    noise: super::NoiseKind,
) -> Result<BranchEstimates> {
    if !matches!(cfg.variant, Variant::TwoPhase | Variant::CompressedFb) {
        return Err(Error::invalid(
            "branch decomposition applies to two_phase and compressed_fb only",
        ));
    }
    if trials_per_branch == 0 {
        return Err(Error::invalid("branch estimate needs at least one sample per branch"));
    }
    let scheme = match Scheme::build(cfg)? {
        Scheme::Retx(s) => s,
        _ => unreachable!(),
    };
    let zero = noise == super::NoiseKind::Zero;

    let gamma_hat = phase1_error_factor(&scheme, trials_per_branch, master_seed, zero);
    let (false_alarm, missed_alarm) = alarm_factors(&scheme, trials_per_branch, master_seed, zero);
    let retx_error = retx_error_factor(&scheme, trials_per_branch, master_seed, zero);
    let collision = if cfg.variant == Variant::CompressedFb {
        Some(collision_factor(&scheme, trials_per_branch, master_seed, zero))
    } else {
        None
    };

    let false_negative = product(&[&gamma_hat.complement(), &false_alarm]);
    let false_positive = product(&[&gamma_hat, &missed_alarm]);
    let wrong_decoding = product(&[&gamma_hat, &missed_alarm.complement(), &retx_error]);
    let error_misdetection = collision.as_ref().map(|c| product(&[&gamma_hat, c]));

    Ok(BranchEstimates {
        trials_per_branch,
        gamma_config: scheme.gammas[0],
        gamma_hat,
        false_alarm,
        missed_alarm,
        retx_error,
        collision,
        false_negative,
        false_positive,
        wrong_decoding,
        error_misdetection,
    })
}

/// Initial decode error rate, phase 1 in isolation.
fn phase1_error_factor(scheme: &RetxScheme, samples: u64, master_seed: u64, zero: bool) -> FactorEstimate {
    let events: u64 = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::rng(master_seed, "branch-gamma", i);
            let message = rng.gen_range(0..scheme.cfg.num_messages);
            let y = if zero {
                scheme.initial.codeword(message).to_vec()
            } else {
                let mut noise =
                    GaussianNoise::for_trial(streams::sub_seed(master_seed, "branch-gamma-noise", 0), i);
                transmit(scheme.initial.codeword(message), &mut noise)
            };
            u64::from(ml_decode(&scheme.initial, &y).expect("shapes fixed at build") != message)
        })
        .sum();
    FactorEstimate::from_counts(events, samples, samples)
}

/// Conditioned alarm-slot simulation: the silent slot crossing the
/// threshold, and the transmitted alarm missing it.
fn alarm_factors(
    scheme: &RetxScheme,
    samples: u64,
    master_seed: u64,
    zero: bool,
) -> (FactorEstimate, FactorEstimate) {
    let threshold = scheme.thresholds[0];
    let amplitude = scheme.alarm_amps[0];
    let counts: (u64, u64) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut noise = GaussianNoise::for_trial(streams::sub_seed(master_seed, "branch-alarm", 0), i);
            let (a, b) = if zero { (0.0, 0.0) } else { (noise.next_noise(), noise.next_noise()) };
            let silent = a;
            let sent = amplitude + b;
            (u64::from(silent >= threshold), u64::from(sent < threshold))
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (
        FactorEstimate::from_counts(counts.0, samples, samples),
        FactorEstimate::from_counts(counts.1, samples, samples),
    )
}

/// Draws one phase-1 error by rejection and returns the forced `(m, m_hat)`
/// pair, or `None` when the budget runs out (always, under zero noise).
fn force_phase1_error<R: Rng>(scheme: &RetxScheme, rng: &mut R, zero: bool) -> Option<(usize, usize)> {
    struct RngNoise<'a, R: Rng>(&'a mut R);
    impl<R: Rng> NoiseSource for RngNoise<'_, R> {
        fn next_noise(&mut self) -> f64 {
            self.0.sample(rand_distr::StandardNormal)
        }
    }
    for _ in 0..ATTEMPT_CAP {
        let message = rng.gen_range(0..scheme.cfg.num_messages);
        let y = if zero {
            scheme.initial.codeword(message).to_vec()
        } else {
            transmit(scheme.initial.codeword(message), &mut RngNoise(rng))
        };
        let decoded = ml_decode(&scheme.initial, &y).expect("shapes fixed at build");
        if decoded != message {
            return Some((message, decoded));
        }
        if zero {
            // noiseless decodes never err; don't spin out the budget
            return None;
        }
    }
    None
}

/// Retransmission decode error rate conditioned on a phase-1 error.
fn retx_error_factor(scheme: &RetxScheme, samples: u64, master_seed: u64, zero: bool) -> FactorEstimate {
    let (collected, events): (u64, u64) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::rng(master_seed, "branch-retx", i);
            match force_phase1_error(scheme, &mut rng, zero) {
                None => (0u64, 0u64),
                Some((message, _)) => {
                    let y: Vec<f64> = scheme.retx[0]
                        .codeword(message)
                        .iter()
                        .map(|x| x + rng.sample::<f64, _>(rand_distr::StandardNormal))
                        .collect();
                    let decoded = ml_decode(&scheme.retx[0], &y).expect("shapes fixed at build");
                    (1, u64::from(decoded != message))
                }
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    FactorEstimate::from_counts(events, collected, samples)
}

/// Bin collision rate conditioned on a phase-1 error, fresh partition per
/// sample.
fn collision_factor(scheme: &RetxScheme, samples: u64, master_seed: u64, zero: bool) -> FactorEstimate {
    let (collected, events): (u64, u64) = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = streams::rng(master_seed, "branch-collision", i);
            match force_phase1_error(scheme, &mut rng, zero) {
                None => (0u64, 0u64),
                Some((message, decoded)) => {
                    let partition = sample_equal_partition(
                        scheme.cfg.num_messages,
                        scheme.cfg.num_bins,
                        &mut rng,
                    )
                    .expect("divisibility validated");
                    (1, u64::from(partition.bin(message) == partition.bin(decoded)))
                }
            }
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    FactorEstimate::from_counts(events, collected, samples)
}
