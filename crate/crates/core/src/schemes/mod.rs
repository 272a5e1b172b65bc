//! Executable feedback coding protocols.
//!
//! Every variant realizes the causal contract of the system model: the
//! channel input at time `i` is a function of the message and the feedback
//! received strictly before `i`, and the feedback symbol at time `i` is a
//! function of the channel outputs up to `i`. Encoders and receivers are
//! separate state machines stepped slot by slot, so the structure enforces
//! the contract; `receiver_trace` replays the receiver side alone from a
//! recorded output sequence, which is also how replay-style tests check
//! causality.
//!
//! Variants:
//! * `no_feedback` — plain random-coding baseline;
//! * `two_phase` — initial transmission, full decoded-message feedback,
//!   alarm slot and one boosted retransmission;
//! * `multi_phase` — the same alarm/retransmit logic iterated over an
//!   explicit ladder of boost powers;
//! * `compressed_fb` — two-phase with the feedback compressed to a bin
//!   index of an equal partition (adds the error mis-detection event);
//! * `block_markov` — per-channel-use feedback: the block is cut into `k`
//!   sub-blocks and each sub-block's payload is acknowledged (as base-q
//!   digits) and, if needed, retransmitted during the next sub-block.

mod block_markov;
mod no_feedback;
pub mod partition;
mod retx;

pub use block_markov::{smallest_feasible_k, BlockMarkovScheme};
pub use no_feedback::NoFeedbackScheme;
pub use partition::{expected_collision_probability, sample_equal_partition, PartitionMap};
pub use retx::RetxScheme;

use serde::{Deserialize, Serialize};

use crate::channel::{FeedbackRecord, NoiseSource, Transcript};
use crate::codec::Codebook;
use crate::error::Error;
use crate::{streams, Result};

/// Tolerance used by the feedback-budget checks (absorbs `ln` rounding).
pub const FEEDBACK_AUDIT_TOL: f64 = 1e-9;

/// Protocol selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    NoFeedback,
    TwoPhase,
    MultiPhase { order: u32 },
    CompressedFb,
    BlockMarkov,
}

impl Variant {
    pub fn token(&self) -> &'static str {
        match self {
            Variant::NoFeedback => "no_feedback",
            Variant::TwoPhase => "two_phase",
            Variant::MultiPhase { .. } => "multi_phase",
            Variant::CompressedFb => "compressed_fb",
            Variant::BlockMarkov => "block_markov",
        }
    }
}

/// Retransmission-trigger probability: fixed, or estimated by a pilot run.
///
/// The exact trigger probability is the error rate of the initial code,
/// which is unknowable in closed form; the pilot helper estimates it by
/// Monte Carlo and doubles it. Biasing upward lowers the boost power, which
/// keeps the power audit conservative without changing the mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaSpec {
    Fixed(f64),
    Pilot,
}

/// All parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub variant: Variant,
    /// Blocklength.
    pub n: usize,
    /// Message count; the forward rate is `log(num_messages) / n`.
    pub num_messages: usize,
    /// Average power constraint.
    pub power: f64,
    /// Feedback rate in nats per channel use (average-rate budget for all
    /// variants except `block_markov`, where it caps every single use).
    pub feedback_rate: f64,
    /// Phase-split fraction: the retransmission portion has `ceil(eps * n)`
    /// slots (per round; per sub-block for `block_markov`).
    pub epsilon: f64,
    pub gamma: GammaSpec,
    /// Per-round trigger probabilities for `multi_phase` (`order - 1`
    /// entries); boost powers compound as `P / (gammas[0] * .. * gammas[r])`.
    pub gammas: Vec<f64>,
    /// Feedback bin count for `compressed_fb`.
    pub num_bins: usize,
    /// Sub-block count for `block_markov`.
    pub k: usize,
    /// Seed for everything the code itself draws: codebooks, the default
    /// partition, pilot runs.
    pub seed: u64,
    /// Trial count of the pilot estimate behind `gamma = pilot`.
    pub pilot_trials: u64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            variant: Variant::NoFeedback,
            n: 1,
            num_messages: 2,
            power: 1.0,
            feedback_rate: 0.0,
            epsilon: 0.25,
            gamma: GammaSpec::Pilot,
            gammas: Vec::new(),
            num_bins: 1,
            k: 2,
            seed: 0,
            pilot_trials: 10_000,
        }
    }
}

impl SchemeConfig {
    /// Forward rate `log(num_messages) / n` in nats per use.
    pub fn rate(&self) -> f64 {
        (self.num_messages as f64).ln() / self.n as f64
    }

    /// Number of messages needed to carry rate `R` over blocklength `n`:
    /// `ceil(e^{n R})`.
    pub fn messages_for_rate(n: usize, rate: f64) -> usize {
        (n as f64 * rate).exp().ceil() as usize
    }

    /// Length of the retransmission portion, `ceil(eps * n)`.
    pub fn phase2_len(&self) -> usize {
        (self.epsilon * self.n as f64).ceil() as usize
    }

    /// Length of the initial portion for the two-phase split,
    /// `n - phase2 - 1` (one slot reserved for the alarm).
    pub fn phase1_len(&self) -> usize {
        self.n.saturating_sub(self.phase2_len() + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("blocklength must be positive"));
        }
        if self.num_messages == 0 {
            return Err(Error::invalid("message count must be positive"));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::invalid(format!("power must be positive and finite, got {}", self.power)));
        }
        if !(self.feedback_rate >= 0.0) || !self.feedback_rate.is_finite() {
            return Err(Error::invalid(format!(
                "feedback rate must be nonnegative and finite, got {}",
                self.feedback_rate
            )));
        }
        if let GammaSpec::Fixed(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(Error::invalid(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        match self.variant {
            Variant::NoFeedback => Ok(()),
            Variant::TwoPhase => self.validate_retx(1, false),
            Variant::CompressedFb => self.validate_retx(1, true),
            Variant::MultiPhase { order } => {
                if order < 2 {
                    return Err(Error::invalid(format!("multi_phase order must be at least 2, got {order}")));
                }
                if self.gammas.len() != (order - 1) as usize {
                    return Err(Error::invalid(format!(
                        "multi_phase order {order} needs {} gamma entries, got {}",
                        order - 1,
                        self.gammas.len()
                    )));
                }
                for &g in &self.gammas {
                    if !(g > 0.0) || !g.is_finite() {
                        return Err(Error::invalid(format!("gamma ladder entries must be positive, got {g}")));
                    }
                    if g >= 1.0 {
                        return Err(Error::invalid(format!(
                            "gamma ladder entry {g} >= 1 would make boost powers non-increasing"
                        )));
                    }
                }
                self.validate_retx((order - 1) as usize, false)
            }
            Variant::BlockMarkov => self.validate_block_markov(),
        }
    }

    fn validate_retx(&self, rounds: usize, compressed: bool) -> Result<()> {
        if self.num_messages < 2 {
            return Err(Error::invalid("retransmission schemes need at least two messages"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        let per_round = self.phase2_len();
        if per_round < 2 {
            return Err(Error::invalid(format!(
                "retransmission sub-block too short: ceil(eps*n) = {per_round} codeword slots, need at least 2"
            )));
        }
        let tail = rounds * (per_round + 1);
        if tail + 1 > self.n {
            return Err(Error::invalid(format!(
                "phase split infeasible: {rounds} round(s) of {} slots leave no initial portion of n = {}",
                per_round + 1,
                self.n
            )));
        }
        // feedback budget: each feedback round sends one symbol
        let per_symbol = if compressed { self.num_bins as f64 } else { self.num_messages as f64 };
        let total = rounds as f64 * per_symbol.ln();
        let budget = self.n as f64 * self.feedback_rate;
        if total > budget + FEEDBACK_AUDIT_TOL {
            return Err(Error::invalid(format!(
                "feedback budget infeasible: {rounds} symbol(s) of log({per_symbol}) = {total:.6} nats exceed n*R_FB = {budget:.6}"
            )));
        }
        if compressed {
            if self.num_bins == 0 || self.num_messages % self.num_bins != 0 {
                return Err(Error::invalid(format!(
                    "bin count {} must divide message count {}",
                    self.num_bins, self.num_messages
                )));
            }
        }
        Ok(())
    }

    fn validate_block_markov(&self) -> Result<()> {
        if self.num_messages < 2 {
            return Err(Error::invalid("block_markov needs at least two messages"));
        }
        if self.k < 2 {
            return Err(Error::invalid(format!("block_markov needs k >= 2 sub-blocks, got {}", self.k)));
        }
        if self.n % self.k != 0 {
            return Err(Error::invalid(format!(
                "sub-block count k = {} must divide the blocklength n = {}",
                self.k, self.n
            )));
        }
        let l = self.n / self.k;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        let l2 = (self.epsilon * l as f64).ceil() as usize;
        let l1 = l.saturating_sub(l2 + 1);
        if l2 < 1 || l1 < 1 {
            return Err(Error::invalid(format!(
                "sub-block split infeasible: l = {l} gives (l1, 1, l2) = ({l1}, 1, {l2})"
            )));
        }
        let q = self.feedback_rate.exp().floor();
        if q < 2.0 {
            return Err(Error::invalid(format!(
                "per-use feedback alphabet floor(e^R_FB) = {q} must be at least 2 (R_FB = {})",
                self.feedback_rate
            )));
        }
        let chunks = self.k - 1;
        let payload_bits = bits_for_messages(self.num_messages);
        if payload_bits < chunks as u32 {
            return Err(Error::invalid(format!(
                "payload of {payload_bits} bit(s) cannot be split into {chunks} nonempty chunks"
            )));
        }
        let max_chunk_bits = split_bits(payload_bits, chunks)[0];
        let chunk_nats = max_chunk_bits as f64 * std::f64::consts::LN_2;
        let capacity = l1 as f64 * q.ln();
        if chunk_nats > capacity + FEEDBACK_AUDIT_TOL {
            return Err(Error::invalid(format!(
                "feedback capacity infeasible: l1 * log(floor(e^R_FB)) = {capacity:.6} nats per sub-block \
                 is below the largest chunk payload log(2^{max_chunk_bits}) = {chunk_nats:.6} nats"
            )));
        }
        Ok(())
    }
}

/// Within-slot ordering of merged encoder/receiver events.
pub(crate) fn retx_event_order(e: &crate::channel::PhaseEvent) -> u8 {
    use crate::channel::PhaseEvent;
    match e {
        PhaseEvent::SubblockBoundary { .. } => 0,
        PhaseEvent::AlarmSent { .. } => 1,
        PhaseEvent::AlarmDetected { .. } => 2,
        PhaseEvent::InitialDecode { .. } => 3,
        PhaseEvent::Retransmission { .. } => 4,
    }
}

/// Bits needed to index `num_messages` messages.
pub(crate) fn bits_for_messages(num_messages: usize) -> u32 {
    let mut bits = 0u32;
    while (1usize << bits) < num_messages {
        bits += 1;
    }
    bits.max(1)
}

/// Splits `total` bits into `parts` chunks, earlier chunks taking the
/// ceiling.
pub(crate) fn split_bits(total: u32, parts: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(parts);
    let mut remaining = total;
    for i in 0..parts {
        let left = (parts - i) as u32;
        let take = remaining.div_ceil(left);
        out.push(take);
        remaining -= take;
    }
    out
}

/// Error-event taxonomy of a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", content = "chunk")]
pub enum EventClass {
    /// No anomalous branch: the protocol ran clean (recoveries included).
    Ok,
    /// Correct decode, but noise made the receiver see a failure alarm.
    FalseNegative,
    /// Wrong decode and the transmitted alarm was missed.
    FalsePositive,
    /// The boosted retransmission itself decoded wrongly.
    WrongDecoding,
    /// Wrong decode hidden by a feedback bin collision.
    ErrorMisdetection,
    /// Block pipeline: the given chunk (1-based) finished wrong.
    SubblockError(u32),
}

impl EventClass {
    pub fn token(&self) -> &'static str {
        match self {
            EventClass::Ok => "OK",
            EventClass::FalseNegative => "FALSE_NEGATIVE",
            EventClass::FalsePositive => "FALSE_POSITIVE",
            EventClass::WrongDecoding => "WRONG_DECODING",
            EventClass::ErrorMisdetection => "ERROR_MISDETECTION",
            EventClass::SubblockError(_) => "SUBBLOCK_ERROR",
        }
    }
}

/// Which branches a trial took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchFlags {
    pub initial_correct: bool,
    pub alarm_sent: bool,
    pub alarm_detected: bool,
    /// Correctness of the last retransmission decode, if one happened.
    pub retransmission_correct: Option<bool>,
    /// Compressed feedback: wrong initial decode hidden in the true bin.
    pub bin_collision: Option<bool>,
}

/// Result of one protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub transcript: Transcript,
    pub final_correct: bool,
    pub event_class: EventClass,
    pub flags: BranchFlags,
}

/// Receiver-side replay of a run: the feedback symbols it would emit and
/// the message it would decode, as a function of the channel outputs alone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReceiverTrace {
    pub feedback: Vec<FeedbackRecord>,
    pub decoded: u64,
}

/// A built, ready-to-run scheme.
pub enum Scheme {
    NoFeedback(NoFeedbackScheme),
    Retx(RetxScheme),
    BlockMarkov(BlockMarkovScheme),
}

impl Scheme {
    /// Builds codebooks and resolves the pilot gamma for `cfg`.
    pub fn build(cfg: &SchemeConfig) -> Result<Scheme> {
        cfg.validate()?;
        Ok(match cfg.variant {
            Variant::NoFeedback => Scheme::NoFeedback(NoFeedbackScheme::build(cfg)?),
            Variant::TwoPhase | Variant::MultiPhase { .. } | Variant::CompressedFb => {
                Scheme::Retx(RetxScheme::build(cfg)?)
            }
            Variant::BlockMarkov => Scheme::BlockMarkov(BlockMarkovScheme::build(cfg)?),
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        match self {
            Scheme::NoFeedback(s) => &s.cfg,
            Scheme::Retx(s) => &s.cfg,
            Scheme::BlockMarkov(s) => &s.cfg,
        }
    }

    /// The resolved retransmission-trigger probability, if the variant has
    /// one.
    pub fn resolved_gamma(&self) -> Option<f64> {
        match self {
            Scheme::NoFeedback(_) => None,
            Scheme::Retx(s) => Some(s.gammas[0]),
            Scheme::BlockMarkov(s) => Some(s.gamma),
        }
    }

    /// Runs one trial with an explicit message and noise source. The
    /// partition argument overrides the seed-derived default for
    /// `compressed_fb` and is ignored elsewhere.
    pub fn run(
        &self,
        message: usize,
        partition: Option<&PartitionMap>,
        noise: &mut dyn NoiseSource,
    ) -> Result<TrialOutcome> {
        match self {
            Scheme::NoFeedback(s) => s.run(message, noise),
            Scheme::Retx(s) => s.run(message, partition, noise),
            Scheme::BlockMarkov(s) => s.run(message, noise),
        }
    }

    /// Runs one harness trial: uniform message, Gaussian noise and (for
    /// compressed feedback) a fresh partition, all from streams derived
    /// from `(master_seed, trial)`.
    pub fn run_trial(&self, master_seed: u64, trial: u64) -> Result<TrialOutcome> {
        self.run_trial_with_artifacts(master_seed, trial).map(|(outcome, _)| outcome)
    }

    /// As [`Scheme::run_trial`], also returning the partition the trial
    /// drew (needed to replay compressed-feedback transcripts).
    pub fn run_trial_with_artifacts(
        &self,
        master_seed: u64,
        trial: u64,
    ) -> Result<(TrialOutcome, Option<PartitionMap>)> {
        use rand::Rng;
        let cfg = self.config();
        let mut message_rng = streams::rng(master_seed, "message", trial);
        let message = message_rng.gen_range(0..cfg.num_messages);
        let mut noise = crate::channel::GaussianNoise::for_trial(master_seed, trial);
        let partition = if matches!(cfg.variant, Variant::CompressedFb) {
            let mut rng = streams::rng(master_seed, "partition", trial);
            Some(sample_equal_partition(cfg.num_messages, cfg.num_bins, &mut rng)?)
        } else {
            None
        };
        let outcome = self.run(message, partition.as_ref(), &mut noise)?;
        Ok((outcome, partition))
    }

    /// Replays the receiver side over a recorded output sequence.
    pub fn receiver_trace(&self, outputs: &[f64], partition: Option<&PartitionMap>) -> Result<ReceiverTrace> {
        match self {
            Scheme::NoFeedback(s) => s.receiver_trace(outputs),
            Scheme::Retx(s) => s.receiver_trace(outputs, partition),
            Scheme::BlockMarkov(s) => s.receiver_trace(outputs),
        }
    }
}

/// Runs the plain random-coding baseline with an explicit codebook.
pub fn run_no_feedback(
    cfg: &SchemeConfig,
    codebook: &Codebook,
    message: usize,
    noise: &mut dyn NoiseSource,
) -> Result<TrialOutcome> {
    if cfg.variant != Variant::NoFeedback {
        return Err(Error::invalid("config variant is not no_feedback"));
    }
    cfg.validate()?;
    NoFeedbackScheme::with_codebook(cfg.clone(), codebook.clone())?.run(message, noise)
}

/// Runs the two-phase alarm/retransmission protocol.
pub fn run_two_phase(cfg: &SchemeConfig, message: usize, noise: &mut dyn NoiseSource) -> Result<TrialOutcome> {
    if cfg.variant != Variant::TwoPhase {
        return Err(Error::invalid("config variant is not two_phase"));
    }
    match Scheme::build(cfg)? {
        Scheme::Retx(s) => s.run(message, None, noise),
        _ => unreachable!(),
    }
}

/// Runs the iterated alarm/retransmission protocol with its boost ladder.
pub fn run_multi_phase(cfg: &SchemeConfig, message: usize, noise: &mut dyn NoiseSource) -> Result<TrialOutcome> {
    if !matches!(cfg.variant, Variant::MultiPhase { .. }) {
        return Err(Error::invalid("config variant is not multi_phase"));
    }
    match Scheme::build(cfg)? {
        Scheme::Retx(s) => s.run(message, None, noise),
        _ => unreachable!(),
    }
}

/// Runs the compressed-feedback protocol with an explicit partition.
pub fn run_compressed_feedback(
    cfg: &SchemeConfig,
    partition: &PartitionMap,
    message: usize,
    noise: &mut dyn NoiseSource,
) -> Result<TrialOutcome> {
    if cfg.variant != Variant::CompressedFb {
        return Err(Error::invalid("config variant is not compressed_fb"));
    }
    match Scheme::build(cfg)? {
        Scheme::Retx(s) => s.run(message, Some(partition), noise),
        _ => unreachable!(),
    }
}

/// Runs the per-channel-use block pipeline.
pub fn run_block_markov(cfg: &SchemeConfig, message: usize, noise: &mut dyn NoiseSource) -> Result<TrialOutcome> {
    if cfg.variant != Variant::BlockMarkov {
        return Err(Error::invalid("config variant is not block_markov"));
    }
    match Scheme::build(cfg)? {
        Scheme::BlockMarkov(s) => s.run(message, noise),
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// Flat key/value config format
// ---------------------------------------------------------------------------

/// Parses the flat `key = value` config format. `#` starts a comment.
pub fn parse_kv_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1)));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

impl SchemeConfig {
    /// Builds a config from parsed key/value pairs. Unknown keys and
    /// duplicate keys are rejected; `num_messages` and `rate` are mutually
    /// exclusive ways to size the message set.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<SchemeConfig> {
        let mut cfg = SchemeConfig::default();
        let mut seen = std::collections::HashSet::new();
        let mut have_variant = false;
        let mut rate: Option<f64> = None;
        let mut messages: Option<usize> = None;
        let mut order: Option<u32> = None;
        for (key, value) in pairs {
            if !seen.insert(key.clone()) {
                return Err(Error::config(format!("duplicate key `{key}`")));
            }
            match key.as_str() {
                "variant" => {
                    have_variant = true;
                    cfg.variant = match value.as_str() {
                        "no_feedback" => Variant::NoFeedback,
                        "two_phase" => Variant::TwoPhase,
                        "multi_phase" => Variant::MultiPhase { order: 2 },
                        "compressed_fb" => Variant::CompressedFb,
                        "block_markov" => Variant::BlockMarkov,
                        other => return Err(Error::config(format!("unknown variant `{other}`"))),
                    };
                }
                "n" => cfg.n = parse_num(key, value)?,
                "num_messages" => messages = Some(parse_num(key, value)?),
                "rate" => rate = Some(parse_float(key, value)?),
                "power" => cfg.power = parse_float(key, value)?,
                "r_fb" => cfg.feedback_rate = parse_float(key, value)?,
                "epsilon" => cfg.epsilon = parse_float(key, value)?,
                "gamma" => {
                    cfg.gamma = if value == "pilot" {
                        GammaSpec::Pilot
                    } else {
                        GammaSpec::Fixed(parse_float(key, value)?)
                    };
                }
                "gammas" => {
                    cfg.gammas = value
                        .split(',')
                        .map(|v| parse_float("gammas", v.trim()))
                        .collect::<Result<Vec<f64>>>()?;
                }
                "order" => order = Some(parse_num::<u32>(key, value)?),
                "num_bins" => cfg.num_bins = parse_num(key, value)?,
                "k" => cfg.k = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "pilot_trials" => cfg.pilot_trials = parse_num(key, value)?,
                other => return Err(Error::config(format!("unknown key `{other}`"))),
            }
        }
        if !have_variant {
            return Err(Error::config("missing required key `variant`"));
        }
        match (messages, rate) {
            (Some(_), Some(_)) => {
                return Err(Error::config("`num_messages` and `rate` are mutually exclusive"))
            }
            (Some(m), None) => cfg.num_messages = m,
            (None, Some(r)) => {
                if cfg.n == 0 {
                    return Err(Error::config("`rate` needs `n` to be set"));
                }
                cfg.num_messages = SchemeConfig::messages_for_rate(cfg.n, r);
            }
            (None, None) => return Err(Error::config("one of `num_messages` or `rate` is required")),
        }
        if let Some(order) = order {
            match cfg.variant {
                Variant::MultiPhase { .. } => cfg.variant = Variant::MultiPhase { order },
                _ => return Err(Error::config("`order` only applies to variant multi_phase")),
            }
        } else if matches!(cfg.variant, Variant::MultiPhase { .. }) {
            return Err(Error::config("variant multi_phase requires `order`"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_kv_text(text: &str) -> Result<SchemeConfig> {
        SchemeConfig::from_pairs(&parse_kv_text(text)?)
    }

    /// Emits the config in the flat key/value format; parsing the result
    /// reproduces the config exactly.
    pub fn to_kv_text(&self) -> String {
        let mut out = String::new();
        let mut push = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        push("variant", self.variant.token().to_string());
        push("n", self.n.to_string());
        push("num_messages", self.num_messages.to_string());
        push("power", format!("{}", self.power));
        push("r_fb", format!("{}", self.feedback_rate));
        push("seed", self.seed.to_string());
        match self.variant {
            Variant::NoFeedback => {}
            Variant::TwoPhase => {
                push("epsilon", format!("{}", self.epsilon));
                self.push_gamma(&mut push);
            }
            Variant::CompressedFb => {
                push("epsilon", format!("{}", self.epsilon));
                self.push_gamma(&mut push);
                push("num_bins", self.num_bins.to_string());
            }
            Variant::MultiPhase { order } => {
                push("epsilon", format!("{}", self.epsilon));
                push("order", order.to_string());
                let ladder: Vec<String> = self.gammas.iter().map(|g| format!("{g}")).collect();
                push("gammas", ladder.join(","));
            }
            Variant::BlockMarkov => {
                push("epsilon", format!("{}", self.epsilon));
                self.push_gamma(&mut push);
                push("k", self.k.to_string());
            }
        }
        if matches!(self.gamma, GammaSpec::Pilot)
            && !matches!(self.variant, Variant::NoFeedback | Variant::MultiPhase { .. })
        {
            out.push_str(&format!("pilot_trials = {}\n", self.pilot_trials));
        }
        out
    }

    fn push_gamma(&self, push: &mut impl FnMut(&str, String)) {
        match self.gamma {
            GammaSpec::Fixed(g) => push("gamma", format!("{g}")),
            GammaSpec::Pilot => push("gamma", "pilot".to_string()),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::config(format!("key `{key}`: not a valid integer: `{value}`")))
}

fn parse_float(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::config(format!("key `{key}`: not a valid number: `{value}`")))
}

/// Resolves a `GammaSpec` by pilot Monte Carlo on the given initial
/// codebook: twice the estimated decode error rate (at least one error is
/// assumed so the estimate never hits zero), capped at 1/2.
pub(crate) fn resolve_gamma(
    spec: GammaSpec,
    codebook: &Codebook,
    seed: u64,
    pilot_trials: u64,
) -> Result<f64> {
    match spec {
        GammaSpec::Fixed(g) => Ok(g),
        GammaSpec::Pilot => {
            use rand::Rng;
            if pilot_trials == 0 {
                return Err(Error::invalid("pilot gamma needs pilot_trials >= 1"));
            }
            let mut errors = 0u64;
            for trial in 0..pilot_trials {
                let mut rng = streams::rng(seed, "pilot-message", trial);
                let message = rng.gen_range(0..codebook.num_messages);
                let mut noise = crate::channel::GaussianNoise::for_trial(
                    streams::sub_seed(seed, "pilot-noise", 0),
                    trial,
                );
                let y = crate::channel::transmit(codebook.codeword(message), &mut noise);
                if crate::codec::ml_decode(codebook, &y)? != message {
                    errors += 1;
                }
            }
            let rate = errors.max(1) as f64 / pilot_trials as f64;
            Ok((2.0 * rate).min(0.5))
        }
    }
}
