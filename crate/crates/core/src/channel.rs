//! The AWGN forward channel, noise sources and the per-trial transcript.
//!
//! The channel law is `y[i] = x[i] + n[i]` with `n[i]` i.i.d. standard
//! normal. Feedback is modeled as abstract symbol indices with declared
//! alphabet sizes: the constraint in this setting is purely cardinality
//! based, so `log(alphabet)` nats per symbol is exact accounting without
//! any bit-packing machinery.
//!
//! Noise comes through the [`NoiseSource`] trait. Production runs use
//! [`GaussianNoise`], one dedicated stream per trial. [`ZeroNoise`] and
//! [`FixedNoise`] are stubs for tests that need silent channels or forced
//! decode errors; they are part of the test surface, not the production
//! channel.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::streams;

/// Per-slot additive noise.
pub trait NoiseSource {
    fn next_noise(&mut self) -> f64;
}

/// I.i.d. standard normal noise from a dedicated seeded stream.
pub struct GaussianNoise {
    rng: ChaCha12Rng,
    drawn: u64,
}

impl GaussianNoise {
    /// Stream dedicated to one trial: `(master seed, "noise", trial index)`.
    pub fn for_trial(master_seed: u64, trial: u64) -> Self {
        GaussianNoise { rng: streams::rng(master_seed, "noise", trial), drawn: 0 }
    }

    /// Number of variates drawn so far.
    pub fn position(&self) -> u64 {
        self.drawn
    }
}

impl NoiseSource for GaussianNoise {
    fn next_noise(&mut self) -> f64 {
        self.drawn += 1;
        self.rng.sample(StandardNormal)
    }
}

/// Silent channel stub.
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn next_noise(&mut self) -> f64 {
        0.0
    }
}

/// Plays back a fixed noise sequence, then zeros. Used by tests to force
/// specific decode outcomes.
pub struct FixedNoise {
    values: Vec<f64>,
    pos: usize,
}

impl FixedNoise {
    pub fn new(values: Vec<f64>) -> Self {
        FixedNoise { values, pos: 0 }
    }
}

impl NoiseSource for FixedNoise {
    fn next_noise(&mut self) -> f64 {
        let v = self.values.get(self.pos).copied().unwrap_or(0.0);
        self.pos += 1;
        v
    }
}

/// Transmits `x` over the AWGN channel: `y[i] = x[i] + n[i]`.
pub fn transmit(x: &[f64], noise: &mut dyn NoiseSource) -> Vec<f64> {
    x.iter().map(|v| v + noise.next_noise()).collect()
}

/// One feedback use: at `time` the receiver sent `symbol` out of an
/// alphabet of `alphabet` candidates (`log(alphabet)` nats).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub time: usize,
    pub symbol: u64,
    pub alphabet: u64,
}

/// Tagged protocol events recorded during a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event")]
pub enum PhaseEvent {
    /// A fresh-transmission decode finished. `round` counts transmissions
    /// within a chunk; `chunk` is 0 except in the block pipeline.
    InitialDecode { slot: usize, chunk: u32, decoded: u64, correct: bool },
    AlarmSent { slot: usize, amplitude: f64 },
    AlarmDetected { slot: usize, value: f64, threshold: f64 },
    /// A retransmission decode finished (only reached when an alarm was
    /// detected at the receiver).
    Retransmission { slot: usize, chunk: u32, round: u32, power: f64, decoded: u64, correct: bool },
    SubblockBoundary { index: u32, slot: usize },
}

impl PhaseEvent {
    pub fn slot(&self) -> usize {
        match *self {
            PhaseEvent::InitialDecode { slot, .. }
            | PhaseEvent::AlarmSent { slot, .. }
            | PhaseEvent::AlarmDetected { slot, .. }
            | PhaseEvent::Retransmission { slot, .. }
            | PhaseEvent::SubblockBoundary { slot, .. } => slot,
        }
    }
}

/// Complete record of one trial: channel inputs/outputs, feedback symbols,
/// the decoded message and tagged phase events. Immutable once sealed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub message: u64,
    pub inputs: Vec<f64>,
    pub outputs: Vec<f64>,
    pub feedback: Vec<FeedbackRecord>,
    pub decoded: u64,
    pub events: Vec<PhaseEvent>,
}

/// Average per-symbol power actually spent: `sum(x[i]^2) / n`.
pub fn power_usage(t: &Transcript) -> f64 {
    if t.inputs.is_empty() {
        return 0.0;
    }
    t.inputs.iter().map(|v| v * v).sum::<f64>() / t.inputs.len() as f64
}

/// Feedback spent by the trial: `(total nats, max nats in any single use)`.
pub fn feedback_usage(t: &Transcript) -> (f64, f64) {
    let mut total = 0.0;
    let mut max_per_use = 0.0f64;
    for rec in &t.feedback {
        let nats = (rec.alphabet as f64).ln();
        total += nats;
        max_per_use = max_per_use.max(nats);
    }
    (total, max_per_use)
}
