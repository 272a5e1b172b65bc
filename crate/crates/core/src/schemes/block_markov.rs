//! Per-channel-use feedback: the block-Markov retransmission pipeline.
//!
//! The block is cut into `k` sub-blocks of length `l = n/k`, each split
//! into `(l1, 1, l2)`. Sub-block `j < k` carries a fresh payload chunk in
//! its first portion. The receiver's decode of chunk `j` travels back as
//! base-`q` digits (`q = floor(e^{R_FB})`, most significant first, padded
//! to `l1` uses) during the first portion of sub-block `j+1`, so no single
//! feedback use ever exceeds `R_FB` nats. Once the digits are in, the
//! transmitter knows whether chunk `j` survived; if not it fires the alarm
//! slot of sub-block `j+1` and retransmits the chunk at boosted power in
//! the last portion. The final message is the concatenation of the chunk
//! decisions.
//!
//! The payload split is bit-level: `ceil(log2(M))` bits are divided over
//! the `k-1` chunks with earlier chunks taking the ceiling, and chunk `j`
//! is the corresponding bit-slice of the message index (most significant
//! chunk first).

use crate::channel::{FeedbackRecord, NoiseSource, PhaseEvent, Transcript};
use crate::codec::{generate_codebook, ml_decode, Codebook};
use crate::error::Error;
use crate::schemes::{
    bits_for_messages, resolve_gamma, split_bits, BranchFlags, EventClass, ReceiverTrace,
    SchemeConfig, TrialOutcome,
};
use crate::{streams, Result};

pub struct BlockMarkovScheme {
    pub cfg: SchemeConfig,
    /// Sub-block length `n / k`.
    pub l: usize,
    pub l1: usize,
    pub l2: usize,
    /// Per-use feedback alphabet, `floor(e^{R_FB})`.
    pub q: u64,
    /// Bits carried by each chunk (ceiling-first).
    pub chunk_bits: Vec<u32>,
    /// Fresh-transmission codebook per chunk (`2^bits` messages, `l1` slots).
    pub initial: Vec<Codebook>,
    /// Boosted retransmission codebook per chunk (`l2` slots).
    pub retx: Vec<Codebook>,
    pub gamma: f64,
    pub alarm_amp: f64,
    pub threshold: f64,
}

impl BlockMarkovScheme {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.n / cfg.k;
        let l2 = (cfg.epsilon * l as f64).ceil() as usize;
        let l1 = l - l2 - 1;
        let q = cfg.feedback_rate.exp().floor() as u64;
        let chunks = cfg.k - 1;
        let chunk_bits = split_bits(bits_for_messages(cfg.num_messages), chunks);

        let mut initial = Vec::with_capacity(chunks);
        for (j, &bits) in chunk_bits.iter().enumerate() {
            initial.push(generate_codebook(
                1usize << bits,
                l1,
                cfg.power,
                streams::sub_seed(cfg.seed, "codebook", 1 + j as u64),
            )?);
        }
        let gamma = resolve_gamma(cfg.gamma, &initial[0], cfg.seed, cfg.pilot_trials)?;
        let boost = cfg.power / gamma;
        let mut retx = Vec::with_capacity(chunks);
        for (j, &bits) in chunk_bits.iter().enumerate() {
            retx.push(generate_codebook(
                1usize << bits,
                l2,
                boost,
                streams::sub_seed(cfg.seed, "codebook", 1001 + j as u64),
            )?);
        }
        Ok(BlockMarkovScheme {
            cfg: cfg.clone(),
            l,
            l1,
            l2,
            q,
            chunk_bits,
            initial,
            retx,
            gamma,
            alarm_amp: boost.sqrt(),
            threshold: boost.sqrt() / 2.0,
        })
    }

    pub fn chunks(&self) -> usize {
        self.cfg.k - 1
    }

    /// Splits a message index into chunk values, most significant first.
    pub fn split_message(&self, message: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.chunks());
        let total: u32 = self.chunk_bits.iter().sum();
        let mut used = 0u32;
        for &bits in &self.chunk_bits {
            used += bits;
            let shift = total - used;
            out.push((message >> shift) & ((1usize << bits) - 1));
        }
        out
    }

    /// Reassembles chunk values into a message index.
    pub fn join_chunks(&self, chunks: &[usize]) -> usize {
        let mut m = 0usize;
        for (&bits, &value) in self.chunk_bits.iter().zip(chunks) {
            m = (m << bits) | value;
        }
        m
    }

    /// Base-`q` digits of `value`, most significant first, padded to `len`.
    fn digits(&self, value: usize, len: usize) -> Vec<u64> {
        let mut out = vec![0u64; len];
        let mut v = value as u64;
        for slot in (0..len).rev() {
            out[slot] = v % self.q;
            v /= self.q;
        }
        out
    }

    fn digits_to_value(&self, digits: &[u64]) -> usize {
        let mut v = 0u64;
        for &d in digits {
            v = v * self.q + d;
        }
        v as usize
    }

    pub fn run(&self, message: usize, noise: &mut dyn NoiseSource) -> Result<TrialOutcome> {
        if message >= self.cfg.num_messages {
            return Err(Error::invalid(format!(
                "message {message} out of range for {} messages",
                self.cfg.num_messages
            )));
        }
        let chunk_values = self.split_message(message);
        let mut rx = BmReceiver::new(self);
        let mut tx = BmEncoder::new(self, &chunk_values);
        let mut inputs = Vec::with_capacity(self.cfg.n);
        let mut outputs = Vec::with_capacity(self.cfg.n);
        for t in 0..self.cfg.n {
            let x = tx.input(t);
            let y = x + noise.next_noise();
            inputs.push(x);
            outputs.push(y);
            if let Some(rec) = rx.observe(t, y) {
                tx.receive_feedback(rec);
            }
        }
        let final_chunks = rx.final_chunks();
        let decoded = self.join_chunks(&final_chunks);
        let final_correct = decoded == message;

        let mut first_bad_chunk = None;
        for (j, (&got, &want)) in final_chunks.iter().zip(&chunk_values).enumerate() {
            if got != want {
                first_bad_chunk = Some((j + 1) as u32);
                break;
            }
        }
        let event_class = match first_bad_chunk {
            None => EventClass::Ok,
            Some(j) => EventClass::SubblockError(j),
        };

        let initial_correct = rx.initial_decodes.iter().zip(&chunk_values).all(|(got, want)| got == want);
        let any_retx = rx.retx_decodes.iter().any(|d| d.is_some());
        let retransmission_correct = if any_retx {
            Some(
                rx.retx_decodes
                    .iter()
                    .zip(&chunk_values)
                    .all(|(d, want)| d.map_or(true, |got| got == *want)),
            )
        } else {
            None
        };

        let mut events = rx.events.clone();
        events.extend(tx.events.iter().copied());
        for e in &mut events {
            match e {
                PhaseEvent::InitialDecode { chunk, decoded, correct, .. }
                | PhaseEvent::Retransmission { chunk, decoded, correct, .. } => {
                    *correct = *decoded == chunk_values[(*chunk - 1) as usize] as u64;
                }
                _ => {}
            }
        }
        events.sort_by_key(|e| (e.slot(), super::retx_event_order(e)));

        let transcript = Transcript {
            message: message as u64,
            inputs,
            outputs,
            feedback: rx.feedback.clone(),
            decoded: decoded as u64,
            events,
        };
        Ok(TrialOutcome {
            transcript,
            final_correct,
            event_class,
            flags: BranchFlags {
                initial_correct,
                alarm_sent: tx.alarm_sent.iter().any(|&b| b),
                alarm_detected: rx.alarm_detected.iter().any(|&b| b),
                retransmission_correct,
                bin_collision: None,
            },
        })
    }

    pub fn receiver_trace(&self, outputs: &[f64]) -> Result<ReceiverTrace> {
        if outputs.len() != self.cfg.n {
            return Err(Error::ShapeMismatch(format!(
                "output sequence has {} slots, config wants {}",
                outputs.len(),
                self.cfg.n
            )));
        }
        let mut rx = BmReceiver::new(self);
        for (t, &y) in outputs.iter().enumerate() {
            rx.observe(t, y);
        }
        let decoded = self.join_chunks(&rx.final_chunks()) as u64;
        Ok(ReceiverTrace { feedback: rx.feedback, decoded })
    }
}

/// Receiver: decodes each chunk, feeds its digits back in the next
/// sub-block, thresholds alarm slots and applies retransmission decodes.
struct BmReceiver<'a> {
    scheme: &'a BlockMarkovScheme,
    buf: Vec<f64>,
    initial_decodes: Vec<usize>,
    retx_decodes: Vec<Option<usize>>,
    alarm_detected: Vec<bool>,
    feedback: Vec<FeedbackRecord>,
    events: Vec<PhaseEvent>,
    /// Digits queued for emission, slot-indexed.
    pending_digits: Vec<Option<(u64, usize)>>, // (digit, owning chunk)
}

impl<'a> BmReceiver<'a> {
    fn new(scheme: &'a BlockMarkovScheme) -> Self {
        BmReceiver {
            scheme,
            buf: Vec::with_capacity(scheme.cfg.n),
            initial_decodes: vec![0; scheme.chunks()],
            retx_decodes: vec![None; scheme.chunks()],
            alarm_detected: vec![false; scheme.chunks()],
            feedback: Vec::new(),
            events: Vec::new(),
            pending_digits: vec![None; scheme.cfg.n],
        }
    }

    fn final_chunks(&self) -> Vec<usize> {
        self.initial_decodes
            .iter()
            .zip(&self.retx_decodes)
            .map(|(&initial, retx)| retx.unwrap_or(initial))
            .collect()
    }

    fn observe(&mut self, t: usize, y: f64) -> Option<FeedbackRecord> {
        let s = self.scheme;
        self.buf.push(y);
        let sub = t / s.l;
        let offset = t % s.l;
        if offset == 0 {
            self.events.push(PhaseEvent::SubblockBoundary { index: sub as u32, slot: t });
        }

        // end of a payload portion: decode chunk `sub` and queue its digits
        // across the first portion of the next sub-block
        if offset == s.l1 - 1 && sub < s.chunks() {
            let start = sub * s.l;
            let est = ml_decode(&s.initial[sub], &self.buf[start..=t]).expect("shape checked at build");
            self.initial_decodes[sub] = est;
            self.events.push(PhaseEvent::InitialDecode {
                slot: t,
                chunk: (sub + 1) as u32,
                decoded: est as u64,
                correct: false, // filled in by run()
            });
            let digits = s.digits(est, s.l1);
            let next_start = (sub + 1) * s.l;
            for (i, d) in digits.into_iter().enumerate() {
                self.pending_digits[next_start + i] = Some((d, sub));
            }
        }

        // alarm slot of sub-block `sub` guards chunk `sub - 1`
        if offset == s.l1 && sub >= 1 && sub <= s.chunks() {
            let chunk = sub - 1;
            if y >= s.threshold {
                self.alarm_detected[chunk] = true;
                self.events.push(PhaseEvent::AlarmDetected { slot: t, value: y, threshold: s.threshold });
            }
        }

        // end of a retransmission portion: re-decode chunk `sub - 1`
        if offset == s.l - 1 && sub >= 1 && sub <= s.chunks() {
            let chunk = sub - 1;
            if self.alarm_detected[chunk] {
                let start = sub * s.l + s.l1 + 1;
                let est = ml_decode(&s.retx[chunk], &self.buf[start..=t]).expect("shape checked at build");
                self.retx_decodes[chunk] = Some(est);
                self.events.push(PhaseEvent::Retransmission {
                    slot: t,
                    chunk: (chunk + 1) as u32,
                    round: 1,
                    power: s.retx[chunk].power,
                    decoded: est as u64,
                    correct: false, // filled in by run()
                });
            }
        }

        // emit any digit scheduled for this slot
        if let Some((digit, _chunk)) = self.pending_digits[t] {
            let rec = FeedbackRecord { time: t, symbol: digit, alphabet: s.q };
            self.feedback.push(rec);
            return Some(rec);
        }
        None
    }
}

/// Encoder: sends fresh chunks, reassembles fed-back digits, fires alarms
/// and retransmits failed chunks one sub-block later.
struct BmEncoder<'a> {
    scheme: &'a BlockMarkovScheme,
    chunk_values: Vec<usize>,
    digit_buf: Vec<u64>,
    /// Chunk whose digits are currently arriving.
    arriving_chunk: Option<usize>,
    resend: Vec<bool>,
    alarm_sent: Vec<bool>,
    events: Vec<PhaseEvent>,
}

impl<'a> BmEncoder<'a> {
    fn new(scheme: &'a BlockMarkovScheme, chunk_values: &[usize]) -> Self {
        BmEncoder {
            scheme,
            chunk_values: chunk_values.to_vec(),
            digit_buf: Vec::new(),
            arriving_chunk: None,
            resend: vec![false; scheme.chunks()],
            alarm_sent: vec![false; scheme.chunks()],
            events: Vec::new(),
        }
    }

    fn receive_feedback(&mut self, rec: FeedbackRecord) {
        let s = self.scheme;
        let sub = rec.time / s.l;
        debug_assert!(sub >= 1);
        let chunk = sub - 1;
        if self.arriving_chunk != Some(chunk) {
            self.arriving_chunk = Some(chunk);
            self.digit_buf.clear();
        }
        self.digit_buf.push(rec.symbol);
        if self.digit_buf.len() == s.l1 {
            let fed_back = s.digits_to_value(&self.digit_buf);
            self.resend[chunk] = fed_back != self.chunk_values[chunk];
        }
    }

    fn input(&mut self, t: usize) -> f64 {
        let s = self.scheme;
        let sub = t / s.l;
        let offset = t % s.l;
        if offset < s.l1 {
            // fresh payload in sub-blocks 0..k-1
            if sub < s.chunks() {
                return s.initial[sub].codeword(self.chunk_values[sub])[offset];
            }
            return 0.0;
        }
        // alarm + retransmission portions serve chunk `sub - 1`
        if sub == 0 {
            return 0.0;
        }
        let chunk = sub - 1;
        if chunk >= s.chunks() || !self.resend[chunk] {
            return 0.0;
        }
        if offset == s.l1 {
            self.alarm_sent[chunk] = true;
            self.events.push(PhaseEvent::AlarmSent { slot: t, amplitude: s.alarm_amp });
            return s.alarm_amp;
        }
        s.retx[chunk].codeword(self.chunk_values[chunk])[offset - s.l1 - 1]
    }
}

/// Smallest sub-block count admissible for a margin `delta'`:
/// the least integer `k` with `delta'/2 <= 1/k < delta'`.
pub fn smallest_feasible_k(delta_prime: f64) -> Result<usize> {
    if !(delta_prime > 0.0 && delta_prime < 1.0) {
        return Err(Error::invalid(format!("delta' must lie in (0, 1), got {delta_prime}")));
    }
    let mut k = (1.0 / delta_prime).floor() as usize + 1;
    while 1.0 / (k as f64) >= delta_prime {
        k += 1;
    }
    if 1.0 / (k as f64) < delta_prime / 2.0 {
        return Err(Error::NumericFailure { lo: k as f64, hi: k as f64 });
    }
    Ok(k)
}
