//! Plain random-coding baseline: one codeword, one ML decode, no feedback.

use crate::channel::{transmit, NoiseSource, PhaseEvent, Transcript};
use crate::codec::{generate_codebook, ml_decode, Codebook};
use crate::error::Error;
use crate::schemes::{BranchFlags, EventClass, ReceiverTrace, SchemeConfig, TrialOutcome};
use crate::{streams, Result};

pub struct NoFeedbackScheme {
    pub cfg: SchemeConfig,
    pub codebook: Codebook,
}

impl NoFeedbackScheme {
    pub fn build(cfg: &SchemeConfig) -> Result<Self> {
        let codebook = generate_codebook(
            cfg.num_messages,
            cfg.n,
            cfg.power,
            streams::sub_seed(cfg.seed, "codebook", 1),
        )?;
        Ok(NoFeedbackScheme { cfg: cfg.clone(), codebook })
    }

    pub fn with_codebook(cfg: SchemeConfig, codebook: Codebook) -> Result<Self> {
        if codebook.blocklength != cfg.n || codebook.num_messages != cfg.num_messages {
            return Err(Error::ShapeMismatch(format!(
                "codebook is {} messages x {} slots, config wants {} x {}",
                codebook.num_messages, codebook.blocklength, cfg.num_messages, cfg.n
            )));
        }
        Ok(NoFeedbackScheme { cfg, codebook })
    }

    pub fn run(&self, message: usize, noise: &mut dyn NoiseSource) -> Result<TrialOutcome> {
        if message >= self.cfg.num_messages {
            return Err(Error::invalid(format!(
                "message {message} out of range for {} messages",
                self.cfg.num_messages
            )));
        }
        let inputs = self.codebook.codeword(message).to_vec();
        let outputs = transmit(&inputs, noise);
        let decoded = ml_decode(&self.codebook, &outputs)?;
        let correct = decoded == message;
        let transcript = Transcript {
            message: message as u64,
            inputs,
            outputs,
            feedback: Vec::new(),
            decoded: decoded as u64,
            events: vec![PhaseEvent::InitialDecode {
                slot: self.cfg.n - 1,
                chunk: 0,
                decoded: decoded as u64,
                correct,
            }],
        };
        Ok(TrialOutcome {
            transcript,
            final_correct: correct,
            event_class: if correct { EventClass::Ok } else { EventClass::WrongDecoding },
            flags: BranchFlags {
                initial_correct: correct,
                alarm_sent: false,
                alarm_detected: false,
                retransmission_correct: None,
                bin_collision: None,
            },
        })
    }

    pub fn receiver_trace(&self, outputs: &[f64]) -> Result<ReceiverTrace> {
        let decoded = ml_decode(&self.codebook, outputs)?;
        Ok(ReceiverTrace { feedback: Vec::new(), decoded: decoded as u64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ZeroNoise;
    use crate::schemes::Variant;

    fn cfg() -> SchemeConfig {
        SchemeConfig {
            variant: Variant::NoFeedback,
            n: 8,
            num_messages: 4,
            power: 1.0,
            seed: 21,
            ..SchemeConfig::default()
        }
    }

    #[test]
    fn zero_noise_is_always_ok() {
        let scheme = NoFeedbackScheme::build(&cfg()).unwrap();
        for m in 0..4 {
            let out = scheme.run(m, &mut ZeroNoise).unwrap();
            assert!(out.final_correct);
            assert_eq!(out.event_class, EventClass::Ok);
            assert!(out.transcript.feedback.is_empty());
        }
    }

    #[test]
    fn power_is_exactly_p_on_every_trial() {
        let scheme = NoFeedbackScheme::build(&cfg()).unwrap();
        for trial in 0..20 {
            let mut noise = crate::channel::GaussianNoise::for_trial(5, trial);
            let out = scheme.run((trial % 4) as usize, &mut noise).unwrap();
            let p = crate::channel::power_usage(&out.transcript);
            assert!((p - 1.0).abs() < 1e-9, "power {p}");
        }
    }

    #[test]
    fn codebook_shape_mismatch_is_rejected() {
        let other = generate_codebook(4, 7, 1.0, 1).unwrap();
        assert!(NoFeedbackScheme::with_codebook(cfg(), other).is_err());
    }
}
