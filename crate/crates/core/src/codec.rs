//! Random Gaussian codebooks with exact maximum-likelihood (nearest
//! neighbor) decoding.
//!
//! Codewords are drawn i.i.d. standard normal per symbol and then rescaled
//! onto the power sphere, so every codeword has squared norm exactly
//! `blocklength * power`. Normalizing to the sphere (instead of keeping the
//! raw i.i.d. draw) makes per-trial power deterministic, which keeps the
//! power audits free of one variance source. Decoding is an exhaustive
//! nearest-neighbor search; at the message counts used here that is cheap
//! and exactly optimal for AWGN.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::stats;
use crate::Result;

/// A finite set of real codewords on the power sphere, indexable by message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub num_messages: usize,
    pub blocklength: usize,
    /// Target per-symbol power; every codeword satisfies
    /// `||x||^2 = blocklength * power` up to rounding.
    pub power: f64,
    pub codewords: Vec<Vec<f64>>,
    /// Reproducibility token the codebook was generated from.
    pub seed: u64,
}

/// Draws a codebook of `num_messages` codewords of length `blocklength` at
/// per-symbol power `power`, deterministically from `seed`.
pub fn generate_codebook(
    num_messages: usize,
    blocklength: usize,
    power: f64,
    seed: u64,
) -> Result<Codebook> {
    if num_messages == 0 {
        return Err(Error::invalid("codebook needs at least one message"));
    }
    if blocklength == 0 {
        return Err(Error::invalid("codebook blocklength must be positive"));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::invalid(format!("codebook power must be positive and finite, got {power}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let target = blocklength as f64 * power;
    let mut codewords = Vec::with_capacity(num_messages);
    for _ in 0..num_messages {
        // Redraw on the (measure-zero) all-zero vector so the rescale below
        // is always well defined.
        loop {
            let mut w: Vec<f64> = (0..blocklength).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let norm_sq: f64 = w.iter().map(|v| v * v).sum();
            if norm_sq > 0.0 {
                let scale = (target / norm_sq).sqrt();
                for v in &mut w {
                    *v *= scale;
                }
                codewords.push(w);
                break;
            }
        }
    }
    Ok(Codebook { num_messages, blocklength, power, codewords, seed })
}

impl Codebook {
    pub fn codeword(&self, message: usize) -> &[f64] {
        &self.codewords[message]
    }

    /// Rate `log(num_messages) / blocklength` in nats per use.
    pub fn rate(&self) -> f64 {
        (self.num_messages as f64).ln() / self.blocklength as f64
    }

    /// Debug dump, one row per message: index followed by the symbols.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (m, word) in self.codewords.iter().enumerate() {
            write!(w, "{m}")?;
            for v in word {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Nearest-neighbor decode: the message minimizing `||y - x(m)||^2`.
/// Ties break toward the smallest message index.
pub fn ml_decode(codebook: &Codebook, y: &[f64]) -> Result<usize> {
    if y.len() != codebook.blocklength {
        return Err(Error::ShapeMismatch(format!(
            "received vector has length {}, codebook blocklength is {}",
            y.len(),
            codebook.blocklength
        )));
    }
    let mut best = 0usize;
    let mut best_dist = f64::INFINITY;
    for (m, word) in codebook.codewords.iter().enumerate() {
        let dist: f64 = y.iter().zip(word).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best_dist {
            best = m;
            best_dist = dist;
        }
    }
    Ok(best)
}

/// Union bound on the worst per-message ML error probability under
/// unit-variance noise: `max_m sum_{m' != m} Q(||x(m) - x(m')|| / 2)`.
pub fn pairwise_union_bound(codebook: &Codebook) -> Result<f64> {
    if codebook.num_messages < 2 {
        return Err(Error::invalid("union bound needs at least two messages"));
    }
    let mut worst = 0.0f64;
    for m in 0..codebook.num_messages {
        let mut total = 0.0;
        for m2 in 0..codebook.num_messages {
            if m2 == m {
                continue;
            }
            let dist_sq: f64 = codebook.codewords[m]
                .iter()
                .zip(&codebook.codewords[m2])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            total += stats::q(dist_sq.sqrt() / 2.0);
        }
        worst = worst.max(total);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams;
    use rand_distr::Distribution;

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate_codebook(0, 4, 1.0, 1).is_err());
        assert!(generate_codebook(2, 0, 1.0, 1).is_err());
        assert!(generate_codebook(2, 4, 0.0, 1).is_err());
        assert!(generate_codebook(2, 4, -1.0, 1).is_err());
    }

    #[test]
    fn power_sphere_invariant() {
        let cb = generate_codebook(4, 8, 1.0, 42).unwrap();
        for word in &cb.codewords {
            let norm_sq: f64 = word.iter().map(|v| v * v).sum();
            assert!((norm_sq - 8.0).abs() < 1e-9, "norm^2 {norm_sq}");
        }
        // and at other shapes, relative tolerance 1e-9
        let cb = generate_codebook(7, 33, 2.5, 9).unwrap();
        for word in &cb.codewords {
            let norm_sq: f64 = word.iter().map(|v| v * v).sum();
            assert!(((norm_sq - 33.0 * 2.5) / (33.0 * 2.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_codebook(4, 8, 1.0, 42).unwrap();
        let b = generate_codebook(4, 8, 1.0, 42).unwrap();
        assert_eq!(a, b);
        let c = generate_codebook(4, 8, 1.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn single_message_decode_is_constant() {
        let cb = generate_codebook(1, 6, 1.0, 5).unwrap();
        assert_eq!(ml_decode(&cb, &vec![0.0; 6]).unwrap(), 0);
        assert_eq!(ml_decode(&cb, cb.codeword(0)).unwrap(), 0);
    }

    #[test]
    fn zero_noise_decode_is_identity() {
        let cb = generate_codebook(16, 10, 0.5, 11).unwrap();
        for m in 0..16 {
            assert_eq!(ml_decode(&cb, cb.codeword(m)).unwrap(), m);
        }
    }

    #[test]
    fn tie_breaks_to_smallest_index() {
        let cb = generate_codebook(2, 4, 1.0, 3).unwrap();
        // midpoint is exactly equidistant; the squared distances are
        // identical term by term
        let mid: Vec<f64> = cb.codeword(0).iter().zip(cb.codeword(1)).map(|(a, b)| 0.5 * (a + b)).collect();
        assert_eq!(ml_decode(&cb, &mid).unwrap(), 0);
    }

    #[test]
    fn decode_rejects_length_mismatch() {
        let cb = generate_codebook(2, 4, 1.0, 3).unwrap();
        assert!(ml_decode(&cb, &[0.0; 3]).is_err());
    }

    // Brute-force oracle for the decoder: explicit loops, explicit argmin.
    fn brute_force_decode(cb: &Codebook, y: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for m in 0..cb.num_messages {
            let mut d = 0.0;
            for i in 0..cb.blocklength {
                let diff = y[i] - cb.codewords[m][i];
                d += diff * diff;
            }
            if d < best_dist {
                best_dist = d;
                best = m;
            }
        }
        best
    }

    #[test]
    fn decode_matches_enumeration_oracle() {
        let cb = generate_codebook(4, 8, 1.0, 77).unwrap();
        let mut rng = streams::rng(123, "test-decode", 0);
        for _ in 0..500 {
            let y: Vec<f64> = (0..8).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
            assert_eq!(ml_decode(&cb, &y).unwrap(), brute_force_decode(&cb, &y));
        }
    }

    #[test]
    fn mean_pairwise_inner_product_near_zero() {
        // Codewords from distinct seeds behave like random directions on the
        // sphere. Oracle: sample pairs of independent random directions with
        // a separate generator and use their inner-product spread as sigma.
        let n = 2usize;
        let p = 1.0;
        let trials = 1000;
        let mut sum = 0.0;
        for seed in 0..trials {
            let cb = generate_codebook(2, n, p, seed).unwrap();
            let ip: f64 = cb.codeword(0).iter().zip(cb.codeword(1)).map(|(a, b)| a * b).sum();
            sum += ip;
        }
        let mean = sum / trials as f64;

        let mut rng = streams::rng(9, "direction-oracle", 0);
        let normal = StandardNormal;
        let target = n as f64 * p;
        let mut oracle_sq = 0.0;
        for _ in 0..trials {
            let mut u: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let mut v: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            for w in [&mut u, &mut v] {
                let norm_sq: f64 = w.iter().map(|x| x * x).sum();
                let s = (target / norm_sq).sqrt();
                w.iter_mut().for_each(|x| *x *= s);
            }
            let ip: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
            oracle_sq += ip * ip;
        }
        let sigma = (oracle_sq / trials as f64).sqrt();
        let se_mean = sigma / (trials as f64).sqrt();
        assert!(mean.abs() < 3.0 * se_mean, "mean {mean}, 3 sigma {}", 3.0 * se_mean);
    }

    #[test]
    fn union_bound_values() {
        assert!(pairwise_union_bound(&generate_codebook(1, 4, 1.0, 0).unwrap()).is_err());

        // two antipodal codewords at norm^2 = n P: bound is Q(sqrt(n P))
        let n = 4;
        let p = 1.5;
        let mut cb = generate_codebook(2, n, p, 0).unwrap();
        let word: Vec<f64> = cb.codeword(0).to_vec();
        cb.codewords[1] = word.iter().map(|v| -v).collect();
        let bound = pairwise_union_bound(&cb).unwrap();
        assert!((bound - stats::q((n as f64 * p).sqrt())).abs() < 1e-12);
    }

    #[test]
    fn union_bound_dominates_monte_carlo() {
        // MC oracle with >= 1e6 trials: per-message error rate under
        // unit-variance noise stays below the union bound within 3 sigma.
        let cb = generate_codebook(4, 8, 1.0, 42).unwrap();
        let bound = pairwise_union_bound(&cb).unwrap();
        let trials_per_message = 250_000u64;
        let mut errors = 0u64;
        let mut rng = streams::rng(4242, "union-mc", 0);
        for m in 0..cb.num_messages {
            for _ in 0..trials_per_message {
                let y: Vec<f64> = cb
                    .codeword(m)
                    .iter()
                    .map(|x| x + rng.sample::<f64, _>(StandardNormal))
                    .collect();
                if ml_decode(&cb, &y).unwrap() != m {
                    errors += 1;
                }
            }
        }
        let total = trials_per_message * cb.num_messages as u64;
        let rate = errors as f64 / total as f64;
        let sigma = (rate * (1.0 - rate) / total as f64).sqrt();
        assert!(rate <= bound + 3.0 * sigma, "MC rate {rate} exceeds bound {bound}");
    }

    #[test]
    fn csv_dump_has_one_row_per_message() {
        let cb = generate_codebook(3, 2, 1.0, 8).unwrap();
        let mut buf = Vec::new();
        cb.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("0,"));
        assert_eq!(rows[1].split(',').count(), 3);
    }
}
