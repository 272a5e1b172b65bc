//! Small statistical helpers: Gaussian tail probability, Wilson score
//! intervals and running moments.

use serde::{Deserialize, Serialize};

/// Tail probability of the standard normal distribution,
/// `Q(x) = Pr{N(0,1) >= x} = erfc(x / sqrt(2)) / 2`.
pub fn q(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// A binomial proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub events: u64,
    pub samples: u64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Wilson score interval at 95% for `events` successes in `samples` draws.
///
/// Chosen over the normal approximation because it stays valid at the small
/// counts typical of rare error branches.
pub fn wilson(events: u64, samples: u64) -> Proportion {
    const Z: f64 = 1.959963984540054; // 97.5% normal quantile
    if samples == 0 {
        return Proportion { events, samples, rate: 0.0, lo: 0.0, hi: 1.0 };
    }
    let n = samples as f64;
    let p = events as f64 / n;
    let z2 = Z * Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = (Z / denom) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // the endpoints are exact at the boundary counts
    let lo = if events == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if events == samples { 1.0 } else { (center + half).min(1.0) };
    Proportion { events, samples, rate: p, lo, hi }
}

/// Mean and standard error of a sample, accumulated in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanWithError {
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean and standard error of the mean.
pub fn mean_with_error(values: &[f64]) -> MeanWithError {
    let n = values.len() as f64;
    if values.is_empty() {
        return MeanWithError { samples: 0, mean: 0.0, std_error: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MeanWithError { samples: 1, mean, std_error: 0.0 };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MeanWithError { samples: values.len() as u64, mean, std_error: (var / n).sqrt() }
}
