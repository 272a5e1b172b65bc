//! Random equal partitioning of messages into feedback bins.
//!
//! Compressed feedback sends `log(bins)` nats instead of the full decoded
//! message; correctness then hinges on how often a wrong decode lands in
//! the same bin as the true message. For a uniformly random equal
//! partition that collision probability is exactly `(s - 1) / (M - 1)`
//! with `s = M / bins` messages per bin.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// A total map from messages to equally sized bins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionMap {
    pub num_messages: usize,
    pub num_bins: usize,
    /// `assignment[m]` is the bin index of message `m`.
    pub assignment: Vec<u32>,
}

impl PartitionMap {
    pub fn bin(&self, message: usize) -> u64 {
        self.assignment[message] as u64
    }

    /// Partition mapping every message to its own bin (`bins = messages`).
    pub fn identity(num_messages: usize) -> Self {
        PartitionMap {
            num_messages,
            num_bins: num_messages,
            assignment: (0..num_messages as u32).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.assignment.len() != self.num_messages {
            return Err(Error::ShapeMismatch(format!(
                "partition covers {} messages, expected {}",
                self.assignment.len(),
                self.num_messages
            )));
        }
        check_divisibility(self.num_messages, self.num_bins)?;
        let size = self.num_messages / self.num_bins;
        let mut counts = vec![0usize; self.num_bins];
        for &b in &self.assignment {
            let b = b as usize;
            if b >= self.num_bins {
                return Err(Error::ShapeMismatch(format!("bin index {b} out of range")));
            }
            counts[b] += 1;
        }
        if counts.iter().any(|&c| c != size) {
            return Err(Error::ShapeMismatch("partition bins are not of equal size".to_string()));
        }
        Ok(())
    }
}

fn check_divisibility(num_messages: usize, num_bins: usize) -> Result<()> {
    if num_bins == 0 || num_messages == 0 {
        return Err(Error::invalid("messages and bins must both be positive"));
    }
    if num_messages % num_bins != 0 {
        return Err(Error::invalid(format!(
            "bin count {num_bins} must divide message count {num_messages} for an equal partition"
        )));
    }
    Ok(())
}

/// Uniformly random equal partition: shuffle the messages, cut into
/// consecutive bins of size `num_messages / num_bins`.
pub fn sample_equal_partition<R: Rng>(
    num_messages: usize,
    num_bins: usize,
    rng: &mut R,
) -> Result<PartitionMap> {
    check_divisibility(num_messages, num_bins)?;
    let size = num_messages / num_bins;
    let mut order: Vec<usize> = (0..num_messages).collect();
    order.shuffle(rng);
    let mut assignment = vec![0u32; num_messages];
    for (pos, &message) in order.iter().enumerate() {
        assignment[message] = (pos / size) as u32;
    }
    Ok(PartitionMap { num_messages, num_bins, assignment })
}

/// Probability that two distinct messages share a bin under a uniformly
/// random equal partition: `(s - 1) / (M - 1)` with `s = M / bins`.
pub fn expected_collision_probability(num_messages: usize, num_bins: usize) -> Result<f64> {
    check_divisibility(num_messages, num_bins)?;
    if num_messages < 2 {
        return Err(Error::invalid("collision probability needs at least two messages"));
    }
    let s = (num_messages / num_bins) as f64;
    Ok((s - 1.0) / (num_messages as f64 - 1.0))
}
