//! Seeded traffic generators.
//!
//! Every generator is a pure function of its parameters and a [`Seed`]; the
//! stream is ChaCha8 seeded from the 64-bit value. Timestamps start at 0 and
//! the first packet arrives one gap later.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("need at least 2 packets, got {0}")]
    InvalidCount(usize),
    #[error("invalid gap range [{low}, {high})")]
    InvalidRange { low: f64, high: f64 },
    #[error("invalid train parameters: {0}")]
    InvalidParams(String),
    #[error("no nonempty input stream")]
    EmptyInput,
    #[error("stream {0} is not sorted")]
    UnsortedStream(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Seed for the `i`-th of several independent streams.
    pub fn offset(self, i: u64) -> Seed {
        Seed(self.0.wrapping_add(i))
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Two-state packet-train source: exponential idle gaps, a geometric number
/// of cars per train (locomotive included) and exponential gaps between cars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSourceParams {
    pub mean_intertrain: f64,
    pub mean_cars: f64,
    pub mean_intercar: f64,
}

impl TrainSourceParams {
    pub fn new(mean_intertrain: f64, mean_cars: f64, mean_intercar: f64) -> Result<Self, SynthError> {
        let p = TrainSourceParams {
            mean_intertrain,
            mean_cars,
            mean_intercar,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.mean_intertrain) {
            return Err(SynthError::InvalidParams(format!("mean intertrain gap {}", self.mean_intertrain)));
        }
        if !(self.mean_cars.is_finite() && self.mean_cars >= 1.0) {
            return Err(SynthError::InvalidParams(format!("mean cars per train {}", self.mean_cars)));
        }
        if !ok(self.mean_intercar) {
            return Err(SynthError::InvalidParams(format!("mean intercar gap {}", self.mean_intercar)));
        }
        Ok(())
    }
}

/// Inverse-CDF exponential draw.
fn exponential<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    let u: f64 = rng.gen();
    -mean * (1.0 - u).ln()
}

/// Inverse-CDF geometric draw on {1, 2, ...} with the given mean.
fn geometric<R: Rng>(rng: &mut R, mean: f64) -> u64 {
    let p = 1.0 / mean;
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = rng.gen();
    1 + ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
}

pub fn gen_poisson(rate: f64, n: usize, seed: Seed) -> Result<Vec<f64>, SynthError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(SynthError::InvalidRate(rate));
    }
    if n < 2 {
        return Err(SynthError::InvalidCount(n));
    }
    let mut rng = seed.rng();
    let mean = 1.0 / rate;
    let mut t = 0.0;
    Ok((0..n)
        .map(|_| {
            t += exponential(&mut rng, mean);
            t
        })
        .collect())
}

pub fn gen_uniform(low: f64, high: f64, n: usize, seed: Seed) -> Result<Vec<f64>, SynthError> {
    if !(low >= 0.0 && low < high && high.is_finite()) {
        return Err(SynthError::InvalidRange { low, high });
    }
    if n < 2 {
        return Err(SynthError::InvalidCount(n));
    }
    let mut rng = seed.rng();
    let mut t = 0.0;
    Ok((0..n)
        .map(|_| {
            t += rng.gen_range(low..high);
            t
        })
        .collect())
}

/// One train source, truncated at exactly `n_packets`.
///
/// The idle gap runs from the last car of one train to the locomotive of the
/// next, so the source alternates between exponentially distributed idle and
/// active periods.
pub fn gen_train(params: &TrainSourceParams, n_packets: usize, seed: Seed) -> Result<Vec<f64>, SynthError> {
    params.validate()?;
    if n_packets < 2 {
        return Err(SynthError::InvalidCount(n_packets));
    }
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n_packets);
    let mut t = 0.0;
    while out.len() < n_packets {
        t += exponential(&mut rng, params.mean_intertrain);
        out.push(t);
        let cars = geometric(&mut rng, params.mean_cars);
        for _ in 1..cars {
            if out.len() == n_packets {
                break;
            }
            t += exponential(&mut rng, params.mean_intercar);
            out.push(t);
        }
    }
    Ok(out)
}

/// Stable k-way merge of sorted streams; equal timestamps keep stream order.
/// Each output element carries the index of its source stream.
pub fn superpose_indexed(streams: &[Vec<f64>]) -> Result<Vec<(f64, usize)>, SynthError> {
    if streams.iter().all(|s| s.is_empty()) {
        return Err(SynthError::EmptyInput);
    }
    for (i, s) in streams.iter().enumerate() {
        if s.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(SynthError::UnsortedStream(i));
        }
    }
    let total = streams.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    // min-heap of (timestamp, stream, position)
    let mut heap = BinaryHeap::new();
    for (i, s) in streams.iter().enumerate() {
        if let Some(&t) = s.first() {
            heap.push(Reverse((OrdF64(t), i, 0usize)));
        }
    }
    while let Some(Reverse((OrdF64(t), i, pos))) = heap.pop() {
        out.push((t, i));
        if let Some(&next) = streams[i].get(pos + 1) {
            heap.push(Reverse((OrdF64(next), i, pos + 1)));
        }
    }
    Ok(out)
}

pub fn superpose(streams: &[Vec<f64>]) -> Result<Vec<f64>, SynthError> {
    Ok(superpose_indexed(streams)?.into_iter().map(|(t, _)| t).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Splits `total` packets as evenly as possible over `k` sources, earlier
/// sources taking the remainder.
pub fn split_evenly(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

/// Generates one train source per entry of `sources` (parameters, packet
/// count, seed) concurrently and returns the streams in input order.
pub fn gen_train_streams(sources: &[(TrainSourceParams, usize, Seed)]) -> Result<Vec<Vec<f64>>, SynthError> {
    sources
        .par_iter()
        .map(|(p, n, s)| gen_train(p, *n, *s))
        .collect()
}
