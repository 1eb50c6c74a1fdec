//! Transformations of interarrival series that keep the marginal distribution
//! of gaps while destroying chosen parts of their correlation structure.
//!
//! * full shuffle: uniform permutation, destroys all correlation;
//! * external shuffle: permutes the order of blocks of `m` gaps, keeping the
//!   order inside each block (short-range structure survives);
//! * internal shuffle: permutes gaps inside each block, keeping block order
//!   (long-range structure survives);
//! * one-step surrogate: a first-order Markov chain over quantile bins of the
//!   gaps, which keeps the lag-1 dependence and nothing beyond it.
//!
//! The origin timestamp is carried through unchanged.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::synth::Seed;
use crate::trace::InterarrivalSeries;

pub const DEFAULT_QUANTILE_BINS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum ShuffleError {
    #[error("need at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("block size must be at least 1")]
    InvalidBlockSize,
    #[error("need at least 2 quantile bins, got {0}")]
    InvalidBins(usize),
    #[error("only {distinct} distinct values for {bins} quantile bins")]
    DegenerateMarginal { distinct: usize, bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShuffleKind {
    Full,
    External { m: usize },
    Internal { m: usize },
    Markov1 { quantile_bins: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShuffleSpec {
    pub kind: ShuffleKind,
    pub seed: Seed,
}

impl ShuffleSpec {
    pub fn apply(&self, series: &InterarrivalSeries) -> Result<InterarrivalSeries, ShuffleError> {
        match self.kind {
            ShuffleKind::Full => shuffle_full(series, self.seed),
            ShuffleKind::External { m } => shuffle_external(series, m, self.seed),
            ShuffleKind::Internal { m } => shuffle_internal(series, m, self.seed),
            ShuffleKind::Markov1 { quantile_bins } => markov1_surrogate(series, quantile_bins, self.seed),
        }
    }
}

fn need(series: &InterarrivalSeries, needed: usize) -> Result<(), ShuffleError> {
    if series.len() < needed {
        return Err(ShuffleError::TooFewSamples { needed, got: series.len() });
    }
    Ok(())
}

pub fn shuffle_full(series: &InterarrivalSeries, seed: Seed) -> Result<InterarrivalSeries, ShuffleError> {
    need(series, 2)?;
    let mut values = series.values().to_vec();
    values.shuffle(&mut seed.rng());
    Ok(series.with_values(values))
}

/// Permutes whole blocks of `m` gaps. A trailing partial block stays at the
/// end. With `m = 1` this draws the same permutation as [`shuffle_full`].
pub fn shuffle_external(series: &InterarrivalSeries, m: usize, seed: Seed) -> Result<InterarrivalSeries, ShuffleError> {
    need(series, 2)?;
    if m == 0 {
        return Err(ShuffleError::InvalidBlockSize);
    }
    let values = series.values();
    let n_blocks = values.len() / m;
    let mut order: Vec<usize> = (0..n_blocks).collect();
    order.shuffle(&mut seed.rng());
    let mut out = Vec::with_capacity(values.len());
    for b in order {
        out.extend_from_slice(&values[b * m..(b + 1) * m]);
    }
    out.extend_from_slice(&values[n_blocks * m..]);
    Ok(series.with_values(out))
}

/// Permutes gaps within each block of `m`, trailing partial block included;
/// blocks are visited in order from a single random stream.
pub fn shuffle_internal(series: &InterarrivalSeries, m: usize, seed: Seed) -> Result<InterarrivalSeries, ShuffleError> {
    need(series, 2)?;
    if m == 0 {
        return Err(ShuffleError::InvalidBlockSize);
    }
    let mut values = series.values().to_vec();
    if m > 1 {
        let mut rng = seed.rng();
        for block in values.chunks_mut(m) {
            block.shuffle(&mut rng);
        }
    }
    Ok(series.with_values(values))
}

/// One-step surrogate by quantile-bin transition resampling.
///
/// Gaps are ranked and split into `quantile_bins` equal-frequency bins. The
/// empirical bin-to-bin transition counts of consecutive gaps define a Markov
/// chain; the surrogate starts in the bin of the first gap, walks the chain,
/// and at each step draws a gap uniformly from the members of the current bin.
pub fn markov1_surrogate(
    series: &InterarrivalSeries,
    quantile_bins: usize,
    seed: Seed,
) -> Result<InterarrivalSeries, ShuffleError> {
    if quantile_bins < 2 {
        return Err(ShuffleError::InvalidBins(quantile_bins));
    }
    need(series, quantile_bins * quantile_bins * 10)?;
    let values = series.values();
    let n = values.len();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let distinct = 1 + order.windows(2).filter(|w| values[w[0]] != values[w[1]]).count();
    if distinct < quantile_bins {
        return Err(ShuffleError::DegenerateMarginal { distinct, bins: quantile_bins });
    }

    let mut bin_of = vec![0usize; n];
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); quantile_bins];
    for (rank, &idx) in order.iter().enumerate() {
        let b = rank * quantile_bins / n;
        bin_of[idx] = b;
        members[b].push(values[idx]);
    }

    let mut transitions = vec![vec![0u64; quantile_bins]; quantile_bins];
    for w in bin_of.windows(2) {
        transitions[w[0]][w[1]] += 1;
    }
    let marginal: Vec<u64> = members.iter().map(|m| m.len() as u64).collect();

    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n);
    let mut state = bin_of[0];
    out.push(*members[state].choose(&mut rng).expect("bins are nonempty"));
    for _ in 1..n {
        let row = &transitions[state];
        // the bin of the last gap may have no outgoing transition
        let weights = if row.iter().any(|&c| c > 0) { row } else { &marginal };
        state = draw_index(&mut rng, weights);
        out.push(*members[state].choose(&mut rng).expect("bins are nonempty"));
    }
    Ok(series.with_values(out))
}

fn draw_index<R: Rng>(rng: &mut R, weights: &[u64]) -> usize {
    let total: u64 = weights.iter().sum();
    let mut r = rng.gen_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if r < w {
            return i;
        }
        r -= w;
    }
    unreachable!("draw below the total weight")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> InterarrivalSeries {
        InterarrivalSeries::new(v.to_vec(), 2.0).unwrap()
    }

    fn sorted(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    #[test]
    fn full_is_a_seeded_permutation() {
        let s = series(&(0..100).map(f64::from).collect::<Vec<_>>());
        let a = shuffle_full(&s, Seed(1)).unwrap();
        assert_eq!(sorted(a.values()), s.values());
        assert_eq!(a, shuffle_full(&s, Seed(1)).unwrap());
        assert_ne!(a.values(), s.values());
        assert_eq!(a.origin(), 2.0);
        assert!(matches!(shuffle_full(&series(&[1.0]), Seed(1)), Err(ShuffleError::TooFewSamples { .. })));
    }

    #[test]
    fn external_keeps_pairs_intact() {
        let s = series(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = shuffle_external(&s, 2, Seed(8)).unwrap();
        let mut pairs: Vec<Vec<f64>> = out.values().chunks(2).map(<[f64]>::to_vec).collect();
        pairs.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(pairs, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
    }

    #[test]
    fn external_single_block_is_identity() {
        let s = series(&[3.0, 1.0, 2.0]);
        assert_eq!(shuffle_external(&s, 3, Seed(4)).unwrap(), s);
        assert_eq!(shuffle_external(&s, 10, Seed(4)).unwrap(), s);
    }

    #[test]
    fn external_leaves_partial_tail_in_place() {
        let s = series(&(0..23).map(f64::from).collect::<Vec<_>>());
        let out = shuffle_external(&s, 5, Seed(3)).unwrap();
        assert_eq!(&out.values()[20..], &[20.0, 21.0, 22.0]);
    }

    #[test]
    fn external_with_unit_blocks_equals_full() {
        let s = series(&(0..500).map(|i| (i * 37 % 101) as f64).collect::<Vec<_>>());
        assert_eq!(shuffle_external(&s, 1, Seed(77)).unwrap(), shuffle_full(&s, Seed(77)).unwrap());
    }

    #[test]
    fn internal_preserves_block_sums() {
        let s = series(&(0..103).map(|i| ((i * 7) % 13) as f64).collect::<Vec<_>>());
        let out = shuffle_internal(&s, 10, Seed(5)).unwrap();
        for (a, b) in s.values().chunks(10).zip(out.values().chunks(10)) {
            assert_eq!(sorted(a), sorted(b));
            assert_eq!(a.iter().sum::<f64>(), b.iter().sum::<f64>());
        }
        assert_eq!(shuffle_internal(&s, 1, Seed(5)).unwrap(), s);
        assert_eq!(shuffle_internal(&s, 0, Seed(5)), Err(ShuffleError::InvalidBlockSize));
    }

    #[test]
    fn markov1_preconditions() {
        let s = series(&(0..100).map(f64::from).collect::<Vec<_>>());
        assert!(matches!(markov1_surrogate(&s, 16, Seed(1)), Err(ShuffleError::TooFewSamples { .. })));
        assert_eq!(markov1_surrogate(&s, 1, Seed(1)), Err(ShuffleError::InvalidBins(1)));
        let few = series(&(0..1000).map(|i| (i % 3) as f64).collect::<Vec<_>>());
        assert_eq!(
            markov1_surrogate(&few, 4, Seed(1)),
            Err(ShuffleError::DegenerateMarginal { distinct: 3, bins: 4 })
        );
    }

    #[test]
    fn markov1_output_shape() {
        let s = series(&(0..5000).map(|i| ((i * 7919) % 1013) as f64).collect::<Vec<_>>());
        let out = markov1_surrogate(&s, 8, Seed(2)).unwrap();
        assert_eq!(out.len(), s.len());
        assert_eq!(out.origin(), s.origin());
        assert_eq!(out, markov1_surrogate(&s, 8, Seed(2)).unwrap());
        // every output value is drawn from the input
        let pool = sorted(s.values());
        assert!(out.values().iter().all(|v| pool.binary_search_by(|p| p.total_cmp(v)).is_ok()));
    }
}
