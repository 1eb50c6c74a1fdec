#![allow(dead_code)]

use lrd_core::hurst;
use lrd_core::trace::{self, InterarrivalSeries};

/// Average packets per bin used when choosing the bin width for an experiment.
pub const PACKETS_PER_BIN: f64 = 2.5;

/// Bin width giving `PACKETS_PER_BIN` packets per bin on average.
pub fn delta_for(timestamps: &[f64]) -> f64 {
    let span = timestamps[timestamps.len() - 1] - timestamps[0];
    PACKETS_PER_BIN * span / (timestamps.len() - 1) as f64
}

pub fn h_of_timestamps(timestamps: &[f64], delta: f64) -> f64 {
    let counts = trace::to_counts(timestamps, delta).unwrap();
    hurst::estimate_h(&counts).unwrap()
}

pub fn h_of_series(series: &InterarrivalSeries, delta: f64) -> f64 {
    let counts = trace::interarrivals_to_counts(series, delta).unwrap();
    hurst::estimate_h(&counts).unwrap()
}

/// Ranks with ties sharing their average rank.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// Spearman correlation between consecutive values.
pub fn lag1_rank_correlation(v: &[f64]) -> f64 {
    spearman(&v[..v.len() - 1], &v[1..])
}

/// Sample autocorrelation at `lag` (biased, mean-removed).
pub fn autocorrelation_at(v: &[f64], lag: usize) -> f64 {
    let n = v.len();
    let m = v.iter().sum::<f64>() / n as f64;
    let g0: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    let gk: f64 = (0..n - lag).map(|t| (v[t] - m) * (v[t + lag] - m)).sum();
    gk / g0
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

pub fn sorted(v: &[f64]) -> Vec<u64> {
    let mut bits: Vec<f64> = v.to_vec();
    bits.sort_by(f64::total_cmp);
    bits.into_iter().map(f64::to_bits).collect()
}
