//! Second-order statistics of count series.
//!
//! All estimators divide by `n` (biased), so that the lag-0 autocovariance is
//! bit-for-bit the variance and the aggregated-variance identity can be
//! checked against plug-in autocovariances without a correction term.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::fmt::sig6;
use crate::trace::CountSeries;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("max lag {max_lag} must be below the series length {n}")]
    LagTooLarge { max_lag: usize, n: usize },
    #[error("lag-0 autocovariance is zero")]
    ZeroVariance,
    #[error("block size {m} is invalid for a series of length {n}")]
    BlockTooLarge { m: usize, n: usize },
    #[error("invalid aggregation grid: {0}")]
    InvalidGrid(String),
    #[error("need autocovariances up to lag {needed}, got {got} entries")]
    InsufficientLags { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentSummary {
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocovSeries {
    /// Indexed by lag, starting at 0.
    pub gamma: Vec<f64>,
    pub n_samples: usize,
}

/// Block-averaged series; values are real even when the source counts are not.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedSeries {
    pub delta: f64,
    pub values: Vec<f64>,
}

impl AggregatedSeries {
    pub fn aggregate(&self, m: usize) -> Result<AggregatedSeries, StatsError> {
        Ok(AggregatedSeries {
            delta: self.delta * m as f64,
            values: block_means(&self.values, m)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceTimePoint {
    pub m: usize,
    pub vm: f64,
    pub n_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarianceTimeCurve {
    pub points: Vec<VarianceTimePoint>,
}

fn mean_of(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn lagged_cov(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for t in 0..n - lag {
        acc += (x[t] - mean) * (x[t + lag] - mean);
    }
    acc / n as f64
}

/// Biased variance of a real series (0 for fewer than one element is never
/// requested; callers check lengths).
pub(crate) fn biased_variance(x: &[f64]) -> f64 {
    lagged_cov(x, mean_of(x), 0)
}

pub fn moments(series: &CountSeries) -> Result<MomentSummary, StatsError> {
    moments_of(&series.as_f64())
}

pub fn moments_of(x: &[f64]) -> Result<MomentSummary, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: x.len() });
    }
    let mean = mean_of(x);
    let variance = lagged_cov(x, mean, 0);
    Ok(MomentSummary {
        mean,
        variance,
        std: variance.sqrt(),
    })
}

pub fn autocovariance(series: &CountSeries, max_lag: usize) -> Result<AutocovSeries, StatsError> {
    autocovariance_of(&series.as_f64(), max_lag)
}

/// Truncated-sum autocovariance: lag `k` averages the `n - k` available
/// products but divides by `n`.
pub fn autocovariance_of(x: &[f64], max_lag: usize) -> Result<AutocovSeries, StatsError> {
    let n = x.len();
    if max_lag >= n {
        return Err(StatsError::LagTooLarge { max_lag, n });
    }
    let mean = mean_of(x);
    let gamma = (0..=max_lag).map(|k| lagged_cov(x, mean, k)).collect();
    Ok(AutocovSeries { gamma, n_samples: n })
}

pub fn autocorrelation(acov: &AutocovSeries) -> Result<Vec<f64>, StatsError> {
    let g0 = match acov.gamma.first() {
        Some(&g) if g > 0.0 => g,
        _ => return Err(StatsError::ZeroVariance),
    };
    Ok(acov.gamma.iter().map(|g| g / g0).collect())
}

fn block_means(x: &[f64], m: usize) -> Result<Vec<f64>, StatsError> {
    if m == 0 || m > x.len() {
        return Err(StatsError::BlockTooLarge { m, n: x.len() });
    }
    let inv = 1.0 / m as f64;
    Ok(x.chunks_exact(m).map(|c| c.iter().sum::<f64>() * inv).collect())
}

/// Non-overlapping block means of size `m`; a trailing partial block is
/// dropped.
pub fn aggregate(series: &CountSeries, m: usize) -> Result<AggregatedSeries, StatsError> {
    Ok(AggregatedSeries {
        delta: series.delta() * m as f64,
        values: block_means(&series.as_f64(), m)?,
    })
}

/// Empirical variance of the aggregated series at every `m` in the grid.
pub fn variance_time(series: &CountSeries, m_grid: &[usize]) -> Result<VarianceTimeCurve, StatsError> {
    variance_time_of(&series.as_f64(), m_grid)
}

pub fn variance_time_of(x: &[f64], m_grid: &[usize]) -> Result<VarianceTimeCurve, StatsError> {
    let n = x.len();
    if m_grid.is_empty() {
        return Err(StatsError::InvalidGrid("empty grid".into()));
    }
    if let Some(w) = m_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(StatsError::InvalidGrid(format!("{} does not follow {}", w[1], w[0])));
    }
    if let Some(&m) = m_grid.iter().find(|&&m| m == 0 || m > n / 2) {
        return Err(StatsError::InvalidGrid(format!(
            "m = {m} outside [1, {}] for a series of length {n}",
            n / 2
        )));
    }
    let points = m_grid
        .par_iter()
        .map(|&m| {
            let blocks = block_means(x, m)?;
            Ok(VarianceTimePoint {
                m,
                vm: biased_variance(&blocks),
                n_blocks: blocks.len(),
            })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(VarianceTimeCurve { points })
}

fn check_lags(gamma: &[f64], m: usize) -> Result<(), StatsError> {
    if m == 0 {
        return Err(StatsError::InvalidGrid("m must be at least 1".into()));
    }
    if gamma.len() < m {
        return Err(StatsError::InsufficientLags { needed: m - 1, got: gamma.len() });
    }
    Ok(())
}

/// Variance of the block mean of size `m` from the variance and the
/// autocovariances, `v/m + (2/m^2) * sum_{k=1}^{m} (m-k) gamma_k`.
///
/// `gamma` is indexed by lag; entry 0 is ignored in favour of `v`, and the
/// `k = m` term carries zero weight, so lags `1..m-1` suffice.
pub fn vm_from_autocov(v: f64, gamma: &[f64], m: usize) -> Result<f64, StatsError> {
    check_lags(gamma, m)?;
    let mf = m as f64;
    let weighted: f64 = (1..m).map(|k| (m - k) as f64 * gamma[k]).sum();
    Ok(v / mf + 2.0 / (mf * mf) * weighted)
}

/// The same quantity through nested partial sums,
/// `v/m + (2/m^2) * sum_{s=1}^{m-1} sum_{k=1}^{s} gamma_k`.
pub fn vm_from_autocov_nested(v: f64, gamma: &[f64], m: usize) -> Result<f64, StatsError> {
    check_lags(gamma, m)?;
    let mf = m as f64;
    let mut partial = 0.0;
    let mut outer = 0.0;
    for s in 1..m {
        partial += gamma[s];
        outer += partial;
    }
    Ok(v / mf + 2.0 / (mf * mf) * outer)
}

pub const VARIANCE_TIME_CSV_HEADER: &str = "m,vm,log10_m,log10_vm,n_blocks";

pub fn write_variance_time_csv<W: Write + ?Sized>(out: &mut W, curve: &VarianceTimeCurve) -> std::io::Result<()> {
    writeln!(out, "{VARIANCE_TIME_CSV_HEADER}")?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.m,
            sig6(p.vm),
            sig6((p.m as f64).log10()),
            sig6(p.vm.log10()),
            p.n_blocks
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn counts(v: &[u64]) -> CountSeries {
        CountSeries::new(1.0, v.to_vec()).unwrap()
    }

    #[test]
    fn moments_examples() {
        let m = moments(&counts(&[2, 2, 2, 2])).unwrap();
        assert_eq!((m.mean, m.variance, m.std), (2.0, 0.0, 0.0));
        // direct summation: deviations -1.5,-0.5,0.5,1.5 -> squares sum 5, /4
        let m = moments(&counts(&[1, 2, 3, 4])).unwrap();
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.variance, 1.25);
        assert_eq!(moments(&counts(&[5])), Err(StatsError::TooFewSamples { needed: 2, got: 1 }));
    }

    #[test]
    fn autocovariance_examples() {
        // lag1: (-1.5*-0.5 + -0.5*0.5 + 0.5*1.5)/4 = 1.25/4; lag2: (-1.5*0.5 + -0.5*1.5)/4
        let a = autocovariance(&counts(&[1, 2, 3, 4]), 2).unwrap();
        assert_eq!(a.gamma, vec![1.25, 0.3125, -0.375]);
        let a = autocovariance(&counts(&[3; 10]), 4).unwrap();
        assert!(a.gamma.iter().all(|&g| g == 0.0));
        assert!(matches!(autocovariance(&counts(&[1, 2]), 2), Err(StatsError::LagTooLarge { .. })));
    }

    #[test]
    fn iid_lag_one_correlation_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let rho = autocorrelation(&autocovariance_of(&x, 1).unwrap()).unwrap();
        assert!(rho[1].abs() < 0.02, "rho1 = {}", rho[1]);
    }

    #[test]
    fn autocorrelation_examples() {
        let a = AutocovSeries { gamma: vec![1.25, 0.3125, -0.375], n_samples: 4 };
        assert_eq!(autocorrelation(&a).unwrap(), vec![1.0, 0.25, -0.3]);
        let z = AutocovSeries { gamma: vec![0.0, 0.0], n_samples: 2 };
        assert_eq!(autocorrelation(&z), Err(StatsError::ZeroVariance));
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate(&counts(&[1, 2, 3, 4, 5, 6]), 3).unwrap().values, vec![2.0, 5.0]);
        assert_eq!(aggregate(&counts(&[1, 2, 3, 4, 5, 6, 7]), 3).unwrap().values, vec![2.0, 5.0]);
        let s = counts(&[4, 0, 9, 1]);
        let a = aggregate(&s, 1).unwrap();
        assert_eq!(a.values, s.as_f64());
        assert_eq!(a.delta, 1.0);
        assert_eq!(aggregate(&s, 2).unwrap().delta, 2.0);
        assert!(matches!(aggregate(&s, 5), Err(StatsError::BlockTooLarge { .. })));
        assert!(matches!(aggregate(&s, 0), Err(StatsError::BlockTooLarge { .. })));
    }

    #[test]
    fn variance_time_examples() {
        let c = variance_time(&counts(&[1, 2, 3, 4, 5, 6]), &[1, 3]).unwrap();
        // m=1: sum of squared deviations from 3.5 is 17.5, /6 = 35/12
        assert!((c.points[0].vm - 35.0 / 12.0).abs() < 1e-15);
        assert_eq!(c.points[1], VarianceTimePoint { m: 3, vm: 2.25, n_blocks: 2 });

        let c = variance_time(&counts(&[7; 40]), &[1, 2, 5, 10, 20]).unwrap();
        assert!(c.points.iter().all(|p| p.vm == 0.0));
    }

    #[test]
    fn variance_time_rejects_bad_grids() {
        let s = counts(&[1; 10]);
        for grid in [vec![], vec![2, 2], vec![3, 1], vec![0, 1], vec![1, 6]] {
            assert!(matches!(variance_time(&s, &grid), Err(StatsError::InvalidGrid(_))), "{grid:?}");
        }
    }

    #[test]
    fn iid_variance_decays_as_one_over_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..200_000).map(|_| rng.gen_range(0..6) as f64).collect();
        let v = biased_variance(&x);
        // at least 2000 blocks per point keeps the sampling error of v_m near 3%
        let grid: Vec<usize> = vec![1, 2, 5, 10, 20, 50, 100];
        let curve = variance_time_of(&x, &grid).unwrap();
        for p in &curve.points {
            let ratio = p.vm * p.m as f64 / v;
            assert!((0.9..=1.1).contains(&ratio), "m={} ratio={ratio}", p.m);
        }
    }

    #[test]
    fn vm_from_autocov_examples() {
        assert_eq!(vm_from_autocov(2.0, &[2.0, 0.0, 0.0, 0.0], 4).unwrap(), 0.5);
        assert_eq!(vm_from_autocov(1.0, &[1.0, 0.5], 2).unwrap(), 0.75);
        assert_eq!(vm_from_autocov_nested(1.0, &[1.0, 0.5], 2).unwrap(), 0.75);
        assert_eq!(vm_from_autocov(3.0, &[3.0], 1).unwrap(), 3.0);
        assert!(matches!(vm_from_autocov(1.0, &[1.0, 0.5], 3), Err(StatsError::InsufficientLags { .. })));
    }

    #[test]
    fn vm_formula_matches_empirical_block_variance_on_exact_structure() {
        // With gamma computed from the series itself the identity is not exact
        // (edge effects), but for a long periodic series with period dividing m
        // the block means are constant and both must give ~0 excess.
        let x: Vec<f64> = (0..10_000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let acov = autocovariance_of(&x, 4).unwrap();
        let vm = vm_from_autocov(acov.gamma[0], &acov.gamma, 4).unwrap();
        assert!(vm.abs() < 1e-3, "vm = {vm}");
    }

    #[test]
    fn csv_layout() {
        let curve = VarianceTimeCurve {
            points: vec![VarianceTimePoint { m: 10, vm: 0.25, n_blocks: 100 }],
        };
        let mut buf = Vec::new();
        write_variance_time_csv(&mut buf, &curve).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "m,vm,log10_m,log10_vm,n_blocks\n10,0.25,1,-0.60206,100\n");
    }
}
