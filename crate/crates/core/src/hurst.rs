//! Hurst coefficient from the variance-time curve.
//!
//! `log10(v_m)` is regressed on `log10(m)` by ordinary least squares. For a
//! process whose aggregated variance decays as `m^(-beta)` the slope is
//! `-beta`, and `H = 1 - beta/2 = 1 + slope/2`: white noise gives slope -1 and
//! H = 1/2, long-range dependence gives a shallower slope and 1/2 < H < 1.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::fmt::sig6;
use crate::stats::{self, MomentSummary, StatsError, VarianceTimeCurve};
use crate::trace::CountSeries;

/// Smallest aggregation level used by default in the fit.
pub const DEFAULT_M_MIN: usize = 10;
/// Default threshold above 1/2 for calling a series long-range dependent.
pub const DEFAULT_CLASSIFY_TOLERANCE: f64 = 0.05;
const CONFIDENCE: f64 = 0.95;
const GRID_STEPS_PER_DECADE: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum HurstError {
    #[error("series of length {0} is too short for a variance-time fit (need 100)")]
    SeriesTooShort(usize),
    #[error("only {0} usable curve points in the fit range (need 3)")]
    TooFewPoints(usize),
    #[error("aggregated variance is not positive at m = {0}")]
    NonPositiveVariance(usize),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HurstEstimate {
    pub h: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_points: usize,
    pub m_min_used: usize,
    pub m_max_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DependenceClass {
    LongRange,
    ShortRangeOrIndependent,
}

/// Roughly ten log-spaced aggregation levels per decade from 1 to `n / 10`.
pub fn default_m_grid(n: usize) -> Result<Vec<usize>, HurstError> {
    if n < 100 {
        return Err(HurstError::SeriesTooShort(n));
    }
    let max = n / 10;
    let steps = ((max as f64).log10() * GRID_STEPS_PER_DECADE).floor() as i32;
    let mut grid: Vec<usize> = (0..=steps)
        .map(|i| 10f64.powf(i as f64 / GRID_STEPS_PER_DECADE).round() as usize)
        .filter(|&m| m >= 1 && m <= max)
        .collect();
    grid.dedup();
    if grid.last() != Some(&max) {
        grid.push(max);
    }
    Ok(grid)
}

/// Least-squares fit of the variance-time curve over `m_min <= m <= m_max`.
pub fn fit_variance_time(curve: &VarianceTimeCurve, m_min: usize, m_max: usize) -> Result<HurstEstimate, HurstError> {
    let mut selected: Vec<(usize, f64)> = Vec::new();
    for p in curve.points.iter().filter(|p| p.m >= m_min && p.m <= m_max) {
        if !(p.vm > 0.0) {
            return Err(HurstError::NonPositiveVariance(p.m));
        }
        selected.push((p.m, p.vm));
    }
    if selected.len() < 3 {
        return Err(HurstError::TooFewPoints(selected.len()));
    }
    // sort so that the summation order, and hence the result, does not depend
    // on the order of the input points
    selected.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = selected.iter().map(|(m, _)| (*m as f64).log10()).collect();
    let ys: Vec<f64> = selected.iter().map(|(_, v)| v.log10()).collect();
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
    let syy: f64 = ys.iter().map(|y| (y - y_mean).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(HurstError::TooFewPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };

    let dof = n - 2.0;
    let se_slope = (ss_res / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.5 + CONFIDENCE / 2.0);
    let half = t * se_slope / 2.0;
    let h = 1.0 + slope / 2.0;

    Ok(HurstEstimate {
        h,
        slope,
        intercept,
        r_squared,
        ci_low: h - half,
        ci_high: h + half,
        n_points: selected.len(),
        m_min_used: selected[0].0,
        m_max_used: selected[selected.len() - 1].0,
    })
}

pub fn classify(estimate: &HurstEstimate, tolerance: f64) -> DependenceClass {
    if estimate.h > 0.5 + tolerance {
        DependenceClass::LongRange
    } else {
        DependenceClass::ShortRangeOrIndependent
    }
}

/// Everything the variance-time analysis of one count series produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub n_bins: usize,
    pub delta: f64,
    pub moments: MomentSummary,
    pub curve: VarianceTimeCurve,
    pub estimate: HurstEstimate,
}

/// Moments, variance-time curve over the default grid, and the fit over
/// `[m_min, m_max]` (`m_max` defaults to `n / 10`).
pub fn analyze(series: &CountSeries, m_min: usize, m_max: Option<usize>) -> Result<Analysis, HurstError> {
    let n = series.len();
    let grid = default_m_grid(n)?;
    let curve = stats::variance_time(series, &grid)?;
    let estimate = fit_variance_time(&curve, m_min, m_max.unwrap_or(n / 10))?;
    Ok(Analysis {
        n_bins: n,
        delta: series.delta(),
        moments: stats::moments(series)?,
        curve,
        estimate,
    })
}

/// Convenience wrapper returning only H.
pub fn estimate_h(series: &CountSeries) -> Result<f64, HurstError> {
    Ok(analyze(series, DEFAULT_M_MIN, None)?.estimate.h)
}

pub fn write_report<W: Write + ?Sized>(out: &mut W, a: &Analysis) -> std::io::Result<()> {
    let e = &a.estimate;
    writeln!(out, "n_bins={}", a.n_bins)?;
    writeln!(out, "delta={}", sig6(a.delta))?;
    writeln!(out, "mean={}", sig6(a.moments.mean))?;
    writeln!(out, "variance={}", sig6(a.moments.variance))?;
    writeln!(out, "std={}", sig6(a.moments.std))?;
    writeln!(out, "H={}", sig6(e.h))?;
    writeln!(out, "ci_low={}", sig6(e.ci_low))?;
    writeln!(out, "ci_high={}", sig6(e.ci_high))?;
    writeln!(out, "r_squared={}", sig6(e.r_squared))?;
    writeln!(out, "slope={}", sig6(e.slope))?;
    writeln!(out, "m_min={}", e.m_min_used)?;
    writeln!(out, "m_max={}", e.m_max_used)?;
    Ok(())
}
