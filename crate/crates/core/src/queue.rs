//! Trace-driven FIFO queue with one server, infinite buffer and deterministic
//! service, driven by an interarrival series.
//!
//! Waiting times follow the Lindley recursion
//! `W_1 = 0, W_{i+1} = max(0, W_i + S - A_{i+1})`, where customer `i` is
//! preceded by gap `A_i` of the series; the first gap only positions the first
//! customer, who finds the system empty.

use std::io::Write;

use rayon::prelude::*;
use thiserror::Error;

use crate::fmt::sig6;
use crate::trace::InterarrivalSeries;

pub const DEFAULT_WARMUP: f64 = 0.1;
pub const DEFAULT_KNEE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum QueueError {
    #[error("utilization must lie in (0, 1), got {0}")]
    InvalidUtilization(f64),
    #[error("mean interarrival time is zero")]
    ZeroMeanGap,
    #[error("service time must be positive, got {0}")]
    InvalidService(f64),
    #[error("warm-up fraction must lie in [0, 1), got {0}")]
    InvalidWarmup(f64),
    #[error("need at least {needed} customers, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("service time {service} is not below the mean gap {mean_gap}")]
    UnstableSystem { service: f64, mean_gap: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invalid utilization grid: {0}")]
    InvalidGrid(String),
    #[error("curve has no points")]
    EmptyCurve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueRunResult {
    pub utilization: f64,
    pub service_time: f64,
    pub mean_wait: f64,
    /// Wait plus service.
    pub mean_delay: f64,
    pub n_served: usize,
    pub warmup_discarded: usize,
}

impl QueueRunResult {
    pub fn normalized_delay(&self) -> f64 {
        self.mean_delay / self.service_time
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub utilization: f64,
    /// Mean delay in units of the service time.
    pub mean_delay_norm: f64,
    pub mean_wait: f64,
    pub service_time: f64,
    /// Customers averaged over; 0 for analytic curves.
    pub n_served: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub label: String,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Knee {
    At(f64),
    NoKnee,
}

impl Knee {
    pub fn utilization(&self) -> Option<f64> {
        match self {
            Knee::At(u) => Some(*u),
            Knee::NoKnee => None,
        }
    }

    /// Utilization for ordering purposes; a curve that never crosses the
    /// threshold ranks above every crossing.
    pub fn rank(&self) -> f64 {
        self.utilization().unwrap_or(f64::INFINITY)
    }
}

pub fn service_for_utilization(series: &InterarrivalSeries, rho: f64) -> Result<f64, QueueError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(QueueError::InvalidUtilization(rho));
    }
    let mean = series.mean();
    if !(mean > 0.0) {
        return Err(QueueError::ZeroMeanGap);
    }
    Ok(rho * mean)
}

/// Runs the recursion over every customer and returns the waiting times.
pub fn lindley_waits(gaps: &[f64], service_time: f64) -> Vec<f64> {
    let mut waits = Vec::with_capacity(gaps.len());
    let mut w = 0.0;
    for (i, &a) in gaps.iter().enumerate() {
        if i > 0 {
            w = (w + service_time - a).max(0.0);
        }
        waits.push(w);
    }
    waits
}

/// Mean wait and delay after discarding the first `warmup_fraction` of the
/// customers. One customer per gap of the series.
pub fn simulate_gd1(
    series: &InterarrivalSeries,
    service_time: f64,
    warmup_fraction: f64,
) -> Result<QueueRunResult, QueueError> {
    if !(service_time > 0.0 && service_time.is_finite()) {
        return Err(QueueError::InvalidService(service_time));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(QueueError::InvalidWarmup(warmup_fraction));
    }
    let gaps = series.values();
    let n = gaps.len();
    if n < 2 {
        return Err(QueueError::TooFewSamples { needed: 2, got: n });
    }
    let discard = ((n as f64) * warmup_fraction).floor() as usize;
    let discard = discard.min(n - 1);

    // single pass, accumulating only after the warm-up
    let mut w = 0.0;
    let mut sum = 0.0;
    for (i, &a) in gaps.iter().enumerate() {
        if i > 0 {
            w = (w + service_time - a).max(0.0);
        }
        if i >= discard {
            sum += w;
        }
    }
    let n_served = n - discard;
    let mean_wait = sum / n_served as f64;
    let mean = series.mean();
    Ok(QueueRunResult {
        utilization: if mean > 0.0 { service_time / mean } else { f64::INFINITY },
        service_time,
        mean_wait,
        mean_delay: mean_wait + service_time,
        n_served,
        warmup_discarded: discard,
    })
}

/// Two-moment (Kingman) approximation of the mean wait in a GI/D/1 queue:
/// `(rho / (1 - rho)) * (Ca^2 / 2) * S` with `Ca^2 = var / mean^2`.
pub fn kingman_gg1(mean_gap: f64, var_gap: f64, service_time: f64) -> Result<f64, QueueError> {
    if !(mean_gap > 0.0 && mean_gap.is_finite()) {
        return Err(QueueError::InvalidInput(format!("mean gap {mean_gap}")));
    }
    if !(var_gap >= 0.0 && var_gap.is_finite()) {
        return Err(QueueError::InvalidInput(format!("gap variance {var_gap}")));
    }
    if !(service_time > 0.0) {
        return Err(QueueError::InvalidService(service_time));
    }
    if service_time >= mean_gap {
        return Err(QueueError::UnstableSystem { service: service_time, mean_gap });
    }
    let rho = service_time / mean_gap;
    let ca2 = var_gap / (mean_gap * mean_gap);
    let cs2 = 0.0;
    Ok(rho / (1.0 - rho) * (ca2 + cs2) / 2.0 * service_time)
}

fn check_grid(rho_grid: &[f64]) -> Result<(), QueueError> {
    if rho_grid.is_empty() {
        return Err(QueueError::InvalidGrid("empty grid".into()));
    }
    if let Some(&r) = rho_grid.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(QueueError::InvalidGrid(format!("{r} is outside (0, 1)")));
    }
    if let Some(w) = rho_grid.windows(2).find(|w| w[1] <= w[0]) {
        return Err(QueueError::InvalidGrid(format!("{} does not follow {}", w[1], w[0])));
    }
    Ok(())
}

/// Default utilization grid 0.10, 0.15, ..., 0.90.
pub fn default_rho_grid() -> Vec<f64> {
    rho_grid(0.1, 0.9, 0.05)
}

/// Arithmetic grid from `lo` to `hi` inclusive, values rounded to 1e-9 so that
/// printed grids are clean.
pub fn rho_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || hi < lo {
        return Vec::new();
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n)
        .map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9)
        .collect()
}

/// One simulation per utilization; points run in parallel and come back in
/// grid order.
pub fn sweep(
    series: &InterarrivalSeries,
    rho_grid: &[f64],
    warmup_fraction: f64,
    label: &str,
) -> Result<SweepCurve, QueueError> {
    check_grid(rho_grid)?;
    let points = rho_grid
        .par_iter()
        .map(|&rho| {
            let s = service_for_utilization(series, rho)?;
            let r = simulate_gd1(series, s, warmup_fraction)?;
            Ok(SweepPoint {
                utilization: rho,
                mean_delay_norm: r.normalized_delay(),
                mean_wait: r.mean_wait,
                service_time: s,
                n_served: r.n_served,
            })
        })
        .collect::<Result<Vec<_>, QueueError>>()?;
    Ok(SweepCurve {
        label: label.to_string(),
        points,
    })
}

/// The analytic two-moment curve for the gaps of `series`.
pub fn sweep_kingman(series: &InterarrivalSeries, rho_grid: &[f64], label: &str) -> Result<SweepCurve, QueueError> {
    check_grid(rho_grid)?;
    let gaps = series.values();
    let mean = series.mean();
    if !(mean > 0.0) {
        return Err(QueueError::ZeroMeanGap);
    }
    let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / gaps.len() as f64;
    let points = rho_grid
        .iter()
        .map(|&rho| {
            let s = rho * mean;
            let w = kingman_gg1(mean, var, s)?;
            Ok(SweepPoint {
                utilization: rho,
                mean_delay_norm: (w + s) / s,
                mean_wait: w,
                service_time: s,
                n_served: 0,
            })
        })
        .collect::<Result<Vec<_>, QueueError>>()?;
    Ok(SweepCurve {
        label: label.to_string(),
        points,
    })
}

/// Lowest grid utilization whose normalized delay exceeds `threshold`.
pub fn knee(curve: &SweepCurve, threshold: f64) -> Result<Knee, QueueError> {
    if curve.points.is_empty() {
        return Err(QueueError::EmptyCurve);
    }
    if !(threshold > 1.0) {
        return Err(QueueError::InvalidInput(format!("knee threshold {threshold} must exceed 1")));
    }
    Ok(curve
        .points
        .iter()
        .find(|p| p.mean_delay_norm > threshold)
        .map_or(Knee::NoKnee, |p| Knee::At(p.utilization)))
}

pub const SWEEP_CSV_HEADER: &str = "label,utilization,mean_delay_norm,mean_wait,service_time,n_served";

pub fn write_sweep_rows<W: Write + ?Sized>(out: &mut W, curve: &SweepCurve) -> std::io::Result<()> {
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            curve.label,
            sig6(p.utilization),
            sig6(p.mean_delay_norm),
            sig6(p.mean_wait),
            sig6(p.service_time),
            p.n_served
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaps(v: &[f64]) -> InterarrivalSeries {
        InterarrivalSeries::new(v.to_vec(), 0.0).unwrap()
    }

    #[test]
    fn service_time_examples() {
        let s = gaps(&[10.0; 20]);
        assert_eq!(service_for_utilization(&s, 0.5).unwrap(), 5.0);
        assert_eq!(service_for_utilization(&s, 1.0), Err(QueueError::InvalidUtilization(1.0)));
        assert_eq!(service_for_utilization(&s, 0.0), Err(QueueError::InvalidUtilization(0.0)));
        assert_eq!(service_for_utilization(&gaps(&[0.0; 5]), 0.5), Err(QueueError::ZeroMeanGap));
    }

    #[test]
    fn constant_gaps_never_wait() {
        let r = simulate_gd1(&gaps(&[10.0; 200]), 5.0, 0.1).unwrap();
        assert_eq!(r.mean_wait, 0.0);
        assert_eq!(r.mean_delay, 5.0);
        assert_eq!((r.n_served, r.warmup_discarded), (180, 20));
    }

    #[test]
    fn hand_recursion() {
        assert_eq!(lindley_waits(&[1.0, 1.0, 1.0], 2.0), vec![0.0, 1.0, 2.0]);
        let r = simulate_gd1(&gaps(&[1.0, 1.0, 1.0]), 2.0, 0.0).unwrap();
        assert_eq!(r.mean_wait, 1.0);
        assert_eq!(r.mean_delay, 3.0);
        // backlog builds over two short gaps, then a long gap drains it
        assert_eq!(lindley_waits(&[9.0, 1.0, 1.0, 10.0, 0.5], 3.0), vec![0.0, 2.0, 4.0, 0.0, 2.5]);
    }

    #[test]
    fn simulate_rejects_bad_input() {
        let s = gaps(&[1.0; 10]);
        assert_eq!(simulate_gd1(&s, 0.0, 0.1), Err(QueueError::InvalidService(0.0)));
        assert_eq!(simulate_gd1(&s, 1.0, 1.0), Err(QueueError::InvalidWarmup(1.0)));
        assert!(matches!(simulate_gd1(&gaps(&[1.0]), 1.0, 0.0), Err(QueueError::TooFewSamples { .. })));
    }

    #[test]
    fn kingman_examples() {
        // exponential gaps: Ca^2 = 1, rho = 0.5 -> 0.5 S
        let w = kingman_gg1(2.0, 4.0, 1.0).unwrap();
        assert!((w - 0.5).abs() < 1e-15);
        assert_eq!(kingman_gg1(2.0, 0.0, 1.5).unwrap(), 0.0);
        assert_eq!(
            kingman_gg1(2.0, 1.0, 2.0),
            Err(QueueError::UnstableSystem { service: 2.0, mean_gap: 2.0 })
        );
    }

    #[test]
    fn sweep_grid_validation() {
        let s = gaps(&[1.0; 200]);
        assert!(matches!(sweep(&s, &[0.9, 0.5], 0.1, "A"), Err(QueueError::InvalidGrid(_))));
        assert!(matches!(sweep(&s, &[0.5, 1.0], 0.1, "A"), Err(QueueError::InvalidGrid(_))));
        assert!(matches!(sweep(&s, &[], 0.1, "A"), Err(QueueError::InvalidGrid(_))));
    }

    #[test]
    fn deterministic_input_has_unit_delay() {
        let c = sweep(&gaps(&[3.0; 500]), &default_rho_grid(), 0.1, "det").unwrap();
        assert_eq!(c.points.len(), 17);
        assert!(c.points.iter().all(|p| p.mean_delay_norm == 1.0));
    }

    #[test]
    fn default_grid_is_clean() {
        let g = default_rho_grid();
        assert_eq!(g.len(), 17);
        assert_eq!(g[1], 0.15);
        assert_eq!(g[16], 0.9);
    }

    #[test]
    fn knee_examples() {
        let curve = |d: &[f64]| SweepCurve {
            label: "x".into(),
            points: [0.3, 0.5, 0.7, 0.9]
                .iter()
                .zip(d)
                .map(|(&u, &d)| SweepPoint {
                    utilization: u,
                    mean_delay_norm: d,
                    mean_wait: 0.0,
                    service_time: 1.0,
                    n_served: 1,
                })
                .collect(),
        };
        assert_eq!(knee(&curve(&[1.1, 2.0, 15.0, 40.0]), 10.0).unwrap(), Knee::At(0.7));
        assert_eq!(knee(&curve(&[1.1, 2.0, 3.0, 4.0]), 10.0).unwrap(), Knee::NoKnee);
        let empty = SweepCurve { label: "e".into(), points: vec![] };
        assert_eq!(knee(&empty, 10.0), Err(QueueError::EmptyCurve));
        assert!(Knee::At(0.9).rank() < Knee::NoKnee.rank());
    }

    #[test]
    fn sweep_csv_rows() {
        let c = sweep_kingman(&gaps(&[1.0, 3.0, 1.0, 3.0]), &[0.5], "B").unwrap();
        let mut buf = Vec::new();
        write_sweep_rows(&mut buf, &c).unwrap();
        // mean 2, var 1, Ca^2 = 0.25, S = 1 -> W = 1 * 0.125
        assert_eq!(String::from_utf8(buf).unwrap(), "B,0.5,1.125,0.125,1,0\n");
    }
}
