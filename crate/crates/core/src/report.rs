//! Per-condition learning slopes over trials.

use thiserror::Error;

use crate::condition::NoiseCondition;
use crate::numeric::lstsq;
use crate::trial_sim::protocol::DatasetRow;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("condition {condition} has {got} trials; need at least 3")]
    InsufficientTrials { condition: NoiseCondition, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    ErrorDeg,
    UMean,
    USet,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::ErrorDeg => "error_deg",
            Metric::UMean => "u_mean",
            Metric::USet => "u_set",
        }
    }

    fn of(self, r: &DatasetRow) -> f64 {
        match self {
            Metric::ErrorDeg => r.error_deg,
            Metric::UMean => r.u_mean,
            Metric::USet => r.u_set,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slope {
    pub condition: NoiseCondition,
    pub metric: Metric,
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Least-squares slope of `metric` against the within-block trial number,
/// per condition present among the interaction trials.
pub fn slope_report(rows: &[DatasetRow], metric: Metric) -> Result<Vec<Slope>, ReportError> {
    let mut out = Vec::new();
    for condition in NoiseCondition::all() {
        let pts: Vec<(f64, f64)> =
            rows.iter().filter(|r| !r.solo && r.condition == condition).map(|r| (r.trial as f64, metric.of(r))).collect();
        if pts.is_empty() {
            continue;
        }
        let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        if pts.len() < 3 || xs.len() < 2 {
            return Err(ReportError::InsufficientTrials { condition, got: pts.len() });
        }
        let design: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, 1.0]).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let c = lstsq(&design, &y).expect("distinct trial numbers give full rank");
        out.push(Slope { condition, metric, slope: c[0], intercept: c[1], n: pts.len() });
    }
    Ok(out)
}
