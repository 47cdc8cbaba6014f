//! Evaluation quantities: adaptation regret, pool strength and diversity,
//! robust aggregation and perfect-score rate. Everything here is a pure
//! function of its inputs.

mod matrix;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::CrossPlayMatrix;
pub use report::{
    build_report, pool_metrics, AdaptationReport, AggregateCurves, PartnerAdaptation, PartnerInput, PoolMetrics, UpperBound,
    INTERPOLATION_RULE,
};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("trace covers {have} episodes, {need} requested")]
    TraceTooShort { have: usize, need: usize },
    #[error("need at least {need} agents, got {have}")]
    TooFewAgents { have: usize, need: usize },
    #[error("empty input")]
    Empty,
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("curves are not aligned: {0}")]
    Misaligned(String),
}

/// Total and average adaptation regret over the first `horizon` entries of a
/// per-episode score trace: `horizon * c_star - sum`, and that divided by
/// `horizon`.
pub fn adaptation_regret(trace: &[f64], c_star: f64, horizon: usize) -> Result<(f64, f64), MetricsError> {
    if trace.is_empty() || horizon == 0 {
        return Err(MetricsError::EmptyTrace);
    }
    if trace.len() < horizon {
        return Err(MetricsError::TraceTooShort { have: trace.len(), need: horizon });
    }
    let total = horizon as f64 * c_star - trace[..horizon].iter().sum::<f64>();
    Ok((total, total / horizon as f64))
}

/// Per-episode scores from sparse evaluations: episode `t` takes the value of
/// the latest evaluation at or before `t`. The first evaluation must be at
/// episode 0.
pub fn expand_trace(points: &[(usize, f64)], horizon: usize) -> Result<Vec<f64>, MetricsError> {
    match points.first() {
        None => return Err(MetricsError::EmptyTrace),
        Some(&(e, _)) if e != 0 => return Err(MetricsError::Misaligned("first evaluation must be at episode 0".into())),
        _ => {}
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(MetricsError::Misaligned("episode indices must increase strictly".into()));
    }
    let mut out = Vec::with_capacity(horizon);
    let mut k = 0;
    for t in 0..horizon {
        while k + 1 < points.len() && points[k + 1].0 <= t {
            k += 1;
        }
        out.push(points[k].1);
    }
    Ok(out)
}

/// Cumulative regret at every horizon `1..=trace.len()`: `(total, average)`.
pub fn regret_curve(trace: &[f64], c_star: f64) -> Vec<(f64, f64)> {
    let mut sum = 0.0;
    trace
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            sum += c;
            let t = (i + 1) as f64;
            let total = t * c_star - sum;
            (total, total / t)
        })
        .collect()
}

/// `1 - mean off-diagonal score / max_score` of an `n x n` score matrix.
pub fn diversity(means: &[Vec<f64>], max_score: f64) -> Result<f64, MetricsError> {
    let n = means.len();
    if n < 2 {
        return Err(MetricsError::TooFewAgents { have: n, need: 2 });
    }
    let mut off = 0.0;
    for (i, row) in means.iter().enumerate() {
        if row.len() != n {
            return Err(MetricsError::Misaligned("matrix is not square".into()));
        }
        off += row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum::<f64>();
    }
    Ok(1.0 - off / ((n * n - n) as f64 * max_score))
}

/// Per-partner strength `C*_j / max_score` and their mean.
pub fn strength(c_stars: &[f64], max_score: f64) -> Result<(Vec<f64>, f64), MetricsError> {
    if c_stars.is_empty() {
        return Err(MetricsError::Empty);
    }
    if let Some(c) = c_stars.iter().find(|&&c| !(0.0..=max_score).contains(&c)) {
        return Err(MetricsError::OutOfRange(format!("upper bound {c} outside [0, {max_score}]")));
    }
    let per: Vec<f64> = c_stars.iter().map(|c| c / max_score).collect();
    let pool = per.iter().sum::<f64>() / per.len() as f64;
    Ok((per, pool))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Mean,
    Iqm,
}

/// Inter-quartile mean: drop `floor(M/4)` values from each end after sorting.
pub fn iqm(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let trim = sorted.len() / 4;
    let kept = &sorted[trim..sorted.len() - trim];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

pub fn mean(values: &[f64]) -> Result<f64, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Pointwise aggregation of equally long curves.
pub fn aggregate(curves: &[Vec<f64>], mode: Aggregator) -> Result<Vec<f64>, MetricsError> {
    let first = curves.first().ok_or(MetricsError::Empty)?;
    if curves.iter().any(|c| c.len() != first.len()) {
        return Err(MetricsError::Misaligned("curves differ in length".into()));
    }
    (0..first.len())
        .map(|i| {
            let column: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            match mode {
                Aggregator::Mean => mean(&column),
                Aggregator::Iqm => iqm(&column),
            }
        })
        .collect()
}

/// Fraction of games that reached `max_score`.
pub fn perfect_rate(scores: &[u32], max_score: u32) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(scores.iter().filter(|&&s| s == max_score).count() as f64 / scores.len() as f64)
}
