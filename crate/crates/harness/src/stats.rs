use adapt_core::engine::Domain;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::record::PlaytraceRecord;

pub const SUDOKU_CUTOFF_SECONDS: f64 = 3000.0;
pub const ROGUELIKE_CUTOFF_SECONDS: f64 = 60.0;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    Empty,
    #[error("each sample needs at least two values (got {0} and {1})")]
    TooFew(usize, usize),
    #[error("both samples have zero variance")]
    ZeroVariance,
}

/// Mean absolute deviation of `times` from `goal`.
pub fn mae(times: &[f64], goal: f64) -> Result<f64, StatsError> {
    if times.is_empty() {
        return Err(StatsError::Empty);
    }
    Ok(times.iter().map(|t| (t - goal).abs()).sum::<f64>() / times.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Welch {
    pub t: f64,
    pub dof: f64,
    /// Two-tailed.
    pub p: f64,
}

impl Welch {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p < alpha
    }
}

/// Unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<Welch, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFew(a.len(), b.len()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (std_dev(a).powi(2) / na, std_dev(b).powi(2) / nb);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let dof = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let p = if t == 0.0 {
        1.0
    } else {
        beta_reg(dof / 2.0, 0.5, dof / (dof + t * t)).clamp(0.0, 1.0)
    };
    Ok(Welch { t, dof, p })
}

pub fn default_cutoff(domain: Domain) -> f64 {
    match domain {
        Domain::Sudoku => SUDOKU_CUTOFF_SECONDS,
        Domain::Roguelike => ROGUELIKE_CUTOFF_SECONDS,
    }
}

/// Keeps solved records at or below the domain's time cutoff.
pub fn filter_outliers(records: &[PlaytraceRecord], domain: Domain) -> Vec<PlaytraceRecord> {
    filter_outliers_with(records, default_cutoff(domain))
}

pub fn filter_outliers_with(records: &[PlaytraceRecord], cutoff_seconds: f64) -> Vec<PlaytraceRecord> {
    records
        .iter()
        .filter(|r| r.solved && r.elapsed_seconds() <= cutoff_seconds)
        .cloned()
        .collect()
}
