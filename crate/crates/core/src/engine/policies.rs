//! Baseline content-selection rules. Each returns a candidate index into
//! the design space.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::EngineError;
use crate::design::DesignSpace;
use crate::gp::PriorMean;

/// Picks uniformly among tied candidate indices; no draw when unique.
pub(crate) fn pick<R: Rng + ?Sized>(indices: &[usize], rng: &mut R) -> usize {
    match indices {
        [only] => *only,
        _ => indices[rng.random_range(0..indices.len())],
    }
}

/// Current binary-search interval over a 1-D space.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SearchBounds {
    pub lo: f64,
    pub hi: f64,
}

impl SearchBounds {
    pub fn midpoint(&self) -> f64 {
        ((self.lo + self.hi) / 2.0).ceil()
    }

    /// Halves toward harder content (smaller x) when the player was faster
    /// than the goal, toward easier content otherwise.
    pub fn update(&mut self, served: f64, elapsed: f64, goal: f64) {
        let m = served.clamp(self.lo, self.hi);
        if elapsed < goal {
            self.hi = m;
        } else {
            self.lo = m;
        }
    }
}

pub fn binary_search_next(bounds: SearchBounds, space: &DesignSpace) -> Result<usize, EngineError> {
    if bounds.lo > bounds.hi {
        return Err(EngineError::InvalidBounds {
            lo: bounds.lo,
            hi: bounds.hi,
        });
    }
    if space.dim() != 1 {
        return Err(EngineError::PolicyDomain("binary search needs a 1-D space"));
    }
    let nearest = space.nearest(&[bounds.midpoint()]);
    // Prefer the candidate at the lower index on ties; the space is a lattice.
    nearest.first().copied().ok_or(EngineError::EmptySpace)
}

/// Fitted line `log t = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLinearFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LogLinearFit {
    pub fn predict_log(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Average slope of `log mu0` across the space's range.
pub fn prior_log_slope(prior: &PriorMean, space: &DesignSpace) -> f64 {
    let (lo, hi) = (space.lower()[0], space.upper()[0]);
    if hi > lo {
        (prior.log_seconds(&[hi]) - prior.log_seconds(&[lo])) / (hi - lo)
    } else {
        0.0
    }
}

/// Least squares of `log t` on `x`. One point, or points sharing one `x`,
/// fall back to `fallback_slope` through the mean.
pub fn fit_log_linear(observations: &[(f64, f64)], fallback_slope: f64) -> Option<LogLinearFit> {
    if observations.is_empty() {
        return None;
    }
    let n = observations.len() as f64;
    let mx = observations.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = observations.iter().map(|(_, t)| t.ln()).sum::<f64>() / n;
    let sxx: f64 = observations.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = observations
        .iter()
        .map(|(x, t)| (x - mx) * (t.ln() - my))
        .sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { fallback_slope };
    Some(LogLinearFit {
        intercept: my - slope * mx,
        slope,
    })
}

/// Candidate whose predicted seconds are closest to the goal. Empty history
/// predicts with the prior. Ties go to the longer prediction.
pub fn linear_regression_next(
    observations: &[(f64, f64)],
    prior: &PriorMean,
    space: &DesignSpace,
    goal: f64,
) -> Result<usize, EngineError> {
    if space.dim() != 1 {
        return Err(EngineError::PolicyDomain("linear regression needs a 1-D space"));
    }
    let fit = fit_log_linear(observations, prior_log_slope(prior, space));
    let predict = |x: f64| match fit {
        Some(f) => f.predict_log(x),
        None => prior.log_seconds(&[x]),
    };
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, c) in space.candidates().iter().enumerate() {
        let lp = predict(c.point.coords()[0]);
        let err = (lp.exp() - goal).abs();
        let better = match best {
            None => true,
            Some((_, e, l)) => err < e || (err == e && lp > l),
        };
        if better {
            best = Some((i, err, lp));
        }
    }
    best.map(|(i, _, _)| i).ok_or(EngineError::EmptySpace)
}

/// Gaussian step from `center`, clamped to the space's box, snapped to the
/// nearest candidate (ties drawn at random).
pub fn noisy_hillclimb_next<R: Rng + ?Sized>(
    center: &[f64],
    step_sigma: &[f64],
    space: &DesignSpace,
    rng: &mut R,
) -> Result<usize, EngineError> {
    if space.is_empty() {
        return Err(EngineError::EmptySpace);
    }
    let proposal: Vec<f64> = center
        .iter()
        .zip(step_sigma)
        .enumerate()
        .map(|(d, (c, s))| {
            let step = if *s > 0.0 {
                Normal::new(0.0, *s).expect("finite sigma").sample(rng)
            } else {
                0.0
            };
            (c + step).clamp(space.lower()[d], space.upper()[d])
        })
        .collect();
    Ok(pick(&space.nearest(&proposal), rng))
}

/// Default hill-climb step: 10% of each dimension's range.
pub fn default_step_sigma(space: &DesignSpace) -> Vec<f64> {
    space
        .lower()
        .iter()
        .zip(space.upper())
        .map(|(lo, hi)| 0.1 * (hi - lo))
        .collect()
}
