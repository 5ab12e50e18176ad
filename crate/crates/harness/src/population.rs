//! A single GP over every player's solved records.

use std::fmt::Write as _;

use adapt_core::design::{DesignPoint, DesignSpace};
use adapt_core::engine::{fit_player_model, AdaptationContext, EngineError};
use adapt_core::gp::{GpError, GpModel, KernelSpec};
use serde::{Deserialize, Serialize};

use crate::record::PlaytraceRecord;

/// Points used for the hyperparameter search.
pub const HYPER_SUBSAMPLE: usize = 200;
/// Points in the final fit; the Cholesky cost is cubic in this.
pub const FIT_SUBSAMPLE: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub design_point: DesignPoint,
    pub predicted_seconds: f64,
    /// Posterior standard deviation of log-seconds.
    pub std_log: f64,
}

/// Evenly strided deterministic subset of at most `cap` items.
fn stride<T: Clone>(items: &[T], cap: usize) -> Vec<T> {
    if items.len() <= cap {
        return items.to_vec();
    }
    (0..cap).map(|i| items[i * items.len() / cap].clone()).collect()
}

/// Pools the solved records. Up to [`HYPER_SUBSAMPLE`] points this is
/// exactly the per-player model; beyond it the hyperparameters come from a
/// strided subsample and the final fit uses at most [`FIT_SUBSAMPLE`] points.
pub fn fit_population_model(
    records: &[PlaytraceRecord],
    ctx: &AdaptationContext,
    kernel: &KernelSpec,
) -> Result<GpModel, EngineError> {
    let data: Vec<(DesignPoint, f64)> = records
        .iter()
        .filter(|r| r.solved)
        .map(|r| (r.design_point.clone(), r.elapsed_seconds()))
        .collect();
    if data.is_empty() {
        return Err(EngineError::Gp(GpError::Unfitted));
    }
    let tuned = fit_player_model(ctx, kernel, &stride(&data, HYPER_SUBSAMPLE))?;
    if data.len() <= HYPER_SUBSAMPLE {
        return Ok(tuned);
    }
    Ok(GpModel::fit_with(
        ctx.prior.clone(),
        tuned.kernel().clone(),
        tuned.noise(),
        ctx.space.normalizer(),
        &stride(&data, FIT_SUBSAMPLE),
    )?)
}

/// Posterior at every distinct point of `space`.
pub fn model_curve(model: &GpModel, space: &DesignSpace) -> Result<Vec<CurvePoint>, GpError> {
    space
        .unique_points()
        .into_iter()
        .map(|(p, _)| {
            let post = model.posterior(&p)?;
            Ok(CurvePoint {
                design_point: p,
                predicted_seconds: post.seconds(),
                std_log: post.std,
            })
        })
        .collect()
}

pub fn curve_csv(curve: &[CurvePoint]) -> String {
    let dim = curve.first().map(|c| c.design_point.dim()).unwrap_or(1);
    let mut out = String::new();
    for d in 0..dim {
        let _ = write!(out, "x{},", d + 1);
    }
    out.push_str("predicted_seconds,std_log\n");
    for c in curve {
        for v in c.design_point.coords() {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{:.6},{:.6}", c.predicted_seconds, c.std_log);
    }
    out
}
