use std::fs;
use std::io::Write;
use std::path::Path;

use crate::experiment::{ExperimentError, ExperimentRun};
use crate::population::{curve_csv, fit_population_model, model_curve};
use crate::stats::filter_outliers_with;

pub const MAE_REPORT: &str = "mae_report.csv";
pub const PLAYTRACES: &str = "playtraces.jsonl";
pub const POPULATION_MODEL: &str = "population_model.csv";

/// Writes the report, every playtrace, and the pooled model curve. The
/// curve is fitted to the FBCA arm's records that survive the outlier
/// cutoff, or to every arm's when FBCA was not run.
pub fn write_outputs(run: &ExperimentRun, dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MAE_REPORT), run.report.to_csv())?;

    let mut traces = std::io::BufWriter::new(fs::File::create(dir.join(PLAYTRACES))?);
    for r in &run.records {
        serde_json::to_writer(&mut traces, r).map_err(std::io::Error::from)?;
        traces.write_all(b"\n")?;
    }
    traces.flush()?;

    let mut kept = filter_outliers_with(&run.records, run.config.cutoff_seconds);
    if kept.iter().any(|r| r.policy == "fbca") {
        kept.retain(|r| r.policy == "fbca");
    }
    let curve = if kept.is_empty() {
        Vec::new()
    } else {
        let model = fit_population_model(&kept, &run.context, &run.context.default_kernel)?;
        model_curve(&model, &run.context.space).map_err(adapt_core::engine::EngineError::from)?
    };
    fs::write(dir.join(POPULATION_MODEL), curve_csv(&curve))?;
    Ok(())
}
