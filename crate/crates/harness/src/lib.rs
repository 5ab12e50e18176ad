//! Offline experiments: simulated players run every policy end to end and
//! the results are scored the way the human studies were.

pub mod config;
pub mod experiment;
pub mod output;
pub mod population;
pub mod record;
pub mod sim;
pub mod stats;

pub use config::{ConfigError, ExperimentConfig};
pub use experiment::{run_experiment, ExperimentError, ExperimentRun, MaeReport, MaeRow, WelchRow};
pub use output::write_outputs;
pub use population::{fit_population_model, model_curve, CurvePoint};
pub use record::PlaytraceRecord;
pub use sim::SimPlayer;
pub use stats::{filter_outliers, filter_outliers_with, mae, welch_t_test, StatsError, Welch};
