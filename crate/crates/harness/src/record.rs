use adapt_core::engine::{Domain, Observation};
use adapt_core::DesignPoint;
use serde::{Deserialize, Serialize};

/// One served item and its outcome, as persisted in playtrace logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaytraceRecord {
    pub session_id: String,
    pub domain: Domain,
    pub policy: String,
    /// 1-based position in the session.
    pub iteration: u32,
    pub design_point: DesignPoint,
    pub content_id: String,
    pub elapsed_ms: u64,
    pub solved: bool,
    /// UTC milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
}

impl PlaytraceRecord {
    pub fn elapsed_seconds(&self) -> f64 {
        self.elapsed_ms as f64 / 1000.0
    }

    pub fn observation(&self) -> Observation {
        Observation {
            design_point: self.design_point.clone(),
            content_id: self.content_id.clone(),
            elapsed: self.elapsed_seconds(),
            solved: self.solved,
            recorded_at: self.timestamp_ms,
        }
    }
}

/// Milliseconds, rounded and kept strictly positive.
pub fn seconds_to_ms(seconds: f64) -> u64 {
    (seconds * 1000.0).round().max(1.0) as u64
}
