//! Batch comparison of policies on simulated populations.

use std::fmt::Write as _;
use std::sync::Arc;

use adapt_core::engine::{AdaptationContext, Domain, EngineError, SessionState};
use adapt_core::roguelike::{self, Corpus, CorpusError};
use adapt_core::{sudoku, SessionRng};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::record::{seconds_to_ms, PlaytraceRecord};
use crate::sim::SimPlayer;
use crate::stats::{filter_outliers_with, mae, mean, std_dev, welch_t_test};

pub const OVERALL: &str = "all";
const ALPHA: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeRow {
    pub bucket: String,
    pub policy: String,
    pub mae: f64,
    pub std: f64,
    pub n: usize,
}

/// `policy` against `versus` on per-session mean absolute errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WelchRow {
    pub bucket: String,
    pub policy: String,
    pub versus: String,
    pub t: f64,
    pub dof: f64,
    pub p: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub domain: Domain,
    pub goal_seconds: f64,
    pub buckets: Vec<String>,
    pub rows: Vec<MaeRow>,
    pub comparisons: Vec<WelchRow>,
}

impl MaeReport {
    pub fn row(&self, bucket: &str, policy: &str) -> Option<&MaeRow> {
        self.rows
            .iter()
            .find(|r| r.bucket == bucket && r.policy == policy)
    }

    pub fn overall(&self, policy: &str) -> Option<&MaeRow> {
        self.row(OVERALL, policy)
    }

    pub fn comparison(&self, bucket: &str, policy: &str) -> Option<&WelchRow> {
        self.comparisons
            .iter()
            .find(|r| r.bucket == bucket && r.policy == policy)
    }

    /// One table: `kind` is `mae` or `welch`; unused columns stay empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,bucket,policy,mae,std,n,versus,t,dof,p,rejected\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "mae,{},{},{:.6},{:.6},{},,,,,",
                r.bucket, r.policy, r.mae, r.std, r.n
            );
        }
        for c in &self.comparisons {
            let _ = writeln!(
                out,
                "welch,{},{},,,,{},{:.6},{:.6},{:.6e},{}",
                c.bucket, c.policy, c.versus, c.t, c.dof, c.p, c.rejected
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub context: Arc<AdaptationContext>,
    pub report: MaeReport,
    /// Every record, in (seed, policy, player, iteration) order.
    pub records: Vec<PlaytraceRecord>,
}

/// Inclusive iteration ranges. Sudoku reports every iteration; the
/// roguelike groups them by five, with the last bucket absorbing any
/// remainder.
pub fn buckets(domain: Domain, iterations: usize) -> Vec<(usize, usize)> {
    let width = match domain {
        Domain::Sudoku => 1,
        Domain::Roguelike => 5,
    };
    let mut out = Vec::new();
    let mut start = 1;
    while start <= iterations {
        let end = start + width - 1;
        if end >= iterations || iterations - end < width {
            out.push((start, iterations));
            break;
        }
        out.push((start, end));
        start = end + 1;
    }
    out
}

fn bucket_label((a, b): (usize, usize)) -> String {
    if a == b {
        a.to_string()
    } else {
        format!("{a}-{b}")
    }
}

/// SplitMix64 finalizer folded over `parts`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243F_6A88_85A3_08D3;
    for p in parts {
        h = h.wrapping_add(*p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = h;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h = z ^ (z >> 31);
    }
    h
}

pub fn build_context(cfg: &ExperimentConfig) -> Result<AdaptationContext, ExperimentError> {
    Ok(match cfg.domain {
        Domain::Sudoku => sudoku::context(),
        Domain::Roguelike => {
            let mut rng = SessionRng::seed_from_u64(cfg.corpus_seed);
            let corpus: Corpus = roguelike::build_corpus(cfg.corpus_size, &mut rng)?;
            roguelike::context(&corpus)
        }
    })
}

#[derive(Debug, Clone, Copy)]
struct Job {
    seed: u64,
    arm: usize,
    player: usize,
}

/// Simulated player `job` from the arm's independent population.
pub fn sim_player(domain: Domain, noise_sigma: f64, seed: u64, arm: usize, player: usize) -> SimPlayer {
    let mut rng = SessionRng::seed_from_u64(derive_seed(&[seed, arm as u64, player as u64, 0]));
    SimPlayer::sample(domain, noise_sigma, &mut rng)
}

/// Runs one session for `iterations` rounds, every round solved.
#[allow(clippy::too_many_arguments)]
pub fn simulate_session(
    ctx: &Arc<AdaptationContext>,
    policy_name: &str,
    player: &SimPlayer,
    goal_seconds: f64,
    iterations: usize,
    session_id: &str,
    session_seed: u64,
    noise_seed: u64,
) -> Result<Vec<PlaytraceRecord>, EngineError> {
    let policy = ctx.default_policy(policy_name)?;
    let name = policy.name().to_string();
    let mut session = SessionState::new(session_id, Arc::clone(ctx), policy, goal_seconds, session_seed)?;
    let mut noise = SessionRng::seed_from_u64(noise_seed);
    let mut clock = 0u64;
    let mut out = Vec::with_capacity(iterations);
    for i in 1..=iterations {
        let served = session.next_content()?;
        let t = player.sample_time(served.candidate.point.coords(), &mut noise);
        let elapsed_ms = seconds_to_ms(t);
        clock += elapsed_ms;
        let record = PlaytraceRecord {
            session_id: session_id.to_string(),
            domain: ctx.domain,
            policy: name.clone(),
            iteration: i as u32,
            design_point: served.candidate.point.clone(),
            content_id: served.candidate.content_id.clone(),
            elapsed_ms,
            solved: true,
            timestamp_ms: clock,
        };
        session.record_result(record.observation())?;
        out.push(record);
    }
    Ok(out)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRun, ExperimentError> {
    cfg.validate()?;
    let ctx = Arc::new(build_context(cfg)?);
    run_experiment_in(cfg, ctx)
}

/// As [`run_experiment`] with a prebuilt context, e.g. a shared corpus.
pub fn run_experiment_in(
    cfg: &ExperimentConfig,
    ctx: Arc<AdaptationContext>,
) -> Result<ExperimentRun, ExperimentError> {
    cfg.validate()?;
    for p in &cfg.policies {
        let policy = ctx.default_policy(p)?;
        SessionState::new("check", Arc::clone(&ctx), policy, cfg.goal_seconds, 0)?;
    }
    let jobs: Vec<Job> = cfg
        .seeds
        .iter()
        .flat_map(|&seed| {
            (0..cfg.policies.len())
                .flat_map(move |arm| (0..cfg.n_players).map(move |player| Job { seed, arm, player }))
        })
        .collect();
    let sessions: Vec<Vec<PlaytraceRecord>> = jobs
        .par_iter()
        .map(|job| {
            let player = sim_player(cfg.domain, cfg.noise_sigma, job.seed, job.arm, job.player);
            let name = &cfg.policies[job.arm];
            let id = format!("{}-{}-{}", job.seed, name, job.player);
            let base = [job.seed, job.arm as u64, job.player as u64];
            simulate_session(
                &ctx,
                name,
                &player,
                cfg.goal_seconds,
                cfg.iterations,
                &id,
                derive_seed(&[base[0], base[1], base[2], 1]),
                derive_seed(&[base[0], base[1], base[2], 2]),
            )
        })
        .collect::<Result<_, _>>()?;
    let report = build_report(cfg, &sessions);
    Ok(ExperimentRun {
        config: cfg.clone(),
        context: ctx,
        report,
        records: sessions.into_iter().flatten().collect(),
    })
}

fn build_report(cfg: &ExperimentConfig, sessions: &[Vec<PlaytraceRecord>]) -> MaeReport {
    let goal = cfg.goal_seconds;
    let mut ranges = buckets(cfg.domain, cfg.iterations);
    ranges.push((1, cfg.iterations));
    let labels: Vec<String> = ranges
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if i + 1 == ranges.len() {
                OVERALL.to_string()
            } else {
                bucket_label(*r)
            }
        })
        .collect();
    // Sessions are grouped by arm in job order.
    let names: Vec<String> = cfg
        .policies
        .iter()
        .map(|p| canonical_name(p))
        .collect();
    let mut rows = Vec::new();
    let mut per_session: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); names.len()]; ranges.len()];
    for (b, &(lo, hi)) in ranges.iter().enumerate() {
        for (arm, name) in names.iter().enumerate() {
            let mut times = Vec::new();
            for s in sessions.iter().filter(|s| s.first().is_some_and(|r| &r.policy == name)) {
                let kept: Vec<f64> = filter_outliers_with(s, cfg.cutoff_seconds)
                    .iter()
                    .filter(|r| (lo..=hi).contains(&(r.iteration as usize)))
                    .map(|r| r.elapsed_seconds())
                    .collect();
                if let Ok(m) = mae(&kept, goal) {
                    per_session[b][arm].push(m);
                }
                times.extend(kept);
            }
            if times.is_empty() {
                continue;
            }
            let errors: Vec<f64> = times.iter().map(|t| (t - goal).abs()).collect();
            rows.push(MaeRow {
                bucket: labels[b].clone(),
                policy: name.clone(),
                mae: mean(&errors),
                std: std_dev(&errors),
                n: errors.len(),
            });
        }
    }
    let reference = names.iter().position(|n| n == "fbca").unwrap_or(0);
    let mut comparisons = Vec::new();
    for (b, label) in labels.iter().enumerate() {
        for (arm, name) in names.iter().enumerate() {
            if arm == reference {
                continue;
            }
            if let Ok(w) = welch_t_test(&per_session[b][arm], &per_session[b][reference]) {
                comparisons.push(WelchRow {
                    bucket: label.clone(),
                    policy: name.clone(),
                    versus: names[reference].clone(),
                    t: w.t,
                    dof: w.dof,
                    p: w.p,
                    rejected: w.rejects(ALPHA),
                });
            }
        }
    }
    MaeReport {
        domain: cfg.domain,
        goal_seconds: goal,
        buckets: labels,
        rows,
        comparisons,
    }
}

/// Policy name as recorded in playtraces (aliases collapse to one name).
fn canonical_name(alias: &str) -> String {
    let ctx_free = match alias.trim().to_ascii_lowercase().as_str() {
        "fbca" | "bayes" | "bo" => "fbca",
        "binary" | "binary_search" | "bin" => "binary",
        "linear" | "linear_regression" | "lr" => "linear",
        "hillclimb" | "noisy_hillclimb" | "nh" => "hillclimb",
        "random" | "rand" => "random",
        other => return other.to_string(),
    };
    ctx_free.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bucket_layouts() {
        let s = buckets(Domain::Sudoku, 8);
        assert_eq!(s.len(), 8);
        assert_eq!(s[7], (8, 8));
        let r = buckets(Domain::Roguelike, 35);
        assert_eq!(r.len(), 7);
        assert_eq!(r[6], (31, 35));
        assert_eq!(buckets(Domain::Roguelike, 37).last(), Some(&(31, 37)));
        assert_eq!(buckets(Domain::Roguelike, 3), vec![(1, 3)]);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(&[1, 0, 0]), derive_seed(&[1, 0, 1]));
        assert_ne!(derive_seed(&[1, 0]), derive_seed(&[0, 1]));
        assert_eq!(derive_seed(&[5, 6]), derive_seed(&[5, 6]));
    }
}
