#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use adapt_core::roguelike::{build_corpus, Corpus};
use adapt_core::sudoku::{self, Grid};
use adapt_core::SessionRng;
use adapt_service::{Clock, Content, Serve, Service, ServiceConfig, SubmitResult};
use rand::SeedableRng;

pub const START_MS: u64 = 1_700_000_000_000;

#[derive(Clone)]
pub struct ManualClock(Arc<AtomicU64>);

impl ManualClock {
    pub fn new() -> Self {
        ManualClock(Arc::new(AtomicU64::new(START_MS)))
    }

    pub fn clock(&self) -> Clock {
        let t = Arc::clone(&self.0);
        Arc::new(move || t.load(Ordering::SeqCst))
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

/// Small corpus shared by every test in a binary.
pub fn corpus() -> Arc<Corpus> {
    static CORPUS: OnceLock<Arc<Corpus>> = OnceLock::new();
    Arc::clone(CORPUS.get_or_init(|| {
        let mut rng = SessionRng::seed_from_u64(11);
        Arc::new(build_corpus(120, &mut rng).unwrap())
    }))
}

pub fn config(seed: u64, clock: &ManualClock, log: Option<&Path>) -> ServiceConfig {
    let mut cfg = ServiceConfig::new(seed, corpus());
    cfg.clock = clock.clock();
    cfg.log_path = log.map(Path::to_path_buf);
    cfg
}

pub fn service(seed: u64, clock: &ManualClock, log: Option<&Path>) -> Service {
    Service::start(config(seed, clock, log)).unwrap()
}

pub fn solution_for(serve: &Serve) -> Grid {
    match &serve.content {
        Content::Sudoku { givens, .. } => sudoku::solve(givens).expect("served puzzles are solvable"),
        other => panic!("not a sudoku payload: {other:?}"),
    }
}

/// A deterministic player: time grows with difficulty.
pub fn play_seconds(serve: &Serve) -> f64 {
    let x = serve.design_point.coords();
    match &serve.content {
        Content::Sudoku { .. } => 20.0 * (0.07 * (80.0 - x[0])).exp(),
        Content::Roguelike { .. } => 0.8 + 0.4 * x[0] + 0.2 * x[1],
    }
}

/// A correct result for `serve`, taking [`play_seconds`].
pub fn honest_result(serve: &Serve) -> SubmitResult {
    let solution = match serve.content {
        Content::Sudoku { .. } => Some(solution_for(serve).to_string()),
        Content::Roguelike { .. } => None,
    };
    SubmitResult {
        content_id: serve.content_id.clone(),
        elapsed_ms: (play_seconds(serve) * 1000.0).round() as u64,
        solved: true,
        solution,
    }
}

/// Plays `serve` honestly: the clock runs for the play time, then the result
/// is submitted.
pub fn play(svc: &Service, clock: &ManualClock, serve: &Serve) -> adapt_service::Submitted {
    let result = honest_result(serve);
    clock.advance(result.elapsed_ms + 500);
    svc.submit_result(&serve.session_id, result).unwrap()
}
