//! Session bookkeeping behind the HTTP layer. Everything here is synchronous;
//! the router runs these calls on the blocking pool.

use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use adapt_core::design::DesignPoint;
use adapt_core::engine::{AdaptationContext, Domain, EngineError, SessionState};
use adapt_core::roguelike::{self, Corpus};
use adapt_core::sudoku::{self, Grid, SudokuPuzzle};
use adapt_core::SessionRng;
use adapt_harness::experiment::derive_seed;
use adapt_harness::{model_curve, ExperimentConfig, PlaytraceRecord};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::log::{read_log, LogError, LogLine, LogWriter, SessionOpened};

pub const SESSION_TIMEOUT_MS: u64 = 60 * 60 * 1000;
/// Allowed excess of a client-reported time over server wall-clock.
pub const CLOCK_SLACK_MS: u64 = 5_000;

/// Game seeds stay exact as JSON numbers in a browser.
const JS_SAFE_INTEGER: u64 = (1 << 53) - 1;

/// Milliseconds since the Unix epoch.
pub type Clock = Arc<dyn Fn() -> u64 + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    })
}

#[derive(Clone)]
pub struct ServiceConfig {
    /// Drives policy assignment and default session seeds.
    pub seed: u64,
    /// Policies assigned when a request names none. `None` uses each
    /// domain's experiment defaults. Entries not valid for a domain are
    /// skipped for that domain.
    pub policies: Option<Vec<String>>,
    pub corpus: Arc<Corpus>,
    pub log_path: Option<PathBuf>,
    pub session_timeout_ms: u64,
    pub clock: Clock,
}

impl ServiceConfig {
    pub fn new(seed: u64, corpus: Arc<Corpus>) -> Self {
        ServiceConfig {
            seed,
            policies: None,
            corpus,
            log_path: None,
            session_timeout_ms: SESSION_TIMEOUT_MS,
            clock: system_clock(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("unknown session {0:?}")]
    NotFound(String),
    #[error("session {0:?} timed out")]
    Expired(String),
    #[error("{0}")]
    Conflict(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replaying log entry {entry}: {msg}")]
    Replay { entry: usize, msg: String },
    #[error("{0}")]
    Content(String),
}

#[derive(Debug, Clone, Deserialize)]
pub struct CreateSession {
    pub domain: String,
    pub policy: Option<String>,
    pub goal_seconds: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SubmitResult {
    pub content_id: String,
    pub elapsed_ms: u64,
    pub solved: bool,
    /// Filled 81-cell grid for Sudoku.
    pub solution: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "lowercase")]
pub enum Content {
    Sudoku {
        givens: Grid,
        hint_count: u8,
    },
    Roguelike {
        level: String,
        /// Seeds the enemy-motion rng so the client replays the server's game.
        game_seed: u64,
        leniency: usize,
        reachability: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Serve {
    pub session_id: String,
    pub policy: String,
    pub iteration: u32,
    pub content_id: String,
    pub design_point: DesignPoint,
    pub content: Content,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub recorded: PlaytraceRecord,
    pub next: Serve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub design_point: DesignPoint,
    /// exp of the log-space posterior mean.
    pub predicted_seconds: f64,
    /// Standard deviation of the log-normal predictive in seconds.
    pub std_seconds: f64,
    pub std_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub session_id: String,
    pub policy: String,
    pub curve: Vec<ModelPoint>,
}

struct Pending {
    serve: Serve,
    puzzle: Option<SudokuPuzzle>,
    served_at_ms: u64,
}

struct Live {
    state: SessionState,
    pending: Pending,
    last_active_ms: u64,
}

pub struct Service {
    seed: u64,
    policies: Option<Vec<String>>,
    timeout_ms: u64,
    clock: Clock,
    corpus: Arc<Corpus>,
    sudoku: Arc<AdaptationContext>,
    roguelike: Arc<AdaptationContext>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Live>>>>,
    expired: Mutex<HashSet<String>>,
    opened: AtomicU64,
    log: Option<Mutex<LogWriter>>,
}

impl Service {
    /// Builds the service and, when a log path is set, replays it.
    pub fn start(cfg: ServiceConfig) -> Result<Self, ServiceError> {
        let svc = Service {
            seed: cfg.seed,
            policies: cfg.policies,
            timeout_ms: cfg.session_timeout_ms,
            clock: cfg.clock,
            sudoku: Arc::new(sudoku::context()),
            roguelike: Arc::new(roguelike::context(&cfg.corpus)),
            corpus: cfg.corpus,
            sessions: Mutex::new(HashMap::new()),
            expired: Mutex::new(HashSet::new()),
            opened: AtomicU64::new(0),
            log: None,
        };
        let Some(path) = cfg.log_path else {
            return Ok(svc);
        };
        let lines = read_log(&path)?;
        let mut svc = svc;
        svc.replay(&lines)?;
        svc.log = Some(Mutex::new(LogWriter::open(&path)?));
        Ok(svc)
    }

    fn now(&self) -> u64 {
        (self.clock)()
    }

    fn context(&self, domain: Domain) -> &Arc<AdaptationContext> {
        match domain {
            Domain::Sudoku => &self.sudoku,
            Domain::Roguelike => &self.roguelike,
        }
    }

    /// Policies eligible for random assignment in `domain`.
    pub fn policy_pool(&self, domain: Domain) -> Vec<String> {
        let names = self
            .policies
            .clone()
            .unwrap_or_else(|| ExperimentConfig::defaults(domain).policies);
        let ctx = self.context(domain);
        names
            .into_iter()
            .filter_map(|n| {
                let kind = ctx.default_policy(&n).ok()?;
                SessionState::new("probe", Arc::clone(ctx), kind.clone(), 1.0, 0).ok()?;
                Some(kind.name().to_string())
            })
            .collect()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    fn append(&self, line: &LogLine) -> Result<(), ServiceError> {
        if let Some(log) = &self.log {
            log.lock().unwrap().append(line)?;
        }
        Ok(())
    }

    fn open_session(&self, opened: &SessionOpened) -> Result<Live, ServiceError> {
        let ctx = self.context(opened.domain);
        let kind = ctx
            .default_policy(&opened.policy)
            .map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let mut state = SessionState::new(
            opened.session_id.clone(),
            Arc::clone(ctx),
            kind,
            opened.goal_seconds,
            opened.seed,
        )
        .map_err(|e| match e {
            EngineError::PolicyDomain(_) | EngineError::InvalidGoal(_) => {
                ServiceError::BadRequest(e.to_string())
            }
            other => ServiceError::Engine(other),
        })?;
        let pending = self.serve_next(&mut state, opened.timestamp_ms)?;
        Ok(Live {
            state,
            pending,
            last_active_ms: opened.timestamp_ms,
        })
    }

    fn serve_next(&self, state: &mut SessionState, now: u64) -> Result<Pending, ServiceError> {
        let served = state.next_content()?;
        let iteration = state.history().len() as u32 + 1;
        let content_seed = derive_seed(&[state.seed(), iteration as u64]);
        let (content_id, content, puzzle) = match state.context().domain {
            Domain::Sudoku => {
                let hints = served.candidate.point.coords()[0].round() as i64;
                let mut rng = SessionRng::seed_from_u64(content_seed);
                let puzzle = sudoku::generate_puzzle(hints, &mut rng)
                    .map_err(|e| ServiceError::Content(e.to_string()))?;
                let content = Content::Sudoku {
                    givens: puzzle.givens,
                    hint_count: puzzle.hint_count,
                };
                (format!("sudoku-{hints}-{iteration}"), content, Some(puzzle))
            }
            Domain::Roguelike => {
                let level = served
                    .candidate
                    .content_id
                    .parse::<usize>()
                    .ok()
                    .and_then(|id| self.corpus.get(id))
                    .ok_or_else(|| {
                        ServiceError::Content(format!(
                            "level {} missing from corpus",
                            served.candidate.content_id
                        ))
                    })?;
                let content = Content::Roguelike {
                    level: level.to_string(),
                    game_seed: content_seed & JS_SAFE_INTEGER,
                    leniency: level.leniency,
                    reachability: level.reachability,
                };
                (
                    format!("level-{}-{iteration}", served.candidate.content_id),
                    content,
                    None,
                )
            }
        };
        Ok(Pending {
            serve: Serve {
                session_id: state.id().to_string(),
                policy: state.policy().name().to_string(),
                iteration,
                content_id,
                design_point: served.candidate.point,
                content,
            },
            puzzle,
            served_at_ms: now,
        })
    }

    pub fn create_session(&self, req: CreateSession) -> Result<Serve, ServiceError> {
        let domain: Domain = req
            .domain
            .parse()
            .map_err(|e: EngineError| ServiceError::BadRequest(e.to_string()))?;
        self.purge_expired();
        let pool = self.policy_pool(domain);
        let policy = match &req.policy {
            Some(p) => {
                let name = self
                    .context(domain)
                    .default_policy(p)
                    .map_err(|e| ServiceError::BadRequest(e.to_string()))?
                    .name();
                if !pool.iter().any(|q| q == name) {
                    return Err(ServiceError::BadRequest(format!(
                        "policy {name:?} is not offered for {domain}"
                    )));
                }
                name.to_string()
            }
            None => {
                if pool.is_empty() {
                    return Err(ServiceError::BadRequest(format!(
                        "no configured policy supports {domain}"
                    )));
                }
                let n = self.opened.load(Ordering::SeqCst);
                let pick = derive_seed(&[self.seed, n, 1]) % pool.len() as u64;
                pool[pick as usize].clone()
            }
        };
        let n = self.opened.fetch_add(1, Ordering::SeqCst);
        let opened = SessionOpened {
            session_id: format!("s{n:06}"),
            domain,
            policy,
            goal_seconds: req.goal_seconds.unwrap_or(domain.default_goal_seconds()),
            seed: req.seed.unwrap_or_else(|| derive_seed(&[self.seed, n, 0])),
            timestamp_ms: self.now(),
        };
        let live = self.open_session(&opened)?;
        self.append(&LogLine::Session(opened.clone()))?;
        let serve = live.pending.serve.clone();
        self.sessions
            .lock()
            .unwrap()
            .insert(opened.session_id, Arc::new(Mutex::new(live)));
        Ok(serve)
    }

    fn purge_expired(&self) {
        let now = self.now();
        let mut sessions = self.sessions.lock().unwrap();
        let stale: Vec<String> = sessions
            .iter()
            .filter(|(_, s)| {
                s.try_lock()
                    .map(|l| now.saturating_sub(l.last_active_ms) > self.timeout_ms)
                    .unwrap_or(false)
            })
            .map(|(id, _)| id.clone())
            .collect();
        let mut expired = self.expired.lock().unwrap();
        for id in stale {
            sessions.remove(&id);
            expired.insert(id);
        }
    }

    fn lookup(&self, id: &str) -> Result<Arc<Mutex<Live>>, ServiceError> {
        let found = self.sessions.lock().unwrap().get(id).cloned();
        match found {
            Some(s) => {
                let idle = self
                    .now()
                    .saturating_sub(s.lock().unwrap().last_active_ms);
                if idle > self.timeout_ms {
                    self.sessions.lock().unwrap().remove(id);
                    self.expired.lock().unwrap().insert(id.to_string());
                    return Err(ServiceError::Expired(id.to_string()));
                }
                Ok(s)
            }
            None if self.expired.lock().unwrap().contains(id) => {
                Err(ServiceError::Expired(id.to_string()))
            }
            None => Err(ServiceError::NotFound(id.to_string())),
        }
    }

    /// The content currently awaiting a result.
    pub fn current(&self, id: &str) -> Result<Serve, ServiceError> {
        let session = self.lookup(id)?;
        let live = session.lock().unwrap();
        Ok(live.pending.serve.clone())
    }

    pub fn submit_result(&self, id: &str, req: SubmitResult) -> Result<Submitted, ServiceError> {
        let session = self.lookup(id)?;
        let mut live = session.lock().unwrap();
        let pending = &live.pending;
        if req.content_id != pending.serve.content_id {
            return Err(ServiceError::Conflict(format!(
                "result is for {:?}, but {:?} is being served",
                req.content_id, pending.serve.content_id
            )));
        }
        if req.elapsed_ms == 0 {
            return Err(ServiceError::BadRequest("elapsed_ms must be positive".into()));
        }
        let solved = match (&pending.puzzle, &req.solution) {
            (Some(puzzle), Some(text)) => sudoku::validate_submission_str(puzzle, text)
                .map_err(|e| ServiceError::BadRequest(format!("malformed solution: {e}")))?,
            (Some(_), None) if req.solved => {
                return Err(ServiceError::BadRequest(
                    "a solved Sudoku result must include the filled grid".into(),
                ))
            }
            (Some(_), None) => false,
            (None, _) => req.solved,
        };
        let now = self.now();
        let wall = now.saturating_sub(pending.served_at_ms);
        let elapsed_ms = if req.elapsed_ms > wall + CLOCK_SLACK_MS {
            wall.max(1)
        } else {
            req.elapsed_ms
        };
        let record = PlaytraceRecord {
            session_id: id.to_string(),
            domain: live.state.context().domain,
            policy: pending.serve.policy.clone(),
            iteration: pending.serve.iteration,
            design_point: pending.serve.design_point.clone(),
            content_id: pending.serve.content_id.clone(),
            elapsed_ms,
            solved,
            timestamp_ms: now,
        };
        self.append(&LogLine::Result(record.clone()))?;
        advance(self, &mut live, &record)?;
        Ok(Submitted {
            recorded: record,
            next: live.pending.serve.clone(),
        })
    }

    pub fn model(&self, id: &str) -> Result<ModelResponse, ServiceError> {
        let session = self.lookup(id)?;
        let mut live = session.lock().unwrap();
        let policy = live.state.policy().clone();
        let curve = if policy.is_model_based() {
            let model = live.state.current_model()?;
            let space = &live.state.context().space;
            model_curve(&model, space)
                .map_err(EngineError::from)?
                .into_iter()
                .map(|c| ModelPoint {
                    std_seconds: lognormal_std(c.predicted_seconds.ln(), c.std_log),
                    design_point: c.design_point,
                    predicted_seconds: c.predicted_seconds,
                    std_log: c.std_log,
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(ModelResponse {
            session_id: id.to_string(),
            policy: policy.name().to_string(),
            curve,
        })
    }

    fn replay(&mut self, lines: &[LogLine]) -> Result<(), ServiceError> {
        let mut built: HashMap<String, Live> = HashMap::new();
        let mut opened = 0u64;
        for (entry, line) in lines.iter().enumerate() {
            let fail = |msg: String| ServiceError::Replay { entry, msg };
            match line {
                LogLine::Session(s) => {
                    let live = self.open_session(s).map_err(|e| fail(e.to_string()))?;
                    if built.insert(s.session_id.clone(), live).is_some() {
                        return Err(fail(format!("session {} opened twice", s.session_id)));
                    }
                    opened += 1;
                }
                LogLine::Result(r) => {
                    let live = built
                        .get_mut(&r.session_id)
                        .ok_or_else(|| fail(format!("result for unknown session {}", r.session_id)))?;
                    let serve = &live.pending.serve;
                    if serve.content_id != r.content_id
                        || serve.iteration != r.iteration
                        || serve.design_point != r.design_point
                    {
                        return Err(fail(format!(
                            "record {} #{} does not match the rebuilt serve {} #{}",
                            r.content_id, r.iteration, serve.content_id, serve.iteration
                        )));
                    }
                    advance(self, live, r).map_err(|e| fail(e.to_string()))?;
                }
            }
        }
        self.sessions
            .get_mut()
            .unwrap()
            .extend(built.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))));
        *self.opened.get_mut() = opened;
        Ok(())
    }
}

fn advance(svc: &Service, live: &mut Live, record: &PlaytraceRecord) -> Result<(), ServiceError> {
    live.state.record_result(record.observation())?;
    live.pending = svc.serve_next(&mut live.state, record.timestamp_ms)?;
    live.last_active_ms = record.timestamp_ms;
    Ok(())
}

fn lognormal_std(mu: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    (mu + 0.5 * s2).exp() * s2.exp_m1().sqrt()
}
