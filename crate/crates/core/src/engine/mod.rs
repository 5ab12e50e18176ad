//! Session orchestration: the Bayesian target-time policy and the baselines
//! behind one `next_content` / `record_result` loop.

pub mod policies;

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::acquisition::{self, AcquisitionError, AcquisitionKind, AcquisitionSpec};
use crate::design::{Candidate, DesignPoint, DesignSpace};
use crate::gp::{self, GpError, GpModel, HyperBounds, Hyperparameters, KernelSpec, PriorMean};
use crate::SessionRng;
use policies::SearchBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Sudoku,
    Roguelike,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::Sudoku => "sudoku",
            Domain::Roguelike => "roguelike",
        }
    }

    pub fn default_goal_seconds(&self) -> f64 {
        match self {
            Domain::Sudoku => 180.0,
            Domain::Roguelike => 10.0,
        }
    }
}

impl FromStr for Domain {
    type Err = EngineError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sudoku" => Ok(Domain::Sudoku),
            "roguelike" => Ok(Domain::Roguelike),
            other => Err(EngineError::UnknownDomain(other.to_string())),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EngineError {
    #[error("design space is empty")]
    EmptySpace,
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error("policy not valid for this design space: {0}")]
    PolicyDomain(&'static str),
    #[error("search bounds inverted: lo={lo}, hi={hi}")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("no content is awaiting a result")]
    NothingPending,
    #[error("result is for {got}, but {expected} was served")]
    OutOfOrder {
        expected: DesignPoint,
        got: DesignPoint,
    },
    #[error("elapsed time must be positive, got {0}")]
    InvalidElapsed(f64),
    #[error("invalid goal time {0}")]
    InvalidGoal(f64),
    #[error(transparent)]
    Gp(#[from] GpError),
    #[error(transparent)]
    Acquisition(#[from] AcquisitionError),
}

/// Everything about a domain that sessions share read-only.
#[derive(Debug, Clone)]
pub struct AdaptationContext {
    pub domain: Domain,
    pub space: DesignSpace,
    pub prior: PriorMean,
    pub bounds: HyperBounds,
    pub initial_noise: f64,
    /// Kernel the Bayesian policy starts its hyperparameter search from.
    pub default_kernel: KernelSpec,
    pub default_acquisition: AcquisitionKind,
}

impl AdaptationContext {
    pub fn new(
        domain: Domain,
        space: DesignSpace,
        prior: PriorMean,
        default_kernel: KernelSpec,
        default_acquisition: AcquisitionKind,
    ) -> Self {
        AdaptationContext {
            domain,
            space,
            prior,
            bounds: HyperBounds::default(),
            initial_noise: 0.1,
            default_kernel,
            default_acquisition,
        }
    }

    pub fn default_policy(&self, name: &str) -> Result<PolicyKind, EngineError> {
        match name.trim().to_ascii_lowercase().as_str() {
            "fbca" | "bayes" | "bo" => Ok(PolicyKind::Fbca {
                acquisition: self.default_acquisition.clone(),
                kernel: self.default_kernel.clone(),
            }),
            "binary" | "binary_search" | "bin" => Ok(PolicyKind::BinarySearch),
            "linear" | "linear_regression" | "lr" => Ok(PolicyKind::LinearRegression),
            "hillclimb" | "noisy_hillclimb" | "nh" => Ok(PolicyKind::NoisyHillClimb {
                step_sigma: policies::default_step_sigma(&self.space),
            }),
            "random" | "rand" => Ok(PolicyKind::Random),
            other => Err(EngineError::UnknownPolicy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyKind {
    Fbca {
        acquisition: AcquisitionKind,
        kernel: KernelSpec,
    },
    BinarySearch,
    LinearRegression,
    NoisyHillClimb {
        step_sigma: Vec<f64>,
    },
    Random,
}

impl PolicyKind {
    /// Short name used in logs, reports and the HTTP API.
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Fbca { .. } => "fbca",
            PolicyKind::BinarySearch => "binary",
            PolicyKind::LinearRegression => "linear",
            PolicyKind::NoisyHillClimb { .. } => "hillclimb",
            PolicyKind::Random => "random",
        }
    }

    pub fn is_model_based(&self) -> bool {
        matches!(self, PolicyKind::Fbca { .. })
    }
}

/// One served item and its outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub design_point: DesignPoint,
    pub content_id: String,
    /// Seconds taken.
    pub elapsed: f64,
    pub solved: bool,
    /// Milliseconds since the Unix epoch.
    pub recorded_at: u64,
}

/// A content selection: index into the space plus the candidate itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Served {
    pub index: usize,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq)]
enum Scratch {
    Stateless,
    Binary(SearchBounds),
    HillClimb {
        center: Vec<f64>,
        incumbent_error: f64,
        started: bool,
    },
}

/// Per-player adaptation state. History is append-only.
#[derive(Debug, Clone)]
pub struct SessionState {
    id: String,
    ctx: Arc<AdaptationContext>,
    policy: PolicyKind,
    goal: f64,
    seed: u64,
    rng: SessionRng,
    history: Vec<Observation>,
    scratch: Scratch,
    pending: Option<usize>,
    retry: Option<usize>,
    model: Option<(usize, GpModel)>,
}

impl SessionState {
    pub fn new(
        id: impl Into<String>,
        ctx: Arc<AdaptationContext>,
        policy: PolicyKind,
        goal_seconds: f64,
        seed: u64,
    ) -> Result<Self, EngineError> {
        if ctx.space.is_empty() {
            return Err(EngineError::EmptySpace);
        }
        if !(goal_seconds.is_finite() && goal_seconds > 0.0) {
            return Err(EngineError::InvalidGoal(goal_seconds));
        }
        let one_d = ctx.space.dim() == 1;
        let scratch = match &policy {
            PolicyKind::BinarySearch => {
                if !one_d {
                    return Err(EngineError::PolicyDomain("binary search needs a 1-D space"));
                }
                Scratch::Binary(SearchBounds {
                    lo: ctx.space.lower()[0],
                    hi: ctx.space.upper()[0],
                })
            }
            PolicyKind::LinearRegression => {
                if !one_d {
                    return Err(EngineError::PolicyDomain(
                        "linear regression needs a 1-D space",
                    ));
                }
                Scratch::Stateless
            }
            PolicyKind::NoisyHillClimb { step_sigma } => {
                if step_sigma.len() != ctx.space.dim() {
                    return Err(EngineError::PolicyDomain(
                        "hill-climb step needs one sigma per dimension",
                    ));
                }
                Scratch::HillClimb {
                    center: ctx.space.center(),
                    incumbent_error: f64::INFINITY,
                    started: false,
                }
            }
            PolicyKind::Fbca { acquisition, kernel } => {
                kernel.validate()?;
                AcquisitionSpec {
                    kind: acquisition.clone(),
                    goal_seconds,
                }
                .validate()?;
                Scratch::Stateless
            }
            PolicyKind::Random => Scratch::Stateless,
        };
        Ok(SessionState {
            id: id.into(),
            ctx,
            policy,
            goal: goal_seconds,
            seed,
            rng: SessionRng::seed_from_u64(seed),
            history: Vec::new(),
            scratch,
            pending: None,
            retry: None,
            model: None,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn context(&self) -> &Arc<AdaptationContext> {
        &self.ctx
    }

    pub fn policy(&self) -> &PolicyKind {
        &self.policy
    }

    pub fn goal_seconds(&self) -> f64 {
        self.goal
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[Observation] {
        &self.history
    }

    pub fn pending(&self) -> Option<Served> {
        self.pending.map(|i| self.served(i))
    }

    /// Current binary-search interval, for sessions using that policy.
    pub fn search_bounds(&self) -> Option<SearchBounds> {
        match self.scratch {
            Scratch::Binary(b) => Some(b),
            _ => None,
        }
    }

    /// Current hill-climb center, for sessions using that policy.
    pub fn hill_center(&self) -> Option<&[f64]> {
        match &self.scratch {
            Scratch::HillClimb { center, .. } => Some(center),
            _ => None,
        }
    }

    fn served(&self, index: usize) -> Served {
        Served {
            index,
            candidate: self.ctx.space.candidates()[index].clone(),
        }
    }

    fn solved_data(&self) -> Vec<(DesignPoint, f64)> {
        self.history
            .iter()
            .filter(|o| o.solved)
            .map(|o| (o.design_point.clone(), o.elapsed))
            .collect()
    }

    /// Chooses the next content. Repeated calls without a result return the
    /// same selection; after an unsolved result the same item is re-served.
    pub fn next_content(&mut self) -> Result<Served, EngineError> {
        if let Some(i) = self.pending {
            return Ok(self.served(i));
        }
        let index = match self.retry.take() {
            Some(i) => i,
            None => self.select()?,
        };
        self.pending = Some(index);
        Ok(self.served(index))
    }

    fn select(&mut self) -> Result<usize, EngineError> {
        let ctx = Arc::clone(&self.ctx);
        let space = &ctx.space;
        match self.policy.clone() {
            PolicyKind::Fbca { acquisition, .. } => {
                let observed: Vec<f64> = self
                    .history
                    .iter()
                    .filter(|o| o.solved)
                    .map(|o| o.elapsed)
                    .collect();
                let model = self.current_model()?;
                let spec = if observed.is_empty() {
                    AcquisitionSpec {
                        kind: AcquisitionKind::ModifiedUcb { kappa: 0.0 },
                        goal_seconds: self.goal,
                    }
                } else {
                    AcquisitionSpec {
                        kind: acquisition,
                        goal_seconds: self.goal,
                    }
                };
                let seed: u64 = self.rng.random();
                let best = acquisition::argmax_acquisition(&model, &spec, space, &observed, seed)?;
                Ok(policies::pick(&best.candidates, &mut self.rng))
            }
            PolicyKind::BinarySearch => match self.scratch {
                Scratch::Binary(b) => policies::binary_search_next(b, space),
                _ => unreachable!("binary search scratch"),
            },
            PolicyKind::LinearRegression => {
                let obs: Vec<(f64, f64)> = self
                    .solved_data()
                    .iter()
                    .map(|(p, t)| (p.coords()[0], *t))
                    .collect();
                policies::linear_regression_next(&obs, &ctx.prior, space, self.goal)
            }
            PolicyKind::NoisyHillClimb { step_sigma } => {
                let Scratch::HillClimb {
                    center, started, ..
                } = &mut self.scratch
                else {
                    unreachable!("hill-climb scratch")
                };
                if !*started {
                    *started = true;
                    let c = center.clone();
                    Ok(policies::pick(&space.nearest(&c), &mut self.rng))
                } else {
                    let c = center.clone();
                    policies::noisy_hillclimb_next(&c, &step_sigma, space, &mut self.rng)
                }
            }
            PolicyKind::Random => Ok(self.rng.random_range(0..space.len())),
        }
    }

    /// GP fitted to the solved history with freshly optimized
    /// hyperparameters. Cached per history length.
    pub fn current_model(&mut self) -> Result<GpModel, EngineError> {
        let PolicyKind::Fbca { kernel, .. } = &self.policy else {
            return Err(EngineError::PolicyDomain("policy has no GP model"));
        };
        let n_solved = self.history.iter().filter(|o| o.solved).count();
        if let Some((n, m)) = &self.model {
            if *n == n_solved {
                return Ok(m.clone());
            }
        }
        let model = fit_player_model(&self.ctx, kernel, &self.solved_data())?;
        self.model = Some((n_solved, model.clone()));
        Ok(model)
    }

    /// Appends a result for the pending content.
    pub fn record_result(&mut self, obs: Observation) -> Result<(), EngineError> {
        let Some(index) = self.pending else {
            return Err(EngineError::NothingPending);
        };
        let expected = &self.ctx.space.candidates()[index].point;
        if &obs.design_point != expected {
            return Err(EngineError::OutOfOrder {
                expected: expected.clone(),
                got: obs.design_point,
            });
        }
        if !(obs.elapsed.is_finite() && obs.elapsed > 0.0) {
            return Err(EngineError::InvalidElapsed(obs.elapsed));
        }
        if obs.solved {
            let goal = self.goal;
            match &mut self.scratch {
                Scratch::Binary(b) => b.update(obs.design_point.coords()[0], obs.elapsed, goal),
                Scratch::HillClimb {
                    center,
                    incumbent_error,
                    ..
                } => {
                    let err = (obs.elapsed - goal).abs();
                    if err < *incumbent_error {
                        *incumbent_error = err;
                        *center = obs.design_point.coords().to_vec();
                    }
                }
                Scratch::Stateless => {}
            }
        } else {
            self.retry = Some(index);
        }
        self.pending = None;
        self.history.push(obs);
        Ok(())
    }
}

/// Fits the Bayesian policy's GP: hyperparameters are re-optimized from
/// `initial_kernel` on every call.
pub fn fit_player_model(
    ctx: &AdaptationContext,
    initial_kernel: &KernelSpec,
    data: &[(DesignPoint, f64)],
) -> Result<GpModel, EngineError> {
    let normalizer = ctx.space.normalizer();
    let initial = Hyperparameters {
        kernel: initial_kernel.clone(),
        noise: ctx.initial_noise,
    };
    let hyper = gp::optimize_hyperparameters(&ctx.prior, &initial, &normalizer, data, &ctx.bounds)?;
    Ok(GpModel::fit_with(
        ctx.prior.clone(),
        hyper.kernel,
        hyper.noise,
        normalizer,
        data,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Arc<AdaptationContext> {
        Arc::new(AdaptationContext::new(
            Domain::Sudoku,
            DesignSpace::integer_range(17, 80).unwrap(),
            PriorMean::piecewise(vec![(17.0, 600.0), (80.0, 3.0)]),
            KernelSpec::rbf(vec![0.2], 1.0),
            AcquisitionKind::ModifiedEi { n_samples: 256 },
        ))
    }

    fn obs(x: f64, t: f64, solved: bool) -> Observation {
        Observation {
            design_point: DesignPoint::scalar(x),
            content_id: format!("{x}"),
            elapsed: t,
            solved,
            recorded_at: 0,
        }
    }

    #[test]
    fn record_requires_pending_and_matching_point() {
        let c = ctx();
        let mut s = SessionState::new("s", c.clone(), PolicyKind::BinarySearch, 180.0, 1).unwrap();
        assert_eq!(s.record_result(obs(49.0, 10.0, true)), Err(EngineError::NothingPending));
        let first = s.next_content().unwrap();
        assert_eq!(first.candidate.point, DesignPoint::scalar(49.0));
        assert_eq!(s.next_content().unwrap(), first);
        assert!(matches!(
            s.record_result(obs(50.0, 10.0, true)),
            Err(EngineError::OutOfOrder { .. })
        ));
        assert_eq!(
            s.record_result(obs(49.0, 0.0, true)),
            Err(EngineError::InvalidElapsed(0.0))
        );
        s.record_result(obs(49.0, 100.0, true)).unwrap();
        assert_eq!(s.search_bounds(), Some(SearchBounds { lo: 17.0, hi: 49.0 }));
        assert_eq!(s.next_content().unwrap().candidate.point, DesignPoint::scalar(33.0));
    }

    #[test]
    fn unsolved_result_reserves_same_point() {
        let c = ctx();
        let mut s = SessionState::new("s", c, PolicyKind::BinarySearch, 180.0, 1).unwrap();
        s.next_content().unwrap();
        s.record_result(obs(49.0, 500.0, false)).unwrap();
        assert_eq!(s.search_bounds(), Some(SearchBounds { lo: 17.0, hi: 80.0 }));
        assert_eq!(s.next_content().unwrap().candidate.point, DesignPoint::scalar(49.0));
        assert_eq!(s.history().len(), 1);
    }

    #[test]
    fn one_d_policies_reject_two_d_spaces() {
        let cands = (0..3)
            .map(|i| Candidate {
                point: DesignPoint::new(vec![i as f64, 4.0 + i as f64]),
                content_id: i.to_string(),
            })
            .collect();
        let c = Arc::new(AdaptationContext::new(
            Domain::Roguelike,
            DesignSpace::new(cands).unwrap(),
            PriorMean::Constant { seconds: 5.0 },
            KernelSpec::rbf(vec![0.3, 0.3], 1.0),
            AcquisitionKind::ModifiedUcb { kappa: 0.05 },
        ));
        assert!(SessionState::new("s", c.clone(), PolicyKind::BinarySearch, 10.0, 0).is_err());
        assert!(SessionState::new("s", c.clone(), PolicyKind::LinearRegression, 10.0, 0).is_err());
        assert!(SessionState::new("s", c, PolicyKind::Random, 10.0, 0).is_ok());
    }

    #[test]
    fn hillclimb_keeps_center_when_worse() {
        let c = ctx();
        let policy = PolicyKind::NoisyHillClimb {
            step_sigma: vec![6.3],
        };
        let mut s = SessionState::new("s", c, policy, 180.0, 4).unwrap();
        // The box center 48.5 is equidistant from 48 and 49.
        let x0 = s.next_content().unwrap().candidate.point.coords()[0];
        assert!(x0 == 48.0 || x0 == 49.0);
        s.record_result(obs(x0, 170.0, true)).unwrap();
        assert_eq!(s.hill_center(), Some(&[x0][..]));
        let x1 = s.next_content().unwrap().candidate.point.coords()[0];
        s.record_result(obs(x1, 400.0, true)).unwrap();
        assert_eq!(s.hill_center(), Some(&[x0][..]));
        let x2 = s.next_content().unwrap().candidate.point.coords()[0];
        s.record_result(obs(x2, 175.0, true)).unwrap();
        assert_eq!(s.hill_center(), Some(&[x2][..]));
    }

    #[test]
    fn policy_names_parse() {
        let c = ctx();
        for name in ["fbca", "binary", "linear", "hillclimb", "random"] {
            assert_eq!(c.default_policy(name).unwrap().name(), name);
        }
        assert!(matches!(
            c.default_policy("chess"),
            Err(EngineError::UnknownPolicy(_))
        ));
        assert_eq!("Sudoku".parse::<Domain>().unwrap(), Domain::Sudoku);
        assert!("chess".parse::<Domain>().is_err());
    }
}
