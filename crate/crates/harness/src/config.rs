//! Flat `key = value` experiment configuration.

use std::str::FromStr;

use adapt_core::engine::Domain;

use crate::sim::SimPlayer;
use crate::stats::default_cutoff;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub policies: Vec<String>,
    /// Players per policy arm and per seed.
    pub n_players: usize,
    pub iterations: usize,
    /// Each seed is an independent replicate.
    pub seeds: Vec<u64>,
    pub goal_seconds: f64,
    pub noise_sigma: f64,
    pub cutoff_seconds: f64,
    /// Roguelike only.
    pub corpus_size: usize,
    pub corpus_seed: u64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value}")]
    Value { key: String, value: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl ExperimentConfig {
    /// Defaults for `domain`: all applicable policies, 8 (Sudoku) or 35
    /// (Roguelike) iterations, 100 players, seed 1.
    pub fn defaults(domain: Domain) -> Self {
        let (policies, iterations): (&[&str], usize) = match domain {
            Domain::Sudoku => (&["fbca", "binary", "linear", "random"], 8),
            Domain::Roguelike => (&["fbca", "hillclimb", "random"], 35),
        };
        ExperimentConfig {
            domain,
            policies: policies.iter().map(|s| s.to_string()).collect(),
            n_players: 100,
            iterations,
            seeds: vec![1],
            goal_seconds: domain.default_goal_seconds(),
            noise_sigma: SimPlayer::default_noise(domain),
            cutoff_seconds: default_cutoff(domain),
            corpus_size: adapt_core::roguelike::CORPUS_SIZE,
            corpus_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if self.policies.is_empty() {
            return bad("at least one policy is required");
        }
        if self.n_players == 0 || self.iterations == 0 {
            return bad("n_players and iterations must be positive");
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if !(self.goal_seconds.is_finite() && self.goal_seconds > 0.0) {
            return bad("goal_seconds must be positive");
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be nonnegative");
        }
        if self.cutoff_seconds.is_nan() || self.cutoff_seconds <= 0.0 {
            return bad("cutoff_seconds must be positive");
        }
        if self.corpus_size == 0 {
            return bad("corpus_size must be positive");
        }
        let mut names = self.policies.clone();
        names.sort();
        names.dedup();
        if names.len() != self.policies.len() {
            return bad("policies must be distinct");
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
    })
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

impl FromStr for ExperimentConfig {
    type Err = ConfigError;

    /// `#` starts a comment. `domain` is required and is applied first, so
    /// the other keys override its defaults in any order.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: i + 1 })?;
            pairs.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let domain = pairs
            .iter()
            .find(|(k, _)| k == "domain")
            .ok_or(ConfigError::Missing("domain"))?;
        let mut cfg = ExperimentConfig::defaults(parse::<Domain>("domain", &domain.1)?);
        for (k, v) in &pairs {
            match k.as_str() {
                "domain" => {}
                "policies" => cfg.policies = list::<String>(k, v)?,
                "n_players" => cfg.n_players = parse(k, v)?,
                "iterations" => cfg.iterations = parse(k, v)?,
                "seeds" | "seed" => cfg.seeds = list(k, v)?,
                "goal_seconds" => cfg.goal_seconds = parse(k, v)?,
                "noise_sigma" => cfg.noise_sigma = parse(k, v)?,
                "cutoff_seconds" => cfg.cutoff_seconds = parse(k, v)?,
                "corpus_size" => cfg.corpus_size = parse(k, v)?,
                "corpus_seed" => cfg.corpus_seed = parse(k, v)?,
                _ => return Err(ConfigError::UnknownKey(k.clone())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}
