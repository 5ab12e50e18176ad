//! Level sampling, mutation and corpus construction.

use std::fmt::Write as _;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::level::{Cell, Level, LevelError, TileGrid};

pub const CORPUS_SIZE: usize = 399;
pub const LENIENCY_RANGE: (usize, usize) = (0, 24);
pub const REACHABILITY_RANGE: (usize, usize) = (4, 50);

const HEIGHT_RANGE: (usize, usize) = (4, 14);
const WIDTH_RANGE: (usize, usize) = (4, 16);
const MAX_WALL_DENSITY: f64 = 0.3;
const GENERATE_RETRIES: usize = 500;
const MUTATE_RETRIES: usize = 20;
/// Attempts per requested corpus member before giving up.
const CORPUS_ATTEMPTS_PER_LEVEL: usize = 200;

/// Optional targets for [`generate_level`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LevelTargets {
    pub leniency: Option<usize>,
    pub max_reachability: Option<usize>,
}

/// Samples height, width, wall density and enemy count, then places assets
/// at random until both paths exist.
pub fn generate_level<R: Rng + ?Sized>(
    rng: &mut R,
    targets: LevelTargets,
) -> Result<Level, LevelError> {
    for _ in 0..GENERATE_RETRIES {
        let h = rng.random_range(HEIGHT_RANGE.0..=HEIGHT_RANGE.1);
        let w = rng.random_range(WIDTH_RANGE.0..=WIDTH_RANGE.1);
        let density = rng.random_range(0.0..MAX_WALL_DENSITY);
        let enemies = targets
            .leniency
            .unwrap_or_else(|| rng.random_range(LENIENCY_RANGE.0..=LENIENCY_RANGE.1));
        let mut grid = TileGrid::open(h, w);
        for c in grid.cells().collect::<Vec<_>>() {
            if rng.random_bool(density) {
                grid.set_wall(c, true);
            }
        }
        let mut floor = grid.floor_cells();
        if floor.len() < 3 + enemies {
            continue;
        }
        floor.shuffle(rng);
        let (avatar, key, goal) = (floor[0], floor[1], floor[2]);
        let level = match Level::new(grid, avatar, key, goal, floor[3..3 + enemies].to_vec()) {
            Ok(l) => l,
            Err(_) => continue,
        };
        if targets
            .max_reachability
            .is_some_and(|m| level.reachability > m)
        {
            continue;
        }
        return Ok(level);
    }
    Err(LevelError::Budget)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    AddRow,
    RemoveRow,
    AddColumn,
    RemoveColumn,
    AddEnemy,
    RemoveEnemy,
    AddWall,
    RemoveWall,
}

impl Mutation {
    pub const ALL: [Mutation; 8] = [
        Mutation::AddRow,
        Mutation::RemoveRow,
        Mutation::AddColumn,
        Mutation::RemoveColumn,
        Mutation::AddEnemy,
        Mutation::RemoveEnemy,
        Mutation::AddWall,
        Mutation::RemoveWall,
    ];
}

fn shift_row(c: Cell, at: usize) -> Cell {
    if c.row >= at {
        Cell::new(c.row + 1, c.col)
    } else {
        c
    }
}

fn shift_col(c: Cell, at: usize) -> Cell {
    if c.col >= at {
        Cell::new(c.row, c.col + 1)
    } else {
        c
    }
}

/// Applies one mutation; `None` if it is inapplicable or breaks the level.
pub fn apply_mutation<R: Rng + ?Sized>(level: &Level, m: Mutation, rng: &mut R) -> Option<Level> {
    let mut grid = level.grid.clone();
    let (mut avatar, mut key, mut goal) = (level.avatar, level.key, level.goal);
    let mut enemies = level.enemies.clone();
    let entity = |c: &Cell, enemies: &[Cell]| {
        *c == level.avatar || *c == level.key || *c == level.goal || enemies.contains(c)
    };
    match m {
        Mutation::AddRow => {
            if grid.height() >= HEIGHT_RANGE.1 {
                return None;
            }
            let at = rng.random_range(0..=grid.height());
            grid.insert_row(at);
            avatar = shift_row(avatar, at);
            key = shift_row(key, at);
            goal = shift_row(goal, at);
            enemies.iter_mut().for_each(|e| *e = shift_row(*e, at));
        }
        Mutation::AddColumn => {
            if grid.width() >= WIDTH_RANGE.1 {
                return None;
            }
            let at = rng.random_range(0..=grid.width());
            grid.insert_col(at);
            avatar = shift_col(avatar, at);
            key = shift_col(key, at);
            goal = shift_col(goal, at);
            enemies.iter_mut().for_each(|e| *e = shift_col(*e, at));
        }
        Mutation::RemoveRow => {
            if grid.height() <= 2 {
                return None;
            }
            let at = rng.random_range(0..grid.height());
            if [avatar, key, goal].iter().any(|c| c.row == at) {
                return None;
            }
            grid.remove_row(at);
            let up = |c: Cell| {
                if c.row > at {
                    Cell::new(c.row - 1, c.col)
                } else {
                    c
                }
            };
            avatar = up(avatar);
            key = up(key);
            goal = up(goal);
            enemies = enemies.into_iter().filter(|e| e.row != at).map(up).collect();
        }
        Mutation::RemoveColumn => {
            if grid.width() <= 2 {
                return None;
            }
            let at = rng.random_range(0..grid.width());
            if [avatar, key, goal].iter().any(|c| c.col == at) {
                return None;
            }
            grid.remove_col(at);
            let left = |c: Cell| {
                if c.col > at {
                    Cell::new(c.row, c.col - 1)
                } else {
                    c
                }
            };
            avatar = left(avatar);
            key = left(key);
            goal = left(goal);
            enemies = enemies
                .into_iter()
                .filter(|e| e.col != at)
                .map(left)
                .collect();
        }
        Mutation::AddEnemy => {
            let free: Vec<Cell> = grid
                .floor_cells()
                .into_iter()
                .filter(|c| !entity(c, &enemies))
                .collect();
            enemies.push(*free.choose(rng)?);
        }
        Mutation::RemoveEnemy => {
            if enemies.is_empty() {
                return None;
            }
            let i = rng.random_range(0..enemies.len());
            enemies.remove(i);
        }
        Mutation::AddWall => {
            let free: Vec<Cell> = grid
                .floor_cells()
                .into_iter()
                .filter(|c| !entity(c, &enemies))
                .collect();
            grid.set_wall(*free.choose(rng)?, true);
        }
        Mutation::RemoveWall => {
            let walls: Vec<Cell> = grid.cells().filter(|c| grid.is_wall(*c)).collect();
            grid.set_wall(*walls.choose(rng)?, false);
        }
    }
    Level::new(grid, avatar, key, goal, enemies).ok()
}

/// One random mutation, retried a bounded number of times; the input is
/// returned unchanged if none succeeds.
pub fn mutate_level<R: Rng + ?Sized>(level: &Level, rng: &mut R) -> Level {
    for _ in 0..MUTATE_RETRIES {
        let m = *Mutation::ALL.choose(rng).expect("non-empty");
        if let Some(l) = apply_mutation(level, m, rng) {
            return l;
        }
    }
    level.clone()
}

pub fn in_corpus_bounds(level: &Level) -> bool {
    (LENIENCY_RANGE.0..=LENIENCY_RANGE.1).contains(&level.leniency)
        && (REACHABILITY_RANGE.0..=REACHABILITY_RANGE.1).contains(&level.reachability)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: usize,
    pub level: Level,
}

/// Immutable set of levels with distinct ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    entries: Vec<CorpusEntry>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CorpusError {
    #[error("corpus size must be at least 1")]
    Size,
    #[error("generation budget exhausted after {0} levels")]
    Budget(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("level {id}: {source}")]
    Level { id: usize, source: LevelError },
}

/// Mixes fresh samples and mutations of accepted levels until `n` levels
/// with in-bounds features are collected.
pub fn build_corpus<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Corpus, CorpusError> {
    if n == 0 {
        return Err(CorpusError::Size);
    }
    let mut levels: Vec<Level> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while levels.len() < n {
        attempts += 1;
        if attempts > n * CORPUS_ATTEMPTS_PER_LEVEL {
            return Err(CorpusError::Budget(levels.len()));
        }
        let candidate = if levels.is_empty() || rng.random_bool(0.5) {
            let targets = LevelTargets {
                leniency: None,
                max_reachability: Some(REACHABILITY_RANGE.1),
            };
            match generate_level(rng, targets) {
                Ok(l) => l,
                Err(_) => continue,
            }
        } else {
            let parent = &levels[rng.random_range(0..levels.len())];
            mutate_level(parent, rng)
        };
        if in_corpus_bounds(&candidate) {
            levels.push(candidate);
        }
    }
    Ok(Corpus {
        entries: levels
            .into_iter()
            .enumerate()
            .map(|(id, level)| CorpusEntry { id, level })
            .collect(),
    })
}

impl Corpus {
    pub fn from_entries(entries: Vec<CorpusEntry>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::Size);
        }
        let mut ids: Vec<usize> = entries.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(CorpusError::Parse {
                line: 0,
                msg: "duplicate level id".into(),
            });
        }
        for e in &entries {
            e.level
                .validate()
                .map_err(|source| CorpusError::Level { id: e.id, source })?;
        }
        Ok(Corpus { entries })
    }

    pub fn entries(&self) -> &[CorpusEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Level> {
        self.entries.iter().find(|e| e.id == id).map(|e| &e.level)
    }

    /// Observed `(l, r)` ranges.
    pub fn bounds(&self) -> ((usize, usize), (usize, usize)) {
        let ls = self.entries.iter().map(|e| e.level.leniency);
        let rs = self.entries.iter().map(|e| e.level.reachability);
        (
            (ls.clone().min().unwrap_or(0), ls.max().unwrap_or(0)),
            (rs.clone().min().unwrap_or(0), rs.max().unwrap_or(0)),
        )
    }

    /// Text form: a `level <id> l=<l> r=<r>` header, the level rows, and a
    /// blank line, per level.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "level {} l={} r={}",
                e.id, e.level.leniency, e.level.reachability
            );
            let _ = writeln!(out, "{}", e.level);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        let mut lines = text.lines().enumerate().peekable();
        while let Some((ln, line)) = lines.next() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let err = |msg: &str| CorpusError::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            let mut parts = line.split_whitespace();
            if parts.next() != Some("level") {
                return Err(err("expected `level <id> l=<l> r=<r>`"));
            }
            let id: usize = parts
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad level id"))?;
            let l: usize = parts
                .next()
                .and_then(|v| v.strip_prefix("l="))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad l= field"))?;
            let r: usize = parts
                .next()
                .and_then(|v| v.strip_prefix("r="))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| err("bad r= field"))?;
            let mut body = String::new();
            while let Some((_, row)) = lines.peek() {
                if row.trim().is_empty() {
                    break;
                }
                body.push_str(row);
                body.push('\n');
                lines.next();
            }
            let level: Level = body
                .parse()
                .map_err(|source| CorpusError::Level { id, source })?;
            if level.leniency != l || level.reachability != r {
                return Err(CorpusError::Level {
                    id,
                    source: LevelError::Features { l, r },
                });
            }
            entries.push(CorpusEntry { id, level });
        }
        Corpus::from_entries(entries)
    }
}
