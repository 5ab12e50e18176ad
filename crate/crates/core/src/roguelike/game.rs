//! Turn-based game rules. The browser client replays these move for move,
//! so the RNG is a plain SplitMix64 that is easy to port.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::level::{Cell, Dir, Level};

/// SplitMix64 generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameRng {
    state: u64,
}

impl GameRng {
    pub fn new(seed: u64) -> Self {
        GameRng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform index in `0..n` by modulo reduction. `n` must be non-zero.
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Attack,
    Wait,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("illegal action {0:?}")]
pub struct IllegalAction(pub String);

impl Action {
    pub const ALL: [Action; 6] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Attack,
        Action::Wait,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Result<Self, IllegalAction> {
        Action::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| IllegalAction(id.to_string()))
    }

    fn dir(self) -> Option<Dir> {
        match self {
            Action::Up => Some(Dir::Up),
            Action::Down => Some(Dir::Down),
            Action::Left => Some(Dir::Left),
            Action::Right => Some(Dir::Right),
            Action::Attack | Action::Wait => None,
        }
    }
}

impl FromStr for Action {
    type Err = IllegalAction;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "up" => Ok(Action::Up),
            "down" => Ok(Action::Down),
            "left" => Ok(Action::Left),
            "right" => Ok(Action::Right),
            "attack" => Ok(Action::Attack),
            "wait" => Ok(Action::Wait),
            _ => Err(IllegalAction(s.to_string())),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Attack => "attack",
            Action::Wait => "wait",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Playing,
    Won,
    Lost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameState {
    pub level: Level,
    pub player: Cell,
    pub facing: Dir,
    pub has_key: bool,
    pub enemies: Vec<Cell>,
    pub status: Status,
    pub turn: u64,
    pub rng: GameRng,
}

impl GameState {
    pub fn new(level: Level, seed: u64) -> Self {
        GameState {
            player: level.avatar,
            facing: Dir::Down,
            has_key: false,
            enemies: level.enemies.clone(),
            status: Status::Playing,
            turn: 0,
            rng: GameRng::new(seed),
            level,
        }
    }

    pub fn is_over(&self) -> bool {
        self.status != Status::Playing
    }
}

/// Advances one turn: the player acts, then each enemy in list order either
/// stays or steps to a free floor neighbour, chosen uniformly. Calls on a
/// finished game return it unchanged.
pub fn step_game(mut state: GameState, action: Action) -> GameState {
    if state.is_over() {
        return state;
    }
    state.turn += 1;
    let grid = &state.level.grid;
    match action.dir() {
        Some(d) => {
            state.facing = d;
            if let Some(next) = grid.step(state.player, d) {
                if grid.is_floor(next) && !state.enemies.contains(&next) {
                    state.player = next;
                    if next == state.level.key {
                        state.has_key = true;
                    }
                    if next == state.level.goal && state.has_key {
                        state.status = Status::Won;
                        return state;
                    }
                }
            }
        }
        None if action == Action::Attack => {
            if let Some(target) = grid.step(state.player, state.facing) {
                state.enemies.retain(|e| *e != target);
            }
        }
        None => {}
    }
    for i in 0..state.enemies.len() {
        let here = state.enemies[i];
        let mut options = vec![here];
        for d in Dir::ALL {
            if let Some(n) = grid.step(here, d) {
                if grid.is_floor(n) && !state.enemies.contains(&n) {
                    options.push(n);
                }
            }
        }
        let pick = options[state.rng.below(options.len())];
        state.enemies[i] = pick;
        if pick == state.player {
            state.status = Status::Lost;
            return state;
        }
    }
    state
}
