use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::astar::astar_path_length;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn manhattan(&self, other: &Cell) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];
}

/// Wall/floor layout. Cells outside the grid count as walls.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TileGrid {
    height: usize,
    width: usize,
    walls: Vec<bool>,
}

impl TileGrid {
    pub fn open(height: usize, width: usize) -> Self {
        TileGrid {
            height,
            width,
            walls: vec![false; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.row < self.height && c.col < self.width
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        !self.in_bounds(c) || self.walls[c.row * self.width + c.col]
    }

    pub fn is_floor(&self, c: Cell) -> bool {
        !self.is_wall(c)
    }

    pub fn set_wall(&mut self, c: Cell, wall: bool) {
        assert!(self.in_bounds(c));
        let w = self.width;
        self.walls[c.row * w + c.col] = wall;
    }

    pub fn step(&self, c: Cell, d: Dir) -> Option<Cell> {
        let next = match d {
            Dir::Up => Cell::new(c.row.checked_sub(1)?, c.col),
            Dir::Down => Cell::new(c.row + 1, c.col),
            Dir::Left => Cell::new(c.row, c.col.checked_sub(1)?),
            Dir::Right => Cell::new(c.row, c.col + 1),
        };
        self.in_bounds(next).then_some(next)
    }

    /// In-bounds floor neighbours in `Dir::ALL` order.
    pub fn floor_neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        Dir::ALL
            .into_iter()
            .filter_map(move |d| self.step(c, d))
            .filter(|n| self.is_floor(*n))
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |r| (0..self.width).map(move |c| Cell::new(r, c)))
    }

    pub fn floor_cells(&self) -> Vec<Cell> {
        self.cells().filter(|c| self.is_floor(*c)).collect()
    }

    pub(crate) fn insert_row(&mut self, at: usize) {
        let w = self.width;
        let idx = at * w;
        self.walls.splice(idx..idx, std::iter::repeat_n(false, w));
        self.height += 1;
    }

    pub(crate) fn remove_row(&mut self, at: usize) {
        let w = self.width;
        self.walls.drain(at * w..(at + 1) * w);
        self.height -= 1;
    }

    pub(crate) fn insert_col(&mut self, at: usize) {
        let mut walls = Vec::with_capacity(self.height * (self.width + 1));
        for r in 0..self.height {
            for c in 0..=self.width {
                walls.push(match c.cmp(&at) {
                    std::cmp::Ordering::Less => self.walls[r * self.width + c],
                    std::cmp::Ordering::Equal => false,
                    std::cmp::Ordering::Greater => self.walls[r * self.width + c - 1],
                });
            }
        }
        self.walls = walls;
        self.width += 1;
    }

    pub(crate) fn remove_col(&mut self, at: usize) {
        let w = self.width;
        self.walls = self
            .walls
            .iter()
            .enumerate()
            .filter(|(i, _)| i % w != at)
            .map(|(_, v)| *v)
            .collect();
        self.width -= 1;
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LevelError {
    #[error("level text is empty")]
    Empty,
    #[error("row {row} has width {got}, expected {expected}")]
    Ragged { row: usize, got: usize, expected: usize },
    #[error("unknown tile {0:?}")]
    UnknownTile(char),
    #[error("expected exactly one {0}")]
    Entity(&'static str),
    #[error("no path from {from} to {to}")]
    Unreachable { from: &'static str, to: &'static str },
    #[error("stored features (l={l}, r={r}) disagree with the layout")]
    Features { l: usize, r: usize },
    #[error("placement budget exhausted")]
    Budget,
}

/// A playable level and its two difficulty features.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Level {
    pub grid: TileGrid,
    pub avatar: Cell,
    pub key: Cell,
    pub goal: Cell,
    pub enemies: Vec<Cell>,
    /// Number of enemies.
    pub leniency: usize,
    /// A* steps avatar to key plus key to goal.
    pub reachability: usize,
}

impl Level {
    /// Builds a level, computing its features; fails if a path is missing
    /// or entities overlap or sit on walls.
    pub fn new(
        grid: TileGrid,
        avatar: Cell,
        key: Cell,
        goal: Cell,
        mut enemies: Vec<Cell>,
    ) -> Result<Self, LevelError> {
        enemies.sort();
        let mut occupied = vec![avatar, key, goal];
        occupied.extend(enemies.iter().copied());
        for c in &occupied {
            if grid.is_wall(*c) {
                return Err(LevelError::Entity("entity on a floor tile"));
            }
        }
        let mut sorted = occupied.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != occupied.len() {
            return Err(LevelError::Entity("entity per tile"));
        }
        let to_key = astar_path_length(&grid, avatar, key).ok_or(LevelError::Unreachable {
            from: "avatar",
            to: "key",
        })?;
        let to_goal = astar_path_length(&grid, key, goal).ok_or(LevelError::Unreachable {
            from: "key",
            to: "goal",
        })?;
        Ok(Level {
            leniency: enemies.len(),
            reachability: to_key + to_goal,
            grid,
            avatar,
            key,
            goal,
            enemies,
        })
    }

    /// Re-derives the features and checks every layout invariant.
    pub fn validate(&self) -> Result<(), LevelError> {
        let rebuilt = Level::new(
            self.grid.clone(),
            self.avatar,
            self.key,
            self.goal,
            self.enemies.clone(),
        )?;
        if rebuilt.leniency != self.leniency || rebuilt.reachability != self.reachability {
            return Err(LevelError::Features {
                l: self.leniency,
                r: self.reachability,
            });
        }
        Ok(())
    }

    pub fn features(&self) -> (usize, usize) {
        (self.leniency, self.reachability)
    }

    fn tile_char(&self, c: Cell) -> char {
        if c == self.avatar {
            'A'
        } else if c == self.key {
            'K'
        } else if c == self.goal {
            'G'
        } else if self.enemies.binary_search(&c).is_ok() {
            'E'
        } else if self.grid.is_wall(c) {
            '#'
        } else {
            '.'
        }
    }
}

/// One row per line: `#` wall, `.` floor, `A` avatar, `K` key, `G` goal,
/// `E` enemy. No trailing newline.
impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.grid.height() {
            if r > 0 {
                writeln!(f)?;
            }
            for c in 0..self.grid.width() {
                write!(f, "{}", self.tile_char(Cell::new(r, c)))?;
            }
        }
        Ok(())
    }
}

impl FromStr for Level {
    type Err = LevelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rows: Vec<&str> = s.lines().map(|l| l.trim_end_matches('\r')).collect();
        let rows: Vec<&str> = rows.into_iter().filter(|l| !l.is_empty()).collect();
        let width = rows.first().ok_or(LevelError::Empty)?.chars().count();
        let mut grid = TileGrid::open(rows.len(), width);
        let (mut avatar, mut key, mut goal) = (None, None, None);
        let mut enemies = Vec::new();
        for (r, line) in rows.iter().enumerate() {
            let got = line.chars().count();
            if got != width {
                return Err(LevelError::Ragged {
                    row: r,
                    got,
                    expected: width,
                });
            }
            for (c, ch) in line.chars().enumerate() {
                let cell = Cell::new(r, c);
                let slot = match ch {
                    '#' => {
                        grid.set_wall(cell, true);
                        continue;
                    }
                    '.' => continue,
                    'A' => &mut avatar,
                    'K' => &mut key,
                    'G' => &mut goal,
                    'E' => {
                        enemies.push(cell);
                        continue;
                    }
                    other => return Err(LevelError::UnknownTile(other)),
                };
                if slot.replace(cell).is_some() {
                    return Err(LevelError::Entity(match ch {
                        'A' => "avatar",
                        'K' => "key",
                        _ => "goal",
                    }));
                }
            }
        }
        Level::new(
            grid,
            avatar.ok_or(LevelError::Entity("avatar"))?,
            key.ok_or(LevelError::Entity("key"))?,
            goal.ok_or(LevelError::Entity("goal"))?,
            enemies,
        )
    }
}
