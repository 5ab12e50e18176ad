//! Sudoku design space: puzzles indexed by their number of given digits.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionKind, DEFAULT_EI_SAMPLES};
use crate::design::DesignSpace;
use crate::engine::{AdaptationContext, Domain};
use crate::gp::{KernelSpec, PriorMean};

pub const MIN_HINTS: u8 = 17;
pub const MAX_HINTS: u8 = 80;
/// Prior anchors `(hints, seconds)`.
pub const PRIOR_ANCHORS: [(f64, f64); 2] = [(80.0, 3.0), (17.0, 600.0)];
/// Backtracking nodes allowed when checking uniqueness of a generated puzzle.
pub const UNIQUENESS_NODE_BUDGET: u64 = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SudokuError {
    #[error("hint count {0} outside [17, 80]")]
    HintsOutOfRange(i64),
    #[error("grid must have 81 cells, got {0}")]
    Length(usize),
    #[error("invalid cell character {0:?}")]
    InvalidCell(char),
}

/// 81 cells, row-major; 0 is blank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Grid(pub [u8; 81]);

impl Grid {
    pub fn empty() -> Self {
        Grid([0; 81])
    }

    pub fn filled(&self) -> usize {
        self.0.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_complete(&self) -> bool {
        self.0.iter().all(|&v| v != 0)
    }

    /// No digit repeats in any row, column or box (blanks ignored).
    pub fn is_consistent(&self) -> bool {
        let mut rows = [0u16; 9];
        let mut cols = [0u16; 9];
        let mut boxes = [0u16; 9];
        for (i, &v) in self.0.iter().enumerate() {
            if v == 0 {
                continue;
            }
            if v > 9 {
                return false;
            }
            let bit = 1u16 << v;
            let (r, c, b) = (i / 9, i % 9, box_of(i));
            if rows[r] & bit != 0 || cols[c] & bit != 0 || boxes[b] & bit != 0 {
                return false;
            }
            rows[r] |= bit;
            cols[c] |= bit;
            boxes[b] |= bit;
        }
        true
    }

    pub fn is_solved(&self) -> bool {
        self.is_complete() && self.is_consistent()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.0 {
            write!(f, "{}", (b'0' + v) as char)?;
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = SudokuError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != 81 {
            return Err(SudokuError::Length(chars.len()));
        }
        let mut g = [0u8; 81];
        for (cell, ch) in g.iter_mut().zip(chars) {
            *cell = ch
                .to_digit(10)
                .map(|d| d as u8)
                .ok_or(SudokuError::InvalidCell(ch))?;
        }
        Ok(Grid(g))
    }
}

impl Serialize for Grid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn box_of(i: usize) -> usize {
    (i / 27) * 3 + (i % 9) / 3
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SudokuPuzzle {
    pub givens: Grid,
    pub solution: Grid,
    pub hint_count: u8,
    /// `None` when the uniqueness check ran out of budget.
    pub unique_solution: Option<bool>,
}

/// Random complete grid: a pattern grid under random digit relabeling,
/// row/column shuffles within bands/stacks, band/stack shuffles and an
/// optional transpose.
pub fn generate_full_grid<R: Rng + ?Sized>(rng: &mut R) -> Grid {
    let mut digits: Vec<u8> = (1..=9).collect();
    digits.shuffle(rng);
    let mut rows = shuffled_lines(rng);
    let mut cols = shuffled_lines(rng);
    if rng.random_bool(0.5) {
        std::mem::swap(&mut rows, &mut cols);
    }
    let mut g = [0u8; 81];
    for (r, &pr) in rows.iter().enumerate() {
        for (c, &pc) in cols.iter().enumerate() {
            let pattern = (pr * 3 + pr / 3 + pc) % 9;
            g[r * 9 + c] = digits[pattern];
        }
    }
    Grid(g)
}

/// Permutation of 0..9 that keeps lines within their band of three.
fn shuffled_lines<R: Rng + ?Sized>(rng: &mut R) -> [usize; 9] {
    let mut bands = [0usize, 1, 2];
    bands.shuffle(rng);
    let mut out = [0usize; 9];
    for (slot, band) in bands.iter().enumerate() {
        let mut inner = [0usize, 1, 2];
        inner.shuffle(rng);
        for (k, i) in inner.iter().enumerate() {
            out[slot * 3 + k] = band * 3 + i;
        }
    }
    out
}

/// Blanks `81 - hints` cells of `solution`, visiting cells in random order.
///
/// A first pass only keeps removals that leave a unique completion; if that
/// pass cannot reach the target, the skipped cells are blanked in visiting
/// order regardless. The result always has the requested hint count and at
/// least one completion; uniqueness is measured afterwards, not guaranteed.
pub fn dig_to_hints<R: Rng + ?Sized>(
    solution: &Grid,
    hints: i64,
    rng: &mut R,
) -> Result<SudokuPuzzle, SudokuError> {
    if !(MIN_HINTS as i64..=MAX_HINTS as i64).contains(&hints) {
        return Err(SudokuError::HintsOutOfRange(hints));
    }
    let to_remove = 81 - hints as usize;
    let mut order: Vec<usize> = (0..81).collect();
    order.shuffle(rng);
    let mut givens = *solution;
    let mut removed = 0usize;
    let mut skipped = Vec::new();
    for &i in &order {
        if removed == to_remove {
            break;
        }
        let v = givens.0[i];
        givens.0[i] = 0;
        if count_solutions_budgeted(&givens, 2, UNIQUENESS_NODE_BUDGET) == Some(1) {
            removed += 1;
        } else {
            givens.0[i] = v;
            skipped.push(i);
        }
    }
    for &i in &skipped {
        if removed == to_remove {
            break;
        }
        givens.0[i] = 0;
        removed += 1;
    }
    let unique_solution =
        count_solutions_budgeted(&givens, 2, UNIQUENESS_NODE_BUDGET).map(|n| n == 1);
    Ok(SudokuPuzzle {
        givens,
        solution: *solution,
        hint_count: hints as u8,
        unique_solution,
    })
}

/// Fresh puzzle with the requested number of givens.
pub fn generate_puzzle<R: Rng + ?Sized>(hints: i64, rng: &mut R) -> Result<SudokuPuzzle, SudokuError> {
    let full = generate_full_grid(rng);
    dig_to_hints(&full, hints, rng)
}

/// Number of completions of `givens`, saturating at `cap`.
pub fn count_solutions(givens: &Grid, cap: usize) -> usize {
    count_solutions_budgeted(givens, cap, u64::MAX).expect("unbounded budget")
}

/// As [`count_solutions`], but gives up (returning `None`) after
/// `node_budget` search nodes.
pub fn count_solutions_budgeted(givens: &Grid, cap: usize, node_budget: u64) -> Option<usize> {
    let cap = cap.max(1);
    if !givens.is_consistent() {
        return Some(0);
    }
    let mut s = Solver::new(givens);
    let mut nodes = 0u64;
    let mut found = 0usize;
    if s.search(cap, node_budget, &mut nodes, &mut found, &mut None) {
        Some(found)
    } else {
        None
    }
}

/// Some completion of `givens`.
pub fn solve(givens: &Grid) -> Option<Grid> {
    find_other_completion(givens, &Grid::empty())
}

/// A completion of `givens` other than `avoid`, if one exists.
pub fn find_other_completion(givens: &Grid, avoid: &Grid) -> Option<Grid> {
    if !givens.is_consistent() {
        return None;
    }
    let mut s = Solver::new(givens);
    let mut nodes = 0u64;
    let mut found = 0usize;
    let mut collector = Some(Vec::new());
    s.search(2, u64::MAX, &mut nodes, &mut found, &mut collector);
    collector.unwrap().into_iter().find(|g| g != avoid)
}

struct Solver {
    cells: [u8; 81],
    rows: [u16; 9],
    cols: [u16; 9],
    boxes: [u16; 9],
}

const ALL: u16 = 0b11_1111_1110;

impl Solver {
    fn new(g: &Grid) -> Self {
        let mut s = Solver {
            cells: g.0,
            rows: [0; 9],
            cols: [0; 9],
            boxes: [0; 9],
        };
        for (i, &v) in g.0.iter().enumerate() {
            if v != 0 {
                s.set(i, v);
            }
        }
        s
    }

    fn set(&mut self, i: usize, v: u8) {
        let bit = 1u16 << v;
        self.cells[i] = v;
        self.rows[i / 9] |= bit;
        self.cols[i % 9] |= bit;
        self.boxes[box_of(i)] |= bit;
    }

    fn unset(&mut self, i: usize, v: u8) {
        let bit = !(1u16 << v);
        self.cells[i] = 0;
        self.rows[i / 9] &= bit;
        self.cols[i % 9] &= bit;
        self.boxes[box_of(i)] &= bit;
    }

    fn candidates(&self, i: usize) -> u16 {
        ALL & !(self.rows[i / 9] | self.cols[i % 9] | self.boxes[box_of(i)])
    }

    /// Returns false when the node budget ran out.
    fn search(
        &mut self,
        cap: usize,
        budget: u64,
        nodes: &mut u64,
        found: &mut usize,
        collect: &mut Option<Vec<Grid>>,
    ) -> bool {
        *nodes += 1;
        if *nodes > budget {
            return false;
        }
        // Most-constrained blank cell.
        let mut best: Option<(usize, u16)> = None;
        for i in 0..81 {
            if self.cells[i] != 0 {
                continue;
            }
            let c = self.candidates(i);
            let n = c.count_ones();
            if n == 0 {
                return true;
            }
            if best.is_none_or(|(_, bc)| n < bc.count_ones()) {
                best = Some((i, c));
                if n == 1 {
                    break;
                }
            }
        }
        let Some((i, mut cand)) = best else {
            *found += 1;
            if let Some(v) = collect {
                v.push(Grid(self.cells));
            }
            return true;
        };
        while cand != 0 {
            let v = cand.trailing_zeros() as u8;
            cand &= cand - 1;
            self.set(i, v);
            let ok = self.search(cap, budget, nodes, found, collect);
            self.unset(i, v);
            if !ok {
                return false;
            }
            if *found >= cap {
                return true;
            }
        }
        true
    }
}

/// True iff `submitted` is a complete valid grid agreeing with every given.
pub fn validate_submission(puzzle: &SudokuPuzzle, submitted: &Grid) -> bool {
    submitted.is_solved()
        && puzzle
            .givens
            .0
            .iter()
            .zip(submitted.0.iter())
            .all(|(&g, &s)| g == 0 || g == s)
}

/// Parses and validates an 81-character submission.
pub fn validate_submission_str(puzzle: &SudokuPuzzle, submitted: &str) -> Result<bool, SudokuError> {
    let g: Grid = submitted.parse()?;
    Ok(validate_submission(puzzle, &g))
}

pub fn prior_mean() -> PriorMean {
    PriorMean::piecewise(PRIOR_ANCHORS.to_vec())
}

/// Prior completion time in seconds, linear between the anchors.
pub fn sudoku_prior(hints: i64) -> Result<f64, SudokuError> {
    if !(MIN_HINTS as i64..=MAX_HINTS as i64).contains(&hints) {
        return Err(SudokuError::HintsOutOfRange(hints));
    }
    Ok(prior_mean().seconds(&[hints as f64]))
}

pub fn design_space() -> DesignSpace {
    DesignSpace::integer_range(MIN_HINTS as i64, MAX_HINTS as i64).expect("non-empty range")
}

pub fn default_kernel() -> KernelSpec {
    KernelSpec::rbf(vec![0.2], 1.0)
}

pub fn context() -> AdaptationContext {
    AdaptationContext::new(
        Domain::Sudoku,
        design_space(),
        prior_mean(),
        default_kernel(),
        AcquisitionKind::ModifiedEi {
            n_samples: DEFAULT_EI_SAMPLES,
        },
    )
}
