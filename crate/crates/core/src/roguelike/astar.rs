//! Shortest 4-connected paths over floor tiles.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::level::{Cell, TileGrid};

/// A* with unit step cost and a Manhattan heuristic. The path includes both
/// endpoints; `None` when either endpoint is a wall or no path exists.
pub fn astar_path(grid: &TileGrid, from: Cell, to: Cell) -> Option<Vec<Cell>> {
    if grid.is_wall(from) || grid.is_wall(to) {
        return None;
    }
    let w = grid.width();
    let idx = |c: Cell| c.row * w + c.col;
    let n = grid.height() * w;
    let mut g = vec![usize::MAX; n];
    let mut parent: Vec<Option<Cell>> = vec![None; n];
    let mut open = BinaryHeap::new();
    g[idx(from)] = 0;
    // (f, h, tiebreak sequence) keeps expansion order deterministic.
    let mut seq = 0usize;
    open.push(Reverse((from.manhattan(&to), from.manhattan(&to), seq, from)));
    while let Some(Reverse((_, _, _, cur))) = open.pop() {
        if cur == to {
            let mut path = vec![cur];
            let mut c = cur;
            while let Some(p) = parent[idx(c)] {
                path.push(p);
                c = p;
            }
            path.reverse();
            return Some(path);
        }
        let gc = g[idx(cur)];
        for nb in grid.floor_neighbors(cur) {
            let cand = gc + 1;
            if cand < g[idx(nb)] {
                g[idx(nb)] = cand;
                parent[idx(nb)] = Some(cur);
                let h = nb.manhattan(&to);
                seq += 1;
                open.push(Reverse((cand + h, h, seq, nb)));
            }
        }
    }
    None
}

/// Number of steps on a shortest path, or `None` if unreachable.
pub fn astar_path_length(grid: &TileGrid, from: Cell, to: Cell) -> Option<usize> {
    astar_path(grid, from, to).map(|p| p.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adjacent_and_same_cell() {
        let g = TileGrid::open(3, 3);
        assert_eq!(astar_path_length(&g, Cell::new(0, 0), Cell::new(0, 1)), Some(1));
        assert_eq!(astar_path_length(&g, Cell::new(1, 1), Cell::new(1, 1)), Some(0));
    }

    #[test]
    fn open_grid_corner_to_corner() {
        let g = TileGrid::open(5, 5);
        let p = astar_path(&g, Cell::new(0, 0), Cell::new(4, 4)).unwrap();
        assert_eq!(p.len() - 1, 8);
        for w in p.windows(2) {
            assert_eq!(w[0].manhattan(&w[1]), 1);
        }
    }

    #[test]
    fn enclosed_target_unreachable() {
        let mut g = TileGrid::open(5, 5);
        for c in [Cell::new(1, 2), Cell::new(3, 2), Cell::new(2, 1), Cell::new(2, 3)] {
            g.set_wall(c, true);
        }
        assert_eq!(astar_path_length(&g, Cell::new(0, 0), Cell::new(2, 2)), None);
        assert_eq!(astar_path_length(&g, Cell::new(0, 0), Cell::new(1, 2)), None);
    }
}
