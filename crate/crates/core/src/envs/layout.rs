use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};

/// Grid cell, row 0 being the top line of the text layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

pub const UMAZE: &str = "\
#####
#S..#
###.#
#G..#
#####
";

pub const MEDIUM_MAZE: &str = "\
########
#S.##..#
#..#...#
##...###
#..#...#
#.#..#.#
#...#.G#
########
";

pub const LARGE_MAZE: &str = "\
############
#S...#.....#
#.##.#.#.#.#
#......#...#
#.####.###.#
#..#.#.....#
##.#.#.#.###
#..#...#..G#
############
";

pub const KEY_DOOR: &str = "\
#######
#K...S#
#.....#
#.....#
#G....#
#######
";

/// Occupancy grid parsed from text: `#` wall, `.` free, `S` start,
/// `G` goal, `K` key/latch (optional). Marked cells are free.
///
/// Continuous coordinates put cell `(row, col)` at
/// `x ∈ [col, col + 1)`, `y ∈ [height − 1 − row, height − row)`, so "up" in
/// the text is `+y`.
#[derive(Clone, Debug, PartialEq)]
pub struct MazeLayout {
    width: usize,
    height: usize,
    free: Vec<bool>,
    pub start: Cell,
    pub goal: Cell,
    pub key: Option<Cell>,
}

impl MazeLayout {
    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if lines.is_empty() {
            return Err(Error::config("empty maze layout"));
        }
        let width = lines[0].chars().count();
        let height = lines.len();
        let mut free = Vec::with_capacity(width * height);
        let (mut start, mut goal, mut key) = (None, None, None);
        for (row, line) in lines.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::config(format!(
                    "maze line {} has width {}, expected {width}",
                    row + 1,
                    line.chars().count()
                )));
            }
            for (col, ch) in line.chars().enumerate() {
                let cell = Cell::new(row, col);
                let slot = match ch {
                    '#' => {
                        free.push(false);
                        continue;
                    }
                    '.' => None,
                    'S' => Some(&mut start),
                    'G' => Some(&mut goal),
                    'K' => Some(&mut key),
                    other => {
                        return Err(Error::config(format!(
                            "maze line {}: unexpected character '{other}'",
                            row + 1
                        )))
                    }
                };
                if let Some(slot) = slot {
                    if slot.replace(cell).is_some() {
                        return Err(Error::config(format!(
                            "maze marker '{ch}' appears more than once"
                        )));
                    }
                }
                free.push(true);
            }
        }
        let start = start.ok_or_else(|| Error::config("maze has no start cell 'S'"))?;
        let goal = goal.ok_or_else(|| Error::config("maze has no goal cell 'G'"))?;
        Ok(Self {
            width,
            height,
            free,
            start,
            goal,
            key,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width && self.free[cell.row * self.width + cell.col]
    }

    pub fn free_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|r| (0..self.width).map(move |c| Cell::new(r, c)))
            .filter(|c| self.is_free(*c))
            .collect()
    }

    pub fn center(&self, cell: Cell) -> [f64; 2] {
        [
            cell.col as f64 + 0.5,
            (self.height - 1 - cell.row) as f64 + 0.5,
        ]
    }

    /// Cell containing a continuous position, if inside the grid bounds.
    pub fn cell_at(&self, pos: [f64; 2]) -> Option<Cell> {
        let [x, y] = pos;
        if !(x >= 0.0 && y >= 0.0 && x < self.width as f64 && y < self.height as f64) {
            return None;
        }
        let col = x.floor() as usize;
        let row = self.height - 1 - y.floor() as usize;
        Some(Cell::new(row, col))
    }

    pub fn is_free_pos(&self, pos: [f64; 2]) -> bool {
        self.cell_at(pos).is_some_and(|c| self.is_free(c))
    }

    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = Cell> + '_ {
        let Cell { row, col } = cell;
        let cand = [
            row.checked_sub(1).map(|r| Cell::new(r, col)),
            Some(Cell::new(row + 1, col)),
            col.checked_sub(1).map(|c| Cell::new(row, c)),
            Some(Cell::new(row, col + 1)),
        ];
        cand.into_iter().flatten().filter(|c| self.is_free(*c))
    }

    /// Free cells with a single free neighbour.
    pub fn dead_ends(&self) -> Vec<Cell> {
        self.free_cells()
            .into_iter()
            .filter(|c| self.neighbors(*c).count() == 1)
            .collect()
    }

    /// A* over 4-connected free cells; includes both endpoints.
    pub fn shortest_path(&self, from: Cell, to: Cell) -> Option<Vec<Cell>> {
        if !self.is_free(from) || !self.is_free(to) {
            return None;
        }
        let h = |c: Cell| c.row.abs_diff(to.row) + c.col.abs_diff(to.col);
        let mut open = BinaryHeap::new();
        let mut cost: HashMap<Cell, usize> = HashMap::new();
        let mut came_from: HashMap<Cell, Cell> = HashMap::new();
        cost.insert(from, 0);
        open.push(Reverse((h(from), from)));
        while let Some(Reverse((_, cur))) = open.pop() {
            if cur == to {
                let mut path = vec![cur];
                let mut c = cur;
                while let Some(&p) = came_from.get(&c) {
                    path.push(p);
                    c = p;
                }
                path.reverse();
                return Some(path);
            }
            let g = cost[&cur];
            for n in self.neighbors(cur) {
                if cost.get(&n).is_none_or(|&old| g + 1 < old) {
                    cost.insert(n, g + 1);
                    came_from.insert(n, cur);
                    open.push(Reverse((g + 1 + h(n), n)));
                }
            }
        }
        None
    }
}
