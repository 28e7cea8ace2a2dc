use super::layout::MazeLayout;
use crate::error::{Error, Result};
use crate::mdp::ReplayBuffer;

/// Square regions of side `cell_size` tiling the maze. A region counts as
/// visitable when its centre lies in free space.
#[derive(Clone, Debug)]
pub struct CoverageGrid {
    cell_size: f64,
    cols: usize,
    rows: usize,
    visitable: Vec<bool>,
    visitable_count: usize,
}

impl CoverageGrid {
    pub fn new(layout: &MazeLayout, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::config(format!("coverage cell size must be positive, got {cell_size}")));
        }
        let cols = (layout.width() as f64 / cell_size).ceil() as usize;
        let rows = (layout.height() as f64 / cell_size).ceil() as usize;
        let mut visitable = Vec::with_capacity(rows * cols);
        for j in 0..rows {
            for i in 0..cols {
                let centre = [(i as f64 + 0.5) * cell_size, (j as f64 + 0.5) * cell_size];
                visitable.push(layout.is_free_pos(centre));
            }
        }
        let visitable_count = visitable.iter().filter(|v| **v).count();
        Ok(Self {
            cell_size,
            cols,
            rows,
            visitable,
            visitable_count,
        })
    }

    pub fn visitable_count(&self) -> usize {
        self.visitable_count
    }

    /// Index of the visitable region containing `pos`.
    pub fn region(&self, pos: [f64; 2]) -> Option<usize> {
        let i = (pos[0] / self.cell_size).floor();
        let j = (pos[1] / self.cell_size).floor();
        if i < 0.0 || j < 0.0 || i as usize >= self.cols || j as usize >= self.rows {
            return None;
        }
        let idx = j as usize * self.cols + i as usize;
        self.visitable[idx].then_some(idx)
    }
}

/// Incrementally maintained visited-region set.
#[derive(Clone, Debug)]
pub struct CoverageTracker {
    grid: CoverageGrid,
    visited: Vec<bool>,
    count: usize,
}

impl CoverageTracker {
    pub fn new(grid: CoverageGrid) -> Self {
        let visited = vec![false; grid.visitable.len()];
        Self {
            grid,
            visited,
            count: 0,
        }
    }

    pub fn visit(&mut self, pos: [f64; 2]) {
        if let Some(idx) = self.grid.region(pos) {
            if !self.visited[idx] {
                self.visited[idx] = true;
                self.count += 1;
            }
        }
    }

    pub fn fraction(&self) -> f64 {
        if self.grid.visitable_count == 0 {
            0.0
        } else {
            self.count as f64 / self.grid.visitable_count as f64
        }
    }
}

/// Fraction of visitable regions containing at least one state or next
/// state from `buffer`.
pub fn coverage(buffer: &ReplayBuffer, layout: &MazeLayout, cell_size: f64) -> Result<f64> {
    let mut tracker = CoverageTracker::new(CoverageGrid::new(layout, cell_size)?);
    for t in buffer.iter() {
        tracker.visit([t.state[0], t.state[1]]);
        tracker.visit([t.next_state[0], t.next_state[1]]);
    }
    Ok(tracker.fraction())
}
