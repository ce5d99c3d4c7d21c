//! Grid geometry, path masks and the Hamming loss.
//!
//! Cells are addressed row-major; index `row * k + col`. A path is a set of
//! cells (order is irrelevant for the cost), with 8-neighbour moves allowed.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    #[inline]
    pub fn index(self, k: usize) -> usize {
        self.row * k + self.col
    }

    #[inline]
    pub fn from_index(index: usize, k: usize) -> Self {
        Cell::new(index / k, index % k)
    }

    #[inline]
    pub fn in_grid(self, k: usize) -> bool {
        self.row < k && self.col < k
    }

    fn check(self, k: usize) -> Result<()> {
        if self.in_grid(k) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                row: self.row,
                col: self.col,
                k,
            })
        }
    }
}

impl From<(usize, usize)> for Cell {
    fn from((row, col): (usize, usize)) -> Self {
        Cell::new(row, col)
    }
}

/// Grid side plus the two path endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridProblem {
    k: usize,
    start: Cell,
    goal: Cell,
}

impl GridProblem {
    /// Top-left to bottom-right on a `k`×`k` grid.
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("grid side must be at least 1"));
        }
        Ok(GridProblem {
            k,
            start: Cell::new(0, 0),
            goal: Cell::new(k - 1, k - 1),
        })
    }

    pub fn with_endpoints(k: usize, start: Cell, goal: Cell) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("grid side must be at least 1"));
        }
        start.check(k)?;
        goal.check(k)?;
        Ok(GridProblem { k, start, goal })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn start(&self) -> Cell {
        self.start
    }

    pub fn goal(&self) -> Cell {
        self.goal
    }

    pub fn cells(&self) -> usize {
        self.k * self.k
    }
}

/// Strictly positive cost of entering each cell.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGrid {
    k: usize,
    weights: Vec<f64>,
}

impl WeightGrid {
    pub fn new(k: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != k * k {
            return Err(Error::ShapeMismatch {
                expected: k * k,
                found: weights.len(),
            });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(WeightGrid { k, weights })
    }

    /// Builds a grid after raising every entry to at least `floor`.
    ///
    /// NaN entries are rejected; `floor` must itself be positive.
    pub fn clamped(k: usize, mut weights: Vec<f64>, floor: f64) -> Result<Self> {
        for w in &mut weights {
            if *w < floor {
                *w = floor;
            }
        }
        WeightGrid::new(k, weights)
    }

    pub fn uniform(k: usize, value: f64) -> Result<Self> {
        WeightGrid::new(k, vec![value; k * k])
    }

    /// `diagonal` on the main diagonal, `off` everywhere else.
    pub fn contrast(k: usize, diagonal: f64, off: f64) -> Result<Self> {
        WeightGrid::from_fn(k, |c| if c.row == c.col { diagonal } else { off })
    }

    pub fn from_fn(k: usize, mut f: impl FnMut(Cell) -> f64) -> Result<Self> {
        let weights = (0..k * k).map(|i| f(Cell::from_index(i, k))).collect();
        WeightGrid::new(k, weights)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> f64 {
        self.weights[cell.index(self.k)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.weights
    }

    /// Minimum over every cell, the start cell included.
    pub fn min(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().sum::<f64>() / self.weights.len() as f64
    }
}

/// Indicator of the cells lying on a path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PathMask {
    k: usize,
    cells: Vec<bool>,
}

impl PathMask {
    pub fn empty(k: usize) -> Self {
        PathMask {
            k,
            cells: vec![false; k * k],
        }
    }

    pub fn from_bools(k: usize, cells: Vec<bool>) -> Result<Self> {
        if cells.len() != k * k {
            return Err(Error::ShapeMismatch {
                expected: k * k,
                found: cells.len(),
            });
        }
        Ok(PathMask { k, cells })
    }

    pub fn from_cells(k: usize, cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let mut mask = PathMask::empty(k);
        for c in cells {
            c.check(k)?;
            mask.cells[c.index(k)] = true;
        }
        Ok(mask)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, cell: Cell) -> bool {
        self.cells[cell.index(self.k)]
    }

    #[inline]
    pub fn set(&mut self, cell: Cell, on: bool) {
        self.cells[cell.index(self.k)] = on;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let k = self.k;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(i, _)| Cell::from_index(i, k))
    }

    pub fn complement(&self) -> Self {
        PathMask {
            k: self.k,
            cells: self.cells.iter().map(|b| !b).collect(),
        }
    }

    /// 0.0 / 1.0 per cell.
    pub fn to_f64(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect()
    }
}

/// In-bounds 8-neighbours of `cell`, row-major order.
pub fn neighbors(cell: Cell, k: usize) -> Result<Vec<Cell>> {
    cell.check(k)?;
    Ok(neighbor_iter(cell, k).collect())
}

/// Unchecked neighbour iteration used on the solver hot path.
#[inline]
pub(crate) fn neighbor_iter(cell: Cell, k: usize) -> impl Iterator<Item = Cell> {
    let r0 = cell.row.saturating_sub(1);
    let c0 = cell.col.saturating_sub(1);
    let r1 = (cell.row + 1).min(k - 1);
    let c1 = (cell.col + 1).min(k - 1);
    (r0..=r1)
        .flat_map(move |r| (c0..=c1).map(move |c| Cell::new(r, c)))
        .filter(move |&c| c != cell)
}

/// Sum of weights over path cells, the start cell excluded.
pub fn path_cost(weights: &WeightGrid, mask: &PathMask, problem: &GridProblem) -> Result<f64> {
    if weights.k() != problem.k() {
        return Err(Error::ShapeMismatch {
            expected: problem.cells(),
            found: weights.as_slice().len(),
        });
    }
    if !validate_path(mask, problem) {
        return Err(Error::InvalidPath);
    }
    Ok(masked_sum(weights, mask, problem.start()))
}

/// Path cost without validating the mask.
pub(crate) fn masked_sum(weights: &WeightGrid, mask: &PathMask, start: Cell) -> f64 {
    let skip = start.index(weights.k());
    weights
        .as_slice()
        .iter()
        .zip(mask.as_slice())
        .enumerate()
        .filter(|&(i, (_, &on))| on && i != skip)
        .map(|(_, (w, _))| *w)
        .sum()
}

pub fn hamming(a: &PathMask, b: &PathMask) -> Result<usize> {
    if a.k != b.k {
        return Err(Error::ShapeMismatch {
            expected: a.cells.len(),
            found: b.cells.len(),
        });
    }
    Ok(a.cells.iter().zip(&b.cells).filter(|(x, y)| x != y).count())
}

/// Derivative of `Σ yᵢ + yᵢ* − 2yᵢyᵢ*` with respect to `y`: `1 − 2yᵢ*`.
pub fn hamming_grad(true_mask: &PathMask) -> Vec<f64> {
    true_mask
        .cells
        .iter()
        .map(|&on| if on { -1.0 } else { 1.0 })
        .collect()
}

/// True iff the set cells can be ordered into a simple 8-connected path that
/// starts at `problem.start()`, ends at `problem.goal()` and uses every set cell.
pub fn validate_path(mask: &PathMask, problem: &GridProblem) -> bool {
    let k = problem.k();
    if mask.k != k || !mask.get(problem.start()) || !mask.get(problem.goal()) {
        return false;
    }
    let on: Vec<usize> = (0..k * k).filter(|&i| mask.cells[i]).collect();
    if problem.start() == problem.goal() {
        return on.len() == 1;
    }

    let degree = |i: usize| {
        neighbor_iter(Cell::from_index(i, k), k)
            .filter(|c| mask.get(*c))
            .count()
    };
    let start = problem.start().index(k);
    let goal = problem.goal().index(k);

    let mut induced = true;
    for &i in &on {
        let d = degree(i);
        let endpoint = i == start || i == goal;
        if d == 0 || (!endpoint && d < 2) {
            return false;
        }
        if d != if endpoint { 1 } else { 2 } {
            induced = false;
        }
    }
    if !connected(mask, k, start, on.len()) {
        return false;
    }
    if induced {
        return true;
    }

    // Set cells with chords between them: search for a Hamiltonian start→goal
    // ordering. Solver outputs never reach this branch.
    let mut visited = vec![false; k * k];
    visited[start] = true;
    hamiltonian(mask, k, start, goal, 1, on.len(), &mut visited)
}

fn connected(mask: &PathMask, k: usize, from: usize, expected: usize) -> bool {
    let mut seen = vec![false; k * k];
    let mut stack = vec![from];
    seen[from] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        count += 1;
        for n in neighbor_iter(Cell::from_index(i, k), k) {
            let j = n.index(k);
            if mask.cells[j] && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    count == expected
}

fn hamiltonian(
    mask: &PathMask,
    k: usize,
    at: usize,
    goal: usize,
    depth: usize,
    total: usize,
    visited: &mut [bool],
) -> bool {
    if at == goal {
        return depth == total;
    }
    for n in neighbor_iter(Cell::from_index(at, k), k) {
        let j = n.index(k);
        if !mask.cells[j] || visited[j] || (j == goal && depth + 1 != total) {
            continue;
        }
        visited[j] = true;
        if remaining_reachable(mask, k, j, visited, total - depth - 1)
            && hamiltonian(mask, k, j, goal, depth + 1, total, visited)
        {
            return true;
        }
        visited[j] = false;
    }
    false
}

/// Every unvisited set cell must still be reachable from `at`.
fn remaining_reachable(
    mask: &PathMask,
    k: usize,
    at: usize,
    visited: &[bool],
    remaining: usize,
) -> bool {
    let mut seen = vec![false; k * k];
    let mut stack = vec![at];
    seen[at] = true;
    let mut count = 0;
    while let Some(i) = stack.pop() {
        for n in neighbor_iter(Cell::from_index(i, k), k) {
            let j = n.index(k);
            if mask.cells[j] && !visited[j] && !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    count == remaining
}
