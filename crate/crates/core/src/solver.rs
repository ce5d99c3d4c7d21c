//! Instrumented exact shortest-path solvers on 8-connected weight grids.
//!
//! Both solvers pop from a min-heap ordered by `(priority, insertion sequence)`,
//! so results are deterministic and A* with the zero heuristic replays the
//! Dijkstra expansion sequence exactly. Decrease-key is lazy: improved nodes
//! are re-inserted and stale entries skipped on pop.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::grid::{masked_sum, neighbor_iter, Cell, GridProblem, PathMask, WeightGrid};
use crate::{Error, Result};

pub mod oracle;

pub use oracle::{brute_force_shortest, BruteForce};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SolverStats {
    /// Pops that settle a not-yet-settled cell (stale pops excluded).
    pub expansions: u64,
    /// Successful tentative-cost improvements.
    pub relaxations: u64,
    /// Heuristic evaluations, one per queue insertion for a non-zero heuristic.
    pub heuristic_evals: u64,
    pub wall_seconds: f64,
}

impl SolverStats {
    /// Counter part only, for determinism comparisons.
    pub fn counters(&self) -> (u64, u64, u64) {
        (self.expansions, self.relaxations, self.heuristic_evals)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub mask: PathMask,
    pub cost: f64,
    pub stats: SolverStats,
    /// Cells in the order they were settled.
    pub expansion_order: Vec<Cell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    Zero,
    /// Chebyshev steps to the goal times the grid's minimum weight.
    MinWeightChebyshev,
}

/// Minimum number of 8-neighbour moves between two cells.
#[inline]
pub fn chebyshev_steps(cell: Cell, goal: Cell) -> usize {
    cell.row.abs_diff(goal.row).max(cell.col.abs_diff(goal.col))
}

/// `chebyshev_steps × min_weight`; `min_weight` is taken over the full grid.
#[inline]
pub fn heuristic_value(cell: Cell, goal: Cell, min_weight: f64) -> f64 {
    chebyshev_steps(cell, goal) as f64 * min_weight
}

/// A solver handle. Doubles as the identifier recorded in forward contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Dijkstra,
    AStar(Heuristic),
}

impl SolverKind {
    pub fn solve(self, weights: &WeightGrid, problem: &GridProblem) -> Result<SolveResult> {
        match self {
            SolverKind::Dijkstra => dijkstra(weights, problem),
            SolverKind::AStar(h) => astar(weights, problem, h),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dijkstra => "dijkstra",
            SolverKind::AStar(Heuristic::Zero) => "astar_zero",
            SolverKind::AStar(Heuristic::MinWeightChebyshev) => "astar",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    priority: f64,
    seq: u64,
    node: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Timer {
    #[cfg(feature = "std")]
    start: std::time::Instant,
}

impl Timer {
    fn start() -> Self {
        Timer {
            #[cfg(feature = "std")]
            start: std::time::Instant::now(),
        }
    }

    fn seconds(&self) -> f64 {
        #[cfg(feature = "std")]
        {
            self.start.elapsed().as_secs_f64()
        }
        #[cfg(not(feature = "std"))]
        {
            0.0
        }
    }
}

fn check_shape(weights: &WeightGrid, problem: &GridProblem) -> Result<()> {
    if weights.k() != problem.k() {
        return Err(Error::ShapeMismatch {
            expected: problem.cells(),
            found: weights.as_slice().len(),
        });
    }
    Ok(())
}

struct Search {
    dist: Vec<f64>,
    parent: Vec<usize>,
    settled: Vec<bool>,
    heap: BinaryHeap<Entry>,
    seq: u64,
    order: Vec<Cell>,
    stats: SolverStats,
}

impl Search {
    fn new(n: usize) -> Self {
        Search {
            dist: vec![f64::INFINITY; n],
            parent: vec![usize::MAX; n],
            settled: vec![false; n],
            heap: BinaryHeap::new(),
            seq: 0,
            order: Vec::new(),
            stats: SolverStats::default(),
        }
    }

    fn push(&mut self, priority: f64, node: usize) {
        self.heap.push(Entry {
            priority,
            seq: self.seq,
            node,
        });
        self.seq += 1;
    }

    /// Next unsettled node, settling it.
    fn settle_next(&mut self, k: usize) -> Option<usize> {
        while let Some(Entry { node, .. }) = self.heap.pop() {
            if self.settled[node] {
                continue;
            }
            self.settled[node] = true;
            self.stats.expansions += 1;
            self.order.push(Cell::from_index(node, k));
            return Some(node);
        }
        None
    }

    fn finish(mut self, weights: &WeightGrid, problem: &GridProblem, timer: Timer) -> SolveResult {
        let k = problem.k();
        let start = problem.start().index(k);
        let mut mask = PathMask::empty(k);
        let mut at = problem.goal().index(k);
        mask.set(Cell::from_index(at, k), true);
        while at != start {
            at = self.parent[at];
            mask.set(Cell::from_index(at, k), true);
        }
        let cost = masked_sum(weights, &mask, problem.start());
        self.stats.wall_seconds = timer.seconds();
        SolveResult {
            mask,
            cost,
            stats: self.stats,
            expansion_order: self.order,
        }
    }
}

/// Dijkstra from `problem.start()` until the goal is settled.
pub fn dijkstra(weights: &WeightGrid, problem: &GridProblem) -> Result<SolveResult> {
    check_shape(weights, problem)?;
    let timer = Timer::start();
    let k = problem.k();
    let w = weights.as_slice();
    let start = problem.start().index(k);
    let goal = problem.goal().index(k);

    let mut s = Search::new(k * k);
    s.dist[start] = 0.0;
    s.push(0.0, start);
    while let Some(u) = s.settle_next(k) {
        if u == goal {
            break;
        }
        let du = s.dist[u];
        for v in neighbor_iter(Cell::from_index(u, k), k) {
            let v = v.index(k);
            if s.settled[v] {
                continue;
            }
            let nd = du + w[v];
            if nd < s.dist[v] {
                s.dist[v] = nd;
                s.parent[v] = u;
                s.stats.relaxations += 1;
                s.push(nd, v);
            }
        }
    }
    Ok(s.finish(weights, problem, timer))
}

/// A* with priority `g + h`. Both heuristics are consistent, so settled
/// nodes never need reopening.
pub fn astar(
    weights: &WeightGrid,
    problem: &GridProblem,
    heuristic: Heuristic,
) -> Result<SolveResult> {
    check_shape(weights, problem)?;
    let timer = Timer::start();
    let k = problem.k();
    let w = weights.as_slice();
    let start = problem.start().index(k);
    let goal_cell = problem.goal();
    let goal = goal_cell.index(k);
    let min_weight = match heuristic {
        Heuristic::Zero => 0.0,
        Heuristic::MinWeightChebyshev => weights.min(),
    };

    let mut s = Search::new(k * k);
    let h = |cell: Cell, stats: &mut SolverStats| match heuristic {
        Heuristic::Zero => 0.0,
        Heuristic::MinWeightChebyshev => {
            stats.heuristic_evals += 1;
            heuristic_value(cell, goal_cell, min_weight)
        }
    };

    s.dist[start] = 0.0;
    let h0 = h(problem.start(), &mut s.stats);
    s.push(h0, start);
    while let Some(u) = s.settle_next(k) {
        if u == goal {
            break;
        }
        let du = s.dist[u];
        for v in neighbor_iter(Cell::from_index(u, k), k) {
            let vi = v.index(k);
            if s.settled[vi] {
                continue;
            }
            let nd = du + w[vi];
            if nd < s.dist[vi] {
                s.dist[vi] = nd;
                s.parent[vi] = u;
                s.stats.relaxations += 1;
                let f = nd + h(v, &mut s.stats);
                s.push(f, vi);
            }
        }
    }
    Ok(s.finish(weights, problem, timer))
}
