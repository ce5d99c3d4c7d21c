//! Exhaustive reference solvers for small grids. Independent of the
//! priority-queue code in the parent module.

use alloc::vec;
use alloc::vec::Vec;

use super::chebyshev_steps;
use crate::grid::{masked_sum, neighbor_iter, Cell, GridProblem, PathMask, WeightGrid};
use crate::{Error, Result};

/// Largest grid side the path enumeration accepts.
pub const MAX_BRUTE_FORCE_K: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForce {
    pub cost: f64,
    /// Every cost-minimal simple path, sorted.
    pub optimal: Vec<PathMask>,
}

/// Minimal path cost and all minimal paths by depth-first enumeration of
/// simple paths.
///
/// Paths with a chord (two non-consecutive cells that are neighbours) are cut:
/// taking the chord gives a strictly cheaper simple path, so they are never
/// optimal. Branches whose cost plus `steps × min_weight` exceeds the best
/// known cost are cut as well.
pub fn brute_force_shortest(weights: &WeightGrid, problem: &GridProblem) -> Result<BruteForce> {
    let k = problem.k();
    if k > MAX_BRUTE_FORCE_K {
        return Err(Error::GridTooLarge {
            k,
            max: MAX_BRUTE_FORCE_K,
        });
    }
    if weights.k() != k {
        return Err(Error::ShapeMismatch {
            expected: k * k,
            found: weights.as_slice().len(),
        });
    }
    if problem.start() == problem.goal() {
        let mask = PathMask::from_cells(k, [problem.start()])?;
        return Ok(BruteForce {
            cost: 0.0,
            optimal: vec![mask],
        });
    }

    let mut dfs = Dfs {
        k,
        w: weights.as_slice(),
        goal: problem.goal(),
        min_w: weights.min(),
        best: greedy_upper_bound(weights, problem),
        on_path: vec![false; k * k],
        path: Vec::with_capacity(k * k),
        found: Vec::new(),
    };
    let start = problem.start().index(k);
    dfs.on_path[start] = true;
    dfs.path.push(start);
    dfs.extend(start, 0.0);

    let mut scored: Vec<(f64, PathMask)> = dfs
        .found
        .into_iter()
        .map(|cells| {
            let mask = PathMask::from_cells(k, cells.iter().map(|&i| Cell::from_index(i, k)))
                .expect("cells in grid");
            (masked_sum(weights, &mask, problem.start()), mask)
        })
        .collect();
    let cost = scored.iter().map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
    scored.retain(|(c, _)| *c == cost);
    let mut optimal: Vec<PathMask> = scored.into_iter().map(|(_, m)| m).collect();
    optimal.sort();
    optimal.dedup();
    Ok(BruteForce { cost, optimal })
}

struct Dfs<'a> {
    k: usize,
    w: &'a [f64],
    goal: Cell,
    min_w: f64,
    best: f64,
    on_path: Vec<bool>,
    path: Vec<usize>,
    found: Vec<Vec<usize>>,
}

impl Dfs<'_> {
    fn slack(&self) -> f64 {
        self.best + 1e-9 * (1.0 + self.best.abs())
    }

    fn extend(&mut self, at: usize, cost: f64) {
        let k = self.k;
        for v in neighbor_iter(Cell::from_index(at, k), k) {
            let vi = v.index(k);
            if self.on_path[vi] || self.has_chord(vi, at) {
                continue;
            }
            let next = cost + self.w[vi];
            if next + chebyshev_steps(v, self.goal) as f64 * self.min_w > self.slack() {
                continue;
            }
            self.path.push(vi);
            if v == self.goal {
                if next < self.best {
                    self.best = next;
                    let bound = self.slack();
                    // stale candidates are re-scored at the end; drop the clearly worse ones
                    let w = self.w;
                    self.found
                        .retain(|p| p[1..].iter().map(|&i| w[i]).sum::<f64>() <= bound);
                }
                self.found.push(self.path.clone());
            } else {
                self.on_path[vi] = true;
                self.extend(vi, next);
                self.on_path[vi] = false;
            }
            self.path.pop();
        }
    }

    fn has_chord(&self, v: usize, from: usize) -> bool {
        neighbor_iter(Cell::from_index(v, self.k), self.k)
            .map(|n| n.index(self.k))
            .any(|n| n != from && self.on_path[n])
    }
}

/// Cost of moving diagonally toward the goal, then straight.
fn greedy_upper_bound(weights: &WeightGrid, problem: &GridProblem) -> f64 {
    let (mut at, goal) = (problem.start(), problem.goal());
    let mut cost = 0.0;
    while at != goal {
        let step = |a: usize, b: usize| match a.cmp(&b) {
            core::cmp::Ordering::Less => a + 1,
            core::cmp::Ordering::Greater => a - 1,
            core::cmp::Ordering::Equal => a,
        };
        at = Cell::new(step(at.row, goal.row), step(at.col, goal.col));
        cost += weights.get(at);
    }
    cost
}

/// Calls `visit` with every simple 8-connected path from start to goal,
/// chords included. Exponential; meant for `k ≤ 4`.
pub fn enumerate_simple_paths(problem: &GridProblem, mut visit: impl FnMut(&[Cell])) -> Result<()> {
    let k = problem.k();
    if k > 4 {
        return Err(Error::GridTooLarge { k, max: 4 });
    }
    let mut on_path = vec![false; k * k];
    let mut path = vec![problem.start()];
    on_path[problem.start().index(k)] = true;
    if problem.start() == problem.goal() {
        visit(&path);
        return Ok(());
    }
    fn walk(
        k: usize,
        goal: Cell,
        on: &mut [bool],
        path: &mut Vec<Cell>,
        visit: &mut dyn FnMut(&[Cell]),
    ) {
        let at = *path.last().expect("non-empty path");
        for v in neighbor_iter(at, k) {
            let vi = v.index(k);
            if on[vi] {
                continue;
            }
            path.push(v);
            if v == goal {
                visit(path);
            } else {
                on[vi] = true;
                walk(k, goal, on, path, visit);
                on[vi] = false;
            }
            path.pop();
        }
    }
    walk(k, problem.goal(), &mut on_path, &mut path, &mut visit);
    Ok(())
}

/// Exact cost-to-go from every cell (weights entered after leaving the cell,
/// goal included), by Bellman-Ford sweeps to a fixed point.
pub fn remaining_costs(weights: &WeightGrid, problem: &GridProblem) -> Vec<f64> {
    let k = problem.k();
    let n = k * k;
    let mut rem = vec![f64::INFINITY; n];
    rem[problem.goal().index(k)] = 0.0;
    let w = weights.as_slice();
    loop {
        let mut changed = false;
        for u in 0..n {
            for v in neighbor_iter(Cell::from_index(u, k), k) {
                let vi = v.index(k);
                let via = w[vi] + rem[vi];
                if via < rem[u] {
                    rem[u] = via;
                    changed = true;
                }
            }
        }
        if !changed {
            return rem;
        }
    }
}
