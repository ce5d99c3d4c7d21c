//! Hyper-blackbox: a wrapper that hands each instance to Dijkstra or A*.
//!
//! Both internal solvers minimize the same cost, so the choice only affects
//! solve time. The choice parameter gets a surrogate gradient from paired
//! timings on probed instances.

use crate::grid::WeightGrid;
use crate::solver::{Heuristic, SolverKind};
use crate::{Error, Result};

/// The A* variant the hyper-blackbox routes to.
pub const HYPER_ASTAR: SolverKind = SolverKind::AStar(Heuristic::MinWeightChebyshev);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperMode {
    /// A* iff the model's choice parameter is at least the threshold.
    LearnedChoice,
    /// A* iff the weight scan finds the heuristic informative.
    InternalDecision,
    /// Both of the above must favour A*.
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperConfig {
    pub mode: HyperMode,
    pub threshold: f64,
    pub informativeness_threshold: f64,
    pub probe_probability: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            mode: HyperMode::LearnedChoice,
            threshold: 0.5,
            informativeness_threshold: 0.3,
            probe_probability: 0.25,
        }
    }
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.probe_probability) {
            return Err(Error::InvalidConfig("probe_probability must lie in [0, 1]"));
        }
        if !self.informativeness_threshold.is_finite() {
            return Err(Error::InvalidConfig(
                "informativeness_threshold must be finite",
            ));
        }
        if !self.threshold.is_finite() {
            return Err(Error::InvalidConfig("choice threshold must be finite"));
        }
        Ok(())
    }

    pub fn uses_choice(&self) -> bool {
        self.mode != HyperMode::InternalDecision
    }
}

/// `min(w) / mean(w)`, in `(0, 1]`; 1 exactly for a uniform grid.
pub fn informativeness(weights: &WeightGrid) -> f64 {
    let min = weights.min();
    let mean = weights.mean();
    // rounding in the mean can push a uniform grid's ratio to 1 ± ulp
    if weights.as_slice().iter().all(|&w| w == min) {
        1.0
    } else {
        (min / mean).min(1.0)
    }
}

pub fn route(choice: f64, weights: &WeightGrid, cfg: &HyperConfig) -> SolverKind {
    let by_choice = choice >= cfg.threshold;
    let by_scan = || informativeness(weights) >= cfg.informativeness_threshold;
    let astar = match cfg.mode {
        HyperMode::LearnedChoice => by_choice,
        HyperMode::InternalDecision => by_scan(),
        HyperMode::Hybrid => by_choice && by_scan(),
    };
    if astar {
        HYPER_ASTAR
    } else {
        SolverKind::Dijkstra
    }
}

/// Surrogate `∂(λ_t·t)/∂choice`: `λ_t·(t_astar − t_dijkstra)` on probed
/// instances, zero otherwise.
pub fn choice_grad(t_astar: f64, t_dijkstra: f64, lambda_t: f64, probed: bool) -> Result<f64> {
    if !(lambda_t >= 0.0) {
        return Err(Error::InvalidConfig("lambda_t must be non-negative"));
    }
    Ok(if probed {
        lambda_t * (t_astar - t_dijkstra)
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UsageCounter {
    pub astar: u64,
    pub dijkstra: u64,
}

impl UsageCounter {
    pub fn record(&mut self, solver: SolverKind) {
        match solver {
            SolverKind::Dijkstra => self.dijkstra += 1,
            SolverKind::AStar(_) => self.astar += 1,
        }
    }

    pub fn reset(&mut self) {
        *self = UsageCounter::default();
    }

    pub fn total(&self) -> u64 {
        self.astar + self.dijkstra
    }
}

/// `#A* / #Dijkstra`; `+∞` when only A* ran, `0` when A* never ran, NaN when
/// nothing ran.
pub fn usage_ratio(counter: &UsageCounter) -> f64 {
    match (counter.astar, counter.dijkstra) {
        (0, 0) => f64::NAN,
        (0, _) => 0.0,
        (_, 0) => f64::INFINITY,
        (a, d) => a as f64 / d as f64,
    }
}
