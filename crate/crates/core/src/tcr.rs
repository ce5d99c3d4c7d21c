//! Time-cost regularization: measuring solver time, the `λ_t·t` loss term
//! and an optional surrogate gradient on the weights.

use alloc::vec;
use alloc::vec::Vec;

use crate::grid::{Cell, PathMask};
use crate::solver::SolverStats;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeUnit {
    /// `expansions / k²`.
    ExpansionsNormalized,
    /// `(expansions + relaxations + heuristic evaluations) / k²`.
    OperationsNormalized,
    WallSeconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradMode {
    /// The term is logged but sends no gradient to the weights.
    Monitor,
    /// Raise weights of expanded cells that are off the returned path.
    Contrast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeCostConfig {
    pub lambda_t: f64,
    pub unit: TimeUnit,
    pub grad_mode: GradMode,
    /// Surrogate scale; `None` means `1/k²`.
    pub kappa: Option<f64>,
}

impl Default for TimeCostConfig {
    fn default() -> Self {
        TimeCostConfig {
            lambda_t: 0.0,
            unit: TimeUnit::ExpansionsNormalized,
            grad_mode: GradMode::Monitor,
            kappa: None,
        }
    }
}

impl TimeCostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_t >= 0.0 && self.lambda_t.is_finite()) {
            return Err(Error::InvalidConfig(
                "lambda_t must be a non-negative number",
            ));
        }
        if let Some(kappa) = self.kappa {
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(Error::InvalidConfig("kappa must be positive"));
            }
        }
        Ok(())
    }

    pub fn kappa_for(&self, k: usize) -> f64 {
        self.kappa.unwrap_or(1.0 / (k * k) as f64)
    }
}

/// Cells settled by a solver run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionMask {
    k: usize,
    cells: Vec<bool>,
}

impl ExpansionMask {
    pub fn from_order(k: usize, order: &[Cell]) -> Self {
        let mut cells = vec![false; k * k];
        for c in order {
            cells[c.index(k)] = true;
        }
        ExpansionMask { k, cells }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.cells
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&b| b).count()
    }
}

pub fn time_cost(stats: &SolverStats, k: usize, unit: TimeUnit) -> f64 {
    let cells = (k * k) as f64;
    match unit {
        TimeUnit::ExpansionsNormalized => stats.expansions as f64 / cells,
        TimeUnit::OperationsNormalized => {
            (stats.expansions + stats.relaxations + stats.heuristic_evals) as f64 / cells
        }
        TimeUnit::WallSeconds => stats.wall_seconds,
    }
}

pub fn tcr_term(t: f64, cfg: &TimeCostConfig) -> f64 {
    cfg.lambda_t * t
}

/// Monitor: zeros. Contrast: `−λ_t·κ·(vᵢ − yᵢ)` for expansion mask `v` and
/// path `y`, which is negative exactly on expanded off-path cells.
pub fn tcr_weight_grad(
    expanded: &ExpansionMask,
    path: &PathMask,
    cfg: &TimeCostConfig,
) -> Result<Vec<f64>> {
    let n = expanded.cells.len();
    if path.as_slice().len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: path.as_slice().len(),
        });
    }
    match cfg.grad_mode {
        GradMode::Monitor => Ok(vec![0.0; n]),
        GradMode::Contrast => {
            let scale = cfg.lambda_t * cfg.kappa_for(expanded.k);
            Ok(expanded
                .cells
                .iter()
                .zip(path.as_slice())
                .map(|(&v, &y)| {
                    if v && !y {
                        -scale
                    } else {
                        // a path cell is always expanded, so v − y is 0 or 1
                        0.0
                    }
                })
                .collect())
        }
    }
}
