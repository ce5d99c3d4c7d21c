//! Blackbox differentiation of a shortest-path solver.
//!
//! Forward: `ŷ = solver(ŵ)`. Backward: re-solve on `w′ = ŵ + λ·dL/dy(ŷ)` and
//! return `−(ŷ − y_λ)/λ`, the gradient of the piecewise-affine interpolation
//! of the linearized loss.

use alloc::vec::Vec;

use crate::grid::{masked_sum, GridProblem, PathMask, WeightGrid};
use crate::solver::{SolveResult, SolverKind, SolverStats};
use crate::{Error, Result, WEIGHT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackboxConfig {
    /// Interpolation strength λ.
    pub lambda: f64,
}

impl Default for BlackboxConfig {
    fn default() -> Self {
        BlackboxConfig { lambda: 20.0 }
    }
}

impl BlackboxConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidConfig("blackbox lambda must be positive"));
        }
        Ok(BlackboxConfig { lambda })
    }
}

/// Everything the backward pass needs from the forward solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardContext {
    pub w_hat: WeightGrid,
    pub y_hat: PathMask,
    pub stats: SolverStats,
    pub solver: SolverKind,
    pub problem: GridProblem,
    /// Full forward result, kept for expansion-based time costs.
    pub solve: SolveResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOutput {
    pub grad_w: Vec<f64>,
    /// `y_λ`, the solution of the perturbed problem.
    pub y_lambda: PathMask,
    pub stats: SolverStats,
}

pub fn bb_forward(
    weights: &WeightGrid,
    solver: SolverKind,
    problem: &GridProblem,
) -> Result<(PathMask, ForwardContext)> {
    let solve = solver.solve(weights, problem)?;
    let ctx = ForwardContext {
        w_hat: weights.clone(),
        y_hat: solve.mask.clone(),
        stats: solve.stats,
        solver,
        problem: *problem,
        solve,
    };
    Ok((ctx.y_hat.clone(), ctx))
}

/// `ŵ + λ·upstream`, floored at [`WEIGHT_FLOOR`].
pub fn perturbed_weights(
    ctx: &ForwardContext,
    upstream: &[f64],
    cfg: &BlackboxConfig,
) -> Result<WeightGrid> {
    let w = ctx.w_hat.as_slice();
    if upstream.len() != w.len() {
        return Err(Error::ShapeMismatch {
            expected: w.len(),
            found: upstream.len(),
        });
    }
    let shifted = w
        .iter()
        .zip(upstream)
        .map(|(w, g)| w + cfg.lambda * g)
        .collect();
    WeightGrid::clamped(ctx.w_hat.k(), shifted, WEIGHT_FLOOR)
}

pub fn bb_backward(
    ctx: &ForwardContext,
    upstream: &[f64],
    solver: SolverKind,
    cfg: &BlackboxConfig,
) -> Result<BackwardOutput> {
    if solver != ctx.solver {
        return Err(Error::SolverMismatch);
    }
    let w_prime = perturbed_weights(ctx, upstream, cfg)?;
    let perturbed = solver.solve(&w_prime, &ctx.problem)?;
    let grad_w = ctx
        .y_hat
        .as_slice()
        .iter()
        .zip(perturbed.mask.as_slice())
        .map(|(&yh, &yl)| -(f64::from(u8::from(yh)) - f64::from(u8::from(yl))) / cfg.lambda)
        .collect();
    Ok(BackwardOutput {
        grad_w,
        y_lambda: perturbed.mask,
        stats: perturbed.stats,
    })
}

/// `L(ŷ) + ⟨upstream, y − ŷ⟩`.
pub fn linearized_loss(
    ctx: &ForwardContext,
    loss_at_y_hat: f64,
    upstream: &[f64],
    y: &PathMask,
) -> Result<f64> {
    let n = ctx.y_hat.as_slice().len();
    if upstream.len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: upstream.len(),
        });
    }
    if y.as_slice().len() != n {
        return Err(Error::ShapeMismatch {
            expected: n,
            found: y.as_slice().len(),
        });
    }
    let dot: f64 = upstream
        .iter()
        .zip(y.as_slice().iter().zip(ctx.y_hat.as_slice()))
        .map(|(g, (&a, &b))| g * (f64::from(u8::from(a)) - f64::from(u8::from(b))))
        .sum();
    Ok(loss_at_y_hat + dot)
}

/// `f_λ(w) = f(y_λ(w)) − (c(w, y(w)) − c(w, y_λ(w)))/λ`, evaluated at `weights`.
pub fn f_lambda_value(
    weights: &WeightGrid,
    ctx: &ForwardContext,
    solver: SolverKind,
    cfg: &BlackboxConfig,
    loss_at_y_hat: f64,
    upstream: &[f64],
) -> Result<f64> {
    let problem = &ctx.problem;
    let y = solver.solve(weights, problem)?.mask;
    let at_w = ForwardContext {
        w_hat: weights.clone(),
        ..ctx.clone()
    };
    let y_lambda = solver
        .solve(&perturbed_weights(&at_w, upstream, cfg)?, problem)?
        .mask;
    let f = linearized_loss(ctx, loss_at_y_hat, upstream, &y_lambda)?;
    let gap =
        masked_sum(weights, &y, problem.start()) - masked_sum(weights, &y_lambda, problem.start());
    Ok(f - gap / cfg.lambda)
}
