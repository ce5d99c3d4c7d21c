//! One optimization step: model → (routing) → blackbox solve → Hamming loss
//! + ℓ1 + time cost → blackbox backward → model backward → SGD or Adam.
//!
//! The batch loss is the mean over samples, so every per-sample gradient
//! (including the upstream handed to the blackbox) carries a `1/B` factor.

use alloc::vec::Vec;

use rand::Rng;

use crate::blackbox::{bb_backward, bb_forward, BlackboxConfig};
use crate::data::Sample;
use crate::grid::{hamming, hamming_grad, masked_sum, GridProblem, PathMask, WeightGrid};
use crate::hyper::{choice_grad, route, HyperConfig, UsageCounter, HYPER_ASTAR};
use crate::model::{
    adam_step, image_to_tensor, model_backward, model_forward, optimizer_step, AdamState,
    ArchitectureSpec, ModelParams, Optimizer,
};
use crate::solver::{SolverKind, SolverStats};
use crate::tcr::{tcr_term, tcr_weight_grad, time_cost, ExpansionMask, TimeCostConfig, TimeUnit};
use crate::{Error, Result};

/// Two path costs closer than this count as equal for accuracy.
pub const COST_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverChoice {
    Fixed(SolverKind),
    Hyper(HyperConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub solver: SolverChoice,
    pub blackbox: BlackboxConfig,
    pub tcr: TimeCostConfig,
    pub alpha_l1: f64,
    pub lr: f64,
    pub optimizer: Optimizer,
}

impl TrainConfig {
    pub fn validate(&self, spec: &ArchitectureSpec) -> Result<()> {
        BlackboxConfig::new(self.blackbox.lambda)?;
        self.optimizer.validate()?;
        self.tcr.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if !(self.alpha_l1 >= 0.0 && self.alpha_l1.is_finite()) {
            return Err(Error::InvalidConfig("alpha_l1 must be non-negative"));
        }
        match self.solver {
            SolverChoice::Hyper(h) => {
                h.validate()?;
                if h.uses_choice() != spec.hyper {
                    return Err(Error::InvalidConfig(
                        "the choice head is required exactly when the hyper solver routes on a choice",
                    ));
                }
            }
            SolverChoice::Fixed(_) if spec.hyper => {
                return Err(Error::InvalidConfig("choice head without the hyper solver"));
            }
            SolverChoice::Fixed(_) => {}
        }
        Ok(())
    }

    /// Deterministic unit used for reported batch times.
    pub fn report_unit(&self) -> TimeUnit {
        match self.tcr.unit {
            TimeUnit::WallSeconds => TimeUnit::ExpansionsNormalized,
            unit => unit,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub weights: WeightGrid,
    pub choice: Option<f64>,
    pub solver: SolverKind,
    pub mask: PathMask,
    pub stats: SolverStats,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchReport {
    pub samples: usize,
    /// Mean Hamming distance over the batch.
    pub hamming_loss: f64,
    pub l1_term: f64,
    /// Mean `λ_t·t` over the batch.
    pub tcr_term: f64,
    /// `hamming_loss + l1_term + tcr_term`.
    pub total_loss: f64,
    /// Summed forward + backward (+ probe) solve time, deterministic unit.
    pub solve_time_norm: f64,
    pub solve_time_s: f64,
    pub usage: UsageCounter,
    pub probes: u64,
    pub cost_matches: usize,
}

pub struct Trainer {
    pub spec: ArchitectureSpec,
    pub params: ModelParams,
    pub cfg: TrainConfig,
    problem: GridProblem,
    adam: Option<AdamState>,
}

impl Trainer {
    pub fn new(spec: ArchitectureSpec, params: ModelParams, cfg: TrainConfig) -> Result<Self> {
        cfg.validate(&spec)?;
        params.check_spec(&spec)?;
        let problem = GridProblem::new(spec.k)?;
        Ok(Trainer {
            spec,
            params,
            cfg,
            problem,
            adam: None,
        })
    }

    pub fn problem(&self) -> &GridProblem {
        &self.problem
    }

    fn solver_for(&self, choice: Option<f64>, weights: &WeightGrid) -> SolverKind {
        match self.cfg.solver {
            SolverChoice::Fixed(s) => s,
            SolverChoice::Hyper(h) => route(choice.unwrap_or(h.threshold), weights, &h),
        }
    }

    fn check_sample(&self, sample: &Sample) -> Result<()> {
        if sample.k() != self.spec.k {
            return Err(Error::ShapeMismatch {
                expected: self.spec.cells(),
                found: sample.k() * sample.k(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, sample: &Sample) -> Result<Prediction> {
        self.check_sample(sample)?;
        let image = image_to_tensor(&sample.image, self.spec.image_side(), self.spec.in_channels)?;
        let out = model_forward(&self.params, &image, &self.spec)?;
        let solver = self.solver_for(out.choice, &out.weights);
        let solved = solver.solve(&out.weights, &self.problem)?;
        Ok(Prediction {
            weights: out.weights,
            choice: out.choice,
            solver,
            mask: solved.mask,
            stats: solved.stats,
        })
    }

    /// Cost of `mask` under the sample's true weights matches the optimum.
    pub fn cost_matches(&self, sample: &Sample, mask: &PathMask) -> bool {
        let cost = masked_sum(&sample.true_weights, mask, self.problem.start());
        (cost - sample.optimal_cost).abs() <= COST_MATCH_TOL
    }

    pub fn step(&mut self, batch: &[&Sample], rng: &mut impl Rng) -> Result<BatchReport> {
        if batch.is_empty() {
            return Err(Error::InvalidConfig("empty batch"));
        }
        let b = batch.len() as f64;
        let k = self.spec.k;
        let unit = self.cfg.tcr.unit;
        let report_unit = self.cfg.report_unit();
        let mut grads = self.params.zero_grads();
        let mut report = BatchReport {
            samples: batch.len(),
            ..Default::default()
        };
        let mut hamming_sum = 0.0;
        let mut tcr_sum = 0.0;

        for sample in batch {
            self.check_sample(sample)?;
            let image =
                image_to_tensor(&sample.image, self.spec.image_side(), self.spec.in_channels)?;
            let out = model_forward(&self.params, &image, &self.spec)?;
            let solver = self.solver_for(out.choice, &out.weights);
            if let SolverChoice::Hyper(_) = self.cfg.solver {
                report.usage.record(solver);
            }

            let (y_hat, ctx) = bb_forward(&out.weights, solver, &self.problem)?;
            let loss = hamming(&y_hat, &sample.true_mask)? as f64;
            let t = time_cost(&ctx.stats, k, unit);
            hamming_sum += loss;
            tcr_sum += tcr_term(t, &self.cfg.tcr);
            if self.cost_matches(sample, &y_hat) {
                report.cost_matches += 1;
            }

            let upstream: Vec<f64> = hamming_grad(&sample.true_mask)
                .into_iter()
                .map(|g| g / b)
                .collect();
            let back = bb_backward(&ctx, &upstream, solver, &self.cfg.blackbox)?;
            let expanded = ExpansionMask::from_order(k, &ctx.solve.expansion_order);
            let surrogate = tcr_weight_grad(&expanded, &y_hat, &self.cfg.tcr)?;
            let grad_w: Vec<f64> = back
                .grad_w
                .iter()
                .zip(&surrogate)
                .map(|(g, s)| g + s / b)
                .collect();

            report.solve_time_norm +=
                time_cost(&ctx.stats, k, report_unit) + time_cost(&back.stats, k, report_unit);
            report.solve_time_s += ctx.stats.wall_seconds + back.stats.wall_seconds;

            let mut grad_choice = None;
            if let SolverChoice::Hyper(h) = self.cfg.solver {
                if h.uses_choice() {
                    // draw on every sample so the stream does not depend on routing
                    let probed = rng.random::<f64>() < h.probe_probability;
                    let mut g = 0.0;
                    if probed {
                        let other = if solver == SolverKind::Dijkstra {
                            HYPER_ASTAR
                        } else {
                            SolverKind::Dijkstra
                        };
                        let other_stats = other.solve(&out.weights, &self.problem)?.stats;
                        let (t_astar, t_dijkstra) = if solver == SolverKind::Dijkstra {
                            (time_cost(&other_stats, k, unit), t)
                        } else {
                            (t, time_cost(&other_stats, k, unit))
                        };
                        g = choice_grad(t_astar, t_dijkstra, self.cfg.tcr.lambda_t, true)?;
                        report.probes += 1;
                        report.solve_time_norm += time_cost(&other_stats, k, report_unit);
                        report.solve_time_s += other_stats.wall_seconds;
                    }
                    grad_choice = Some(g / b);
                }
            }

            let g = model_backward(&self.params, &out.tape, &self.spec, &grad_w, grad_choice)?;
            grads.accumulate(&g);
        }

        report.hamming_loss = hamming_sum / b;
        report.tcr_term = tcr_sum / b;
        report.l1_term = self.cfg.alpha_l1 * self.params.l1_norm();
        report.total_loss = report.hamming_loss + report.l1_term + report.tcr_term;
        if !report.total_loss.is_finite()
            || grads
                .0
                .iter()
                .any(|t| t.data.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite("loss or gradient"));
        }
        match self.cfg.optimizer {
            Optimizer::Sgd => {
                optimizer_step(&mut self.params, &grads, self.cfg.lr, self.cfg.alpha_l1)?
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let state = self
                    .adam
                    .get_or_insert_with(|| AdamState::new(&self.params));
                adam_step(
                    &mut self.params,
                    &grads,
                    state,
                    self.cfg.lr,
                    self.cfg.alpha_l1,
                    (beta1, beta2, eps),
                )?
            }
        }
        Ok(report)
    }
}
