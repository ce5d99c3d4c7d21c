//! Flat `key = value` run configuration with command-line overrides.
//!
//! Blank lines and `#` comments are ignored; later assignments win.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use bbsp_core::blackbox::BlackboxConfig;
use bbsp_core::hyper::{HyperConfig, HyperMode};
use bbsp_core::model::Optimizer;
use bbsp_core::solver::{Heuristic, SolverKind};
use bbsp_core::tcr::{GradMode, TimeCostConfig, TimeUnit};
use bbsp_core::train::{SolverChoice, TrainConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverName {
    Dijkstra,
    AStar,
    AStarZero,
    Hyper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub solver: SolverName,
    pub lambda: f64,
    pub lambda_t: f64,
    pub alpha_l1: f64,
    pub tcr_unit: TimeUnit,
    pub tcr_grad_mode: GradMode,
    /// `None` is `1/k²`.
    pub tcr_kappa: Option<f64>,
    pub hyper_mode: HyperMode,
    pub threshold: f64,
    pub informativeness_threshold: f64,
    pub probe_probability: f64,
    /// `None` derives the head from the solver.
    pub choice_head: Option<bool>,
    pub choice_bias_init: f64,
    pub weight_bias_init: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub k: usize,
    pub p: usize,
    pub n_train: u64,
    pub n_val: u64,
    pub n_test: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverName::Dijkstra,
            lambda: 20.0,
            lambda_t: 0.0,
            alpha_l1: 0.0,
            tcr_unit: TimeUnit::ExpansionsNormalized,
            tcr_grad_mode: GradMode::Monitor,
            tcr_kappa: None,
            hyper_mode: HyperMode::LearnedChoice,
            threshold: 0.5,
            informativeness_threshold: 0.3,
            probe_probability: 0.25,
            choice_head: None,
            choice_bias_init: 0.0,
            weight_bias_init: 0.0,
            epochs: 10,
            batch_size: 32,
            lr: 0.001,
            optimizer: Optimizer::ADAM,
            seed: 0,
            dataset: PathBuf::from("data"),
            out_dir: PathBuf::from("runs/default"),
            k: 12,
            p: 8,
            n_train: 10_000,
            n_val: 1_000,
            n_test: 1_000,
        }
    }
}

fn bad(key: &str, value: &str, want: &str) -> Error {
    Error::Config(format!("{key} = {value:?}: expected {want}"))
}

fn num<T: std::str::FromStr>(key: &str, value: &str, want: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, want))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, value, "true or false")),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?}: expected key=value")))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "solver" => {
                self.solver = match value {
                    "dijkstra" => SolverName::Dijkstra,
                    "astar" => SolverName::AStar,
                    "astar_zero" => SolverName::AStarZero,
                    "hyper" => SolverName::Hyper,
                    _ => return Err(bad(key, value, "dijkstra, astar, astar_zero or hyper")),
                }
            }
            "lambda" => self.lambda = num(key, value, "a number")?,
            "lambda_t" => self.lambda_t = num(key, value, "a number")?,
            "alpha_l1" => self.alpha_l1 = num(key, value, "a number")?,
            "tcr_unit" => {
                self.tcr_unit = match value {
                    "expansions" => TimeUnit::ExpansionsNormalized,
                    "operations" => TimeUnit::OperationsNormalized,
                    "wall" => TimeUnit::WallSeconds,
                    _ => return Err(bad(key, value, "expansions, operations or wall")),
                }
            }
            "tcr_grad_mode" => {
                self.tcr_grad_mode = match value {
                    "monitor" => GradMode::Monitor,
                    "contrast" => GradMode::Contrast,
                    _ => return Err(bad(key, value, "monitor or contrast")),
                }
            }
            "tcr_kappa" => {
                self.tcr_kappa = if value == "auto" {
                    None
                } else {
                    Some(num(key, value, "a number or auto")?)
                }
            }
            "hyper_mode" => {
                self.hyper_mode = match value {
                    "learned" => HyperMode::LearnedChoice,
                    "internal" => HyperMode::InternalDecision,
                    "hybrid" => HyperMode::Hybrid,
                    _ => return Err(bad(key, value, "learned, internal or hybrid")),
                }
            }
            "threshold" => self.threshold = num(key, value, "a number")?,
            "informativeness_threshold" => {
                self.informativeness_threshold = num(key, value, "a number")?
            }
            "probe_probability" => self.probe_probability = num(key, value, "a number")?,
            "choice_head" => {
                self.choice_head = if value == "auto" {
                    None
                } else {
                    Some(flag(key, value)?)
                }
            }
            "choice_bias_init" => self.choice_bias_init = num(key, value, "a number")?,
            "weight_bias_init" => self.weight_bias_init = num(key, value, "a number")?,
            "epochs" => self.epochs = num(key, value, "a count")?,
            "batch_size" => self.batch_size = num(key, value, "a count")?,
            "lr" => self.lr = num(key, value, "a number")?,
            "optimizer" => {
                self.optimizer = match value {
                    "sgd" => Optimizer::Sgd,
                    "adam" => Optimizer::ADAM,
                    _ => return Err(bad(key, value, "sgd or adam")),
                }
            }
            "seed" => self.seed = num(key, value, "an unsigned integer")?,
            "dataset" => self.dataset = PathBuf::from(value),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "k" => self.k = num(key, value, "a grid side")?,
            "p" => self.p = num(key, value, "a tile size")?,
            "n_train" => self.n_train = num(key, value, "a count")?,
            "n_val" => self.n_val = num(key, value, "a count")?,
            "n_test" => self.n_test = num(key, value, "a count")?,
            "preset" => match value {
                "desk" => {
                    self.k = 8;
                    self.p = 8;
                    self.n_train = 2_000;
                    self.n_val = 200;
                    self.n_test = 200;
                }
                "full" => {
                    let d = RunConfig::default();
                    (self.k, self.p, self.n_train, self.n_val, self.n_test) =
                        (d.k, d.p, d.n_train, d.n_val, d.n_test);
                }
                _ => return Err(bad(key, value, "desk or full")),
            },
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn hyper_config(&self) -> HyperConfig {
        HyperConfig {
            mode: self.hyper_mode,
            threshold: self.threshold,
            informativeness_threshold: self.informativeness_threshold,
            probe_probability: self.probe_probability,
        }
    }

    /// Whether the model carries the choice output.
    pub fn has_choice_head(&self) -> bool {
        self.choice_head
            .unwrap_or(self.solver == SolverName::Hyper && self.hyper_config().uses_choice())
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        let solver = match self.solver {
            SolverName::Dijkstra => SolverChoice::Fixed(SolverKind::Dijkstra),
            SolverName::AStar => {
                SolverChoice::Fixed(SolverKind::AStar(Heuristic::MinWeightChebyshev))
            }
            SolverName::AStarZero => SolverChoice::Fixed(SolverKind::AStar(Heuristic::Zero)),
            SolverName::Hyper => SolverChoice::Hyper(self.hyper_config()),
        };
        let tcr = TimeCostConfig {
            lambda_t: self.lambda_t,
            unit: self.tcr_unit,
            grad_mode: self.tcr_grad_mode,
            kappa: self.tcr_kappa,
        };
        Ok(TrainConfig {
            solver,
            blackbox: BlackboxConfig::new(self.lambda)?,
            tcr,
            alpha_l1: self.alpha_l1,
            lr: self.lr,
            optimizer: self.optimizer,
        })
    }

    /// Rejects invalid values and combinations before any work starts.
    pub fn validate(&self) -> Result<()> {
        let cfg = self.train_config()?;
        cfg.tcr.validate()?;
        self.hyper_config().validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.k < 2 || self.p < 2 {
            return Err(Error::Config("k and p must be at least 2".into()));
        }
        if !(self.choice_bias_init.is_finite() && self.weight_bias_init.is_finite()) {
            return Err(Error::Config(
                "choice_bias_init and weight_bias_init must be finite".into(),
            ));
        }
        if self.choice_head == Some(true) && self.solver != SolverName::Hyper {
            return Err(Error::Config("choice_head requires solver = hyper".into()));
        }
        if self.solver == SolverName::Hyper
            && self
                .choice_head
                .is_some_and(|h| h != self.hyper_config().uses_choice())
        {
            return Err(Error::Config(
                "choice_head must be present exactly when hyper_mode routes on the choice (learned or hybrid)".into(),
            ));
        }
        Ok(())
    }

    /// Every key with its resolved value, loadable by [`RunConfig::load`].
    pub fn render(&self) -> String {
        let solver = match self.solver {
            SolverName::Dijkstra => "dijkstra",
            SolverName::AStar => "astar",
            SolverName::AStarZero => "astar_zero",
            SolverName::Hyper => "hyper",
        };
        let unit = match self.tcr_unit {
            TimeUnit::ExpansionsNormalized => "expansions",
            TimeUnit::OperationsNormalized => "operations",
            TimeUnit::WallSeconds => "wall",
        };
        let grad = match self.tcr_grad_mode {
            GradMode::Monitor => "monitor",
            GradMode::Contrast => "contrast",
        };
        let mode = match self.hyper_mode {
            HyperMode::LearnedChoice => "learned",
            HyperMode::InternalDecision => "internal",
            HyperMode::Hybrid => "hybrid",
        };
        let kappa = self.tcr_kappa.map_or("auto".to_string(), |v| v.to_string());
        let head = self
            .choice_head
            .map_or("auto".to_string(), |v| v.to_string());
        let mut s = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("solver", solver.into()),
            ("lambda", self.lambda.to_string()),
            ("lambda_t", self.lambda_t.to_string()),
            ("alpha_l1", self.alpha_l1.to_string()),
            ("tcr_unit", unit.into()),
            ("tcr_grad_mode", grad.into()),
            ("tcr_kappa", kappa),
            ("hyper_mode", mode.into()),
            ("threshold", self.threshold.to_string()),
            (
                "informativeness_threshold",
                self.informativeness_threshold.to_string(),
            ),
            ("probe_probability", self.probe_probability.to_string()),
            ("choice_head", head),
            ("choice_bias_init", self.choice_bias_init.to_string()),
            ("weight_bias_init", self.weight_bias_init.to_string()),
            ("epochs", self.epochs.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("lr", self.lr.to_string()),
            (
                "optimizer",
                if self.optimizer == Optimizer::Sgd {
                    "sgd"
                } else {
                    "adam"
                }
                .into(),
            ),
            ("seed", self.seed.to_string()),
            ("dataset", self.dataset.display().to_string()),
            ("out_dir", self.out_dir.display().to_string()),
            ("k", self.k.to_string()),
            ("p", self.p.to_string()),
            ("n_train", self.n_train.to_string()),
            ("n_val", self.n_val.to_string()),
            ("n_test", self.n_test.to_string()),
        ];
        for (k, v) in &pairs {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
