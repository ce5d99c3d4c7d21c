//! Data generation, training, evaluation, benchmarking and inspection.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bbsp_core::data::Sample;
use bbsp_core::grid::{hamming, GridProblem, PathMask, WeightGrid};
use bbsp_core::hyper::{usage_ratio, UsageCounter};
use bbsp_core::model::{image_to_tensor, model_forward, ArchitectureSpec, HeadBias, ModelParams};
use bbsp_core::solver::{Heuristic, SolverKind};
use bbsp_core::tcr::time_cost;
use bbsp_core::train::{BatchReport, SolverChoice, Trainer};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::dataset::{self, Dataset, Manifest};
use crate::error::{Error, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const BATCHES_FILE: &str = "batches.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// One row of `metrics.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub split: String,
    pub exact_cost_match_acc: f64,
    pub per_cell_acc: f64,
    pub mean_hamming: f64,
    pub avg_batch_time_s: f64,
    pub avg_batch_time_norm: f64,
    pub tcr_term: f64,
    pub l1_term: f64,
    pub astar_count: u64,
    pub dijkstra_count: u64,
    pub usage_ratio: f64,
}

/// One row of `batches.csv`; `total_loss = hamming_loss + l1_term + tcr_term`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchMetrics {
    pub epoch: usize,
    pub batch: usize,
    pub samples: usize,
    pub hamming_loss: f64,
    pub l1_term: f64,
    pub tcr_term: f64,
    pub total_loss: f64,
    pub time_norm: f64,
    pub time_s: f64,
    pub astar_count: u64,
    pub dijkstra_count: u64,
    pub probes: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub metrics: Vec<EpochMetrics>,
    pub batches: Vec<BatchMetrics>,
    /// Checkpoint paths by epoch, epoch 0 being the initialization.
    pub checkpoints: Vec<PathBuf>,
    pub params: ModelParams,
}

impl TrainOutcome {
    pub fn row(&self, epoch: usize, split: &str) -> Option<&EpochMetrics> {
        self.metrics
            .iter()
            .find(|m| m.epoch == epoch && m.split == split)
    }
}

pub fn gen_data(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    let palette = bbsp_core::data::TerrainPalette::default();
    let d = dataset::generate(
        cfg.seed,
        cfg.k,
        cfg.p,
        &palette,
        [cfg.n_train, cfg.n_val, cfg.n_test],
    )?;
    dataset::write_dataset(&d, &cfg.dataset)?;
    Ok(d.manifest)
}

fn build_trainer(
    cfg: &RunConfig,
    k: usize,
    p: usize,
    params: Option<ModelParams>,
) -> Result<Trainer> {
    let spec = ArchitectureSpec::default_for(k, p, cfg.has_choice_head())?;
    let params = match params {
        Some(p) => p,
        None => {
            let bias = HeadBias {
                weights: cfg.weight_bias_init,
                choice: cfg.choice_bias_init,
            };
            ModelParams::init(&spec, cfg.seed, bias)?
        }
    };
    Ok(Trainer::new(spec, params, cfg.train_config()?)?)
}

/// Forward-only pass over `samples` in batches of `batch_size`.
pub fn evaluate(
    trainer: &Trainer,
    samples: &[Sample],
    batch_size: usize,
    epoch: usize,
    split: &str,
) -> Result<EpochMetrics> {
    let k = trainer.spec.k;
    let cells = (k * k) as f64;
    let hyper = matches!(trainer.cfg.solver, SolverChoice::Hyper(_));
    let report_unit = trainer.cfg.report_unit();
    let mut usage = UsageCounter::default();
    let (mut matches, mut ham, mut t_sum) = (0usize, 0.0, 0.0);
    let (mut wall, mut norm) = (0.0, 0.0);
    let mut batches = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let start = Instant::now();
        for s in chunk {
            let pred = trainer.predict(s)?;
            if hyper {
                usage.record(pred.solver);
            }
            matches += usize::from(trainer.cost_matches(s, &pred.mask));
            ham += hamming(&pred.mask, &s.true_mask)? as f64;
            t_sum += time_cost(&pred.stats, k, trainer.cfg.tcr.unit);
            norm += time_cost(&pred.stats, k, report_unit);
        }
        wall += start.elapsed().as_secs_f64();
        batches += 1;
    }
    let n = samples.len().max(1) as f64;
    let b = batches.max(1) as f64;
    let mean_hamming = ham / n;
    Ok(EpochMetrics {
        epoch,
        split: split.to_string(),
        exact_cost_match_acc: matches as f64 / n,
        per_cell_acc: 1.0 - mean_hamming / cells,
        mean_hamming,
        avg_batch_time_s: wall / b,
        avg_batch_time_norm: norm / b,
        tcr_term: trainer.cfg.tcr.lambda_t * t_sum / n,
        l1_term: trainer.cfg.alpha_l1 * trainer.params.l1_norm(),
        astar_count: usage.astar,
        dijkstra_count: usage.dijkstra,
        usage_ratio: usage_ratio(&usage),
    })
}

fn train_row(epoch: usize, k: usize, reports: &[(BatchReport, f64)]) -> EpochMetrics {
    let n: usize = reports.iter().map(|(r, _)| r.samples).sum();
    let n = n.max(1) as f64;
    let b = reports.len().max(1) as f64;
    let weighted = |f: fn(&BatchReport) -> f64| {
        reports
            .iter()
            .map(|(r, _)| f(r) * r.samples as f64)
            .sum::<f64>()
            / n
    };
    let mut usage = UsageCounter::default();
    for (r, _) in reports {
        usage.astar += r.usage.astar;
        usage.dijkstra += r.usage.dijkstra;
    }
    let mean_hamming = weighted(|r| r.hamming_loss);
    EpochMetrics {
        epoch,
        split: "train".into(),
        exact_cost_match_acc: reports.iter().map(|(r, _)| r.cost_matches).sum::<usize>() as f64 / n,
        per_cell_acc: 1.0 - mean_hamming / (k * k) as f64,
        mean_hamming,
        avg_batch_time_s: reports.iter().map(|(_, s)| s).sum::<f64>() / b,
        avg_batch_time_norm: reports.iter().map(|(r, _)| r.solve_time_norm).sum::<f64>() / b,
        tcr_term: weighted(|r| r.tcr_term),
        l1_term: reports.iter().map(|(r, _)| r.l1_term).sum::<f64>() / b,
        astar_count: usage.astar,
        dijkstra_count: usage.dijkstra,
        usage_ratio: usage_ratio(&usage),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Trains per `cfg` on the dataset at `cfg.dataset`.
pub fn train(cfg: &RunConfig, on_epoch: &mut dyn FnMut(&[EpochMetrics])) -> Result<TrainOutcome> {
    cfg.validate()?;
    let data = dataset::read_dataset(&cfg.dataset)?;
    train_on(cfg, &data, on_epoch)
}

/// Epoch 0 evaluates the initial model on every split; epochs `1..=epochs`
/// train on the shuffled train split, then evaluate val and test. Metrics,
/// per-batch losses, the resolved config and one checkpoint per epoch go to
/// `cfg.out_dir`.
pub fn train_on(
    cfg: &RunConfig,
    data: &Dataset,
    on_epoch: &mut dyn FnMut(&[EpochMetrics]),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let (k, p) = (data.manifest.k, data.manifest.p);
    let split = |name| {
        data.split(name)
            .ok_or_else(|| Error::Config(format!("dataset has no {name} split")))
    };
    let (train_set, val, test) = (split("train")?, split("val")?, split("test")?);
    if train_set.is_empty() {
        return Err(Error::Config("train split is empty".into()));
    }
    let mut trainer = build_trainer(cfg, k, p, None)?;

    let ckpt_dir = cfg.out_dir.join(CHECKPOINT_DIR);
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let cfg_path = cfg.out_dir.join(CONFIG_FILE);
    fs::write(&cfg_path, cfg.render()).map_err(|e| Error::io(&cfg_path, e))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut metrics = Vec::new();
    let mut batches = Vec::new();
    let mut checkpoints = Vec::new();
    let mut save = |epoch: usize, params: &ModelParams| -> Result<()> {
        let path = ckpt_dir.join(format!("epoch_{epoch:03}.ckpt"));
        checkpoint::write(params, &path)?;
        checkpoints.push(path);
        Ok(())
    };

    for (name, set) in [("train", train_set), ("val", val), ("test", test)] {
        metrics.push(evaluate(&trainer, set, cfg.batch_size, 0, name)?);
    }
    save(0, &trainer.params)?;
    on_epoch(&metrics);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut reports = Vec::new();
        for (bi, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<&Sample> = idx.iter().map(|&i| &train_set[i]).collect();
            let start = Instant::now();
            let r = trainer
                .step(&batch, &mut rng)
                .map_err(|source| match source {
                    bbsp_core::Error::NonFinite(_) => Error::Numeric {
                        epoch,
                        batch: bi,
                        source,
                    },
                    other => Error::Core(other),
                })?;
            let secs = start.elapsed().as_secs_f64();
            batches.push(BatchMetrics {
                epoch,
                batch: bi,
                samples: r.samples,
                hamming_loss: r.hamming_loss,
                l1_term: r.l1_term,
                tcr_term: r.tcr_term,
                total_loss: r.total_loss,
                time_norm: r.solve_time_norm,
                time_s: secs,
                astar_count: r.usage.astar,
                dijkstra_count: r.usage.dijkstra,
                probes: r.probes,
            });
            reports.push((r, secs));
        }
        let first = metrics.len();
        metrics.push(train_row(epoch, k, &reports));
        metrics.push(evaluate(&trainer, val, cfg.batch_size, epoch, "val")?);
        metrics.push(evaluate(&trainer, test, cfg.batch_size, epoch, "test")?);
        save(epoch, &trainer.params)?;
        write_csv(&cfg.out_dir.join(METRICS_FILE), &metrics)?;
        write_csv(&cfg.out_dir.join(BATCHES_FILE), &batches)?;
        on_epoch(&metrics[first..]);
    }
    write_csv(&cfg.out_dir.join(METRICS_FILE), &metrics)?;
    write_csv(&cfg.out_dir.join(BATCHES_FILE), &batches)?;
    Ok(TrainOutcome {
        metrics,
        batches,
        checkpoints,
        params: trainer.params,
    })
}

/// Loads a checkpoint, checks it against the dataset's `k`, and evaluates
/// one split.
pub fn eval(cfg: &RunConfig, checkpoint_path: &Path, split: &str) -> Result<EpochMetrics> {
    cfg.validate()?;
    let manifest = dataset::read_manifest(&cfg.dataset)?;
    let params = checkpoint::read(checkpoint_path)?;
    let (k, head) = checkpoint::head_shape(&params, checkpoint_path)?;
    if k != manifest.k {
        return Err(Error::format(
            checkpoint_path,
            "head.weight",
            format!(
                "checkpoint predicts a {k}x{k} grid, dataset has k = {}",
                manifest.k
            ),
        ));
    }
    if head != cfg.has_choice_head() {
        return Err(Error::Config(format!(
            "checkpoint choice head = {head}, config expects {}",
            cfg.has_choice_head()
        )));
    }
    let samples = dataset::read_split(&cfg.dataset, &manifest, split)?;
    let trainer = build_trainer(cfg, k, manifest.p, Some(params))?;
    evaluate(&trainer, &samples, cfg.batch_size, 0, split)
}

/// One row of the solver benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub family: String,
    pub instance: usize,
    pub k: usize,
    pub solver: &'static str,
    pub expansions: u64,
    pub relaxations: u64,
    pub heuristic_evals: u64,
    pub wall_seconds: f64,
    pub cost: f64,
}

pub const BENCH_SOLVERS: [SolverKind; 3] = [
    SolverKind::Dijkstra,
    SolverKind::AStar(Heuristic::Zero),
    SolverKind::AStar(Heuristic::MinWeightChebyshev),
];

/// Runs every solver over the uniform, contrast and random families on
/// `k`×`k` grids, plus the `trained` weight grids if given.
pub fn bench(
    k: usize,
    instances: usize,
    seed: u64,
    trained: &[WeightGrid],
) -> Result<Vec<BenchRow>> {
    let mut families: Vec<(&str, Vec<WeightGrid>)> = vec![
        ("uniform", vec![WeightGrid::uniform(k, 1.0)?]),
        ("contrast", vec![WeightGrid::contrast(k, 0.1, 10_000.0)?]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random = (0..instances)
        .map(|_| WeightGrid::from_fn(k, |_| rng.random_range(0.1..10.0)))
        .collect::<std::result::Result<_, _>>()?;
    families.push(("random", random));
    if !trained.is_empty() {
        families.push(("trained", trained.to_vec()));
    }
    let mut rows = Vec::new();
    for (family, grids) in &families {
        for (i, w) in grids.iter().enumerate() {
            let problem = GridProblem::new(w.k())?;
            for solver in BENCH_SOLVERS {
                let r = solver.solve(w, &problem)?;
                rows.push(BenchRow {
                    family: family.to_string(),
                    instance: i,
                    k: w.k(),
                    solver: solver.name(),
                    expansions: r.stats.expansions,
                    relaxations: r.stats.relaxations,
                    heuristic_evals: r.stats.heuristic_evals,
                    wall_seconds: r.stats.wall_seconds,
                    cost: r.cost,
                });
            }
        }
    }
    Ok(rows)
}

/// Weight grids predicted by `params` for the first `limit` samples.
pub fn predicted_weights(
    params: &ModelParams,
    samples: &[Sample],
    p: usize,
    limit: usize,
) -> Result<Vec<WeightGrid>> {
    let path = Path::new("checkpoint");
    let (k, hyper) = checkpoint::head_shape(params, path)?;
    let spec = ArchitectureSpec::default_for(k, p, hyper)?;
    params.check_spec(&spec)?;
    samples
        .iter()
        .take(limit)
        .map(|s| {
            let image = image_to_tensor(&s.image, spec.image_side(), spec.in_channels)?;
            Ok(model_forward(params, &image, &spec)?.weights)
        })
        .collect()
}

pub fn write_rows<T: Serialize>(rows: &[T], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

/// Text rendering of a weight grid and one or more masks over it.
pub fn render_sample(weights: &WeightGrid, masks: &[(&str, &PathMask)]) -> String {
    let k = weights.k();
    let mut s = String::new();
    let _ = writeln!(s, "weights ({k}x{k}):");
    for r in 0..k {
        let row: Vec<String> = (0..k)
            .map(|c| format!("{:5.2}", weights.as_slice()[r * k + c]))
            .collect();
        let _ = writeln!(s, "  {}", row.join(" "));
    }
    for (label, mask) in masks {
        let _ = writeln!(s, "{label}:");
        for r in 0..k {
            let row: String = (0..k)
                .map(|c| if mask.as_slice()[r * k + c] { '#' } else { '.' })
                .collect();
            let _ = writeln!(s, "  {row}");
        }
    }
    s
}
