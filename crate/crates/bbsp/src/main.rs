use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bbsp::config::RunConfig;
use bbsp::harness::{self, EpochMetrics};
use bbsp::{checkpoint, dataset, Error, Result};
use bbsp_core::model::{image_to_tensor, model_forward, ArchitectureSpec};
use bbsp_core::solver::SolverKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bbsp",
    version,
    about = "Shortest-path solvers as differentiable network layers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable, applied after the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic terrain dataset into `dataset`.
    GenData(ConfigArgs),
    /// Train a model; writes metrics, per-batch losses and checkpoints to `out_dir`.
    Train(ConfigArgs),
    /// Evaluate a checkpoint on one split.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Compare solver effort on uniform, contrast, random and trained grids.
    Bench {
        #[arg(long, default_value_t = 32)]
        k: usize,
        /// Random (and trained) instances per family.
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Adds the model's predicted grids on the dataset's test split.
        #[arg(long, requires = "dataset")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// CSV destination; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a sample's weights and path (and a model's prediction) as text.
    Inspect {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn print_rows(rows: &[EpochMetrics]) {
    for m in rows {
        eprintln!(
            "epoch {:>3} {:<5} acc {:.4} cell {:.4} hamming {:.3} time {:.4} tcr {:.4} ratio {}",
            m.epoch,
            m.split,
            m.exact_cost_match_acc,
            m.per_cell_acc,
            m.mean_hamming,
            m.avg_batch_time_norm,
            m.tcr_term,
            m.usage_ratio
        );
    }
}

fn inspect(dir: &Path, split: &str, index: usize, ckpt: Option<&Path>) -> Result<()> {
    let manifest = dataset::read_manifest(dir)?;
    let samples = dataset::read_split(dir, &manifest, split)?;
    let s = samples.get(index).ok_or_else(|| {
        Error::Config(format!(
            "{split} has {} samples, no index {index}",
            samples.len()
        ))
    })?;
    println!(
        "{split}[{index}]  k = {}  optimal cost = {}",
        manifest.k, s.optimal_cost
    );
    let label = harness::render_sample(&s.true_weights, &[("true path", &s.true_mask)]);
    print!("{label}");
    if let Some(path) = ckpt {
        let params = checkpoint::read(path)?;
        let (k, hyper) = checkpoint::head_shape(&params, path)?;
        let spec = ArchitectureSpec::default_for(k, manifest.p, hyper)?;
        params.check_spec(&spec)?;
        let image = image_to_tensor(&s.image, spec.image_side(), spec.in_channels)?;
        let out = model_forward(&params, &image, &spec)?;
        let problem = bbsp_core::grid::GridProblem::new(k)?;
        let solved = SolverKind::Dijkstra.solve(&out.weights, &problem)?;
        println!("predicted (choice = {:?}):", out.choice);
        print!(
            "{}",
            harness::render_sample(&out.weights, &[("predicted path", &solved.mask)])
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(args) => {
            let cfg = args.resolve()?;
            let m = harness::gen_data(&cfg)?;
            let counts: Vec<_> = m
                .splits
                .iter()
                .map(|s| format!("{} {}", s.name, s.count))
                .collect();
            eprintln!(
                "wrote {} (k = {}, p = {}; {})",
                cfg.dataset.display(),
                m.k,
                m.p,
                counts.join(", ")
            );
        }
        Command::Train(args) => {
            let cfg = args.resolve()?;
            harness::train(&cfg, &mut |rows| print_rows(rows))?;
            eprintln!(
                "metrics in {}",
                cfg.out_dir.join(harness::METRICS_FILE).display()
            );
        }
        Command::Eval {
            cfg,
            checkpoint,
            split,
        } => {
            let cfg = cfg.resolve()?;
            let m = harness::eval(&cfg, &checkpoint, &split)?;
            harness::write_rows(&[m], io::stdout().lock())?;
        }
        Command::Bench {
            k,
            instances,
            seed,
            checkpoint: ckpt,
            dataset: dir,
            out,
        } => {
            let trained = match (ckpt, dir) {
                (Some(path), Some(dir)) => {
                    let manifest = dataset::read_manifest(&dir)?;
                    let samples = dataset::read_split(&dir, &manifest, "test")?;
                    let params = checkpoint::read(&path)?;
                    harness::predicted_weights(&params, &samples, manifest.p, instances)?
                }
                _ => Vec::new(),
            };
            let rows = harness::bench(k, instances, seed, &trained)?;
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    harness::write_rows(&rows, file)?;
                }
                None => harness::write_rows(&rows, io::stdout().lock())?,
            }
        }
        Command::Inspect {
            dataset: dir,
            split,
            index,
            checkpoint: ckpt,
        } => {
            inspect(&dir, &split, index, ckpt.as_deref())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
