use std::path::PathBuf;

use clap::{Parser, Subcommand};

use gzsl_cli::config::{CombinerConfig, ExperimentConfig, ScorerConfig};
use gzsl_cli::error::{CliError, Result};
use gzsl_cli::{io, pipeline};
use gzsl_core::scorers::train_linear_seen;
use gzsl_core::scorers::TrainConfig;

/// Generalized zero-shot learning evaluation harness: stack seen- and
/// unseen-class scorers, calibrate the joint decision, sweep the seen-unseen
/// accuracy curve, and select hyperparameters by cross-validated AUSUC.
#[derive(Parser)]
#[command(name = "gzsl", version)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `out` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for the whole run.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and write its input files.
    Synth,
    /// Train the seen-side linear model of a ConSE scorer.
    Train,
    /// Compute the joint score matrix for the test split.
    Score,
    /// Run the full pipeline: predictions, curve, and summary.
    Eval,
    /// Sweep the calibration (or novelty threshold) and write the curve.
    Sweep,
    /// Cross-validated hyperparameter selection over a scorer grid.
    Cv,
    /// Fit a novelty detector and score the test split.
    Novelty,
}

fn main() {
    let cli = Cli::parse();
    if let Err(error) = run(cli) {
        eprintln!("error: {error}");
        std::process::exit(error.exit_code());
    }
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut config = ExperimentConfig::from_file(&config_path)?;
    let out = config.resolve(cli.out, cli.seed)?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;

    match cli.command {
        Command::Synth => {
            let spec = config
                .synthetic
                .clone()
                .ok_or_else(|| CliError::Config("synth needs a `synthetic` section".into()))?;
            let data = gzsl_core::synth::generate_synthetic(&spec)?;
            pipeline::write_resolved_config(&config, &out)?;
            // Pool files: the split is reproduced by downstream commands.
            let n_train = data.train.n_samples();
            let n = n_train + data.test.n_samples();
            let dim = data.train.dim();
            let mut features = ndarray::Array2::zeros((n, dim));
            let mut labels = Vec::with_capacity(n);
            for (i, row) in data
                .train
                .features()
                .outer_iter()
                .chain(data.test.features().outer_iter())
                .enumerate()
            {
                features.row_mut(i).assign(&row);
            }
            labels.extend_from_slice(data.train.labels());
            labels.extend_from_slice(data.test.labels());
            io::write_features_binary(&out.join("features.bin"), features.view())?;
            io::write_labels(&out.join("labels.txt"), &labels)?;
            io::write_partition(&out.join("partition.json"), &data.partition)?;
            io::write_semantics_csv(&out.join("semantics.csv"), &data.semantics)?;
            println!(
                "wrote {} samples ({} seen + {} unseen classes) to {}",
                n,
                data.partition.n_seen(),
                data.partition.n_unseen(),
                out.display()
            );
        }
        Command::Train => {
            let ScorerConfig::Conse {
                regularization,
                loss,
                max_iters,
                tolerance,
                ..
            } = &config.scorer
            else {
                return Err(CliError::Config(
                    "train applies to scorer kind `conse`; prototype scorers have no trained part"
                        .into(),
                ));
            };
            let dataset = pipeline::load_dataset(&config)?;
            let model = train_linear_seen(
                &dataset.train,
                dataset.partition.seen(),
                &TrainConfig {
                    regularization: *regularization,
                    loss: *loss,
                    max_iters: *max_iters,
                    tolerance: *tolerance,
                    seed: config.seed,
                },
            )?;
            pipeline::write_resolved_config(&config, &out)?;
            io::write_json_document(&out.join("model.json"), &model)?;
            println!(
                "trained {} one-vs-rest scorers (grad norm {:.3e}) -> {}",
                model.n_classes(),
                model.meta.grad_norm,
                out.join("model.json").display()
            );
        }
        Command::Score => {
            let dataset = pipeline::load_dataset(&config)?;
            let (scorer, _) = pipeline::build_joint_scorer(&config, &dataset)?;
            let scores = scorer.score_matrix(dataset.test.features())?;
            pipeline::write_resolved_config(&config, &out)?;
            io::write_features_binary(&out.join("scores.bin"), scores.scores())?;
            io::write_partition(&out.join("scores_classes.json"), scores.partition())?;
            io::write_labels(&out.join("test_labels.txt"), dataset.test.labels())?;
            println!(
                "scored {} test samples over {} classes -> {}",
                scores.n_samples(),
                scores.partition().n_total(),
                out.join("scores.bin").display()
            );
        }
        Command::Eval => {
            let output = pipeline::run_pipeline_to_dir(&config, &out)?;
            let ausuc = output.summary["ausuc"].as_f64().unwrap_or(f64::NAN);
            println!("ausuc {ausuc:.6} -> {}", out.join("summary.json").display());
        }
        Command::Sweep => {
            let output = pipeline::run_pipeline(&config)?;
            pipeline::write_resolved_config(&config, &out)?;
            io::write_curve_csv(&out.join("curve.csv"), &output.curve)?;
            io::write_canonical_json(&out.join("summary.json"), &output.summary)?;
            println!(
                "swept {} breakpoints, ausuc {:.6} -> {}",
                output.curve.breakpoints,
                output.curve.ausuc,
                out.join("curve.csv").display()
            );
        }
        Command::Cv => {
            let cv = config
                .cv
                .clone()
                .ok_or_else(|| CliError::Config("cv needs a `cv` section".into()))?;
            let report = pipeline::run_cv(&config, &cv)?;
            pipeline::write_resolved_config(&config, &out)?;
            io::write_canonical_json(&out.join("cv_report.json"), &report)?;
            println!("wrote {}", out.join("cv_report.json").display());
        }
        Command::Novelty => {
            let detector = match &config.combiner {
                d @ (CombinerConfig::NoveltyGaussian { .. }
                | CombinerConfig::NoveltyLoop { .. }) => d.clone(),
                other => {
                    return Err(CliError::Config(format!(
                        "novelty needs combiner kind novelty-gaussian or novelty-loop, got `{}`",
                        other.kind_name()
                    )))
                }
            };
            let dataset = pipeline::load_dataset(&config)?;
            let artifacts = pipeline::compute_novelty(&config, &dataset, &detector)?;
            pipeline::write_resolved_config(&config, &out)?;
            io::write_novelty_csv(&out.join("novelty.csv"), &artifacts.test_scores)?;
            let doc = serde_json::json!({
                "map": serde_json::to_value(&artifacts.map)
                    .map_err(|e| CliError::Numeric(e.to_string()))?,
                "detector": artifacts.detector,
            });
            io::write_json_document(&out.join("novelty_model.json"), &doc)?;
            println!(
                "scored {} test samples -> {}",
                artifacts.test_scores.len(),
                out.join("novelty.csv").display()
            );
        }
    }
    Ok(())
}
