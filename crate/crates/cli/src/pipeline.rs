//! End-to-end experiment pipeline: load or synthesize a dataset, build the
//! joint scorer, apply the configured decision rule, sweep the trade-off
//! curve, and assemble the summary document.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use gzsl_core::combine::{
    calibrated_stack, calibrated_topk, direct_stack, novelty_two_stage, novelty_two_stage_topk,
    CalibrationRule, NoveltyRule, TieBreak,
};
use gzsl_core::data::{
    normalize_embeddings, split_seen_holdout, validate_partition, ClassId, ClassPartition,
    LabeledFeatureSet, ScoreMatrix, SemanticTable,
};
use gzsl_core::metrics::{
    balance_fscore, exact_gamma_sweep, flat_hit_at_k, novelty_sweep, standard_metrics, SucCurve,
};
use gzsl_core::novelty::{
    fit_gaussian_novelty, fit_loop_novelty, fit_semantic_map, gaussian_novelty, loop_novelty,
    MapConfig, SemanticMap,
};
use gzsl_core::scorers::{
    train_linear_seen, ConseJointScorer, ConseScorer, JointScorer, LinearScorer,
    PrototypeJointScorer, TrainConfig,
};
use gzsl_core::synth::generate_synthetic;

use crate::config::{CombinerConfig, CvConfig, CvStrategy, ExperimentConfig, ScorerConfig};
use crate::error::{CliError, Result};
use crate::io;

/// A fully loaded experiment dataset.
pub struct Dataset {
    pub train: LabeledFeatureSet,
    pub test: LabeledFeatureSet,
    pub partition: ClassPartition,
    pub semantics: SemanticTable,
    /// Content hash of the inputs (file bytes, or the synthetic spec).
    pub input_hash: String,
}

/// Loads the dataset named by the config: either the four input files with
/// a seeded per-class hold-out split, or a synthetic draw.
pub fn load_dataset(config: &ExperimentConfig) -> Result<Dataset> {
    if let Some(spec) = &config.synthetic {
        let spec_json = serde_json::to_vec(spec).map_err(|e| CliError::Config(e.to_string()))?;
        let data = generate_synthetic(spec)?;
        return Ok(Dataset {
            train: data.train,
            test: data.test,
            partition: data.partition,
            semantics: data.semantics,
            input_hash: io::sha256_hex(&spec_json),
        });
    }
    let paths = config
        .data
        .as_ref()
        .expect("config validation guarantees a dataset section");

    let mut hasher_input = Vec::new();
    for path in [
        &paths.features,
        &paths.labels,
        &paths.partition,
        &paths.semantics,
    ] {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        hasher_input.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        hasher_input.extend_from_slice(&bytes);
    }
    let input_hash = io::sha256_hex(&hasher_input);

    let features = io::read_features(&paths.features, paths.format)?;
    let labels = io::read_labels(&paths.labels)?;
    if labels.len() != features.nrows() {
        return Err(CliError::parse_line(
            &paths.labels,
            labels.len(),
            format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.nrows()
            ),
        ));
    }
    let data = LabeledFeatureSet::new(features, labels)?;
    let partition = io::read_partition(&paths.partition)?;
    validate_partition(&partition, &data)?;
    let semantics = io::read_semantics_csv(&paths.semantics, paths.semantic_kind)?;
    let joint: Vec<ClassId> = partition.joint().collect();
    let semantics = normalize_embeddings(&semantics.restrict(&joint)?)?;
    let (train, test) = split_seen_holdout(&data, &partition, paths.holdout_fraction, config.seed)?;
    Ok(Dataset {
        train,
        test,
        partition,
        semantics,
        input_hash,
    })
}

/// Builds the configured joint scorer; ConSE trains (or loads) its seen-side
/// linear model. Returns the scorer plus the trained model when one exists.
pub fn build_joint_scorer(
    config: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<(Box<dyn JointScorer>, Option<LinearScorer>)> {
    match &config.scorer {
        ScorerConfig::Prototype { similarity } => {
            let scorer = PrototypeJointScorer::new(
                &dataset.semantics,
                dataset.partition.clone(),
                *similarity,
            )?;
            Ok((Box::new(scorer), None))
        }
        ScorerConfig::Conse {
            top_t,
            regularization,
            loss,
            max_iters,
            tolerance,
            model,
        } => {
            let base = match model {
                Some(path) => {
                    let loaded: LinearScorer = io::read_json_document(path)?;
                    if loaded.class_order != dataset.partition.seen() {
                        return Err(CliError::Config(format!(
                            "model at {} covers different classes than the partition's seen set",
                            path.display()
                        )));
                    }
                    loaded
                }
                None => train_linear_seen(
                    &dataset.train,
                    dataset.partition.seen(),
                    &TrainConfig {
                        regularization: *regularization,
                        loss: *loss,
                        max_iters: *max_iters,
                        tolerance: *tolerance,
                        seed: config.seed,
                    },
                )?,
            };
            let trained = base.clone();
            let conse = ConseScorer::new(base, &dataset.semantics, *top_t)?;
            let scorer =
                ConseJointScorer::new(conse, &dataset.semantics, dataset.partition.clone())?;
            Ok((Box::new(scorer), Some(trained)))
        }
    }
}

/// Builds a joint scorer for a cross-validation candidate over an arbitrary
/// (pseudo) partition.
pub fn scorer_from_grid_entry(
    entry: &ScorerConfig,
    train: &LabeledFeatureSet,
    partition: &ClassPartition,
    semantics: &SemanticTable,
    seed: u64,
) -> gzsl_core::Result<Box<dyn JointScorer>> {
    match entry {
        ScorerConfig::Prototype { similarity } => Ok(Box::new(PrototypeJointScorer::new(
            semantics,
            partition.clone(),
            *similarity,
        )?)),
        ScorerConfig::Conse {
            top_t,
            regularization,
            loss,
            max_iters,
            tolerance,
            model: _,
        } => {
            let base = train_linear_seen(
                train,
                partition.seen(),
                &TrainConfig {
                    regularization: *regularization,
                    loss: *loss,
                    max_iters: *max_iters,
                    tolerance: *tolerance,
                    seed,
                },
            )?;
            // Small pseudo-seen spaces may not accommodate the configured
            // mixture size.
            let top_t = (*top_t).min(partition.n_seen());
            let conse = ConseScorer::new(base, semantics, top_t)?;
            Ok(Box::new(ConseJointScorer::new(
                conse,
                semantics,
                partition.clone(),
            )?))
        }
    }
}

/// Fitted novelty detector with the scores it assigns to the test set.
pub struct NoveltyArtifacts {
    pub map: SemanticMap,
    pub detector: Value,
    pub test_scores: Vec<f64>,
}

fn map_config(config: &ExperimentConfig) -> MapConfig {
    MapConfig {
        form: config.novelty.map_form,
        regularization: config.novelty.regularization,
        hidden_units: config.novelty.hidden_units,
        max_iters: config.novelty.max_iters,
        seed: config.seed,
    }
}

/// Fits the visual-to-semantic map on the training split and scores the test
/// split with the requested detector.
pub fn compute_novelty(
    config: &ExperimentConfig,
    dataset: &Dataset,
    detector: &CombinerConfig,
) -> Result<NoveltyArtifacts> {
    let map = fit_semantic_map(&dataset.train, &dataset.semantics, &map_config(config))?;
    let mapped_train = map.apply(dataset.train.features())?;
    let mapped_test = map.apply(dataset.test.features())?;
    let (detector_doc, test_scores) = match detector {
        CombinerConfig::NoveltyGaussian { .. } => {
            let model = fit_gaussian_novelty(
                mapped_train.view(),
                dataset.train.labels(),
                dataset.partition.seen(),
                &dataset.semantics,
            )?;
            let scores = gaussian_novelty(&model, mapped_test.view())?;
            (
                json!({"kind": "gaussian", "model": serde_json::to_value(&model)
                    .map_err(|e| CliError::Numeric(e.to_string()))?}),
                scores,
            )
        }
        CombinerConfig::NoveltyLoop { .. } => {
            let model = fit_loop_novelty(mapped_train, config.novelty.k, config.novelty.lambda)?;
            let scores = loop_novelty(&model, mapped_test.view())?;
            (
                json!({"kind": "loop", "model": serde_json::to_value(&model)
                    .map_err(|e| CliError::Numeric(e.to_string()))?}),
                scores,
            )
        }
        other => {
            return Err(CliError::Config(format!(
                "combiner `{}` has no novelty detector",
                other.kind_name()
            )))
        }
    };
    Ok(NoveltyArtifacts {
        map,
        detector: detector_doc,
        test_scores,
    })
}

/// Everything one pipeline run produces before artifacts hit the disk.
pub struct PipelineOutput {
    pub summary: Value,
    pub curve: SucCurve,
    pub predictions: Vec<ClassId>,
    pub topk: Option<Vec<Vec<ClassId>>>,
    pub scores: ScoreMatrix,
    pub trained_model: Option<LinearScorer>,
    pub novelty: Option<NoveltyArtifacts>,
}

fn fnum(v: f64) -> Result<Value> {
    serde_json::Number::from_f64(v)
        .map(Value::Number)
        .ok_or_else(|| CliError::Numeric(format!("non-finite value in summary: {v}")))
}

fn point_json(p: &gzsl_core::metrics::SucPoint, with_gamma: bool) -> Result<Value> {
    let mut obj = serde_json::Map::new();
    if with_gamma {
        obj.insert("gamma".into(), fnum(p.gamma)?);
    }
    obj.insert("acc_seen_joint".into(), fnum(p.acc_seen_joint)?);
    obj.insert("acc_unseen_joint".into(), fnum(p.acc_unseen_joint)?);
    Ok(Value::Object(obj))
}

/// Runs the configured experiment. The summary is built from sorted-key maps
/// and fixed-precision floats, so identical configs produce byte-identical
/// documents.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<PipelineOutput> {
    let dataset = load_dataset(config)?;
    let n_total = dataset.partition.n_total();
    let max_hit = *config
        .metrics
        .hit_at
        .iter()
        .max()
        .expect("validated non-empty");
    let hit_limit = match &config.combiner {
        CombinerConfig::NoveltyGaussian { .. } | CombinerConfig::NoveltyLoop { .. } => {
            dataset.partition.n_seen().min(dataset.partition.n_unseen())
        }
        _ => n_total,
    };
    if max_hit > hit_limit {
        return Err(CliError::Config(format!(
            "hit@{max_hit} exceeds the available label space ({hit_limit}) for combiner `{}`",
            config.combiner.kind_name()
        )));
    }

    let (scorer, trained_model) = build_joint_scorer(config, &dataset)?;
    let scores = scorer.score_matrix(dataset.test.features())?;
    let truth = dataset.test.labels();

    let mut novelty = None;
    let (predictions, topk, curve, operating) = match &config.combiner {
        CombinerConfig::Direct => {
            let rule = CalibrationRule {
                gamma: 0.0,
                tie_break: TieBreak::LowestIndex,
            };
            let predictions = direct_stack(&scores);
            let topk = calibrated_topk(&scores, &rule, max_hit)?;
            let curve = exact_gamma_sweep(&scores, truth)?;
            (predictions, topk, curve, json!({"kind": "direct"}))
        }
        CombinerConfig::Calibrated { gamma, tie_break } => {
            let rule = CalibrationRule {
                gamma: *gamma,
                tie_break: *tie_break,
            };
            let predictions = calibrated_stack(&scores, &rule);
            let topk = calibrated_topk(&scores, &rule, max_hit)?;
            let curve = exact_gamma_sweep(&scores, truth)?;
            let operating = json!({
                "kind": "calibrated",
                "gamma": fnum(*gamma)?,
                "tie_break": serde_json::to_value(tie_break)
                    .map_err(|e| CliError::Numeric(e.to_string()))?,
            });
            (predictions, topk, curve, operating)
        }
        combiner @ (CombinerConfig::NoveltyGaussian { threshold }
        | CombinerConfig::NoveltyLoop { threshold }) => {
            let artifacts = compute_novelty(config, &dataset, combiner)?;
            let rule = NoveltyRule {
                threshold: *threshold,
            };
            let predictions = novelty_two_stage(&scores, &artifacts.test_scores, &rule)?;
            let topk = novelty_two_stage_topk(&scores, &artifacts.test_scores, &rule, max_hit)?;
            let curve = novelty_sweep(&scores, &artifacts.test_scores, truth)?;
            let operating = json!({
                "kind": combiner.kind_name(),
                "threshold": fnum(*threshold)?,
            });
            novelty = Some(artifacts);
            (predictions, topk, curve, operating)
        }
    };

    let standard = standard_metrics(&scores, truth)?;
    let (balance_gamma, balance_f) = balance_fscore(&curve)?;

    let mut hit_values = Vec::new();
    for &k in &config.metrics.hit_at {
        let prefix: Vec<Vec<ClassId>> = topk.iter().map(|row| row[..k].to_vec()).collect();
        let value = flat_hit_at_k(&prefix, truth, k)?;
        hit_values.push(json!({"k": k, "value": fnum(value)?}));
    }

    let mut config_for_hash = config.canonical_value()?;
    if let Some(obj) = config_for_hash.as_object_mut() {
        // The output location is not part of the experiment's identity.
        obj.remove("out");
    }
    let config_hash = io::sha256_hex(io::canonical_json(&config_for_hash)?.as_bytes());

    let mut provenance = serde_json::Map::new();
    provenance.insert("seed".into(), json!(config.seed));
    provenance.insert("config_hash".into(), json!(config_hash));
    provenance.insert("input_hash".into(), json!(dataset.input_hash));
    provenance.insert(
        "scorer".into(),
        serde_json::to_value(&config.scorer).map_err(|e| CliError::Numeric(e.to_string()))?,
    );
    if novelty.is_some() {
        provenance.insert(
            "novelty".into(),
            serde_json::to_value(&config.novelty)
                .map_err(|e| CliError::Numeric(e.to_string()))?,
        );
    }

    let summary = json!({
        "ausuc": fnum(curve.ausuc)?,
        "balance": {
            "gamma": fnum(balance_gamma)?,
            "fscore": fnum(balance_f)?,
        },
        "breakpoints": curve.breakpoints,
        "combiner": operating,
        "direct_stacking": point_json(&curve.direct_stacking, false)?,
        "hit_at": Value::Array(hit_values),
        "standard": {
            "acc_seen_seen": fnum(standard.acc_seen_seen)?,
            "acc_unseen_unseen": fnum(standard.acc_unseen_unseen)?,
            "acc_seen_joint": fnum(standard.acc_seen_joint)?,
            "acc_unseen_joint": fnum(standard.acc_unseen_joint)?,
        },
        "test_samples": scores.n_samples(),
        "provenance": Value::Object(provenance),
    });

    Ok(PipelineOutput {
        summary,
        curve,
        predictions,
        topk: Some(topk),
        scores,
        trained_model,
        novelty,
    })
}

/// Runs the pipeline and writes the artifact bundle: predictions CSV, curve
/// CSV, summary JSON, plus novelty and model documents when they exist.
pub fn run_pipeline_to_dir(config: &ExperimentConfig, out_dir: &Path) -> Result<PipelineOutput> {
    let output = run_pipeline(config)?;
    write_resolved_config(config, out_dir)?;
    io::write_predictions_csv(&out_dir.join("predictions.csv"), &output.predictions)?;
    if let Some(topk) = &output.topk {
        if topk.first().is_some_and(|row| row.len() > 1) {
            io::write_topk_csv(&out_dir.join("predictions_topk.csv"), topk)?;
        }
    }
    io::write_curve_csv(&out_dir.join("curve.csv"), &output.curve)?;
    io::write_canonical_json(&out_dir.join("summary.json"), &output.summary)?;
    if let Some(model) = &output.trained_model {
        io::write_json_document(&out_dir.join("model.json"), model)?;
    }
    if let Some(novelty) = &output.novelty {
        io::write_novelty_csv(&out_dir.join("novelty.csv"), &novelty.test_scores)?;
        let doc = json!({
            "map": serde_json::to_value(&novelty.map)
                .map_err(|e| CliError::Numeric(e.to_string()))?,
            "detector": novelty.detector,
        });
        io::write_json_document(&out_dir.join("novelty_model.json"), &doc)?;
    }
    Ok(output)
}

/// Every run records the configuration it actually executed.
pub fn write_resolved_config(config: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    io::write_json_document(&out_dir.join("resolved_config.json"), config)
}

/// Cross-validation entry point: builds the fold plan over the training
/// split and runs the configured selection strategy over the scorer grid.
pub fn run_cv(config: &ExperimentConfig, cv: &CvConfig) -> Result<Value> {
    let dataset = load_dataset(config)?;
    let plan = gzsl_core::cv::make_fold_plan(
        &dataset.train,
        dataset.partition.seen(),
        cv.n_folds,
        config.seed,
    )?;

    struct GridFactory {
        entry: ScorerConfig,
        semantics: SemanticTable,
        seed: u64,
    }
    impl gzsl_core::cv::ScorerFactory for GridFactory {
        fn fit(
            &self,
            train: &LabeledFeatureSet,
            partition: &ClassPartition,
        ) -> gzsl_core::Result<Box<dyn JointScorer>> {
            scorer_from_grid_entry(&self.entry, train, partition, &self.semantics, self.seed)
        }
    }

    let factories: Vec<GridFactory> = cv
        .grid
        .iter()
        .map(|entry| GridFactory {
            entry: entry.clone(),
            semantics: dataset.semantics.clone(),
            seed: config.seed,
        })
        .collect();
    let candidates: Vec<gzsl_core::cv::Candidate<'_>> = factories
        .iter()
        .map(|f| gzsl_core::cv::Candidate {
            label: serde_json::to_string(&f.entry).unwrap_or_else(|_| "candidate".into()),
            factory: f as &dyn gzsl_core::cv::ScorerFactory,
        })
        .collect();

    let report = match cv.strategy {
        CvStrategy::Ausuc => {
            let report = gzsl_core::cv::select_by_ausuc(&dataset.train, &plan, &candidates)?;
            serde_json::to_value(&report).map_err(|e| CliError::Numeric(e.to_string()))?
        }
        CvStrategy::Accuracies => {
            let selection = gzsl_core::cv::select_by_accuracies(
                &dataset.train,
                &dataset.partition,
                &plan,
                &candidates,
                &candidates,
            )?;
            serde_json::to_value(&selection).map_err(|e| CliError::Numeric(e.to_string()))?
        }
    };
    Ok(json!({
        "strategy": serde_json::to_value(cv.strategy)
            .map_err(|e| CliError::Numeric(e.to_string()))?,
        "n_folds": cv.n_folds,
        "seed": config.seed,
        "input_hash": dataset.input_hash,
        "report": report,
    }))
}
