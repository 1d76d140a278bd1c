//! Experiment configuration: a single JSON document naming the dataset (on
//! disk or synthetic), the scorer, the combiner, novelty settings, and the
//! requested metrics. Command-line `--seed` and `--out` override the file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gzsl_core::combine::TieBreak;
use gzsl_core::data::SemanticKind;
use gzsl_core::novelty::MapForm;
use gzsl_core::scorers::{Loss, Similarity};
use gzsl_core::synth::SyntheticSpec;

use crate::error::{CliError, Result};
use crate::io::FeatureFormat;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub partition: PathBuf,
    pub semantics: PathBuf,
    #[serde(default = "default_semantic_kind")]
    pub semantic_kind: SemanticKind,
    #[serde(default)]
    pub format: Option<FeatureFormat>,
    /// Share of each seen class held out for the test set.
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
}

fn default_semantic_kind() -> SemanticKind {
    SemanticKind::ContinuousAttribute
}

fn default_holdout() -> f64 {
    0.2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScorerConfig {
    /// Similarity to one semantic prototype per class, both sides.
    Prototype {
        #[serde(default = "default_similarity")]
        similarity: Similarity,
    },
    /// Linear scorers on the seen side; probability-weighted embedding
    /// cosine on the unseen side.
    Conse {
        #[serde(default = "default_top_t")]
        top_t: usize,
        #[serde(default = "default_regularization")]
        regularization: f64,
        #[serde(default = "default_loss")]
        loss: Loss,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
        #[serde(default = "default_tolerance")]
        tolerance: f64,
        /// Load the seen-side model from this JSON file instead of training.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        model: Option<PathBuf>,
    },
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig::Prototype {
            similarity: default_similarity(),
        }
    }
}

fn default_similarity() -> Similarity {
    Similarity::Cosine
}

fn default_top_t() -> usize {
    10
}

fn default_regularization() -> f64 {
    1e-3
}

fn default_loss() -> Loss {
    Loss::Logistic
}

fn default_max_iters() -> usize {
    100
}

fn default_tolerance() -> f64 {
    1e-8
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CombinerConfig {
    Direct,
    Calibrated {
        #[serde(default)]
        gamma: f64,
        #[serde(default)]
        tie_break: TieBreak,
    },
    NoveltyGaussian {
        #[serde(default)]
        threshold: f64,
    },
    NoveltyLoop {
        #[serde(default = "default_loop_threshold")]
        threshold: f64,
    },
}

fn default_loop_threshold() -> f64 {
    0.5
}

impl Default for CombinerConfig {
    fn default() -> Self {
        CombinerConfig::Calibrated {
            gamma: 0.0,
            tie_break: TieBreak::default(),
        }
    }
}

impl CombinerConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            CombinerConfig::Direct => "direct",
            CombinerConfig::Calibrated { .. } => "calibrated",
            CombinerConfig::NoveltyGaussian { .. } => "novelty-gaussian",
            CombinerConfig::NoveltyLoop { .. } => "novelty-loop",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoveltyConfig {
    #[serde(default = "default_map_form")]
    pub map_form: MapForm,
    #[serde(default = "default_map_reg")]
    pub regularization: f64,
    #[serde(default = "default_hidden_units")]
    pub hidden_units: usize,
    #[serde(default = "default_map_iters")]
    pub max_iters: usize,
    /// Neighbor count of the LoOP detector.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Standard-deviation multiplier of the LoOP detector.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_map_form() -> MapForm {
    MapForm::LinearRidge
}

fn default_map_reg() -> f64 {
    1e-4
}

fn default_hidden_units() -> usize {
    16
}

fn default_map_iters() -> usize {
    200
}

fn default_k() -> usize {
    20
}

fn default_lambda() -> f64 {
    3.0
}

impl Default for NoveltyConfig {
    fn default() -> Self {
        Self {
            map_form: default_map_form(),
            regularization: default_map_reg(),
            hidden_units: default_hidden_units(),
            max_iters: default_map_iters(),
            k: default_k(),
            lambda: default_lambda(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Flat hit@K values to report.
    #[serde(default = "default_hit_at")]
    pub hit_at: Vec<usize>,
}

fn default_hit_at() -> Vec<usize> {
    vec![1]
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            hit_at: default_hit_at(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvStrategy {
    Ausuc,
    Accuracies,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvConfig {
    pub strategy: CvStrategy,
    #[serde(default = "default_n_folds")]
    pub n_folds: usize,
    pub grid: Vec<ScorerConfig>,
}

fn default_n_folds() -> usize {
    5
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataPaths>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default)]
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub combiner: CombinerConfig,
    #[serde(default)]
    pub novelty: NoveltyConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.synthetic) {
            (None, None) => {
                return Err(CliError::Config(
                    "config needs either a `data` or a `synthetic` section".into(),
                ))
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "config must not name both `data` and `synthetic` sections".into(),
                ))
            }
            _ => {}
        }
        if let Some(data) = &self.data {
            if !(data.holdout_fraction > 0.0 && data.holdout_fraction < 1.0) {
                return Err(CliError::Config(format!(
                    "holdout_fraction must lie in (0, 1), got {}",
                    data.holdout_fraction
                )));
            }
            for (name, path) in [
                ("features", &data.features),
                ("labels", &data.labels),
                ("partition", &data.partition),
                ("semantics", &data.semantics),
            ] {
                if !path.exists() {
                    return Err(CliError::Config(format!(
                        "{name} file does not exist: {}",
                        path.display()
                    )));
                }
            }
        }
        if let ScorerConfig::Conse { top_t, .. } = &self.scorer {
            if *top_t == 0 {
                return Err(CliError::Config("top_t must be at least 1".into()));
            }
        }
        if self.metrics.hit_at.is_empty() {
            return Err(CliError::Config("metrics.hit_at must not be empty".into()));
        }
        if self.metrics.hit_at.contains(&0) {
            return Err(CliError::Config("hit@0 is not defined".into()));
        }
        if let Some(cv) = &self.cv {
            if cv.grid.is_empty() {
                return Err(CliError::Config("cv.grid must not be empty".into()));
            }
            if cv.n_folds < 2 {
                return Err(CliError::Config("cv.n_folds must be at least 2".into()));
            }
            for entry in &cv.grid {
                if let ScorerConfig::Conse { model: Some(_), .. } = entry {
                    return Err(CliError::Config(
                        "cv grid entries must not load pre-trained models".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Applies command-line overrides and returns the output directory.
    pub fn resolve(&mut self, out: Option<PathBuf>, seed: Option<u64>) -> Result<PathBuf> {
        if let Some(seed) = seed {
            self.seed = seed;
        }
        if let Some(out) = out {
            self.out = Some(out);
        }
        self.out
            .clone()
            .ok_or_else(|| CliError::Config("no output directory (set `out` or pass --out)".into()))
    }

    /// Canonical serialization used for provenance hashing and the resolved
    /// config artifact.
    pub fn canonical_value(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_synthetic_config_parses() {
        let text = r#"{
            "seed": 3,
            "synthetic": {
                "n_seen": 4, "n_unseen": 2, "dim": 8,
                "samples_per_class": 20, "cluster_spread": 0.3, "seed": 9
            }
        }"#;
        let config: ExperimentConfig = serde_json::from_str(text).unwrap();
        config.validate().unwrap();
        assert!(matches!(config.scorer, ScorerConfig::Prototype { .. }));
        assert_eq!(config.metrics.hit_at, vec![1]);
    }

    #[test]
    fn dataset_section_is_required() {
        let config: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert!(matches!(config.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"synthetic": {"n_seen": 1, "n_unseen": 1, "dim": 2,
            "samples_per_class": 4, "cluster_spread": 0.1, "seed": 0},
            "typo_field": 1}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(text).is_err());
    }
}
