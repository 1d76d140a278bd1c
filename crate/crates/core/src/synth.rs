//! Seeded synthetic benchmark generator: Gaussian clusters around class
//! means drawn on the unit sphere, with the normalized means doubling as an
//! idealized semantic table.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{
    normalize_embeddings, split_seen_holdout, ClassId, ClassPartition, LabeledFeatureSet,
    SemanticKind, SemanticTable,
};
use crate::error::{Error, Result};

/// Parameters of a synthetic GZSL dataset.
///
/// `embedding_noise = 0` makes the semantic table equal to the normalized
/// true class means, i.e. the ideal embedding a class-mean feature average
/// converges to.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_seen: usize,
    pub n_unseen: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub cluster_spread: f64,
    #[serde(default)]
    pub embedding_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.n_seen == 0 || self.n_unseen == 0 || self.dim == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidArgument(
                "synthetic spec requires at least one seen class, unseen class, dimension, and sample per class".into(),
            ));
        }
        if self.cluster_spread.is_nan() || self.cluster_spread <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "cluster_spread must be positive, got {}",
                self.cluster_spread
            )));
        }
        if self.embedding_noise < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "embedding_noise must be non-negative, got {}",
                self.embedding_noise
            )));
        }
        Ok(())
    }
}

/// A generated dataset: seen-class train split, mixed test split, the class
/// partition, and the (possibly perturbed) class-mean semantic table.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: LabeledFeatureSet,
    pub test: LabeledFeatureSet,
    pub partition: ClassPartition,
    pub semantics: SemanticTable,
    /// Exact class means before embedding noise, one row per joint class.
    pub true_means: Array2<f64>,
}

fn unit_sphere_point(rng: &mut ChaCha12Rng, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Draws the dataset described by `spec`. Identical specs produce bit
/// identical outputs.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let n_classes = spec.n_seen + spec.n_unseen;
    let class_ids: Vec<ClassId> = (0..n_classes as ClassId).collect();
    let partition = ClassPartition::new(
        class_ids[..spec.n_seen].to_vec(),
        class_ids[spec.n_seen..].to_vec(),
    )?;

    let mut means = Array2::zeros((n_classes, spec.dim));
    for c in 0..n_classes {
        means
            .row_mut(c)
            .assign(&unit_sphere_point(&mut rng, spec.dim));
    }

    let n_total = n_classes * spec.samples_per_class;
    let mut features = Array2::zeros((n_total, spec.dim));
    let mut labels = Vec::with_capacity(n_total);
    let mut row = 0;
    for c in 0..n_classes {
        for _ in 0..spec.samples_per_class {
            for j in 0..spec.dim {
                let noise: f64 = rng.sample(StandardNormal);
                features[[row, j]] = means[[c, j]] + spec.cluster_spread * noise;
            }
            labels.push(c as ClassId);
            row += 1;
        }
    }
    let all = LabeledFeatureSet::new(features, labels)?;

    let mut embeddings = means.clone();
    if spec.embedding_noise > 0.0 {
        for v in embeddings.iter_mut() {
            let noise: f64 = rng.sample(StandardNormal);
            *v += spec.embedding_noise * noise;
        }
    }
    let semantics = normalize_embeddings(&SemanticTable::new(
        class_ids,
        embeddings,
        SemanticKind::GAttr,
    )?)?;

    let split_seed = rng.random::<u64>();
    let (train, test) = split_seen_holdout(&all, &partition, 0.2, split_seed)?;
    Ok(SyntheticData {
        train,
        test,
        partition,
        semantics,
        true_means: means,
    })
}
