//! Discriminant scoring functions for seen and unseen classes, and the glue
//! that stacks per-side score blocks into a joint score matrix.

mod conse;
mod linear;
mod prototype;

pub use conse::{conse_scores, ConseJointScorer, ConseScorer};
pub use linear::{predict_proba, train_linear_seen, LinearScorer, Loss, TrainConfig, TrainMeta};
pub use prototype::{prototype_scores, PrototypeJointScorer, PrototypeScorer, Similarity};

use ndarray::{Array1, Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::data::{
    normalize_embeddings, ClassId, ClassPartition, LabeledFeatureSet, ScoreMatrix, SemanticKind,
    SemanticTable,
};
use crate::error::{Error, Result};

/// Anything that maps features to a joint score matrix over a fixed
/// partition. Scoring is pure, so implementors are safe to share across
/// threads.
pub trait JointScorer {
    fn score_matrix(&self, features: ArrayView2<'_, f64>) -> Result<ScoreMatrix>;
}

/// Horizontal concatenation of per-side score blocks in joint order (seen
/// columns first).
pub fn assemble_joint_scores(
    seen_block: &Array2<f64>,
    unseen_block: &Array2<f64>,
    partition: &ClassPartition,
) -> Result<ScoreMatrix> {
    if seen_block.nrows() != unseen_block.nrows() {
        return Err(Error::RowCountMismatch {
            seen: seen_block.nrows(),
            unseen: unseen_block.nrows(),
        });
    }
    if seen_block.ncols() != partition.n_seen() || unseen_block.ncols() != partition.n_unseen() {
        return Err(Error::DimensionMismatch(format!(
            "blocks are {}x{} and {}x{}, partition has {} seen and {} unseen classes",
            seen_block.nrows(),
            seen_block.ncols(),
            unseen_block.nrows(),
            unseen_block.ncols(),
            partition.n_seen(),
            partition.n_unseen()
        )));
    }
    let n = seen_block.nrows();
    let mut scores = Array2::zeros((n, partition.n_total()));
    scores
        .slice_mut(ndarray::s![.., ..partition.n_seen()])
        .assign(seen_block);
    scores
        .slice_mut(ndarray::s![.., partition.n_seen()..])
        .assign(unseen_block);
    ScoreMatrix::new(scores, partition.clone())
}

/// Class-mean visual embeddings: per class the mean of all (or of `shots`
/// uniformly sampled) feature vectors, l2-normalized. Labels are used only
/// for the averaging.
pub fn gattr_embeddings(
    data: &LabeledFeatureSet,
    classes: &[ClassId],
    shots: Option<usize>,
    seed: u64,
) -> Result<SemanticTable> {
    if let Some(0) = shots {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let by_class = data.class_indices();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut means = Array2::zeros((classes.len(), data.dim()));
    for (row, &class) in classes.iter().enumerate() {
        let indices = by_class
            .get(&class)
            .ok_or(Error::ClassWithoutSamples(class))?;
        let chosen: Vec<usize> = match shots {
            Some(m) => {
                if indices.len() < m {
                    return Err(Error::NotEnoughShots {
                        class,
                        shots: m,
                        available: indices.len(),
                    });
                }
                rand::seq::index::sample(&mut rng, indices.len(), m)
                    .iter()
                    .map(|pos| indices[pos])
                    .collect()
            }
            None => indices.clone(),
        };
        let mut mean = Array1::<f64>::zeros(data.dim());
        for &i in &chosen {
            mean += &data.row(i);
        }
        mean /= chosen.len() as f64;
        means.row_mut(row).assign(&mean);
    }
    normalize_embeddings(&SemanticTable::new(
        classes.to_vec(),
        means,
        SemanticKind::GAttr,
    )?)
}
