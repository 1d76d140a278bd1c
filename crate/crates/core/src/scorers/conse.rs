//! Convex-combination scorer for unseen classes: a sample's predicted
//! embedding is the probability-weighted mean of its top seen-class
//! embeddings, and each unseen class scores the cosine to that embedding.

use ndarray::{Array1, Array2, ArrayView2};

use crate::data::{ScoreMatrix, SemanticTable};
use crate::error::{Error, Result};
use crate::scorers::linear::{predict_proba, LinearScorer};

/// Seen-class probability model plus the embeddings it mixes.
#[derive(Debug, Clone)]
pub struct ConseScorer {
    base: LinearScorer,
    /// Embedding rows aligned with `base.class_order`.
    seen_embeddings: Array2<f64>,
    top_t: usize,
}

impl ConseScorer {
    /// `seen_semantics` must contain a row for every class the base model
    /// scores; rows are re-ordered to match the model.
    pub fn new(base: LinearScorer, seen_semantics: &SemanticTable, top_t: usize) -> Result<Self> {
        if top_t == 0 || top_t > base.n_classes() {
            return Err(Error::InvalidArgument(format!(
                "top_t must lie in 1..={}, got {top_t}",
                base.n_classes()
            )));
        }
        let aligned = seen_semantics.restrict(&base.class_order)?;
        Ok(Self {
            base,
            seen_embeddings: aligned.embeddings().to_owned(),
            top_t,
        })
    }

    pub fn base(&self) -> &LinearScorer {
        &self.base
    }

    pub fn top_t(&self) -> usize {
        self.top_t
    }

    pub fn embedding_dim(&self) -> usize {
        self.seen_embeddings.ncols()
    }

    /// Predicted semantic embedding per sample: the probability-weighted mean
    /// of the `top_t` most probable seen classes, with weights renormalized
    /// over the selected classes. Returns the rows whose predicted embedding
    /// has zero norm.
    pub fn predicted_embeddings(
        &self,
        features: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, Vec<usize>)> {
        let probs = predict_proba(&self.base, features)?;
        let n = probs.nrows();
        let dim = self.embedding_dim();
        let mut embeddings = Array2::zeros((n, dim));
        let mut flagged = Vec::new();

        let mut order: Vec<usize> = Vec::with_capacity(probs.ncols());
        for i in 0..n {
            let row = probs.row(i);
            order.clear();
            order.extend(0..row.len());
            // Probability descending, class index as the deterministic tie key.
            order.sort_unstable_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
            let top = &order[..self.top_t];
            let weight_sum: f64 = top.iter().map(|&c| row[c]).sum();
            let mut embedding = Array1::<f64>::zeros(dim);
            if weight_sum > 0.0 {
                for &c in top {
                    embedding.scaled_add(row[c] / weight_sum, &self.seen_embeddings.row(c));
                }
            }
            let norm = embedding.dot(&embedding).sqrt();
            if norm <= f64::EPSILON {
                flagged.push(i);
                embedding.fill(0.0);
            }
            embeddings.row_mut(i).assign(&embedding);
        }
        Ok((embeddings, flagged))
    }
}

/// Cosine between each sample's predicted embedding and each unseen-class
/// embedding. Rows with a zero predicted embedding score 0 for every unseen
/// class and are reported in the returned index list.
pub fn conse_scores(
    scorer: &ConseScorer,
    features: ArrayView2<'_, f64>,
    unseen_semantics: &SemanticTable,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if unseen_semantics.dim() != scorer.embedding_dim() {
        return Err(Error::DimensionMismatch(format!(
            "unseen embeddings have dimension {}, seen embeddings {}",
            unseen_semantics.dim(),
            scorer.embedding_dim()
        )));
    }
    let (embeddings, flagged) = scorer.predicted_embeddings(features)?;
    let unseen = unseen_semantics.embeddings();
    let mut scores = Array2::zeros((embeddings.nrows(), unseen.nrows()));
    for (i, s) in embeddings.outer_iter().enumerate() {
        let s_norm = s.dot(&s).sqrt();
        if s_norm <= f64::EPSILON {
            continue;
        }
        for (u, a) in unseen.outer_iter().enumerate() {
            let a_norm = a.dot(&a).sqrt();
            if a_norm <= f64::EPSILON {
                return Err(Error::ZeroVectorEmbedding(unseen_semantics.class_ids()[u]));
            }
            scores[[i, u]] = s.dot(&a) / (s_norm * a_norm);
        }
    }
    Ok((scores, flagged))
}

/// Full joint scorer: raw linear scores on the seen side, cosine scores on
/// the unseen side, concatenated in joint order.
#[derive(Debug, Clone)]
pub struct ConseJointScorer {
    conse: ConseScorer,
    unseen_semantics: SemanticTable,
    partition: crate::data::ClassPartition,
}

impl ConseJointScorer {
    pub fn new(
        conse: ConseScorer,
        semantics: &SemanticTable,
        partition: crate::data::ClassPartition,
    ) -> Result<Self> {
        if conse.base().class_order != partition.seen() {
            return Err(Error::DimensionMismatch(
                "base model class order must equal the seen class order".into(),
            ));
        }
        let unseen_semantics = semantics.restrict(partition.unseen())?;
        Ok(Self {
            conse,
            unseen_semantics,
            partition,
        })
    }
}

impl super::JointScorer for ConseJointScorer {
    fn score_matrix(&self, features: ArrayView2<'_, f64>) -> Result<ScoreMatrix> {
        let seen_block = self.conse.base().scores(features)?;
        let (unseen_block, _) = conse_scores(&self.conse, features, &self.unseen_semantics)?;
        super::assemble_joint_scores(&seen_block, &unseen_block, &self.partition)
    }
}
