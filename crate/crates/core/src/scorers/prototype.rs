//! Nearest-prototype scoring over semantic embeddings: every target class is
//! represented by one vector and samples score by similarity to it.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{ClassPartition, ScoreMatrix, SemanticTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Similarity {
    Cosine,
    Dot,
    NegativeEuclidean,
}

/// One prototype vector per target class.
#[derive(Debug, Clone)]
pub struct PrototypeScorer {
    prototypes: SemanticTable,
    similarity: Similarity,
}

impl PrototypeScorer {
    pub fn new(prototypes: SemanticTable, similarity: Similarity) -> Result<Self> {
        if similarity == Similarity::Cosine {
            for (row, v) in prototypes.embeddings().outer_iter().enumerate() {
                if v.dot(&v).sqrt() <= f64::EPSILON {
                    return Err(Error::ZeroVectorEmbedding(prototypes.class_ids()[row]));
                }
            }
        }
        Ok(Self {
            prototypes,
            similarity,
        })
    }

    pub fn class_ids(&self) -> &[u32] {
        self.prototypes.class_ids()
    }

    pub fn similarity(&self) -> Similarity {
        self.similarity
    }

    pub fn dim(&self) -> usize {
        self.prototypes.dim()
    }
}

fn similarity_value(kind: Similarity, x: ArrayView1<'_, f64>, p: ArrayView1<'_, f64>) -> f64 {
    match kind {
        Similarity::Dot => x.dot(&p),
        Similarity::Cosine => {
            let xn = x.dot(&x).sqrt();
            if xn <= f64::EPSILON {
                return 0.0; // zero feature vector has no direction
            }
            let pn = p.dot(&p).sqrt();
            x.dot(&p) / (xn * pn)
        }
        Similarity::NegativeEuclidean => {
            let mut sq = 0.0;
            for (a, b) in x.iter().zip(p.iter()) {
                let d = a - b;
                sq += d * d;
            }
            -sq.sqrt()
        }
    }
}

/// Similarity of every sample to every prototype, one column per class in
/// prototype order.
pub fn prototype_scores(
    scorer: &PrototypeScorer,
    features: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if features.ncols() != scorer.dim() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} columns, prototypes have {}",
            features.ncols(),
            scorer.dim()
        )));
    }
    let protos = scorer.prototypes.embeddings();
    let mut scores = Array2::zeros((features.nrows(), protos.nrows()));
    for (i, x) in features.outer_iter().enumerate() {
        for (c, p) in protos.outer_iter().enumerate() {
            scores[[i, c]] = similarity_value(scorer.similarity, x, p);
        }
    }
    Ok(scores)
}

/// Joint scorer whose prototypes cover the whole label space T, in joint
/// order. Used when embeddings live in feature space.
#[derive(Debug, Clone)]
pub struct PrototypeJointScorer {
    scorer: PrototypeScorer,
    partition: ClassPartition,
}

impl PrototypeJointScorer {
    pub fn new(
        semantics: &SemanticTable,
        partition: ClassPartition,
        similarity: Similarity,
    ) -> Result<Self> {
        let joint: Vec<u32> = partition.joint().collect();
        let prototypes = semantics.restrict(&joint)?;
        Ok(Self {
            scorer: PrototypeScorer::new(prototypes, similarity)?,
            partition,
        })
    }
}

impl super::JointScorer for PrototypeJointScorer {
    fn score_matrix(&self, features: ArrayView2<'_, f64>) -> Result<ScoreMatrix> {
        let scores = prototype_scores(&self.scorer, features)?;
        ScoreMatrix::new(scores, self.partition.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SemanticKind;
    use ndarray::array;

    fn table(rows: Array2<f64>) -> SemanticTable {
        let ids = (0..rows.nrows() as u32).collect();
        SemanticTable::new(ids, rows, SemanticKind::GAttr).unwrap()
    }

    #[test]
    fn matching_prototype_scores_one_and_wins() {
        let scorer = PrototypeScorer::new(
            table(array![[1.0, 0.0], [0.0, 1.0], [0.6, 0.8]]),
            Similarity::Cosine,
        )
        .unwrap();
        let scores = prototype_scores(&scorer, array![[1.0, 0.0]].view()).unwrap();
        assert!((scores[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(scores[[0, 1]] < 1.0 && scores[[0, 2]] < 1.0);
    }

    #[test]
    fn orthogonal_prototypes_give_unit_and_zero() {
        let scorer =
            PrototypeScorer::new(table(array![[1.0, 0.0], [0.0, 1.0]]), Similarity::Cosine)
                .unwrap();
        let scores = prototype_scores(&scorer, array![[2.0, 0.0]].view()).unwrap();
        assert!((scores[[0, 0]] - 1.0).abs() < 1e-12);
        assert!(scores[[0, 1]].abs() < 1e-12);
    }

    #[test]
    fn equidistant_point_ties_under_negative_euclidean() {
        let scorer = PrototypeScorer::new(
            table(array![[1.0, 0.0], [-1.0, 0.0]]),
            Similarity::NegativeEuclidean,
        )
        .unwrap();
        let scores = prototype_scores(&scorer, array![[0.0, 5.0]].view()).unwrap();
        assert_eq!(scores[[0, 0]], scores[[0, 1]]);
    }

    #[test]
    fn cosine_rejects_zero_prototype() {
        match PrototypeScorer::new(table(array![[0.0, 0.0]]), Similarity::Cosine) {
            Err(Error::ZeroVectorEmbedding(0)) => {}
            other => panic!("expected ZeroVectorEmbedding, got {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let scorer = PrototypeScorer::new(table(array![[1.0, 0.0]]), Similarity::Dot).unwrap();
        assert!(matches!(
            prototype_scores(&scorer, array![[1.0, 0.0, 3.0]].view()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
