//! Local Outlier Probability novelty scores in [0, 1], built from the
//! probabilistic set distance over k nearest reference points, the local
//! outlier factor, and the Gauss error function.
//!
//! Context sets never contain a point at zero distance, so a query that
//! coincides with a reference point compares against that point's actual
//! neighbors. Neighbor ties resolve by lower reference row index.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fitted LoOP scorer: mapped seen-class reference points with their
/// precomputed set distances and the normalization constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopNoveltyModel {
    reference: Array2<f64>,
    k: usize,
    lambda: f64,
    /// pdist of every reference point within the reference set.
    ref_pdists: Vec<f64>,
    /// Z = lambda * sqrt(mean lof^2) over the reference set.
    normalization: f64,
}

impl LoopNoveltyModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn dim(&self) -> usize {
        self.reference.ncols()
    }

    pub fn n_reference(&self) -> usize {
        self.reference.nrows()
    }
}

fn squared_distance(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut sq = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        sq += d * d;
    }
    sq
}

/// k nearest reference rows to `point` at strictly positive distance, plus
/// the mean squared distance to them. Ties order by row index.
fn context_set(
    reference: ArrayView2<'_, f64>,
    point: ArrayView1<'_, f64>,
    k: usize,
) -> Option<(Vec<usize>, f64)> {
    let mut candidates: Vec<(f64, usize)> = reference
        .outer_iter()
        .enumerate()
        .filter_map(|(j, r)| {
            let sq = squared_distance(point, r);
            (sq > 0.0).then_some((sq, j))
        })
        .collect();
    if candidates.is_empty() {
        return None;
    }
    candidates.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    let mean_sq = candidates.iter().map(|(sq, _)| sq).sum::<f64>() / candidates.len() as f64;
    Some((candidates.into_iter().map(|(_, j)| j).collect(), mean_sq))
}

fn lof(
    reference: ArrayView2<'_, f64>,
    ref_pdists: &[f64],
    point: ArrayView1<'_, f64>,
    k: usize,
    lambda: f64,
) -> Option<f64> {
    let (context, mean_sq) = context_set(reference, point, k)?;
    let pdist = lambda * mean_sq.sqrt();
    let context_mean = context.iter().map(|&j| ref_pdists[j]).sum::<f64>() / context.len() as f64;
    Some(pdist / context_mean - 1.0)
}

/// Fits the model on mapped seen-class training points. `k` is clamped to
/// `n - 1` when the reference set is small.
pub fn fit_loop_novelty(reference: Array2<f64>, k: usize, lambda: f64) -> Result<LoopNoveltyModel> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    let n = reference.nrows();
    if n < 2 {
        return Err(Error::DegenerateReference);
    }
    let k = k.min(n - 1);

    let mut ref_pdists = Vec::with_capacity(n);
    for point in reference.outer_iter() {
        match context_set(reference.view(), point, k) {
            // A point with no positive-distance neighbor means all points
            // coincide.
            None => return Err(Error::DegenerateReference),
            Some((_, mean_sq)) => ref_pdists.push(lambda * mean_sq.sqrt()),
        }
    }

    let mut lof_sq_sum = 0.0;
    for point in reference.outer_iter() {
        let value = lof(reference.view(), &ref_pdists, point, k, lambda)
            .ok_or(Error::DegenerateReference)?;
        lof_sq_sum += value * value;
    }
    let normalization = lambda * (lof_sq_sum / n as f64).sqrt();
    if normalization.is_nan() || normalization <= 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(LoopNoveltyModel {
        reference,
        k,
        lambda,
        ref_pdists,
        normalization,
    })
}

/// LoOP score per mapped query point: `max(0, erf(lof / Z))`.
pub fn loop_novelty(model: &LoopNoveltyModel, mapped: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if mapped.ncols() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "queries have dimension {}, model expects {}",
            mapped.ncols(),
            model.dim()
        )));
    }
    Ok(mapped
        .outer_iter()
        .map(|point| {
            // After a successful fit at least two reference points differ, so
            // every query has a non-empty context set.
            let value = lof(
                model.reference.view(),
                &model.ref_pdists,
                point,
                model.k,
                model.lambda,
            )
            .expect("non-degenerate reference set");
            libm::erf(value / model.normalization).max(0.0)
        })
        .collect())
}
