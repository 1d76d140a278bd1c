//! Gaussian-mixture novelty: seen classes modeled as isotropic Gaussians
//! centered on their semantic embeddings; the novelty score is the negative
//! log probability under the mixture.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{ClassId, SemanticTable};
use crate::error::{Error, Result};

const VARIANCE_FLOOR: f64 = 1e-8;

/// Mixture of one isotropic Gaussian per seen class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianNoveltyModel {
    /// One mean per seen class, in seen order (class semantic embeddings).
    pub means: Array2<f64>,
    /// Per-class isotropic variance.
    pub variances: Vec<f64>,
    /// Mixture weights on the simplex.
    pub weights: Vec<f64>,
}

impl GaussianNoveltyModel {
    pub fn dim(&self) -> usize {
        self.means.ncols()
    }
}

/// Builds the mixture from mapped seen-class training points. Each class
/// mean is its semantic embedding; its variance is the mean squared distance
/// of the class's mapped points to that embedding, floored away from zero.
/// Weights are uniform.
pub fn fit_gaussian_novelty(
    mapped: ArrayView2<'_, f64>,
    labels: &[ClassId],
    seen: &[ClassId],
    semantics: &SemanticTable,
) -> Result<GaussianNoveltyModel> {
    if labels.len() != mapped.nrows() {
        return Err(Error::LengthMismatch {
            expected: mapped.nrows(),
            got: labels.len(),
        });
    }
    let table = semantics.restrict(seen)?;
    if table.dim() != mapped.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "mapped points have dimension {}, embeddings {}",
            mapped.ncols(),
            table.dim()
        )));
    }
    let means = table.embeddings().to_owned();
    let mut variances = Vec::with_capacity(seen.len());
    for (row, &class) in seen.iter().enumerate() {
        let mean = means.row(row);
        let mut sum = 0.0;
        let mut count = 0usize;
        for (x, &label) in mapped.outer_iter().zip(labels) {
            if label != class {
                continue;
            }
            let mut sq = 0.0;
            for (a, b) in x.iter().zip(mean.iter()) {
                let d = a - b;
                sq += d * d;
            }
            sum += sq;
            count += 1;
        }
        if count == 0 {
            return Err(Error::ClassWithoutSamples(class));
        }
        variances.push((sum / count as f64).max(VARIANCE_FLOOR));
    }
    let weight = 1.0 / seen.len() as f64;
    Ok(GaussianNoveltyModel {
        means,
        variances,
        weights: vec![weight; seen.len()],
    })
}

/// Negative log mixture density per mapped point, evaluated through
/// log-sum-exp so distant points never underflow to an infinite score.
pub fn gaussian_novelty(
    model: &GaussianNoveltyModel,
    mapped: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    if mapped.ncols() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "mapped points have dimension {}, model expects {}",
            mapped.ncols(),
            model.dim()
        )));
    }
    let dim = model.dim() as f64;
    let log_terms: Vec<f64> = model
        .weights
        .iter()
        .zip(&model.variances)
        .map(|(w, var)| w.ln() - 0.5 * dim * (2.0 * std::f64::consts::PI * var).ln())
        .collect();

    let mut scores = Vec::with_capacity(mapped.nrows());
    let mut logs = vec![0.0; model.weights.len()];
    for x in mapped.outer_iter() {
        for (s, mean) in model.means.outer_iter().enumerate() {
            let mut sq = 0.0;
            for (a, b) in x.iter().zip(mean.iter()) {
                let d = a - b;
                sq += d * d;
            }
            logs[s] = log_terms[s] - 0.5 * sq / model.variances[s];
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        scores.push(-(max + sum.ln()));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn model(means: Array2<f64>, variances: Vec<f64>) -> GaussianNoveltyModel {
        let k = variances.len();
        GaussianNoveltyModel {
            means,
            variances,
            weights: vec![1.0 / k as f64; k],
        }
    }

    #[test]
    fn score_is_minimal_at_the_single_mean() {
        let m = model(array![[0.0, 0.0]], vec![1.0]);
        let queries = array![[0.0, 0.0], [0.5, 0.0], [0.0, -2.0], [3.0, 3.0]];
        let scores = gaussian_novelty(&m, queries.view()).unwrap();
        for &s in &scores[1..] {
            assert!(s > scores[0]);
        }
    }

    #[test]
    fn score_grows_radially_for_one_component() {
        let m = model(array![[0.0]], vec![0.5]);
        let radii = array![[0.0], [0.5], [1.0], [2.0], [4.0]];
        let scores = gaussian_novelty(&m, radii.view()).unwrap();
        for pair in scores.windows(2) {
            assert!(pair[1] > pair[0]);
        }
    }

    #[test]
    fn two_component_mixture_matches_closed_form() {
        // Oracle: direct density evaluation of the two-component mixture.
        let m = model(array![[1.0, 0.0], [-1.0, 0.0]], vec![1.0, 1.0]);
        let queries = array![[0.0, 0.0], [3.0, 0.0]];
        let scores = gaussian_novelty(&m, queries.view()).unwrap();

        let density = |x: (f64, f64)| {
            let comp = |mx: f64| {
                let sq = (x.0 - mx).powi(2) + x.1.powi(2);
                (-0.5 * sq).exp() / (2.0 * std::f64::consts::PI)
            };
            0.5 * comp(1.0) + 0.5 * comp(-1.0)
        };
        assert!((scores[0] - (-density((0.0, 0.0)).ln())).abs() < 1e-9);
        assert!((scores[1] - (-density((3.0, 0.0)).ln())).abs() < 1e-9);
        // The origin sits between the components: less novel than (3, 0).
        assert!(scores[0] < scores[1]);
    }

    #[test]
    fn far_points_stay_finite() {
        let m = model(array![[0.0, 0.0]], vec![1e-4]);
        let scores = gaussian_novelty(&m, array![[1e4, -1e4]].view()).unwrap();
        assert!(scores[0].is_finite());
    }

    #[test]
    fn translation_equivariance() {
        let queries = array![[0.3, -0.4], [2.0, 1.0], [-1.5, 0.7]];
        let base = model(array![[1.0, 0.0], [-1.0, 2.0]], vec![0.7, 1.3]);
        let shift = [10.0, -5.0];
        let shifted_means = array![
            [1.0 + shift[0], 0.0 + shift[1]],
            [-1.0 + shift[0], 2.0 + shift[1]]
        ];
        let shifted = model(shifted_means, vec![0.7, 1.3]);
        let mut shifted_queries = queries.clone();
        for mut row in shifted_queries.outer_iter_mut() {
            row[0] += shift[0];
            row[1] += shift[1];
        }
        let a = gaussian_novelty(&base, queries.view()).unwrap();
        let b = gaussian_novelty(&shifted, shifted_queries.view()).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}
