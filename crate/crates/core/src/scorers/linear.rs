//! One-vs-rest regularized linear scorer for seen classes.
//!
//! Each class gets an independent binary problem `min (1/N) sum loss(y_i *
//! (w.x_i + b)) + (reg/2) ||w||^2` solved by damped Newton steps with an
//! Armijo line search, so the objective is non-increasing and the final
//! gradient norm certifies convergence.

use nalgebra::{Cholesky, DMatrix, DVector};
use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{ClassId, LabeledFeatureSet};
use crate::error::{Error, Result};

/// Convex per-sample loss of the binary subproblems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// Log loss; scores feed softmax probabilities directly.
    Logistic,
    /// Squared hinge, the SVM-flavored option.
    SquaredHinge,
}

/// Solver budget and problem setup for [`train_linear_seen`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regularization: f64,
    pub loss: Loss,
    pub max_iters: usize,
    pub tolerance: f64,
    /// Recorded in the model metadata; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regularization: 1e-3,
            loss: Loss::Logistic,
            max_iters: 100,
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

/// Training provenance stored alongside the weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainMeta {
    pub loss: Loss,
    pub regularization: f64,
    pub seed: u64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub objective: f64,
}

/// Linear discriminant scores `w_c . x + b_c`, one row of weights per class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearScorer {
    pub class_order: Vec<ClassId>,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub meta: TrainMeta,
}

impl LinearScorer {
    pub fn n_classes(&self) -> usize {
        self.class_order.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.ncols()
    }

    /// Raw scores, one column per class in `class_order`.
    pub fn scores(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} columns, model expects {}",
                features.ncols(),
                self.dim()
            )));
        }
        let mut scores = features.dot(&self.weights.t());
        for mut row in scores.outer_iter_mut() {
            row += &self.bias;
        }
        Ok(scores)
    }
}

/// Softmax over class scores; every row sums to 1.
pub fn predict_proba(model: &LinearScorer, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let mut scores = model.scores(features)?;
    softmax_rows(&mut scores);
    Ok(scores)
}

pub(crate) fn softmax_rows(scores: &mut Array2<f64>) {
    for mut row in scores.outer_iter_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

fn loss_value(loss: Loss, margin: f64) -> f64 {
    match loss {
        Loss::Logistic => {
            // ln(1 + e^{-m}) without overflow on either tail.
            if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            }
        }
        Loss::SquaredHinge => {
            let gap = (1.0 - margin).max(0.0);
            gap * gap
        }
    }
}

/// First and (generalized) second derivative of the loss in the margin.
fn loss_derivatives(loss: Loss, margin: f64) -> (f64, f64) {
    match loss {
        Loss::Logistic => {
            let sigma = 1.0 / (1.0 + (-margin).exp());
            (-(1.0 - sigma), sigma * (1.0 - sigma))
        }
        Loss::SquaredHinge => {
            if margin < 1.0 {
                (-2.0 * (1.0 - margin), 2.0)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

struct FitResult {
    weights: Array1<f64>,
    bias: f64,
    iterations: usize,
    grad_norm: f64,
    objective: f64,
    #[cfg_attr(not(test), allow(dead_code))]
    objective_trace: Vec<f64>,
}

/// Solves one binary one-vs-rest subproblem. `targets` are +1/-1.
fn fit_binary(
    features: ArrayView2<'_, f64>,
    targets: &[f64],
    config: &TrainConfig,
) -> Result<FitResult> {
    let n = features.nrows();
    let d = features.ncols();
    let inv_n = 1.0 / n as f64;
    let reg = config.regularization;

    // theta = (w, b), bias last and unregularized.
    let mut theta = DVector::<f64>::zeros(d + 1);
    let mut margins = vec![0.0; n];

    let objective = |theta: &DVector<f64>, margins: &mut [f64]| -> f64 {
        let mut value = 0.0;
        for i in 0..n {
            let mut score = theta[d];
            let row = features.row(i);
            for j in 0..d {
                score += theta[j] * row[j];
            }
            margins[i] = targets[i] * score;
            value += loss_value(config.loss, margins[i]);
        }
        let mut w_sq = 0.0;
        for j in 0..d {
            w_sq += theta[j] * theta[j];
        }
        value * inv_n + 0.5 * reg * w_sq
    };

    let mut obj = objective(&theta, &mut margins);
    let mut trace = vec![obj];
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..config.max_iters {
        // Gradient and curvature weights at the current margins.
        let mut grad = DVector::<f64>::zeros(d + 1);
        let mut curv = vec![0.0; n];
        for i in 0..n {
            let (l1, l2) = loss_derivatives(config.loss, margins[i]);
            curv[i] = l2;
            let coeff = l1 * targets[i] * inv_n;
            let row = features.row(i);
            for j in 0..d {
                grad[j] += coeff * row[j];
            }
            grad[d] += coeff;
        }
        for j in 0..d {
            grad[j] += reg * theta[j];
        }
        grad_norm = grad.norm();
        iterations = iter;
        if grad_norm <= config.tolerance {
            break;
        }

        // Newton system H = (1/N) X~' diag(curv) X~ + reg J, damped for the
        // bias row.
        let mut hess = DMatrix::<f64>::zeros(d + 1, d + 1);
        for (i, &curvature) in curv.iter().enumerate() {
            if curvature == 0.0 {
                continue;
            }
            let scale = curvature * inv_n;
            let row = features.row(i);
            for a in 0..d {
                let ra = row[a] * scale;
                for b in a..d {
                    hess[(a, b)] += ra * row[b];
                }
                hess[(a, d)] += ra;
            }
            hess[(d, d)] += scale;
        }
        for a in 0..d {
            hess[(a, a)] += reg;
            for b in (a + 1)..=d {
                hess[(b, a)] = hess[(a, b)];
            }
        }
        hess[(d, d)] += 1e-12;

        let direction = match Cholesky::new(hess) {
            Some(chol) => chol.solve(&(-&grad)),
            None => -&grad,
        };
        let mut slope = grad.dot(&direction);
        let direction = if slope < 0.0 {
            direction
        } else {
            // Fall back to steepest descent if the quadratic model is unusable.
            slope = -grad_norm * grad_norm;
            -&grad
        };

        // Armijo backtracking keeps the objective monotone.
        let mut step = 1.0;
        let mut accepted = false;
        let mut candidate_margins = vec![0.0; n];
        for _ in 0..40 {
            let candidate = &theta + &direction * step;
            let cand_obj = objective(&candidate, &mut candidate_margins);
            if cand_obj <= obj + 1e-4 * step * slope {
                theta = candidate;
                margins.copy_from_slice(&candidate_margins);
                obj = cand_obj;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        trace.push(obj);
        if !accepted {
            break;
        }
    }

    let mut weights = Array1::zeros(d);
    for j in 0..d {
        weights[j] = theta[j];
    }
    Ok(FitResult {
        weights,
        bias: theta[d],
        iterations,
        grad_norm,
        objective: obj,
        objective_trace: trace,
    })
}

/// Trains one linear scorer per class, one-vs-rest over `classes`.
pub fn train_linear_seen(
    train: &LabeledFeatureSet,
    classes: &[ClassId],
    config: &TrainConfig,
) -> Result<LinearScorer> {
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    for &label in train.labels() {
        if !classes.contains(&label) {
            return Err(Error::UnknownLabel(label));
        }
    }
    for &c in classes {
        if !train.labels().contains(&c) {
            return Err(Error::ClassWithoutSamples(c));
        }
    }

    let d = train.dim();
    let mut weights = Array2::zeros((classes.len(), d));
    let mut bias = Array1::zeros(classes.len());
    let mut iterations = 0;
    let mut grad_norm: f64 = 0.0;
    let mut objective = 0.0;
    for (c_idx, &class) in classes.iter().enumerate() {
        let targets: Vec<f64> = train
            .labels()
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        let fit = fit_binary(train.features(), &targets, config)?;
        weights.row_mut(c_idx).assign(&fit.weights);
        bias[c_idx] = fit.bias;
        iterations = iterations.max(fit.iterations);
        grad_norm = grad_norm.max(fit.grad_norm);
        objective += fit.objective;
    }

    Ok(LinearScorer {
        class_order: classes.to_vec(),
        weights,
        bias,
        meta: TrainMeta {
            loss: config.loss,
            regularization: config.regularization,
            seed: config.seed,
            iterations,
            grad_norm,
            objective,
        },
    })
}
