//! Visual-to-semantic regression map underlying semantic-space novelty
//! detection: either ridge regression or a tanh hidden layer with a linear
//! bypass, trained to send each sample to its class embedding.

use nalgebra::{Cholesky, DMatrix};
use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{LabeledFeatureSet, SemanticTable};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapForm {
    LinearRidge,
    OneHiddenLayer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapConfig {
    pub form: MapForm,
    pub regularization: f64,
    /// Hidden width of the one-hidden-layer form; ignored by ridge.
    pub hidden_units: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            form: MapForm::LinearRidge,
            regularization: 1e-4,
            hidden_units: 16,
            max_iters: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapMeta {
    pub form: MapForm,
    pub regularization: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Mean squared residual norm on the training data.
    pub training_mse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum MapParams {
    Linear {
        weights: Array2<f64>, // D x E
        bias: Array1<f64>,
    },
    Hidden {
        w1: Array2<f64>, // D x H
        b1: Array1<f64>,
        w2: Array2<f64>,   // H x E
        skip: Array2<f64>, // D x E, linear bypass
        b2: Array1<f64>,
    },
}

/// Fitted map from feature space to semantic space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemanticMap {
    params: MapParams,
    pub meta: MapMeta,
}

impl SemanticMap {
    pub fn input_dim(&self) -> usize {
        match &self.params {
            MapParams::Linear { weights, .. } => weights.nrows(),
            MapParams::Hidden { w1, .. } => w1.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match &self.params {
            MapParams::Linear { weights, .. } => weights.ncols(),
            MapParams::Hidden { skip, .. } => skip.ncols(),
        }
    }

    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "features have {} columns, map expects {}",
                features.ncols(),
                self.input_dim()
            )));
        }
        Ok(match &self.params {
            MapParams::Linear { weights, bias } => {
                let mut out = features.dot(weights);
                for mut row in out.outer_iter_mut() {
                    row += bias;
                }
                out
            }
            MapParams::Hidden {
                w1,
                b1,
                w2,
                skip,
                b2,
            } => {
                let mut hidden = features.dot(w1);
                for mut row in hidden.outer_iter_mut() {
                    row += b1;
                }
                hidden.mapv_inplace(f64::tanh);
                let mut out = hidden.dot(w2) + features.dot(skip);
                for mut row in out.outer_iter_mut() {
                    row += b2;
                }
                out
            }
        })
    }
}

/// Per-sample targets: the embedding of each sample's class.
fn targets_for(train: &LabeledFeatureSet, semantics: &SemanticTable) -> Result<Array2<f64>> {
    let mut targets = Array2::zeros((train.n_samples(), semantics.dim()));
    for (i, &label) in train.labels().iter().enumerate() {
        let row = semantics
            .row_for(label)
            .ok_or(Error::ClassWithoutSamples(label))?;
        targets.row_mut(i).assign(&row);
    }
    Ok(targets)
}

fn mse(predicted: &Array2<f64>, targets: &Array2<f64>) -> f64 {
    let n = predicted.nrows() as f64;
    let mut sum = 0.0;
    for (p, t) in predicted.iter().zip(targets.iter()) {
        let d = p - t;
        sum += d * d;
    }
    sum / n
}

/// Ridge solution with all parameters (bias included) l2-penalized, so the
/// map shrinks to zero as the regularization grows.
fn fit_ridge(
    features: ArrayView2<'_, f64>,
    targets: &Array2<f64>,
    reg: f64,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = features.nrows();
    let d = features.ncols();
    let e = targets.ncols();
    let inv_n = 1.0 / n as f64;

    // Augmented normal equations over [X 1].
    let mut gram = DMatrix::<f64>::zeros(d + 1, d + 1);
    for x in features.outer_iter() {
        for a in 0..d {
            let xa = x[a] * inv_n;
            for b in a..d {
                gram[(a, b)] += xa * x[b];
            }
            gram[(a, d)] += xa;
        }
        gram[(d, d)] += inv_n;
    }
    for a in 0..=d {
        gram[(a, a)] += reg;
        for b in (a + 1)..=d {
            gram[(b, a)] = gram[(a, b)];
        }
    }

    let mut rhs = DMatrix::<f64>::zeros(d + 1, e);
    for (x, t) in features.outer_iter().zip(targets.outer_iter()) {
        for col in 0..e {
            let tv = t[col] * inv_n;
            for a in 0..d {
                rhs[(a, col)] += x[a] * tv;
            }
            rhs[(d, col)] += tv;
        }
    }

    let mut jitter = 0.0;
    let solution = loop {
        let mut m = gram.clone();
        if jitter > 0.0 {
            for a in 0..=d {
                m[(a, a)] += jitter;
            }
        }
        match Cholesky::new(m) {
            Some(chol) => break chol.solve(&rhs),
            None => {
                jitter = if jitter == 0.0 { 1e-10 } else { jitter * 100.0 };
                if jitter > 1e-2 {
                    return Err(Error::Numeric(
                        "ridge system is not positive definite".into(),
                    ));
                }
            }
        }
    };

    let mut weights = Array2::zeros((d, e));
    let mut bias = Array1::zeros(e);
    for col in 0..e {
        for a in 0..d {
            weights[[a, col]] = solution[(a, col)];
        }
        bias[col] = solution[(d, col)];
    }
    Ok((weights, bias))
}

struct HiddenState {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    skip: Array2<f64>,
    b2: Array1<f64>,
}

impl HiddenState {
    fn penalty(&self, reg: f64) -> f64 {
        let sq = |a: &Array2<f64>| a.iter().map(|v| v * v).sum::<f64>();
        let sqv = |a: &Array1<f64>| a.iter().map(|v| v * v).sum::<f64>();
        reg * (sq(&self.w1) + sqv(&self.b1) + sq(&self.w2) + sq(&self.skip) + sqv(&self.b2))
    }

    fn forward(&self, features: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
        let mut hidden = features.dot(&self.w1);
        for mut row in hidden.outer_iter_mut() {
            row += &self.b1;
        }
        hidden.mapv_inplace(f64::tanh);
        let mut out = hidden.dot(&self.w2) + features.dot(&self.skip);
        for mut row in out.outer_iter_mut() {
            row += &self.b2;
        }
        (hidden, out)
    }

    fn step(&self, grads: &HiddenState, t: f64) -> HiddenState {
        HiddenState {
            w1: &self.w1 - &(&grads.w1 * t),
            b1: &self.b1 - &(&grads.b1 * t),
            w2: &self.w2 - &(&grads.w2 * t),
            skip: &self.skip - &(&grads.skip * t),
            b2: &self.b2 - &(&grads.b2 * t),
        }
    }

    fn grad_norm_sq(&self) -> f64 {
        self.penalty(1.0)
    }
}

/// Gradient descent with an Armijo line search; the objective never
/// increases. Starting from the ridge solution on the bypass path keeps the
/// hidden form at least as good a fit as ridge.
fn fit_hidden(
    features: ArrayView2<'_, f64>,
    targets: &Array2<f64>,
    config: &MapConfig,
) -> Result<(HiddenState, usize)> {
    let d = features.ncols();
    let e = targets.ncols();
    let h = config.hidden_units.max(1);
    let n = features.nrows() as f64;
    let reg = config.regularization;

    let (ridge_w, ridge_b) = fit_ridge(features, targets, reg)?;
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let init_scale = 0.1 / (d as f64).sqrt();
    let mut state = HiddenState {
        w1: Array2::from_shape_fn((d, h), |_| {
            init_scale * rng.sample::<f64, _>(StandardNormal)
        }),
        b1: Array1::zeros(h),
        w2: Array2::zeros((h, e)),
        skip: ridge_w,
        b2: ridge_b,
    };

    let objective = |s: &HiddenState| {
        let (_, out) = s.forward(features);
        mse(&out, targets) + s.penalty(reg)
    };
    let mut obj = objective(&state);
    let mut iterations = 0;

    for iter in 0..config.max_iters {
        let (hidden, out) = state.forward(features);
        // d objective / d out = 2 (out - targets) / N.
        let mut delta = &out - targets;
        delta.mapv_inplace(|v| 2.0 * v / n);

        let mut dhidden = delta.dot(&state.w2.t());
        for (dh, z) in dhidden.iter_mut().zip(hidden.iter()) {
            *dh *= 1.0 - z * z;
        }

        let grads = HiddenState {
            w1: features.t().dot(&dhidden) + &(&state.w1 * (2.0 * reg)),
            b1: dhidden.sum_axis(ndarray::Axis(0)) + &(&state.b1 * (2.0 * reg)),
            w2: hidden.t().dot(&delta) + &(&state.w2 * (2.0 * reg)),
            skip: features.t().dot(&delta) + &(&state.skip * (2.0 * reg)),
            b2: delta.sum_axis(ndarray::Axis(0)) + &(&state.b2 * (2.0 * reg)),
        };

        let grad_sq = grads.grad_norm_sq();
        iterations = iter;
        if grad_sq.sqrt() <= 1e-10 {
            break;
        }

        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = state.step(&grads, t);
            let cand_obj = objective(&candidate);
            if cand_obj <= obj - 1e-4 * t * grad_sq {
                state = candidate;
                obj = cand_obj;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((state, iterations))
}

/// Fits the regression map from features to class embeddings, minimizing the
/// mean squared embedding error plus an l2 penalty on every parameter.
pub fn fit_semantic_map(
    train: &LabeledFeatureSet,
    semantics: &SemanticTable,
    config: &MapConfig,
) -> Result<SemanticMap> {
    if config.regularization < 0.0 {
        return Err(Error::InvalidArgument(
            "map regularization must be non-negative".into(),
        ));
    }
    let targets = targets_for(train, semantics)?;
    match config.form {
        MapForm::LinearRidge => {
            let (weights, bias) = fit_ridge(train.features(), &targets, config.regularization)?;
            let params = MapParams::Linear { weights, bias };
            let map = SemanticMap {
                params,
                meta: MapMeta {
                    form: config.form,
                    regularization: config.regularization,
                    seed: config.seed,
                    iterations: 1,
                    training_mse: 0.0,
                },
            };
            let predicted = map.apply(train.features())?;
            let training_mse = mse(&predicted, &targets);
            Ok(SemanticMap {
                meta: MapMeta {
                    training_mse,
                    ..map.meta
                },
                params: map.params,
            })
        }
        MapForm::OneHiddenLayer => {
            let (state, iterations) = fit_hidden(train.features(), &targets, config)?;
            let params = MapParams::Hidden {
                w1: state.w1,
                b1: state.b1,
                w2: state.w2,
                skip: state.skip,
                b2: state.b2,
            };
            let map = SemanticMap {
                params,
                meta: MapMeta {
                    form: config.form,
                    regularization: config.regularization,
                    seed: config.seed,
                    iterations,
                    training_mse: 0.0,
                },
            };
            let predicted = map.apply(train.features())?;
            let training_mse = mse(&predicted, &targets);
            Ok(SemanticMap {
                meta: MapMeta {
                    training_mse,
                    ..map.meta
                },
                params: map.params,
            })
        }
    }
}
