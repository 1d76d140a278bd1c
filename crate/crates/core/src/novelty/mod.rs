//! Novelty scorers gating the two-stage decision rule: a visual-to-semantic
//! map, Gaussian-mixture novelty, LoOP novelty, and the implicit
//! max-difference novelty that reproduces calibrated stacking.

mod gaussian;
mod local_outlier;
mod semantic_map;

pub use gaussian::{fit_gaussian_novelty, gaussian_novelty, GaussianNoveltyModel};
pub use local_outlier::{fit_loop_novelty, loop_novelty, LoopNoveltyModel};
pub use semantic_map::{fit_semantic_map, MapConfig, MapForm, MapMeta, SemanticMap};

use crate::data::ScoreMatrix;

/// Implicit novelty of a score row: best unseen score minus best seen score.
/// Gating on this vector with threshold `-gamma` reproduces calibrated
/// stacking's top-1 decisions away from exact boundary ties.
pub fn implicit_novelty(scores: &ScoreMatrix) -> Vec<f64> {
    let n_seen = scores.partition().n_seen();
    scores
        .scores()
        .outer_iter()
        .map(|row| {
            let seen_max = row
                .iter()
                .take(n_seen)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let unseen_max = row
                .iter()
                .skip(n_seen)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            unseen_max - seen_max
        })
        .collect()
}
