//! Accuracy metrics and the Seen-Unseen accuracy Curve.
//!
//! The curve is computed by an exact breakpoint sweep: per row the critical
//! calibration value is `max_seen - max_unseen`; the row's prediction moves
//! to the unseen side exactly when gamma reaches it (unseen preferred at
//! equality). Sorting those values enumerates every step of the curve, so
//! the area needs no grid and is deterministic. Per-class correct counts are
//! kept as integers and accuracies recomputed at every emitted point, so the
//! curve is exact, not incrementally drifted.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::data::{ClassId, ScoreMatrix};
use crate::error::{Error, Result};

/// One operating point of the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SucPoint {
    pub gamma: f64,
    /// A_{S->T}: per-class accuracy of seen-class test data in the joint
    /// label space.
    pub acc_seen_joint: f64,
    /// A_{U->T}: per-class accuracy of unseen-class test data in the joint
    /// label space.
    pub acc_unseen_joint: f64,
}

/// The full seen-unseen trade-off curve with its area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SucCurve {
    /// Ordered by increasing gamma; first and last entries are the
    /// all-seen / all-unseen extremes at infinite gamma.
    pub points: Vec<SucPoint>,
    pub ausuc: f64,
    /// The gamma = 0 operating point (direct stacking).
    pub direct_stacking: SucPoint,
    /// Number of distinct breakpoints.
    pub breakpoints: usize,
}

/// Normalized-by-class-size accuracy: the mean over `class_set` of the
/// within-class correct fraction, over samples whose truth lies in
/// `class_set`. Predictions may range over any label space.
pub fn per_class_accuracy(
    predictions: &[ClassId],
    truth: &[ClassId],
    class_set: &[ClassId],
) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: predictions.len(),
        });
    }
    let mut totals: HashMap<ClassId, (u64, u64)> = HashMap::new();
    for &c in class_set {
        totals.insert(c, (0, 0));
    }
    for (&pred, &t) in predictions.iter().zip(truth) {
        if let Some(entry) = totals.get_mut(&t) {
            entry.0 += 1;
            entry.1 += u64::from(pred == t);
        }
    }
    let mut sum = 0.0;
    for &c in class_set {
        let (size, correct) = totals[&c];
        if size == 0 {
            return Err(Error::EmptyClassInTest(c));
        }
        sum += correct as f64 / size as f64;
    }
    Ok(sum / class_set.len() as f64)
}

/// Fraction of rows whose true label appears among the first `k` predictions
/// (unnormalized by class size).
pub fn flat_hit_at_k(topk: &[Vec<ClassId>], truth: &[ClassId], k: usize) -> Result<f64> {
    if topk.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            got: topk.len(),
        });
    }
    let mut hits = 0usize;
    for (row, &t) in topk.iter().zip(truth) {
        if row.len() != k {
            return Err(Error::KMismatch {
                expected: k,
                got: row.len(),
            });
        }
        hits += usize::from(row.contains(&t));
    }
    Ok(hits as f64 / truth.len() as f64)
}

/// Per-row precomputation shared by the sweeps.
struct RowInfo {
    key: f64,
    truth_seen: bool,
    /// Slot of the truth class in its side's class list.
    slot: usize,
    /// Whether the within-side argmax of the truth's side hits the truth.
    side_correct: bool,
}

struct SideCounters {
    /// Per slot: class test size.
    sizes: Vec<u64>,
    /// Per slot: currently correct count.
    correct: Vec<i64>,
    /// Slots with at least one test sample.
    present: Vec<usize>,
}

impl SideCounters {
    fn accuracy(&self) -> f64 {
        let mut sum = 0.0;
        for &slot in &self.present {
            sum += self.correct[slot] as f64 / self.sizes[slot] as f64;
        }
        sum / self.present.len() as f64
    }
}

fn argmax_range(row: ndarray::ArrayView1<'_, f64>, start: usize, end: usize) -> usize {
    let mut best = start;
    for j in (start + 1)..end {
        if row[j] > row[best] {
            best = j;
        }
    }
    best
}

/// Walks the step curve induced by per-row flip keys: a row predicts within
/// the seen side while the sweep parameter is below its key and flips to the
/// unseen side at the key (unseen preferred at equality). Per-class
/// accuracies average over the classes present in the test truth.
fn sweep_by_keys(scores: &ScoreMatrix, truth: &[ClassId], keys: Vec<f64>) -> Result<SucCurve> {
    let n = scores.n_samples();
    if truth.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: truth.len(),
        });
    }
    let partition = scores.partition();
    let n_seen = partition.n_seen();
    let n_total = partition.n_total();

    let mut rows = Vec::with_capacity(n);
    let mut seen_sizes = vec![0u64; n_seen];
    let mut unseen_sizes = vec![0u64; partition.n_unseen()];
    for (i, (&t, &key)) in truth.iter().zip(&keys).enumerate() {
        let joint_pos = partition.joint_index(t).ok_or(Error::UnknownLabel(t))?;
        let truth_seen = joint_pos < n_seen;
        let score_row = scores.row(i);
        let (slot, side_correct) = if truth_seen {
            let arg = argmax_range(score_row, 0, n_seen);
            seen_sizes[joint_pos] += 1;
            (joint_pos, arg == joint_pos)
        } else {
            let slot = joint_pos - n_seen;
            let arg = argmax_range(score_row, n_seen, n_total) - n_seen;
            unseen_sizes[slot] += 1;
            (slot, arg == slot)
        };
        rows.push(RowInfo {
            key,
            truth_seen,
            slot,
            side_correct,
        });
    }

    if seen_sizes.iter().all(|&s| s == 0) {
        return Err(Error::MissingSide("seen"));
    }
    if unseen_sizes.iter().all(|&s| s == 0) {
        return Err(Error::MissingSide("unseen"));
    }

    // Initial state: every row predicted within the seen side.
    let mut seen = SideCounters {
        correct: vec![0; seen_sizes.len()],
        present: (0..seen_sizes.len())
            .filter(|&s| seen_sizes[s] > 0)
            .collect(),
        sizes: seen_sizes,
    };
    let mut unseen = SideCounters {
        correct: vec![0; unseen_sizes.len()],
        present: (0..unseen_sizes.len())
            .filter(|&s| unseen_sizes[s] > 0)
            .collect(),
        sizes: unseen_sizes,
    };
    for row in &rows {
        if row.truth_seen && row.side_correct {
            seen.correct[row.slot] += 1;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| rows[a].key.partial_cmp(&rows[b].key).unwrap());

    let mut points = vec![SucPoint {
        gamma: f64::NEG_INFINITY,
        acc_seen_joint: seen.accuracy(),
        acc_unseen_joint: 0.0,
    }];

    let mut pos = 0;
    while pos < n {
        let key = rows[order[pos]].key;
        // Rows sharing a key flip simultaneously at one breakpoint.
        while pos < n && rows[order[pos]].key == key {
            let row = &rows[order[pos]];
            if row.truth_seen {
                if row.side_correct {
                    seen.correct[row.slot] -= 1;
                }
            } else if row.side_correct {
                unseen.correct[row.slot] += 1;
            }
            pos += 1;
        }
        points.push(SucPoint {
            gamma: key,
            acc_seen_joint: seen.accuracy(),
            acc_unseen_joint: unseen.accuracy(),
        });
    }
    let breakpoints = points.len() - 1;

    let last = *points.last().expect("at least the left extreme");
    points.push(SucPoint {
        gamma: f64::INFINITY,
        ..last
    });

    // Direct stacking sits at gamma = 0: the last breakpoint at or below 0.
    let at_zero = points
        .iter()
        .rev()
        .find(|p| p.gamma <= 0.0)
        .expect("left extreme has gamma -inf");
    let direct_stacking = SucPoint {
        gamma: 0.0,
        ..*at_zero
    };

    let ausuc = ausuc_of_points(&points)?;
    Ok(SucCurve {
        points,
        ausuc,
        direct_stacking,
        breakpoints,
    })
}

/// The exact curve traced by varying the calibration factor of calibrated
/// stacking over all of its breakpoints.
pub fn exact_gamma_sweep(scores: &ScoreMatrix, truth: &[ClassId]) -> Result<SucCurve> {
    let n_seen = scores.partition().n_seen();
    let n_total = scores.partition().n_total();
    let keys = scores
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
                .take(n_total)
                .skip(n_seen)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            seen_max - unseen_max
        })
        .collect();
    sweep_by_keys(scores, truth, keys)
}

/// Threshold sweep of the two-stage novelty rule, on the same machinery as
/// the gamma sweep. A row flips to the unseen side once the sweep parameter
/// reaches the negated novelty score, so the recorded `gamma` values are
/// negated thresholds.
pub fn novelty_sweep(scores: &ScoreMatrix, novelty: &[f64], truth: &[ClassId]) -> Result<SucCurve> {
    if novelty.len() != scores.n_samples() {
        return Err(Error::LengthMismatch {
            expected: scores.n_samples(),
            got: novelty.len(),
        });
    }
    for &v in novelty {
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite novelty score".into()));
        }
    }
    let keys = novelty.iter().map(|&v| -v).collect();
    sweep_by_keys(scores, truth, keys)
}

/// Exact area of the right-continuous step curve in the
/// (A_{S->T}, A_{U->T}) plane: each drop in seen accuracy contributes a
/// rectangle at the unseen accuracy reached before the drop.
pub fn ausuc_of_points(points: &[SucPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::DegenerateCurve(points.len()));
    }
    let mut area = 0.0;
    for pair in points.windows(2) {
        area += (pair[0].acc_seen_joint - pair[1].acc_seen_joint) * pair[0].acc_unseen_joint;
    }
    Ok(area)
}

/// Breakpoint maximizing the harmonic mean of the two accuracies; ties go to
/// the smaller gamma.
pub fn balance_fscore(curve: &SucCurve) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for p in curve.points.iter().filter(|p| p.gamma.is_finite()) {
        let denom = p.acc_seen_joint + p.acc_unseen_joint;
        let fscore = if denom == 0.0 {
            0.0
        } else {
            2.0 * p.acc_seen_joint * p.acc_unseen_joint / denom
        };
        match best {
            Some((_, best_f)) if fscore <= best_f => {}
            _ => best = Some((p.gamma, fscore)),
        }
    }
    best.ok_or(Error::DegenerateCurve(curve.points.len()))
}

/// The four standard accuracies of a joint score matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StandardMetrics {
    /// A_{U->U}: unseen test data classified within the unseen label space.
    pub acc_unseen_unseen: f64,
    /// A_{S->S}: seen test data classified within the seen label space.
    pub acc_seen_seen: f64,
    /// A_{U->T} under direct stacking.
    pub acc_unseen_joint: f64,
    /// A_{S->T} under direct stacking.
    pub acc_seen_joint: f64,
}

fn per_class_accuracy_present(
    predictions: &[ClassId],
    truth: &[ClassId],
    class_set: &[ClassId],
) -> f64 {
    let mut totals: HashMap<ClassId, (u64, u64)> = HashMap::new();
    for &c in class_set {
        totals.insert(c, (0, 0));
    }
    for (&pred, &t) in predictions.iter().zip(truth) {
        if let Some(entry) = totals.get_mut(&t) {
            entry.0 += 1;
            entry.1 += u64::from(pred == t);
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for &c in class_set {
        let (size, correct) = totals[&c];
        if size > 0 {
            sum += correct as f64 / size as f64;
            present += 1;
        }
    }
    sum / present as f64
}

/// Restricted and joint accuracies at gamma = 0. Within-side accuracies use
/// the side-restricted argmax; joint accuracies use direct stacking.
pub fn standard_metrics(scores: &ScoreMatrix, truth: &[ClassId]) -> Result<StandardMetrics> {
    if truth.len() != scores.n_samples() {
        return Err(Error::LengthMismatch {
            expected: scores.n_samples(),
            got: truth.len(),
        });
    }
    let partition = scores.partition();
    let n_seen = partition.n_seen();
    let n_total = partition.n_total();
    let mut any_seen = false;
    let mut any_unseen = false;
    let mut restricted = Vec::with_capacity(truth.len());
    let mut joint = Vec::with_capacity(truth.len());
    for (i, &t) in truth.iter().enumerate() {
        if !partition.contains(t) {
            return Err(Error::UnknownLabel(t));
        }
        let row = scores.row(i);
        let within = if partition.is_seen(t) {
            any_seen = true;
            argmax_range(row, 0, n_seen)
        } else {
            any_unseen = true;
            argmax_range(row, n_seen, n_total)
        };
        restricted.push(scores.class_at(within));
        joint.push(scores.class_at(argmax_range(row, 0, n_total)));
    }
    if !any_seen {
        return Err(Error::MissingSide("seen"));
    }
    if !any_unseen {
        return Err(Error::MissingSide("unseen"));
    }
    Ok(StandardMetrics {
        acc_unseen_unseen: per_class_accuracy_present(&restricted, truth, partition.unseen()),
        acc_seen_seen: per_class_accuracy_present(&restricted, truth, partition.seen()),
        acc_unseen_joint: per_class_accuracy_present(&joint, truth, partition.unseen()),
        acc_seen_joint: per_class_accuracy_present(&joint, truth, partition.seen()),
    })
}
