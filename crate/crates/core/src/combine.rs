//! Joint decision rules over a score matrix: direct stacking, calibrated
//! stacking (seen-class scores reduced by a calibration factor gamma before
//! the joint argmax), and the two-stage rule gated by a novelty score.

use serde::{Deserialize, Serialize};

use crate::data::{ClassId, ScoreMatrix};
use crate::error::{Error, Result};

/// Resolution of an exact tie between the best calibrated seen score and the
/// best unseen score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Keeps the sweep step function right-continuous and matches the
    /// strict inequality of the two-stage gate.
    #[default]
    PreferUnseen,
    PreferSeen,
    LowestIndex,
}

/// Calibrated stacking rule: argmax of `f_c(x) - gamma * [c is seen]`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CalibrationRule {
    pub gamma: f64,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl CalibrationRule {
    pub fn new(gamma: f64) -> Self {
        Self {
            gamma,
            tie_break: TieBreak::default(),
        }
    }
}

/// Two-stage rule: a sample with novelty at or below the threshold stays in
/// the seen label space, strictly above goes to the unseen one.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoveltyRule {
    pub threshold: f64,
}

/// Index of the maximal entry in `row[range]`, lowest index on ties.
/// Returned index is absolute (within the full row).
fn argmax_in(row: ndarray::ArrayView1<'_, f64>, start: usize, end: usize) -> (usize, f64) {
    let mut best = start;
    let mut best_val = row[start];
    for j in (start + 1)..end {
        if row[j] > best_val {
            best = j;
            best_val = row[j];
        }
    }
    (best, best_val)
}

/// Plain argmax over the joint label space, lowest class index on ties.
pub fn direct_stack(scores: &ScoreMatrix) -> Vec<ClassId> {
    let n_total = scores.partition().n_total();
    scores
        .scores()
        .outer_iter()
        .map(|row| {
            let (best, _) = argmax_in(row, 0, n_total);
            scores.class_at(best)
        })
        .collect()
}

/// Calibrated stacking: subtract gamma from every seen column, then argmax.
pub fn calibrated_stack(scores: &ScoreMatrix, rule: &CalibrationRule) -> Vec<ClassId> {
    let n_seen = scores.partition().n_seen();
    let n_total = scores.partition().n_total();
    scores
        .scores()
        .outer_iter()
        .map(|row| {
            let (seen_arg, seen_max) = argmax_in(row, 0, n_seen);
            let (unseen_arg, unseen_max) = argmax_in(row, n_seen, n_total);
            let seen_cal = seen_max - rule.gamma;
            let winner = if seen_cal > unseen_max {
                seen_arg
            } else if seen_cal < unseen_max {
                unseen_arg
            } else {
                match rule.tie_break {
                    TieBreak::PreferUnseen => unseen_arg,
                    TieBreak::PreferSeen => seen_arg,
                    // Joint order puts seen columns first.
                    TieBreak::LowestIndex => seen_arg.min(unseen_arg),
                }
            };
            scores.class_at(winner)
        })
        .collect()
}

/// Top-k classes per row under the calibrated scores, descending. Equal
/// calibrated scores order by the rule's side preference and then by class
/// index, so the first entry always matches [`calibrated_stack`].
pub fn calibrated_topk(
    scores: &ScoreMatrix,
    rule: &CalibrationRule,
    k: usize,
) -> Result<Vec<Vec<ClassId>>> {
    let n_total = scores.partition().n_total();
    if k == 0 || k > n_total {
        return Err(Error::KTooLarge {
            k,
            reason: format!("joint label space has {n_total} classes"),
        });
    }
    let n_seen = scores.partition().n_seen();
    let side_rank = |j: usize| -> u8 {
        let seen = j < n_seen;
        match rule.tie_break {
            TieBreak::PreferUnseen => u8::from(seen),
            TieBreak::PreferSeen => u8::from(!seen),
            TieBreak::LowestIndex => 0,
        }
    };
    let mut out = Vec::with_capacity(scores.n_samples());
    let mut order: Vec<usize> = Vec::with_capacity(n_total);
    for row in scores.scores().outer_iter() {
        order.clear();
        order.extend(0..n_total);
        let calibrated = |j: usize| {
            if j < n_seen {
                row[j] - rule.gamma
            } else {
                row[j]
            }
        };
        order.sort_unstable_by(|&a, &b| {
            calibrated(b)
                .partial_cmp(&calibrated(a))
                .unwrap()
                .then(side_rank(a).cmp(&side_rank(b)))
                .then(a.cmp(&b))
        });
        out.push(order[..k].iter().map(|&j| scores.class_at(j)).collect());
    }
    Ok(out)
}

/// Two-stage prediction: the novelty gate picks the side, then a within-side
/// argmax picks the class.
pub fn novelty_two_stage(
    scores: &ScoreMatrix,
    novelty: &[f64],
    rule: &NoveltyRule,
) -> Result<Vec<ClassId>> {
    if novelty.len() != scores.n_samples() {
        return Err(Error::LengthMismatch {
            expected: scores.n_samples(),
            got: novelty.len(),
        });
    }
    let n_seen = scores.partition().n_seen();
    let n_total = scores.partition().n_total();
    Ok(scores
        .scores()
        .outer_iter()
        .zip(novelty)
        .map(|(row, &nov)| {
            let (winner, _) = if nov <= rule.threshold {
                argmax_in(row, 0, n_seen)
            } else {
                argmax_in(row, n_seen, n_total)
            };
            scores.class_at(winner)
        })
        .collect())
}

/// Top-k under the two-stage rule: all k labels come from the gated side.
pub fn novelty_two_stage_topk(
    scores: &ScoreMatrix,
    novelty: &[f64],
    rule: &NoveltyRule,
    k: usize,
) -> Result<Vec<Vec<ClassId>>> {
    if novelty.len() != scores.n_samples() {
        return Err(Error::LengthMismatch {
            expected: scores.n_samples(),
            got: novelty.len(),
        });
    }
    let n_seen = scores.partition().n_seen();
    let n_unseen = scores.partition().n_unseen();
    if k == 0 || k > n_seen.min(n_unseen) {
        return Err(Error::KTooLarge {
            k,
            reason: format!(
                "two-stage top-k draws from one side; sides have {n_seen} and {n_unseen} classes"
            ),
        });
    }
    let n_total = scores.partition().n_total();
    let mut out = Vec::with_capacity(scores.n_samples());
    let mut order: Vec<usize> = Vec::new();
    for (row, &nov) in scores.scores().outer_iter().zip(novelty) {
        let (start, end) = if nov <= rule.threshold {
            (0, n_seen)
        } else {
            (n_seen, n_total)
        };
        order.clear();
        order.extend(start..end);
        order.sort_unstable_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        out.push(order[..k].iter().map(|&j| scores.class_at(j)).collect());
    }
    Ok(out)
}

/// Rows where the best unseen score equals the best seen score minus gamma
/// exactly. On these rows calibrated stacking follows its tie-break while the
/// two-stage rule with implicit novelty always stays seen, so equivalence
/// checks exclude them.
pub fn calibration_boundary_rows(scores: &ScoreMatrix, gamma: f64) -> Vec<usize> {
    let n_seen = scores.partition().n_seen();
    let n_total = scores.partition().n_total();
    scores
        .scores()
        .outer_iter()
        .enumerate()
        .filter_map(|(i, row)| {
            let (_, seen_max) = argmax_in(row, 0, n_seen);
            let (_, unseen_max) = argmax_in(row, n_seen, n_total);
            (unseen_max - seen_max == -gamma).then_some(i)
        })
        .collect()
}
