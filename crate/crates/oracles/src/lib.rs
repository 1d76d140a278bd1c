//! Brute-force reference implementations for the test suites.
//!
//! Everything here is deliberately independent of the main crate: plain
//! slices in, plain numbers out, no shared helpers, so a bug in the
//! production path cannot hide in its own oracle.

/// Area under the seen-unseen accuracy curve estimated from a dense uniform
/// grid of calibration factors.
///
/// `scores` is row-major `n_rows x n_cols`; the first `n_seen` columns are
/// seen classes. `truth` holds the joint column index of each row's true
/// class. At every grid value the prediction is the calibrated argmax
/// (gamma subtracted from seen columns, unseen preferred on exact ties,
/// lower column index within a side); accuracies are normalized by class
/// size over the classes present in `truth` and the area is accumulated
/// between consecutive grid samples with the step height taken before each
/// drop.
pub fn grid_sweep_ausuc(
    scores: &[f64],
    n_rows: usize,
    n_cols: usize,
    n_seen: usize,
    truth: &[usize],
    grid_points: usize,
) -> f64 {
    assert_eq!(scores.len(), n_rows * n_cols);
    assert_eq!(truth.len(), n_rows);
    assert!(n_seen >= 1 && n_seen < n_cols);
    assert!(grid_points >= 2);

    // Per-row side argmaxes and the gamma at which the row's decision flips
    // to the unseen side.
    let mut flip = vec![0.0f64; n_rows];
    let mut seen_correct = vec![false; n_rows];
    let mut unseen_correct = vec![false; n_rows];
    for i in 0..n_rows {
        let row = &scores[i * n_cols..(i + 1) * n_cols];
        let mut s_arg = 0;
        for j in 1..n_seen {
            if row[j] > row[s_arg] {
                s_arg = j;
            }
        }
        let mut u_arg = n_seen;
        for j in (n_seen + 1)..n_cols {
            if row[j] > row[u_arg] {
                u_arg = j;
            }
        }
        flip[i] = row[s_arg] - row[u_arg];
        seen_correct[i] = s_arg == truth[i];
        unseen_correct[i] = u_arg == truth[i];
    }

    // Integer per-class counters.
    let mut sizes = vec![0u64; n_cols];
    for &t in truth {
        sizes[t] += 1;
    }
    let seen_classes: Vec<usize> = (0..n_seen).filter(|&c| sizes[c] > 0).collect();
    let unseen_classes: Vec<usize> = (n_seen..n_cols).filter(|&c| sizes[c] > 0).collect();
    assert!(!seen_classes.is_empty() && !unseen_classes.is_empty());

    let mut correct = vec![0i64; n_cols];
    for i in 0..n_rows {
        if truth[i] < n_seen && seen_correct[i] {
            correct[truth[i]] += 1;
        }
    }
    let accuracy = |correct: &[i64], classes: &[usize]| -> f64 {
        let mut sum = 0.0;
        for &c in classes {
            sum += correct[c] as f64 / sizes[c] as f64;
        }
        sum / classes.len() as f64
    };

    let mut order: Vec<usize> = (0..n_rows).collect();
    order.sort_by(|&a, &b| flip[a].partial_cmp(&flip[b]).unwrap());

    let lo = flip[order[0]] - 1.0;
    let hi = flip[order[n_rows - 1]] + 1.0;
    let step = (hi - lo) / (grid_points - 1) as f64;

    let mut x_prev = accuracy(&correct, &seen_classes);
    let mut y_prev = accuracy(&correct, &unseen_classes);
    let mut area = 0.0;
    let mut next_flip = 0usize;
    for g in 1..grid_points {
        let gamma = lo + step * g as f64;
        let mut changed = false;
        while next_flip < n_rows && flip[order[next_flip]] <= gamma {
            let i = order[next_flip];
            if truth[i] < n_seen {
                if seen_correct[i] {
                    correct[truth[i]] -= 1;
                }
            } else if unseen_correct[i] {
                correct[truth[i]] += 1;
            }
            next_flip += 1;
            changed = true;
        }
        if changed {
            let x = accuracy(&correct, &seen_classes);
            let y = accuracy(&correct, &unseen_classes);
            area += (x_prev - x) * y_prev;
            x_prev = x;
            y_prev = y;
        }
    }
    area
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Nearest reference indices at strictly positive distance, ties by index.
fn neighbors(reference: &[Vec<f64>], point: &[f64], k: usize) -> Vec<usize> {
    let mut candidates: Vec<(f64, usize)> = reference
        .iter()
        .enumerate()
        .filter_map(|(j, r)| {
            let d = euclidean(point, r);
            (d > 0.0).then_some((d, j))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    candidates.into_iter().map(|(_, j)| j).collect()
}

fn pdist(reference: &[Vec<f64>], point: &[f64], context: &[usize], lambda: f64) -> f64 {
    let mean_sq = context
        .iter()
        .map(|&j| {
            let d = euclidean(point, &reference[j]);
            d * d
        })
        .sum::<f64>()
        / context.len() as f64;
    lambda * mean_sq.sqrt()
}

/// From-scratch Local Outlier Probability: probabilistic set distance over
/// the k nearest reference points (zero-distance matches excluded), local
/// outlier factor against the context's own set distances, normalized
/// through the Gauss error function. Returns one score in [0, 1] per query.
pub fn loop_scores(
    reference: &[Vec<f64>],
    queries: &[Vec<f64>],
    k: usize,
    lambda: f64,
) -> Vec<f64> {
    let n = reference.len();
    assert!(n >= 2, "need at least two reference points");
    let k = k.min(n - 1).max(1);

    let ref_pdists: Vec<f64> = reference
        .iter()
        .map(|point| {
            let context = neighbors(reference, point, k);
            assert!(!context.is_empty(), "degenerate reference set");
            pdist(reference, point, &context, lambda)
        })
        .collect();

    let lof_of = |point: &[f64]| -> f64 {
        let context = neighbors(reference, point, k);
        let own = pdist(reference, point, &context, lambda);
        let expected = context.iter().map(|&j| ref_pdists[j]).sum::<f64>() / context.len() as f64;
        own / expected - 1.0
    };

    let mean_lof_sq = reference
        .iter()
        .map(|p| {
            let v = lof_of(p);
            v * v
        })
        .sum::<f64>()
        / n as f64;
    let z = lambda * mean_lof_sq.sqrt();
    assert!(z > 0.0, "degenerate reference set");

    queries
        .iter()
        .map(|q| statrs::function::erf::erf(lof_of(q) / z).max(0.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_oracle_on_a_hand_checked_matrix() {
        // Two rows, one seen + one unseen class. Row 0 (seen, correct on its
        // side) flips at 0.5; row 1 (unseen, correct) flips at -0.5. Exact
        // area: x drops 1 -> 0 at y = 1, after the unseen row flipped.
        let scores = vec![1.0, 0.5, 0.2, 0.7];
        let truth = vec![0, 1];
        let area = grid_sweep_ausuc(&scores, 2, 2, 1, &truth, 100_000);
        assert!((area - 1.0).abs() < 1e-12, "area = {area}");
    }

    #[test]
    fn loop_oracle_scores_far_outliers_high() {
        let reference: Vec<Vec<f64>> = (0..5)
            .flat_map(|i| (0..5).map(move |j| vec![i as f64, j as f64]))
            .collect();
        let queries = vec![vec![2.0, 2.0], vec![50.0, 50.0]];
        let scores = loop_scores(&reference, &queries, 3, 3.0);
        assert!(scores[0] < scores[1]);
        assert!(scores[1] > 0.9);
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }
}
