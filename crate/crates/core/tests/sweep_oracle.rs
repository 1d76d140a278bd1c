//! Exact breakpoint sweep against the dense-grid reference implementation.
//!
//! Score values are drawn on a 1/8 lattice so every breakpoint gap is at
//! least 0.125, far wider than the 10^6-point grid spacing; the grid then
//! resolves every step of the exact curve and the two areas must agree to
//! within accumulation noise.

use gzsl_core::data::{ClassPartition, ScoreMatrix};
use gzsl_core::metrics::exact_gamma_sweep;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

struct Instance {
    scores: ScoreMatrix,
    truth: Vec<u32>,
}

fn lattice_instance(seed: u64, max_rows: usize, max_classes: usize) -> Instance {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_total = rng.random_range(2..=max_classes.max(2));
    let n_seen = rng.random_range(1..n_total);
    let n = rng.random_range(4..=max_rows.max(4));
    let mut scores = Array2::zeros((n, n_total));
    for v in scores.iter_mut() {
        // Multiples of 1/8 in [-4, 4].
        *v = rng.random_range(-32..=32) as f64 / 8.0;
    }
    // Truth must cover both sides.
    let mut truth: Vec<u32> = (0..n)
        .map(|_| rng.random_range(0..n_total) as u32)
        .collect();
    truth[0] = rng.random_range(0..n_seen) as u32;
    truth[1] = rng.random_range(n_seen..n_total) as u32;
    let partition = ClassPartition::new(
        (0..n_seen as u32).collect(),
        (n_seen as u32..n_total as u32).collect(),
    )
    .unwrap();
    Instance {
        scores: ScoreMatrix::new(scores, partition).unwrap(),
        truth,
    }
}

fn grid_area(instance: &Instance, grid_points: usize) -> f64 {
    let m = &instance.scores;
    let flat: Vec<f64> = m.scores().iter().copied().collect();
    let truth_cols: Vec<usize> = instance
        .truth
        .iter()
        .map(|&t| m.partition().joint_index(t).unwrap())
        .collect();
    gzsl_oracles::grid_sweep_ausuc(
        &flat,
        m.n_samples(),
        m.partition().n_total(),
        m.partition().n_seen(),
        &truth_cols,
        grid_points,
    )
}

#[test]
fn toy_matrix_matches_the_grid_oracle_exactly() {
    // 3 rows, 2 seen + 1 unseen class, hand-chosen lattice scores.
    let scores = ndarray::array![[1.0, 0.5, 0.25], [0.125, 0.75, 0.5], [-0.25, 0.0, 0.625]];
    let partition = ClassPartition::new(vec![0, 1], vec![2]).unwrap();
    let instance = Instance {
        scores: ScoreMatrix::new(scores, partition).unwrap(),
        truth: vec![0, 1, 2],
    };
    let curve = exact_gamma_sweep(&instance.scores, &instance.truth).unwrap();
    let oracle = grid_area(&instance, 1_000_000);
    assert!(
        (curve.ausuc - oracle).abs() < 1e-12,
        "exact {} vs grid {}",
        curve.ausuc,
        oracle
    );
}

#[test]
fn random_lattice_matrices_match_the_grid_oracle() {
    for seed in 0..10 {
        let instance = lattice_instance(700 + seed, 120, 12);
        let curve = exact_gamma_sweep(&instance.scores, &instance.truth).unwrap();
        let oracle = grid_area(&instance, 1_000_000);
        assert!(
            (curve.ausuc - oracle).abs() < 1e-9,
            "seed {seed}: exact {} vs grid {}",
            curve.ausuc,
            oracle
        );
    }
}

#[test]
fn medium_matrix_fixed_seed_matches_within_1e9() {
    // 200 samples over 3 seen + 2 unseen classes.
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    let n = 200;
    let mut scores = Array2::zeros((n, 5));
    for v in scores.iter_mut() {
        *v = rng.random_range(-32..=32) as f64 / 8.0;
    }
    let truth: Vec<u32> = (0..n).map(|i| (i % 5) as u32).collect();
    let partition = ClassPartition::new(vec![0, 1, 2], vec![3, 4]).unwrap();
    let instance = Instance {
        scores: ScoreMatrix::new(scores, partition).unwrap(),
        truth,
    };
    let curve = exact_gamma_sweep(&instance.scores, &instance.truth).unwrap();
    let oracle = grid_area(&instance, 1_000_000);
    assert!(
        (curve.ausuc - oracle).abs() < 1e-9,
        "exact {} vs grid {}",
        curve.ausuc,
        oracle
    );
}

#[test]
fn breakpoint_count_matches_distinct_flip_values() {
    let instance = lattice_instance(42, 80, 10);
    let m = &instance.scores;
    let n_seen = m.partition().n_seen();
    let mut deltas: Vec<f64> = m
        .scores()
        .outer_iter()
        .map(|row| {
            let smax = row
                .iter()
                .take(n_seen)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            let umax = row
                .iter()
                .skip(n_seen)
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            smax - umax
        })
        .collect();
    deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    deltas.dedup();
    let curve = exact_gamma_sweep(m, &instance.truth).unwrap();
    assert_eq!(curve.breakpoints, deltas.len());
    // Points: one per breakpoint plus the two extremes.
    assert_eq!(curve.points.len(), deltas.len() + 2);
}
