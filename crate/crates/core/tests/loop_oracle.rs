//! LoOP scorer against the from-scratch brute-force implementation.

use gzsl_core::novelty::{fit_loop_novelty, loop_novelty};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn rows_of(matrix: &Array2<f64>) -> Vec<Vec<f64>> {
    matrix.outer_iter().map(|r| r.to_vec()).collect()
}

#[test]
fn matches_brute_force_on_small_instances() {
    for seed in 0..20 {
        let mut rng = ChaCha12Rng::seed_from_u64(3000 + seed);
        let n_ref = rng.random_range(10..=50);
        let dim = rng.random_range(2..=4);
        let k = rng.random_range(1..=8usize);
        let lambda = [1.0, 2.0, 3.0][rng.random_range(0..3usize)];
        let reference = Array2::from_shape_fn((n_ref, dim), |_| rng.random::<f64>() * 4.0 - 2.0);
        let queries = Array2::from_shape_fn((25, dim), |_| rng.random::<f64>() * 8.0 - 4.0);

        let model = fit_loop_novelty(reference.clone(), k, lambda).unwrap();
        let ours = loop_novelty(&model, queries.view()).unwrap();
        let oracle = gzsl_oracles::loop_scores(&rows_of(&reference), &rows_of(&queries), k, lambda);
        for (i, (a, b)) in ours.iter().zip(oracle.iter()).enumerate() {
            assert!(
                (a - b).abs() < 1e-9,
                "seed {seed}, query {i}: {a} vs oracle {b}"
            );
        }
    }
}

#[test]
fn grid_example_with_far_outlier_matches_oracle() {
    // 5 reference points on a unit grid, k = 2, lambda = 3, one far query.
    let reference = ndarray::array![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0], [2.0, 0.0]];
    let queries = ndarray::array![[10.0, 10.0], [0.5, 0.5]];
    let model = fit_loop_novelty(reference.clone(), 2, 3.0).unwrap();
    let ours = loop_novelty(&model, queries.view()).unwrap();
    let oracle = gzsl_oracles::loop_scores(&rows_of(&reference), &rows_of(&queries), 2, 3.0);
    for (a, b) in ours.iter().zip(oracle.iter()) {
        assert!((a - b).abs() < 1e-9, "{a} vs oracle {b}");
    }
    assert!(ours[0] > 0.99, "far outlier should saturate: {}", ours[0]);
}
