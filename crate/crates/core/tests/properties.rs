//! Property tests for the decision rules and the sweep.

use gzsl_core::combine::{
    calibrated_stack, calibration_boundary_rows, direct_stack, novelty_two_stage, CalibrationRule,
    NoveltyRule, TieBreak,
};
use gzsl_core::data::{split_seen_holdout, ClassPartition, LabeledFeatureSet, ScoreMatrix};
use gzsl_core::metrics::exact_gamma_sweep;
use gzsl_core::novelty::implicit_novelty;
use ndarray::Array2;
use proptest::prelude::*;

#[derive(Debug, Clone)]
struct Case {
    scores: Vec<f64>,
    n_rows: usize,
    n_seen: usize,
    n_unseen: usize,
    truth: Vec<u32>,
}

impl Case {
    fn matrix(&self) -> ScoreMatrix {
        let n_total = self.n_seen + self.n_unseen;
        let scores = Array2::from_shape_vec((self.n_rows, n_total), self.scores.clone()).unwrap();
        let partition = ClassPartition::new(
            (0..self.n_seen as u32).collect(),
            (self.n_seen as u32..n_total as u32).collect(),
        )
        .unwrap();
        ScoreMatrix::new(scores, partition).unwrap()
    }
}

fn case_strategy() -> impl Strategy<Value = Case> {
    (2usize..5, 1usize..5, 4usize..40)
        .prop_flat_map(|(n_seen, n_unseen, n_rows)| {
            let n_total = n_seen + n_unseen;
            (
                Just(n_seen),
                Just(n_unseen),
                Just(n_rows),
                prop::collection::vec(-100.0f64..100.0, n_rows * n_total),
                prop::collection::vec(0usize..n_total, n_rows),
            )
        })
        .prop_map(|(n_seen, n_unseen, n_rows, scores, raw_truth)| {
            let n_total = n_seen + n_unseen;
            let mut truth: Vec<u32> = raw_truth.into_iter().map(|t| t as u32).collect();
            // Both sides must appear in the test set.
            truth[0] = 0;
            truth[1] = n_seen as u32;
            let _ = n_total;
            Case {
                scores,
                n_rows,
                n_seen,
                n_unseen,
                truth,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn curve_laws_hold_on_random_matrices(case in case_strategy()) {
        let m = case.matrix();
        let curve = exact_gamma_sweep(&m, &case.truth).unwrap();
        for pair in curve.points.windows(2) {
            prop_assert!(pair[1].acc_seen_joint <= pair[0].acc_seen_joint);
            prop_assert!(pair[1].acc_unseen_joint >= pair[0].acc_unseen_joint);
        }
        let first = curve.points.first().unwrap();
        let last = curve.points.last().unwrap();
        prop_assert_eq!(first.acc_unseen_joint, 0.0);
        prop_assert_eq!(last.acc_seen_joint, 0.0);
        prop_assert!((0.0..=1.0).contains(&curve.ausuc));
        for p in &curve.points {
            prop_assert!((0.0..=1.0).contains(&p.acc_seen_joint));
            prop_assert!((0.0..=1.0).contains(&p.acc_unseen_joint));
        }
    }

    #[test]
    fn predicted_unseen_set_grows_with_gamma(case in case_strategy()) {
        let m = case.matrix();
        let gammas = [-50.0, -5.0, -0.5, 0.0, 0.5, 5.0, 50.0];
        let mut previous: Option<Vec<bool>> = None;
        for gamma in gammas {
            let preds = calibrated_stack(&m, &CalibrationRule::new(gamma));
            let unseen_mask: Vec<bool> = preds
                .iter()
                .map(|&c| !m.partition().is_seen(c))
                .collect();
            if let Some(prev) = &previous {
                for (was, now) in prev.iter().zip(&unseen_mask) {
                    prop_assert!(!was || *now, "a row left the unseen side as gamma grew");
                }
            }
            previous = Some(unseen_mask);
        }
    }

    #[test]
    fn row_shifts_change_no_prediction(case in case_strategy(), shift in -40.0f64..40.0) {
        let m = case.matrix();
        let n_total = case.n_seen + case.n_unseen;
        let mut shifted = m.scores().to_owned();
        for (i, mut row) in shifted.outer_iter_mut().enumerate() {
            row += shift * ((i % 5) as f64 - 2.0);
        }
        let shifted = ScoreMatrix::new(shifted, m.partition().clone()).unwrap();
        let _ = n_total;

        prop_assert_eq!(direct_stack(&m), direct_stack(&shifted));
        let rule = CalibrationRule::new(1.25);
        prop_assert_eq!(calibrated_stack(&m, &rule), calibrated_stack(&shifted, &rule));
        let nov = implicit_novelty(&m);
        let nov_shifted = implicit_novelty(&shifted);
        let gate = NoveltyRule { threshold: -1.25 };
        prop_assert_eq!(
            novelty_two_stage(&m, &nov, &gate).unwrap(),
            novelty_two_stage(&shifted, &nov_shifted, &gate).unwrap()
        );
    }

    #[test]
    fn implicit_gate_equals_calibrated_stack_off_boundary(
        case in case_strategy(),
        gamma in -20.0f64..20.0,
    ) {
        let m = case.matrix();
        let calibrated = calibrated_stack(&m, &CalibrationRule::new(gamma));
        let nov = implicit_novelty(&m);
        let gated = novelty_two_stage(&m, &nov, &NoveltyRule { threshold: -gamma }).unwrap();
        let boundary = calibration_boundary_rows(&m, gamma);
        for i in 0..m.n_samples() {
            if boundary.contains(&i) {
                continue;
            }
            prop_assert_eq!(calibrated[i], gated[i], "row {} disagrees", i);
        }
    }

    #[test]
    fn within_side_argmax_is_gamma_invariant(case in case_strategy(), gamma in -30.0f64..30.0) {
        let m = case.matrix();
        let preds = calibrated_stack(&m, &CalibrationRule::new(gamma));
        let seen_only = calibrated_stack(&m, &CalibrationRule::new(-1e6));
        let unseen_only = calibrated_stack(&m, &CalibrationRule::new(1e6));
        for i in 0..m.n_samples() {
            if m.partition().is_seen(preds[i]) {
                prop_assert_eq!(preds[i], seen_only[i]);
            } else {
                prop_assert_eq!(preds[i], unseen_only[i]);
            }
        }
    }

    #[test]
    fn boundary_rows_follow_the_tie_break(case in case_strategy(), gamma in -8.0f64..8.0) {
        let m = case.matrix();
        let boundary = calibration_boundary_rows(&m, gamma);
        let prefer_unseen = calibrated_stack(
            &m,
            &CalibrationRule { gamma, tie_break: TieBreak::PreferUnseen },
        );
        let prefer_seen = calibrated_stack(
            &m,
            &CalibrationRule { gamma, tie_break: TieBreak::PreferSeen },
        );
        for &i in &boundary {
            prop_assert!(!m.partition().is_seen(prefer_unseen[i]));
            prop_assert!(m.partition().is_seen(prefer_seen[i]));
        }
    }

    #[test]
    fn holdout_partitions_the_input(
        seed in 0u64..500,
        // Below one half the ceiling always leaves a training sample.
        fraction in 0.05f64..0.5,
        per_class in 3usize..12,
    ) {
        let classes = 4usize;
        let n = classes * per_class;
        let feats = Array2::from_shape_fn((n, 2), |(i, j)| (i + j) as f64);
        let labels: Vec<u32> = (0..n).map(|i| (i / per_class) as u32).collect();
        let data = LabeledFeatureSet::new(feats, labels).unwrap();
        let partition = ClassPartition::new(vec![0, 1, 2], vec![3]).unwrap();
        let (train, test) = split_seen_holdout(&data, &partition, fraction, seed).unwrap();
        prop_assert_eq!(train.n_samples() + test.n_samples(), n);
        // Per seen class the test share is the ceiling of the fraction.
        for class in 0..3u32 {
            let in_test = test.labels().iter().filter(|&&l| l == class).count();
            let expected = (fraction * per_class as f64).ceil() as usize;
            prop_assert_eq!(in_test, expected);
        }
        // Every unseen sample lands in test.
        prop_assert_eq!(
            test.labels().iter().filter(|&&l| l == 3).count(),
            per_class
        );
    }
}
