//! Hyperparameter selection by class-wise cross-validation.
//!
//! Folds partition the *classes* of the seen training data, so each round
//! can treat one fold's classes as pseudo-unseen and simulate the
//! generalized zero-shot setting: train on the pseudo-train samples of the
//! retained folds, validate on their pseudo-test samples plus the held-out
//! fold's pseudo-train samples, and score the candidate by the AUSUC of the
//! calibration sweep on that validation set. The alternative strategy picks
//! seen-side hyperparameters by standard sample-wise cross-validation of
//! A_{S->S} and unseen-side hyperparameters by class-wise A_{U->U}.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::data::{stratified_holdout_indices, ClassId, ClassPartition, LabeledFeatureSet};
use crate::error::{Error, Result};
use crate::metrics::exact_gamma_sweep;
use crate::scorers::JointScorer;

/// One fold: a class subset of S plus the per-class 80/20 pseudo split of
/// its samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldSpec {
    pub classes: Vec<ClassId>,
    pub pseudo_train: Vec<usize>,
    pub pseudo_test: Vec<usize>,
}

/// Class-disjoint fold plan over the seen training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClasswiseFoldPlan {
    pub folds: Vec<FoldSpec>,
    pub seed: u64,
}

impl ClasswiseFoldPlan {
    pub fn n_folds(&self) -> usize {
        self.folds.len()
    }

    pub fn fold_classes(&self) -> Vec<Vec<ClassId>> {
        self.folds.iter().map(|f| f.classes.clone()).collect()
    }
}

/// Distributes seen classes round-robin over `n_folds` folds after a seeded
/// shuffle, then splits every class 80/20 into pseudo-train/pseudo-test.
pub fn make_fold_plan(
    train: &LabeledFeatureSet,
    seen: &[ClassId],
    n_folds: usize,
    seed: u64,
) -> Result<ClasswiseFoldPlan> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(
            "class-wise cross-validation needs at least 2 folds".into(),
        ));
    }
    if seen.len() < n_folds {
        return Err(Error::TooFewClasses {
            needed: n_folds,
            got: seen.len(),
        });
    }
    let by_class = train.class_indices();
    for &c in seen {
        let count = by_class.get(&c).map_or(0, Vec::len);
        if count < 2 {
            return Err(Error::ClassTooSmall {
                class: c,
                available: count,
                action: "split into pseudo-train and pseudo-test",
            });
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut shuffled = seen.to_vec();
    shuffled.shuffle(&mut rng);

    let mut folds = Vec::with_capacity(n_folds);
    for fold in 0..n_folds {
        let classes: Vec<ClassId> = shuffled
            .iter()
            .skip(fold)
            .step_by(n_folds)
            .copied()
            .collect();
        let split_seed = rng.random::<u64>();
        let (pseudo_train, pseudo_test) =
            stratified_holdout_indices(train.labels(), &classes, 0.2, split_seed)?;
        folds.push(FoldSpec {
            classes,
            pseudo_train,
            pseudo_test,
        });
    }
    Ok(ClasswiseFoldPlan { folds, seed })
}

/// Index sets and pseudo label space of one cross-validation round.
#[derive(Debug, Clone)]
pub struct RoundAssembly {
    pub pseudo_partition: ClassPartition,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Builds one round: the held-out fold's classes become pseudo-unseen; the
/// retained folds train on their pseudo-train samples and the validation set
/// is their pseudo-test union the held-out fold's pseudo-train.
pub fn round_assembly(plan: &ClasswiseFoldPlan, held_out: usize) -> Result<RoundAssembly> {
    if held_out >= plan.folds.len() {
        return Err(Error::InvalidArgument(format!(
            "held-out fold {held_out} out of range for {} folds",
            plan.folds.len()
        )));
    }
    let mut pseudo_seen = Vec::new();
    let mut train_indices = Vec::new();
    let mut validation_indices = Vec::new();
    for (f, fold) in plan.folds.iter().enumerate() {
        if f == held_out {
            validation_indices.extend_from_slice(&fold.pseudo_train);
        } else {
            pseudo_seen.extend_from_slice(&fold.classes);
            train_indices.extend_from_slice(&fold.pseudo_train);
            validation_indices.extend_from_slice(&fold.pseudo_test);
        }
    }
    train_indices.sort_unstable();
    validation_indices.sort_unstable();
    Ok(RoundAssembly {
        pseudo_partition: ClassPartition::new(pseudo_seen, plan.folds[held_out].classes.clone())?,
        train_indices,
        validation_indices,
    })
}

/// Builds a joint scorer for a given training subset and (pseudo) partition.
/// The factory owns the candidate's hyperparameters.
pub trait ScorerFactory {
    fn fit(
        &self,
        train: &LabeledFeatureSet,
        partition: &ClassPartition,
    ) -> Result<Box<dyn JointScorer>>;
}

impl<F> ScorerFactory for F
where
    F: Fn(&LabeledFeatureSet, &ClassPartition) -> Result<Box<dyn JointScorer>>,
{
    fn fit(
        &self,
        train: &LabeledFeatureSet,
        partition: &ClassPartition,
    ) -> Result<Box<dyn JointScorer>> {
        self(train, partition)
    }
}

/// A labeled hyperparameter setting.
pub struct Candidate<'a> {
    pub label: String,
    pub factory: &'a dyn ScorerFactory,
}

/// Runs one round for one candidate and returns the AUSUC of the calibration
/// sweep on the round's validation set.
pub fn cv_round(
    data: &LabeledFeatureSet,
    plan: &ClasswiseFoldPlan,
    held_out: usize,
    factory: &dyn ScorerFactory,
) -> Result<f64> {
    let round = round_assembly(plan, held_out)?;
    let pseudo_train = data.subset(&round.train_indices)?;
    let scorer = factory.fit(&pseudo_train, &round.pseudo_partition)?;
    let validation = data.subset(&round.validation_indices)?;
    let scores = scorer.score_matrix(validation.features())?;
    if scores.partition() != &round.pseudo_partition {
        return Err(Error::DimensionMismatch(
            "scorer factory produced a matrix over a different partition".into(),
        ));
    }
    let curve = exact_gamma_sweep(&scores, validation.labels())?;
    Ok(curve.ausuc)
}

/// Per-candidate cross-validation outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateScore {
    pub label: String,
    pub rounds: Vec<f64>,
    pub mean: f64,
}

/// Full cross-validation report for one selection strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvReport {
    pub seed: u64,
    pub metric: String,
    pub fold_classes: Vec<Vec<ClassId>>,
    pub candidates: Vec<CandidateScore>,
    /// Index into `candidates`; ties resolve to the earliest grid entry.
    pub selected: usize,
}

fn select_best(candidates: &[CandidateScore]) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.mean > candidates[best].mean {
            best = i;
        }
    }
    best
}

/// AUSUC-maximizing selection: the candidate with the best mean AUSUC over
/// all rounds wins.
pub fn select_by_ausuc(
    data: &LabeledFeatureSet,
    plan: &ClasswiseFoldPlan,
    candidates: &[Candidate<'_>],
) -> Result<CvReport> {
    if candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut results = Vec::with_capacity(candidates.len());
    for candidate in candidates {
        let mut rounds = Vec::with_capacity(plan.n_folds());
        for held_out in 0..plan.n_folds() {
            rounds.push(cv_round(data, plan, held_out, candidate.factory)?);
        }
        let mean = rounds.iter().sum::<f64>() / rounds.len() as f64;
        results.push(CandidateScore {
            label: candidate.label.clone(),
            rounds,
            mean,
        });
    }
    Ok(CvReport {
        seed: plan.seed,
        metric: "ausuc".into(),
        fold_classes: plan.fold_classes(),
        selected: select_best(&results),
        candidates: results,
    })
}

/// Stratified sample-wise folds over the seen classes, for the standard
/// cross-validation of A_{S->S}.
fn sample_folds(
    train: &LabeledFeatureSet,
    seen: &[ClassId],
    n_folds: usize,
    seed: u64,
) -> Vec<Vec<usize>> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let by_class = train.class_indices();
    let mut folds = vec![Vec::new(); n_folds];
    for &c in seen {
        let Some(indices) = by_class.get(&c) else {
            continue;
        };
        let mut shuffled = indices.clone();
        shuffled.shuffle(&mut rng);
        for (j, &sample) in shuffled.iter().enumerate() {
            folds[j % n_folds].push(sample);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    folds
}

fn per_class_accuracy_over_present(
    predictions: &[ClassId],
    truth: &[ClassId],
    class_set: &[ClassId],
) -> f64 {
    let mut sum = 0.0;
    let mut present = 0;
    for &c in class_set {
        let mut size = 0u64;
        let mut correct = 0u64;
        for (&p, &t) in predictions.iter().zip(truth) {
            if t == c {
                size += 1;
                correct += u64::from(p == t);
            }
        }
        if size > 0 {
            sum += correct as f64 / size as f64;
            present += 1;
        }
    }
    sum / present as f64
}

/// Both halves of the accuracy-based selection strategy.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AccuracySelection {
    /// Standard cross-validation maximizing A_{S->S}.
    pub seen: CvReport,
    /// Class-wise cross-validation maximizing A_{U->U}.
    pub unseen: CvReport,
}

/// The comparison strategy: two independent selections, one tuned for the
/// seen classes and one for the unseen ones, reusing the same fold plan.
pub fn select_by_accuracies(
    data: &LabeledFeatureSet,
    partition: &ClassPartition,
    plan: &ClasswiseFoldPlan,
    seen_candidates: &[Candidate<'_>],
    unseen_candidates: &[Candidate<'_>],
) -> Result<AccuracySelection> {
    if seen_candidates.is_empty() || unseen_candidates.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let n_folds = plan.n_folds();

    // Seen side: sample-wise folds; the real partition only supplies the
    // unseen classes a joint scorer needs to be constructible.
    let folds = sample_folds(data, partition.seen(), n_folds, plan.seed ^ 0x5eed_f01d);
    let mut seen_results = Vec::with_capacity(seen_candidates.len());
    for candidate in seen_candidates {
        let mut rounds = Vec::with_capacity(n_folds);
        for eval_fold in 0..n_folds {
            let train_indices: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != eval_fold)
                .flat_map(|(_, fold)| fold.iter().copied())
                .collect();
            let fit_set = data.subset(&train_indices)?;
            let scorer = candidate.factory.fit(&fit_set, partition)?;
            let eval_set = data.subset(&folds[eval_fold])?;
            let scores = scorer.score_matrix(eval_set.features())?;
            let n_seen = scores.partition().n_seen();
            let predictions: Vec<ClassId> = scores
                .scores()
                .outer_iter()
                .map(|row| {
                    let mut best = 0;
                    for j in 1..n_seen {
                        if row[j] > row[best] {
                            best = j;
                        }
                    }
                    scores.class_at(best)
                })
                .collect();
            rounds.push(per_class_accuracy_over_present(
                &predictions,
                eval_set.labels(),
                scores.partition().seen(),
            ));
        }
        let mean = rounds.iter().sum::<f64>() / rounds.len() as f64;
        seen_results.push(CandidateScore {
            label: candidate.label.clone(),
            rounds,
            mean,
        });
    }

    // Unseen side: class-wise rounds scored by A_{U->U} on the held-out
    // fold's pseudo-train samples.
    let mut unseen_results = Vec::with_capacity(unseen_candidates.len());
    for candidate in unseen_candidates {
        let mut rounds = Vec::with_capacity(n_folds);
        for held_out in 0..n_folds {
            let round = round_assembly(plan, held_out)?;
            let pseudo_train = data.subset(&round.train_indices)?;
            let scorer = candidate
                .factory
                .fit(&pseudo_train, &round.pseudo_partition)?;
            let eval_set = data.subset(&plan.folds[held_out].pseudo_train)?;
            let scores = scorer.score_matrix(eval_set.features())?;
            let n_seen = scores.partition().n_seen();
            let n_total = scores.partition().n_total();
            let predictions: Vec<ClassId> = scores
                .scores()
                .outer_iter()
                .map(|row| {
                    let mut best = n_seen;
                    for j in (n_seen + 1)..n_total {
                        if row[j] > row[best] {
                            best = j;
                        }
                    }
                    scores.class_at(best)
                })
                .collect();
            rounds.push(per_class_accuracy_over_present(
                &predictions,
                eval_set.labels(),
                scores.partition().unseen(),
            ));
        }
        let mean = rounds.iter().sum::<f64>() / rounds.len() as f64;
        unseen_results.push(CandidateScore {
            label: candidate.label.clone(),
            rounds,
            mean,
        });
    }

    Ok(AccuracySelection {
        seen: CvReport {
            seed: plan.seed,
            metric: "acc-seen-seen".into(),
            fold_classes: plan.fold_classes(),
            selected: select_best(&seen_results),
            candidates: seen_results,
        },
        unseen: CvReport {
            seed: plan.seed,
            metric: "acc-unseen-unseen".into(),
            fold_classes: plan.fold_classes(),
            selected: select_best(&unseen_results),
            candidates: unseen_results,
        },
    })
}
