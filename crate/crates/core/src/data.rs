//! Shared data model: labeled feature sets, seen/unseen class partitions,
//! semantic embedding tables, and joint score matrices.
//!
//! All types are immutable after construction and validate their invariants
//! up front, so downstream code can index without re-checking.

use std::collections::{BTreeMap, HashMap, HashSet};

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Class identifier. Dense non-negative integers assigned by the partition.
pub type ClassId = u32;

/// A set of feature vectors with one class label per row.
#[derive(Debug, Clone)]
pub struct LabeledFeatureSet {
    features: Array2<f64>,
    labels: Vec<ClassId>,
}

impl LabeledFeatureSet {
    /// Builds a feature set, rejecting empty shapes, non-finite entries, and
    /// label/row count mismatches.
    pub fn new(features: Array2<f64>, labels: Vec<ClassId>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::DegenerateFeatures(format!(
                "feature matrix must be non-empty, got {n}x{d}"
            )));
        }
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some((idx, _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::DegenerateFeatures(format!(
                "non-finite feature at row {}, column {}",
                idx.0, idx.1
            )));
        }
        Ok(Self { features, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Sample indices grouped by class, classes in ascending id order.
    pub fn class_indices(&self) -> BTreeMap<ClassId, Vec<usize>> {
        let mut map: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for (i, &label) in self.labels.iter().enumerate() {
            map.entry(label).or_default().push(i);
        }
        map
    }

    /// New set containing the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let mut feats = Array2::zeros((indices.len(), self.dim()));
        let mut labels = Vec::with_capacity(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            if i >= self.n_samples() {
                return Err(Error::InvalidArgument(format!(
                    "sample index {i} out of range for {} samples",
                    self.n_samples()
                )));
            }
            feats.row_mut(out).assign(&self.features.row(i));
            labels.push(self.labels[i]);
        }
        Self::new(feats, labels)
    }
}

/// Disjoint seen (S) and unseen (U) class sets. The joint label space T keeps
/// all seen ids before all unseen ids, in the given order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct ClassPartition {
    seen: Vec<ClassId>,
    unseen: Vec<ClassId>,
    joint_index: HashMap<ClassId, usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    seen: Vec<ClassId>,
    unseen: Vec<ClassId>,
}

impl TryFrom<PartitionRepr> for ClassPartition {
    type Error = Error;
    fn try_from(repr: PartitionRepr) -> Result<Self> {
        ClassPartition::new(repr.seen, repr.unseen)
    }
}

impl From<ClassPartition> for PartitionRepr {
    fn from(p: ClassPartition) -> Self {
        PartitionRepr {
            seen: p.seen,
            unseen: p.unseen,
        }
    }
}

impl ClassPartition {
    pub fn new(seen: Vec<ClassId>, unseen: Vec<ClassId>) -> Result<Self> {
        if seen.is_empty() {
            return Err(Error::EmptySeenSet);
        }
        let mut joint_index = HashMap::with_capacity(seen.len() + unseen.len());
        for (pos, &c) in seen.iter().chain(unseen.iter()).enumerate() {
            if joint_index.insert(c, pos).is_some() {
                return Err(Error::PartitionOverlap(c));
            }
        }
        Ok(Self {
            seen,
            unseen,
            joint_index,
        })
    }

    pub fn seen(&self) -> &[ClassId] {
        &self.seen
    }

    pub fn unseen(&self) -> &[ClassId] {
        &self.unseen
    }

    pub fn n_seen(&self) -> usize {
        self.seen.len()
    }

    pub fn n_unseen(&self) -> usize {
        self.unseen.len()
    }

    pub fn n_total(&self) -> usize {
        self.seen.len() + self.unseen.len()
    }

    /// Joint label space: seen ids followed by unseen ids.
    pub fn joint(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.seen.iter().chain(self.unseen.iter()).copied()
    }

    /// Column position of a class in the joint order, if it belongs to T.
    pub fn joint_index(&self, class: ClassId) -> Option<usize> {
        self.joint_index.get(&class).copied()
    }

    pub fn contains(&self, class: ClassId) -> bool {
        self.joint_index.contains_key(&class)
    }

    pub fn is_seen(&self, class: ClassId) -> bool {
        self.joint_index
            .get(&class)
            .is_some_and(|&pos| pos < self.seen.len())
    }
}

/// Confirms every label in `data` belongs to the joint label space.
pub fn validate_partition(partition: &ClassPartition, data: &LabeledFeatureSet) -> Result<()> {
    for &label in data.labels() {
        if !partition.contains(label) {
            return Err(Error::UnknownLabel(label));
        }
    }
    Ok(())
}

/// What a semantic embedding table encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticKind {
    BinaryAttribute,
    ContinuousAttribute,
    WordVector,
    GAttr,
}

impl SemanticKind {
    /// Binary attribute tables are exempt from l2 normalization.
    pub fn normalizes(self) -> bool {
        !matches!(self, SemanticKind::BinaryAttribute)
    }
}

/// One embedding vector per class.
#[derive(Debug, Clone)]
pub struct SemanticTable {
    class_ids: Vec<ClassId>,
    embeddings: Array2<f64>,
    kind: SemanticKind,
    row_index: HashMap<ClassId, usize>,
}

impl SemanticTable {
    pub fn new(
        class_ids: Vec<ClassId>,
        embeddings: Array2<f64>,
        kind: SemanticKind,
    ) -> Result<Self> {
        if embeddings.nrows() != class_ids.len() {
            return Err(Error::LengthMismatch {
                expected: class_ids.len(),
                got: embeddings.nrows(),
            });
        }
        if embeddings.ncols() == 0 {
            return Err(Error::DimensionMismatch(
                "semantic embeddings must have at least one dimension".into(),
            ));
        }
        if let Some((idx, _)) = embeddings.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite embedding entry for class {} at dimension {}",
                class_ids[idx.0], idx.1
            )));
        }
        let mut row_index = HashMap::with_capacity(class_ids.len());
        for (row, &c) in class_ids.iter().enumerate() {
            if row_index.insert(c, row).is_some() {
                return Err(Error::PartitionOverlap(c));
            }
        }
        Ok(Self {
            class_ids,
            embeddings,
            kind,
            row_index,
        })
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn embeddings(&self) -> ArrayView2<'_, f64> {
        self.embeddings.view()
    }

    pub fn kind(&self) -> SemanticKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.embeddings.ncols()
    }

    pub fn row_for(&self, class: ClassId) -> Option<ArrayView1<'_, f64>> {
        self.row_index.get(&class).map(|&r| self.embeddings.row(r))
    }

    /// New table with rows for exactly `classes`, in that order.
    pub fn restrict(&self, classes: &[ClassId]) -> Result<Self> {
        let mut rows = Array2::zeros((classes.len(), self.dim()));
        for (out, &c) in classes.iter().enumerate() {
            let row = self.row_for(c).ok_or(Error::ClassWithoutSamples(c))?;
            rows.row_mut(out).assign(&row);
        }
        Self::new(classes.to_vec(), rows, self.kind)
    }
}

/// Divides every non-binary row by its l2 norm. Binary attribute tables pass
/// through unchanged; a zero row in a normalizable table is an error.
pub fn normalize_embeddings(table: &SemanticTable) -> Result<SemanticTable> {
    if !table.kind().normalizes() {
        return Ok(table.clone());
    }
    let mut normalized = table.embeddings.clone();
    for (row, mut v) in normalized.outer_iter_mut().enumerate() {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVectorEmbedding(table.class_ids[row]));
        }
        v.mapv_inplace(|x| x / norm);
    }
    SemanticTable::new(table.class_ids.clone(), normalized, table.kind)
}

/// Per-sample, per-class discriminant scores over the joint label space.
/// Columns follow the partition's joint order (seen columns first).
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    scores: Array2<f64>,
    partition: ClassPartition,
}

impl ScoreMatrix {
    pub fn new(scores: Array2<f64>, partition: ClassPartition) -> Result<Self> {
        if partition.n_unseen() == 0 {
            return Err(Error::EmptyUnseenSet);
        }
        if scores.ncols() != partition.n_total() {
            return Err(Error::DimensionMismatch(format!(
                "score matrix has {} columns, joint label space has {} classes",
                scores.ncols(),
                partition.n_total()
            )));
        }
        if scores.nrows() == 0 {
            return Err(Error::DegenerateFeatures("score matrix has no rows".into()));
        }
        if let Some((idx, _)) = scores.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite score at row {}, column {}",
                idx.0, idx.1
            )));
        }
        Ok(Self { scores, partition })
    }

    pub fn n_samples(&self) -> usize {
        self.scores.nrows()
    }

    pub fn partition(&self) -> &ClassPartition {
        &self.partition
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.scores.row(i)
    }

    /// Class id of joint column `pos`.
    pub fn class_at(&self, pos: usize) -> ClassId {
        if pos < self.partition.n_seen() {
            self.partition.seen()[pos]
        } else {
            self.partition.unseen()[pos - self.partition.n_seen()]
        }
    }
}

/// Stratified split of seen-class sample indices: per class, ceil(fraction *
/// n_c) indices go to the held-out side, the rest stay. Classes outside
/// `classes` are untouched (they end up in neither list).
pub(crate) fn stratified_holdout_indices(
    labels: &[ClassId],
    classes: &[ClassId],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "hold-out fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    let wanted: HashSet<ClassId> = classes.iter().copied().collect();
    for (i, &label) in labels.iter().enumerate() {
        if wanted.contains(&label) {
            by_class.entry(label).or_default().push(i);
        }
    }
    for &c in classes {
        if !by_class.contains_key(&c) {
            return Err(Error::ClassWithoutSamples(c));
        }
    }

    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut held_out = Vec::new();
    // BTreeMap iteration keeps the class order (and thus the RNG stream)
    // independent of input label order.
    for (&class, indices) in &by_class {
        let n = indices.len();
        let n_test = (fraction * n as f64).ceil() as usize;
        if n_test >= n {
            return Err(Error::ClassTooSmall {
                class,
                available: n,
                action: "hold out a test share and keep a training sample",
            });
        }
        let chosen = rand::seq::index::sample(&mut rng, n, n_test);
        let mut mask = vec![false; n];
        for pos in chosen.iter() {
            mask[pos] = true;
        }
        for (pos, &sample) in indices.iter().enumerate() {
            if mask[pos] {
                held_out.push(sample);
            } else {
                kept.push(sample);
            }
        }
    }
    kept.sort_unstable();
    held_out.sort_unstable();
    Ok((kept, held_out))
}

/// Splits seen-class data into train/test: per seen class, ceil(fraction *
/// n_c) samples are held out for test; every unseen-class sample goes to
/// test. Deterministic for a fixed seed.
pub fn split_seen_holdout(
    data: &LabeledFeatureSet,
    partition: &ClassPartition,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledFeatureSet, LabeledFeatureSet)> {
    validate_partition(partition, data)?;
    let (train_idx, mut test_idx) =
        stratified_holdout_indices(data.labels(), partition.seen(), fraction, seed)?;
    for (i, &label) in data.labels().iter().enumerate() {
        if !partition.is_seen(label) {
            test_idx.push(i);
        }
    }
    test_idx.sort_unstable();
    Ok((data.subset(&train_idx)?, data.subset(&test_idx)?))
}
