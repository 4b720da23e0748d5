//! The two induction algorithms scored by the subset-selection criterion:
//! k-nearest-neighbors and kernel-density Naive Bayes.
//!
//! Both operate on min-max-normalized feature columns, with normalization
//! parameters fitted on training rows only; query rows are normalized with
//! those parameters and clipped to `[0, 1]`. All tie-breaking is explicit and
//! order-independent, so retraining on a permuted fold can never change a
//! prediction.

use crate::evalcore::FeatureSubset;
use crate::features::FeatureVector;
use crate::types::{ClassId, CLASS_COUNT};

/// Distance used by the k-NN classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Manhattan,
    Euclidean,
}

/// k-nearest-neighbors settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 3,
            metric: Metric::Manhattan,
        }
    }
}

/// Kernel-density Naive Bayes settings. The width is in normalized feature
/// units (the training column range maps to `[0, 1]`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbConfig {
    pub kernel_width: f64,
}

impl Default for NbConfig {
    fn default() -> Self {
        Self {
            kernel_width: 0.004,
        }
    }
}

/// Which classifier to train, with its settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassifierConfig {
    Knn(KnnConfig),
    Nb(NbConfig),
}

/// Per-column min-max parameters fitted on a training fold.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mins: Vec<f64>,
    /// `max - min` per column; 0 marks a constant column, which normalizes
    /// to 0 everywhere.
    pub ranges: Vec<f64>,
}

impl Normalization {
    fn fit(train: &[&FeatureVector], columns: &[usize]) -> Self {
        let mut mins = vec![f64::INFINITY; columns.len()];
        let mut maxs = vec![f64::NEG_INFINITY; columns.len()];
        for row in train {
            for (slot, &col) in columns.iter().enumerate() {
                let v = row.values[col];
                mins[slot] = mins[slot].min(v);
                maxs[slot] = maxs[slot].max(v);
            }
        }
        let ranges = mins
            .iter()
            .zip(&maxs)
            .map(|(lo, hi)| if hi > lo { hi - lo } else { 0.0 })
            .collect();
        Self { mins, ranges }
    }

    fn scale(&self, slot: usize, v: f64) -> f64 {
        if self.ranges[slot] > 0.0 {
            (v - self.mins[slot]) / self.ranges[slot]
        } else {
            0.0
        }
    }

    /// Normalizes a training row (lands in `[0, 1]` by construction).
    fn apply_train(&self, row: &FeatureVector, columns: &[usize], out: &mut Vec<f64>) {
        for (slot, &col) in columns.iter().enumerate() {
            out.push(self.scale(slot, row.values[col]));
        }
    }

    /// Normalizes a query row, clipping to the training range.
    fn apply_query(&self, values: &[f64], columns: &[usize]) -> Vec<f64> {
        columns
            .iter()
            .enumerate()
            .map(|(slot, &col)| self.scale(slot, values[col]).clamp(0.0, 1.0))
            .collect()
    }
}

/// Per-class kernel samples for Naive Bayes.
#[derive(Debug, Clone, PartialEq)]
pub struct NbClass {
    pub label: ClassId,
    pub ln_prior: f64,
    /// Normalized samples, row-major `count x width`.
    pub samples: Vec<f64>,
}

/// A trained classifier, immutable after [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Knn {
        config: KnnConfig,
        columns: Vec<usize>,
        norm: Normalization,
        /// Normalized training points, row-major `rows x columns.len()`.
        points: Vec<f64>,
        labels: Vec<ClassId>,
    },
    Nb {
        config: NbConfig,
        columns: Vec<usize>,
        norm: Normalization,
        /// Ascending class index; only classes present in training.
        classes: Vec<NbClass>,
    },
}

impl FittedModel {
    pub fn normalization(&self) -> &Normalization {
        match self {
            FittedModel::Knn { norm, .. } | FittedModel::Nb { norm, .. } => norm,
        }
    }
}

/// Trains a classifier on the given rows, restricted to the selected
/// feature columns. Empty subsets are never fitted — the evaluator scores
/// them with the worst error directly.
pub fn fit(
    train: &[&FeatureVector],
    subset: &FeatureSubset,
    config: &ClassifierConfig,
) -> FittedModel {
    assert!(!train.is_empty(), "cannot fit on an empty training fold");
    let columns = subset.indices();
    assert!(
        !columns.is_empty(),
        "empty subsets are scored by the evaluator, not fitted"
    );
    let norm = Normalization::fit(train, &columns);
    match config {
        ClassifierConfig::Knn(knn) => {
            assert!(knn.k >= 1, "k must be at least 1");
            let mut points = Vec::with_capacity(train.len() * columns.len());
            let mut labels = Vec::with_capacity(train.len());
            for row in train {
                norm.apply_train(row, &columns, &mut points);
                labels.push(row.label);
            }
            FittedModel::Knn {
                config: *knn,
                columns,
                norm,
                points,
                labels,
            }
        }
        ClassifierConfig::Nb(nb) => {
            assert!(nb.kernel_width > 0.0, "kernel width must be positive");
            let total = train.len() as f64;
            let mut classes: Vec<NbClass> = Vec::new();
            // Group by ascending class index, preserving row order per class.
            for class in ClassId::all() {
                let members: Vec<&&FeatureVector> =
                    train.iter().filter(|r| r.label == class).collect();
                if members.is_empty() {
                    continue;
                }
                let mut samples = Vec::with_capacity(members.len() * columns.len());
                for row in &members {
                    norm.apply_train(row, &columns, &mut samples);
                }
                classes.push(NbClass {
                    label: class,
                    ln_prior: (members.len() as f64 / total).ln(),
                    samples,
                });
            }
            FittedModel::Nb {
                config: *nb,
                columns,
                norm,
                classes,
            }
        }
    }
}

/// Classifies one row. The row's own label field is ignored.
pub fn predict(model: &FittedModel, row: &FeatureVector) -> ClassId {
    match model {
        FittedModel::Knn {
            config,
            columns,
            norm,
            points,
            labels,
        } => predict_knn(config, columns, norm, points, labels, &row.values),
        FittedModel::Nb {
            config,
            columns,
            norm,
            classes,
        } => predict_nb(config, columns, norm, classes, &row.values),
    }
}

fn predict_knn(
    config: &KnnConfig,
    columns: &[usize],
    norm: &Normalization,
    points: &[f64],
    labels: &[ClassId],
    values: &[f64],
) -> ClassId {
    let q = norm.apply_query(values, columns);
    let width = columns.len();
    let k = config.k.min(labels.len());
    // The k nearest so far, sorted ascending by (distance, class index).
    // Keeping the order lexicographic makes the final scan resolve vote ties
    // by nearest neighbor and residual ties by smallest class index.
    let mut top: Vec<(f64, ClassId)> = Vec::with_capacity(k + 1);
    for (point, &label) in points.chunks_exact(width).zip(labels) {
        let threshold = if top.len() == k {
            top[k - 1].0
        } else {
            f64::INFINITY
        };
        let mut abandoned = false;
        let dist = match config.metric {
            Metric::Manhattan => {
                let mut acc = 0.0;
                for (a, b) in q.iter().zip(point) {
                    acc += (a - b).abs();
                    // Partial sums only grow, so once past the current k-th
                    // distance this point cannot displace anything.
                    if acc > threshold {
                        abandoned = true;
                        break;
                    }
                }
                acc
            }
            Metric::Euclidean => {
                let mut acc = 0.0;
                for (a, b) in q.iter().zip(point) {
                    acc += (a - b) * (a - b);
                    // Compare in distance units: rounding in sqrt can land
                    // two different squared sums on the same distance, and
                    // ties must survive to the class-index comparison.
                    if acc.sqrt() > threshold {
                        abandoned = true;
                        break;
                    }
                }
                acc.sqrt()
            }
        };
        if abandoned || (top.len() == k && dist > top[k - 1].0) {
            continue;
        }
        let key = (dist, label.index());
        let pos = top
            .iter()
            .position(|(d, c)| key < (*d, c.index()))
            .unwrap_or(top.len());
        top.insert(pos, (dist, label));
        top.truncate(k);
    }
    let mut votes = [0usize; CLASS_COUNT];
    for (_, label) in &top {
        votes[label.index()] += 1;
    }
    let best = votes.iter().max().copied().unwrap_or(0);
    for (_, label) in &top {
        if votes[label.index()] == best {
            return *label;
        }
    }
    unreachable!("k >= 1 guarantees at least one neighbor");
}

fn predict_nb(
    config: &NbConfig,
    columns: &[usize],
    norm: &Normalization,
    classes: &[NbClass],
    values: &[f64],
) -> ClassId {
    let q = norm.apply_query(values, columns);
    let width = columns.len();
    let sigma = config.kernel_width;
    let two_sigma_sq = 2.0 * sigma * sigma;
    let kernel_scale = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let mut best: Option<(f64, ClassId)> = None;
    for class in classes {
        let count = class.samples.len() / width;
        let mut log_posterior = class.ln_prior;
        for (slot, &x) in q.iter().enumerate() {
            let mut kernel_sum = 0.0;
            for j in 0..count {
                let d = x - class.samples[j * width + slot];
                kernel_sum += (-d * d / two_sigma_sq).exp();
            }
            let density = kernel_sum / count as f64 * kernel_scale;
            log_posterior += density.max(1e-300).ln();
        }
        // Strict comparison keeps the smallest class index on exact ties.
        if best.is_none_or(|(b, _)| log_posterior > b) {
            best = Some((log_posterior, class.label));
        }
    }
    best.expect("training data contains at least one class").1
}
