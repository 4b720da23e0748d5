//! The wrapper criterion: stratified 10-fold cross-validated classification
//! error `J(X)` for a feature subset `X`, plus the budget-counted fitness
//! cache every search strategy queries through.
//!
//! One [`FoldPlan`] is fixed per experiment and shared by all algorithms and
//! all function evaluations, so every search sees the same deterministic
//! criterion landscape. Cache hits return bit-identical reports and still
//! count toward the evaluation budget: the budget counts criterion queries,
//! not distinct subsets.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::classify::{fit, predict, ClassifierConfig};
use crate::features::Dataset;
use crate::rng::{purpose, stream};
use crate::types::{ClassId, CLASS_COUNT};

/// Cross-validation folds per evaluation.
pub const FOLD_COUNT: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("class {class} has {rows} rows; stratified folding needs at least {FOLD_COUNT}")]
    ClassTooSmall { class: ClassId, rows: usize },
    #[error("subset mask must contain only '0' and '1' characters")]
    BadMask,
}

/// A binary feature-selection mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    bits: Vec<bool>,
}

impl FeatureSubset {
    pub fn empty(n: usize) -> Self {
        Self {
            bits: vec![false; n],
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            bits: vec![true; n],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_indices(n: usize, selected: &[usize]) -> Self {
        let mut bits = vec![false; n];
        for &i in selected {
            bits[i] = true;
        }
        Self { bits }
    }

    /// Mask length `n`.
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Number of selected features.
    pub fn cardinality(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_selected(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.bits[i] = on;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Indices of selected features, ascending.
    pub fn indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }
}

impl fmt::Display for FeatureSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FeatureSubset {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Err(EvalError::BadMask);
        }
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(EvalError::BadMask),
            })
            .collect::<Result<Vec<bool>, _>>()
            .map(Self::from_bits)
    }
}

/// Stratified fold assignment for one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    /// Fold index in `0..FOLD_COUNT` per dataset row.
    pub assignment: Vec<usize>,
    pub seed: u64,
}

/// The criterion value and its diagnostics for one subset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    /// Mean per-fold error rate.
    pub j: f64,
    /// Accuracy complement `1 - j`.
    pub theta: f64,
    pub fold_errors: Vec<f64>,
    /// `confusion[true class index][predicted class index]`.
    pub confusion: Vec<Vec<usize>>,
    pub cardinality: usize,
}

/// Assigns each row to one of ten folds: per-class seeded shuffle, then
/// round-robin with a class-rotated starting fold so remainder rows spread
/// across folds instead of piling onto fold 0.
pub fn make_folds(data: &Dataset, seed: u64) -> Result<FoldPlan, EvalError> {
    let counts = data.class_counts();
    for class in ClassId::all() {
        let rows = counts[class.index()];
        if rows > 0 && rows < FOLD_COUNT {
            return Err(EvalError::ClassTooSmall { class, rows });
        }
    }
    let mut assignment = vec![0usize; data.len()];
    for class in ClassId::all() {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.rows[i].label == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut rng = stream(seed, &[purpose::FOLDS, u64::from(class.number())]);
        members.shuffle(&mut rng);
        for (k, &row) in members.iter().enumerate() {
            assignment[row] = (k + class.index()) % FOLD_COUNT;
        }
    }
    Ok(FoldPlan { assignment, seed })
}

/// Scores a subset: for each fold, fit on the other nine and count
/// misclassifications on the held-out rows; `j` is the unweighted mean of
/// the ten per-fold error rates. The empty subset scores the worst possible
/// error without fitting anything.
pub fn evaluate(
    data: &Dataset,
    subset: &FeatureSubset,
    config: &ClassifierConfig,
    plan: &FoldPlan,
) -> EvaluationReport {
    assert_eq!(subset.len(), data.feature_count(), "mask width mismatch");
    assert_eq!(plan.assignment.len(), data.len(), "plan covers the dataset");
    let cardinality = subset.cardinality();
    if cardinality == 0 {
        return EvaluationReport {
            j: 1.0,
            theta: 0.0,
            fold_errors: vec![1.0; FOLD_COUNT],
            confusion: vec![vec![0; CLASS_COUNT]; CLASS_COUNT],
            cardinality: 0,
        };
    }
    let mut fold_errors = Vec::with_capacity(FOLD_COUNT);
    let mut confusion = vec![vec![0usize; CLASS_COUNT]; CLASS_COUNT];
    for fold in 0..FOLD_COUNT {
        let train: Vec<&crate::features::FeatureVector> = data
            .rows
            .iter()
            .zip(&plan.assignment)
            .filter(|(_, &a)| a != fold)
            .map(|(r, _)| r)
            .collect();
        let model = fit(&train, subset, config);
        let mut wrong = 0usize;
        let mut total = 0usize;
        for (r, _) in data
            .rows
            .iter()
            .zip(&plan.assignment)
            .filter(|(_, &a)| a == fold)
        {
            let predicted = predict(&model, r);
            confusion[r.label.index()][predicted.index()] += 1;
            if predicted != r.label {
                wrong += 1;
            }
            total += 1;
        }
        assert!(total > 0, "stratification guarantees nonempty folds");
        fold_errors.push(wrong as f64 / total as f64);
    }
    let j = fold_errors.iter().sum::<f64>() / FOLD_COUNT as f64;
    EvaluationReport {
        j,
        theta: 1.0 - j,
        fold_errors,
        confusion,
        cardinality,
    }
}

/// Shared evaluation context for one search run: dataset, fold plan,
/// classifier, an exact-mask memo, and the query counter. Queries are safe
/// from multiple threads; hits and misses both count one evaluation.
pub struct FitnessEnv<'a> {
    data: &'a Dataset,
    plan: &'a FoldPlan,
    config: ClassifierConfig,
    cache: Mutex<HashMap<FeatureSubset, EvaluationReport>>,
    evaluations: AtomicU64,
}

impl<'a> FitnessEnv<'a> {
    pub fn new(data: &'a Dataset, plan: &'a FoldPlan, config: ClassifierConfig) -> Self {
        Self {
            data,
            plan,
            config,
            cache: Mutex::new(HashMap::new()),
            evaluations: AtomicU64::new(0),
        }
    }

    /// Number of feature columns a mask must cover.
    pub fn feature_count(&self) -> usize {
        self.data.feature_count()
    }

    /// Criterion queries issued so far (cache hits included).
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::SeqCst)
    }

    /// Scores a subset, serving repeats from the memo. Every call counts
    /// toward the budget.
    pub fn query(&self, subset: &FeatureSubset) -> EvaluationReport {
        self.evaluations.fetch_add(1, Ordering::SeqCst);
        if let Some(hit) = self.cache.lock().unwrap().get(subset) {
            return hit.clone();
        }
        let report = evaluate(self.data, subset, &self.config, self.plan);
        self.cache
            .lock()
            .unwrap()
            .entry(subset.clone())
            .or_insert_with(|| report.clone());
        report
    }

    /// Scores a subset outside the budget (reference values such as the
    /// full-set error); bypasses the memo.
    pub fn evaluate_uncounted(&self, subset: &FeatureSubset) -> EvaluationReport {
        evaluate(self.data, subset, &self.config, self.plan)
    }

    /// Whether a budgeted query has already scored this exact mask.
    pub fn was_queried(&self, subset: &FeatureSubset) -> bool {
        self.cache.lock().unwrap().contains_key(subset)
    }
}

/// Per-run bookkeeping over a [`FitnessEnv`]: enforces the evaluation
/// budget exactly and records the best-so-far trace per query.
pub struct RunTracker<'e, 'a> {
    env: &'e FitnessEnv<'a>,
    budget: u64,
    used: u64,
    best: Option<(FeatureSubset, EvaluationReport)>,
    /// Best-so-far criterion value after each query.
    pub j_trace: Vec<f64>,
    /// Cardinality of the best-so-far subset after each query.
    pub xi_trace: Vec<usize>,
}

impl<'e, 'a> RunTracker<'e, 'a> {
    pub fn new(env: &'e FitnessEnv<'a>, budget: u64) -> Self {
        Self {
            env,
            budget,
            used: 0,
            best: None,
            j_trace: Vec::with_capacity(budget as usize),
            xi_trace: Vec::with_capacity(budget as usize),
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.used
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    /// The best (lowest-error) subset seen so far; earliest on exact ties.
    pub fn best(&self) -> Option<&(FeatureSubset, EvaluationReport)> {
        self.best.as_ref()
    }

    pub fn query(&mut self, subset: &FeatureSubset) -> EvaluationReport {
        assert!(self.used < self.budget, "evaluation budget exceeded");
        self.used += 1;
        let report = self.env.query(subset);
        let improved = match &self.best {
            None => true,
            Some((_, incumbent)) => report.j < incumbent.j,
        };
        if improved {
            self.best = Some((subset.clone(), report.clone()));
        }
        let (_, best_report) = self.best.as_ref().unwrap();
        self.j_trace.push(best_report.j);
        self.xi_trace.push(best_report.cardinality);
        report
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{KnnConfig, Metric};
    use crate::features::FeatureVector;
    use crate::rng::stream;
    use crate::synth::SynthesisConfig;
    use crate::types::SnrDb;
    use rand::Rng;

    fn knn1() -> ClassifierConfig {
        ClassifierConfig::Knn(KnnConfig {
            k: 1,
            metric: Metric::Manhattan,
        })
    }

    /// A balanced toy dataset: `per_class` rows for each of `classes`
    /// classes, `width` noisy columns plus column 0 equal to the class
    /// number (a perfectly separating feature).
    fn toy_dataset(classes: u8, per_class: usize, width: usize, seed: u64) -> Dataset {
        let mut rng = stream(seed, &[0x70FF]);
        let mut rows = Vec::new();
        for class in 1..=classes {
            for _ in 0..per_class {
                let mut values: Vec<f64> =
                    (0..width).map(|_| rng.random::<f64>()).collect();
                values[0] = f64::from(class);
                rows.push(FeatureVector {
                    values,
                    label: ClassId::new(class).unwrap(),
                });
            }
        }
        Dataset::new(rows, SnrDb::CLEAN, SynthesisConfig::default())
    }

    #[test]
    fn subset_round_trips_through_text() {
        let s: FeatureSubset = "0110010".parse().unwrap();
        assert_eq!(s.len(), 7);
        assert_eq!(s.cardinality(), 3);
        assert_eq!(s.indices(), vec![1, 2, 5]);
        assert_eq!(s.to_string(), "0110010");
        assert_eq!(s.to_string().parse::<FeatureSubset>().unwrap(), s);
        assert!("01x0".parse::<FeatureSubset>().is_err());
        assert!("".parse::<FeatureSubset>().is_err());
    }

    #[test]
    fn subset_constructors_agree() {
        let a = FeatureSubset::from_indices(5, &[0, 3]);
        let b = FeatureSubset::from_bits(vec![true, false, false, true, false]);
        assert_eq!(a, b);
        assert_eq!(FeatureSubset::full(4).cardinality(), 4);
        assert_eq!(FeatureSubset::empty(4).cardinality(), 0);
    }

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let data = toy_dataset(14, 20, 3, 1);
        let plan = make_folds(&data, 42).unwrap();
        assert_eq!(plan, make_folds(&data, 42).unwrap());
        assert_ne!(
            plan.assignment,
            make_folds(&data, 43).unwrap().assignment
        );
        // 20 rows per class over 10 folds: exactly 2 per class per fold.
        for fold in 0..FOLD_COUNT {
            for class in ClassId::all() {
                let count = data
                    .rows
                    .iter()
                    .zip(&plan.assignment)
                    .filter(|(r, &a)| a == fold && r.label == class)
                    .count();
                assert_eq!(count, 2, "fold {fold}, {class}");
            }
        }
    }

    #[test]
    fn uneven_classes_stay_within_one_of_proportional() {
        // 23 rows per class: fold counts must be 2 or 3, and the
        // fold-by-class contingency table must stay near independence.
        let data = toy_dataset(14, 23, 3, 2);
        let plan = make_folds(&data, 7).unwrap();
        let mut table = [[0usize; CLASS_COUNT]; FOLD_COUNT];
        for (r, &a) in data.rows.iter().zip(&plan.assignment) {
            table[a][r.label.index()] += 1;
        }
        let mut chi_sq = 0.0;
        for fold_row in &table {
            for &count in fold_row {
                let expected = 23.0 / FOLD_COUNT as f64;
                assert!(count == 2 || count == 3, "count {count}");
                chi_sq += (count as f64 - expected).powi(2) / expected;
            }
        }
        // 117 degrees of freedom; near-uniform tables sit far below that.
        assert!(chi_sq < 60.0, "chi-square {chi_sq}");
        // Class rotation spreads remainder rows: every fold stays close to
        // the proportional size.
        let ideal = data.len() as f64 / FOLD_COUNT as f64;
        for fold in 0..FOLD_COUNT {
            let size = plan.assignment.iter().filter(|&&a| a == fold).count();
            assert!(
                (size as f64 - ideal).abs() <= 2.0,
                "fold {fold} holds {size} rows vs ideal {ideal}"
            );
        }
    }

    #[test]
    fn tiny_classes_are_rejected() {
        let data = toy_dataset(3, 9, 2, 3);
        assert_eq!(
            make_folds(&data, 0),
            Err(EvalError::ClassTooSmall {
                class: ClassId::new(1).unwrap(),
                rows: 9
            })
        );
    }

    #[test]
    fn separable_dataset_scores_zero_error() {
        let data = toy_dataset(5, 12, 4, 4);
        let plan = make_folds(&data, 9).unwrap();
        let subset = FeatureSubset::from_indices(4, &[0]);
        let report = evaluate(&data, &subset, &knn1(), &plan);
        assert_eq!(report.j, 0.0);
        assert_eq!(report.theta, 1.0);
        assert_eq!(report.cardinality, 1);
        assert!(report.fold_errors.iter().all(|&e| e == 0.0));
        // Confusion concentrates on the diagonal.
        let off_diagonal: usize = (0..CLASS_COUNT)
            .flat_map(|t| (0..CLASS_COUNT).map(move |p| (t, p)))
            .filter(|(t, p)| t != p)
            .map(|(t, p)| report.confusion[t][p])
            .sum();
        assert_eq!(off_diagonal, 0);
        let diagonal: usize = (0..CLASS_COUNT).map(|c| report.confusion[c][c]).sum();
        assert_eq!(diagonal, data.len());
    }

    #[test]
    fn noise_only_subsets_score_worse_than_the_separator() {
        let data = toy_dataset(5, 12, 4, 5);
        let plan = make_folds(&data, 9).unwrap();
        let informative = evaluate(
            &data,
            &FeatureSubset::from_indices(4, &[0]),
            &knn1(),
            &plan,
        );
        let noise = evaluate(
            &data,
            &FeatureSubset::from_indices(4, &[1, 2, 3]),
            &knn1(),
            &plan,
        );
        assert!(noise.j > informative.j);
        assert!(noise.j > 0.5, "pure noise should misclassify most rows");
    }

    #[test]
    fn empty_subset_scores_the_sentinel_without_fitting() {
        let data = toy_dataset(3, 10, 2, 6);
        let plan = make_folds(&data, 1).unwrap();
        let report = evaluate(&data, &FeatureSubset::empty(2), &knn1(), &plan);
        assert_eq!(report.j, 1.0);
        assert_eq!(report.theta, 0.0);
        assert_eq!(report.cardinality, 0);
        assert_eq!(report.fold_errors, vec![1.0; FOLD_COUNT]);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let data = toy_dataset(4, 15, 5, 7);
        let plan = make_folds(&data, 3).unwrap();
        let subset = FeatureSubset::from_indices(5, &[0, 2, 4]);
        let a = evaluate(&data, &subset, &knn1(), &plan);
        let b = evaluate(&data, &subset, &knn1(), &plan);
        assert_eq!(a, b);
        assert!((a.j - a.fold_errors.iter().sum::<f64>() / 10.0).abs() < 1e-15);
    }

    #[test]
    fn cache_serves_identical_reports_and_counts_hits() {
        let data = toy_dataset(3, 10, 3, 8);
        let plan = make_folds(&data, 5).unwrap();
        let env = FitnessEnv::new(&data, &plan, knn1());
        let a = FeatureSubset::from_indices(3, &[0, 1]);
        let b = FeatureSubset::from_indices(3, &[2]);
        let first = env.query(&a);
        let second = env.query(&a);
        assert_eq!(first, second);
        assert_eq!(env.evaluations(), 2, "hits count toward the budget");
        env.query(&b);
        assert_eq!(env.evaluations(), 3);
        assert_eq!(first, env.evaluate_uncounted(&a));
        assert_eq!(env.evaluations(), 3, "reference scoring is free");
    }

    #[test]
    fn concurrent_queries_stay_consistent() {
        let data = toy_dataset(3, 12, 4, 9);
        let plan = make_folds(&data, 6).unwrap();
        let env = FitnessEnv::new(&data, &plan, knn1());
        let masks: Vec<FeatureSubset> = (1u32..16)
            .map(|m| {
                FeatureSubset::from_bits((0..4).map(|b| m >> b & 1 == 1).collect())
            })
            .collect();
        std::thread::scope(|scope| {
            for t in 0..4 {
                let env = &env;
                let masks = &masks;
                scope.spawn(move || {
                    for (i, mask) in masks.iter().enumerate() {
                        let report = env.query(mask);
                        assert!((0.0..=1.0).contains(&report.j), "thread {t} mask {i}");
                    }
                });
            }
        });
        assert_eq!(env.evaluations(), 4 * 15);
        for mask in &masks {
            assert_eq!(env.query(mask), env.evaluate_uncounted(mask));
        }
    }

    #[test]
    fn tracker_enforces_the_budget_and_traces_the_best() {
        let data = toy_dataset(3, 10, 4, 10);
        let plan = make_folds(&data, 2).unwrap();
        let env = FitnessEnv::new(&data, &plan, knn1());
        let mut tracker = RunTracker::new(&env, 5);
        let masks = [
            FeatureSubset::from_indices(4, &[1]),
            FeatureSubset::from_indices(4, &[1, 2]),
            FeatureSubset::from_indices(4, &[0]),
            FeatureSubset::from_indices(4, &[2]),
            FeatureSubset::from_indices(4, &[0]),
        ];
        for mask in &masks {
            tracker.query(mask);
        }
        assert!(tracker.exhausted());
        assert_eq!(tracker.used(), 5);
        assert_eq!(tracker.remaining(), 0);
        assert_eq!(tracker.j_trace.len(), 5);
        assert_eq!(tracker.xi_trace.len(), 5);
        // Best-so-far is monotone nonincreasing and lands on the separator.
        for w in tracker.j_trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
        let (best_mask, best_report) = tracker.best().unwrap();
        assert_eq!(best_mask.indices(), vec![0]);
        assert_eq!(best_report.j, 0.0);
        assert_eq!(*tracker.j_trace.last().unwrap(), 0.0);
    }

    #[test]
    #[should_panic(expected = "budget exceeded")]
    fn tracker_rejects_queries_past_the_budget() {
        let data = toy_dataset(3, 10, 2, 11);
        let plan = make_folds(&data, 2).unwrap();
        let env = FitnessEnv::new(&data, &plan, knn1());
        let mut tracker = RunTracker::new(&env, 1);
        let mask = FeatureSubset::full(2);
        tracker.query(&mask);
        tracker.query(&mask);
    }
}
