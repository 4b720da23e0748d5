//! Cross-run performance aggregation: improvement over the full feature set,
//! dimensionality reduction, the cardinality-weighted overall score, and the
//! noise-robustness accuracy differences.

use serde::{Deserialize, Serialize};

use crate::classify::ClassifierConfig;
use crate::evalcore::{evaluate, FeatureSubset, FoldPlan, RunTracker};
use crate::features::Dataset;
use crate::types::SnrDb;

/// The complete outcome of one search run, as persisted to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub algorithm: String,
    pub seed: u64,
    /// Best subset found, as a 0/1 string of length n.
    pub best_mask: String,
    pub best_j: f64,
    pub best_cardinality: usize,
    /// Best-so-far criterion value after each function evaluation.
    pub j_trace: Vec<f64>,
    /// Cardinality of the best-so-far subset after each evaluation.
    pub xi_trace: Vec<usize>,
    /// Function evaluations consumed (cache hits included).
    pub evaluations: u64,
    /// The search configuration that produced this run.
    pub config_echo: serde_json::Value,
}

impl RunRecord {
    /// Packages a drained tracker into a record.
    pub fn from_tracker(
        algorithm: &str,
        seed: u64,
        tracker: &RunTracker<'_, '_>,
        config_echo: serde_json::Value,
    ) -> Self {
        let (mask, report) = tracker.best().expect("at least one evaluation ran");
        Self {
            algorithm: algorithm.to_string(),
            seed,
            best_mask: mask.to_string(),
            best_j: report.j,
            best_cardinality: report.cardinality,
            j_trace: tracker.j_trace.clone(),
            xi_trace: tracker.xi_trace.clone(),
            evaluations: tracker.used(),
            config_echo,
        }
    }

    /// The best mask as a subset value.
    pub fn subset(&self) -> FeatureSubset {
        self.best_mask.parse().expect("stored masks are well-formed")
    }

    /// Checks the internal consistency of a deserialized record.
    pub fn validate(&self) -> Result<(), String> {
        let mask: FeatureSubset = self
            .best_mask
            .parse()
            .map_err(|e| format!("bad mask: {e}"))?;
        if mask.cardinality() != self.best_cardinality {
            return Err(format!(
                "cardinality {} does not match mask weight {}",
                self.best_cardinality,
                mask.cardinality()
            ));
        }
        if !(0.0..=1.0).contains(&self.best_j) {
            return Err(format!("best_j {} outside [0,1]", self.best_j));
        }
        if self.j_trace.len() as u64 != self.evaluations
            || self.xi_trace.len() as u64 != self.evaluations
        {
            return Err("trace lengths must equal the evaluation count".into());
        }
        // Searches that report a cardinality-constrained best may have
        // seen a lower unconstrained error along the way, so the final
        // trace value may sit below best_j but never above it.
        if self.j_trace.last().is_some_and(|&last| last > self.best_j) {
            return Err("final trace value may not exceed best_j".into());
        }
        Ok(())
    }
}

/// Aggregated statistics over one algorithm's runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_count: usize,
    pub mean_j: f64,
    pub sd_j: f64,
    pub xi_avg: f64,
    pub sd_xi: f64,
    /// Relative improvement of `mean_j` over the full-set error, percent;
    /// absent when the full-set error is zero.
    pub pi_percent: Option<f64>,
    /// Dimensionality reduction `(n - xi_avg) / n`, percent.
    pub xi_percent: f64,
    /// Cardinality-weighted error summed over runs.
    pub score: f64,
}

/// One noise level of the robustness table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessEntry {
    pub algorithm: String,
    pub snr_db: SnrDb,
    /// Accuracy of the algorithm's best subset on this dataset.
    pub theta_x: f64,
    /// Accuracy of the full feature set on this dataset.
    pub theta_u: f64,
    /// `theta_x - theta_u`.
    pub theta_diff: f64,
}

fn mean(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let count = values.clone().count() as f64;
    values.sum::<f64>() / count
}

fn sample_sd(values: impl Iterator<Item = f64> + Clone, mean: f64) -> f64 {
    let count = values.clone().count();
    if count < 2 {
        return 0.0;
    }
    let ss: f64 = values.map(|v| (v - mean) * (v - mean)).sum();
    (ss / (count - 1) as f64).sqrt()
}

/// Aggregates one algorithm's runs against the full-set reference error
/// `j_u` over `n` features.
pub fn aggregate(runs: &[RunRecord], j_u: f64, n: usize) -> MetricsReport {
    assert!(!runs.is_empty(), "nothing to aggregate");
    let js = runs.iter().map(|r| r.best_j);
    let xis = runs.iter().map(|r| r.best_cardinality as f64);
    let mean_j = mean(js.clone());
    let xi_avg = mean(xis.clone());
    let pi_percent = if j_u != 0.0 {
        Some((j_u - mean_j) / j_u * 100.0)
    } else {
        None
    };
    let score = runs
        .iter()
        .map(|r| r.best_cardinality as f64 / n as f64 * r.best_j)
        .sum();
    MetricsReport {
        run_count: runs.len(),
        mean_j,
        sd_j: sample_sd(js, mean_j),
        xi_avg,
        sd_xi: sample_sd(xis, xi_avg),
        pi_percent,
        xi_percent: (n as f64 - xi_avg) / n as f64 * 100.0,
        score,
    }
}

/// Scores each algorithm's champion subset on every noise level, alongside
/// the full feature set. Champions should be the minimum-error run per
/// algorithm. These evaluations are reference measurements and consume no
/// search budget.
pub fn robustness_eval(
    masks: &[(String, FeatureSubset)],
    datasets: &[(SnrDb, Dataset, FoldPlan)],
    config: &ClassifierConfig,
) -> Vec<RobustnessEntry> {
    let mut entries = Vec::with_capacity(masks.len() * datasets.len());
    for (snr_db, data, plan) in datasets {
        let full = FeatureSubset::full(data.feature_count());
        let theta_u = evaluate(data, &full, config, plan).theta;
        for (algorithm, mask) in masks {
            let theta_x = evaluate(data, mask, config, plan).theta;
            entries.push(RobustnessEntry {
                algorithm: algorithm.clone(),
                snr_db: *snr_db,
                theta_x,
                theta_u,
                theta_diff: theta_x - theta_u,
            });
        }
    }
    entries
}
