//! Experiment orchestration: configuration files, the two-stage protocol,
//! artifact persistence, and table generation.
//!
//! Stage I compares the search algorithms on the noise-free dataset: every
//! algorithm runs `runs` independent seeded searches, the per-run results are
//! aggregated, and paired rank statistics compare the rosters. Stage II takes
//! each algorithm's champion subset from Stage I and re-scores it on noisy
//! re-renderings of the very same events across a sweep of SNR levels.
//!
//! Every artifact written to the output directory — feature matrices, run
//! records, reports — carries the SHA-256 hash of the configuration that
//! produced it, and every reader refuses artifacts whose hash disagrees.
//! Runs persist incrementally (one JSON file each), so an interrupted sweep
//! resumes where it stopped instead of recomputing finished runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{
    run_aco, run_bpso, run_ga, run_sffs, AcoConfig, BpsoConfig, BpsoVariant, GaConfig, SffsConfig,
};
use crate::classify::{ClassifierConfig, KnnConfig, Metric, NbConfig};
use crate::evalcore::{evaluate, make_folds, FeatureSubset, FitnessEnv, FoldPlan, FOLD_COUNT};
use crate::features::{featurize_dataset, Dataset};
use crate::metrics::{aggregate, robustness_eval, MetricsReport, RobustnessEntry, RunRecord};
use crate::npstats::{contrast_estimation, friedman, hommel_posthoc, FriedmanResult, PosthocTable};
use crate::synth::{build_dataset, SynthesisConfig, Waveform};
use crate::twodim::{run_2d_upso, UpsoConfig};
use crate::types::SnrDb;
use crate::wavelet::{required_levels, WaveletFilter};

// ---------------------------------------------------------------------------
// Algorithm roster
// ---------------------------------------------------------------------------

/// Canonical names of the population-based searches, in report order.
pub const META_ALGORITHMS: [&str; 6] = ["ga", "aco", "bpso", "cbpso", "chbpso", "2d-upso"];

/// Deterministic scan that the roster may include alongside the swarms.
pub const SFFS: &str = "sffs";

/// Control algorithm for the post-hoc comparisons.
pub const CONTROL_ALGORITHM: &str = "2d-upso";

/// Maps a user-supplied algorithm name (case-insensitive, with common
/// spelling variants) onto its canonical roster name.
pub fn canonical_algorithm(name: &str) -> Option<&'static str> {
    match name.to_ascii_lowercase().as_str() {
        "ga" => Some("ga"),
        "aco" => Some("aco"),
        "bpso" => Some("bpso"),
        "cbpso" | "catfish" | "catfish-bpso" => Some("cbpso"),
        "chbpso" | "chaotic" | "chaotic-bpso" => Some("chbpso"),
        "2d-upso" | "2dupso" | "2d_upso" | "upso" => Some("2d-upso"),
        "sffs" => Some(SFFS),
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// How the event corpus is synthesized. `events_per_class` and `seed` are
/// mandatory; the signal parameters default to the reference values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub events_per_class: usize,
    /// Seeds event parameters, noise, and the fold shuffle.
    pub seed: u64,
    #[serde(default = "defaults::fundamental_frequency")]
    pub fundamental_frequency: f64,
    #[serde(default = "defaults::sampling_frequency")]
    pub sampling_frequency: f64,
    #[serde(default = "defaults::duration_cycles")]
    pub duration_cycles: u32,
}

impl DatasetSection {
    /// The synthesis settings this section describes.
    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig {
            fundamental_frequency: self.fundamental_frequency,
            sampling_frequency: self.sampling_frequency,
            duration_cycles: self.duration_cycles,
            rng_seed: self.seed,
        }
    }
}

/// Which classifier scores candidate subsets. `kind` is `"knn"` or `"nb"`;
/// the hyperparameters of the other kind are simply ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: String,
    #[serde(default = "defaults::neighbors")]
    pub neighbors: usize,
    /// `"manhattan"` or `"euclidean"`.
    #[serde(default = "defaults::metric")]
    pub metric: String,
    #[serde(default = "defaults::kernel_width")]
    pub kernel_width: f64,
}

impl ClassifierSection {
    /// Resolves the section into classifier settings.
    pub fn to_classifier(&self) -> Result<ClassifierConfig> {
        match self.kind.as_str() {
            "knn" => {
                let metric = match self.metric.as_str() {
                    "manhattan" => Metric::Manhattan,
                    "euclidean" => Metric::Euclidean,
                    other => bail!("unknown distance metric {other:?}"),
                };
                Ok(ClassifierConfig::Knn(KnnConfig {
                    k: self.neighbors,
                    metric,
                }))
            }
            "nb" => Ok(ClassifierConfig::Nb(NbConfig {
                kernel_width: self.kernel_width,
            })),
            other => bail!("unknown classifier kind {other:?} (expected \"knn\" or \"nb\")"),
        }
    }
}

/// Sweep shape: which algorithms run, how many times, and at what budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Independent runs per algorithm; run `k` uses seed `seed_base + k`.
    #[serde(default = "defaults::runs")]
    pub runs: usize,
    /// Criterion evaluations each run may spend.
    #[serde(default = "defaults::budget")]
    pub budget: u64,
    pub seed_base: u64,
    /// Noise levels for the Stage II sweep; the noise-free level is always
    /// evaluated and need not be listed.
    #[serde(default = "defaults::snr_levels_db")]
    pub snr_levels_db: Vec<f64>,
    #[serde(default = "defaults::algorithms")]
    pub algorithms: Vec<String>,
}

/// Optional per-algorithm parameter overrides. Absent tables use the
/// reference defaults; `seed` and `budget` inside them are ignored because
/// the sweep assigns both per run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSection {
    pub upso: Option<UpsoConfig>,
    pub ga: Option<GaConfig>,
    pub aco: Option<AcoConfig>,
    pub bpso: Option<BpsoConfig>,
}

mod defaults {
    use crate::synth::SynthesisConfig;

    pub fn fundamental_frequency() -> f64 {
        SynthesisConfig::default().fundamental_frequency
    }
    pub fn sampling_frequency() -> f64 {
        SynthesisConfig::default().sampling_frequency
    }
    pub fn duration_cycles() -> u32 {
        SynthesisConfig::default().duration_cycles
    }
    pub fn neighbors() -> usize {
        crate::classify::KnnConfig::default().k
    }
    pub fn metric() -> String {
        "manhattan".into()
    }
    pub fn kernel_width() -> f64 {
        crate::classify::NbConfig::default().kernel_width
    }
    pub fn runs() -> usize {
        40
    }
    pub fn budget() -> u64 {
        6000
    }
    pub fn snr_levels_db() -> Vec<f64> {
        vec![50.0, 45.0, 40.0, 35.0, 30.0, 25.0, 20.0]
    }
    pub fn algorithms() -> Vec<String> {
        let mut names: Vec<String> = super::META_ALGORITHMS.iter().map(|a| a.to_string()).collect();
        names.push(super::SFFS.into());
        names
    }
}

/// The complete experiment definition, parsed from a TOML document with
/// `[dataset]`, `[classifier]`, `[experiment]`, and optional `[search.*]`
/// sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSection,
    pub classifier: ClassifierSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub search: SearchSection,
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).context("parsing experiment config")?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a TOML file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    /// Cross-field sanity checks beyond what parsing enforces. Runs before
    /// any artifact is produced so violations surface as diagnostics rather
    /// than panics deep inside a sweep.
    pub fn validate(&self) -> Result<()> {
        self.dataset
            .synthesis()
            .validate()
            .context("dataset section")?;
        if self.dataset.events_per_class < FOLD_COUNT {
            bail!(
                "events_per_class = {} but stratified {FOLD_COUNT}-fold splits need at least {FOLD_COUNT} per class",
                self.dataset.events_per_class
            );
        }
        self.classifier.to_classifier().context("classifier section")?;
        if self.classifier.neighbors < 1 {
            bail!("neighbors must be at least 1");
        }
        if !(self.classifier.kernel_width > 0.0) {
            bail!("kernel_width must be positive");
        }

        let exp = &self.experiment;
        if exp.runs < 1 {
            bail!("runs must be at least 1");
        }
        if exp.seed_base.checked_add(exp.runs as u64).is_none() {
            bail!("seed_base + runs overflows");
        }
        for &level in &exp.snr_levels_db {
            if !level.is_finite() || level <= 0.0 {
                bail!("SNR levels must be finite positive decibels, got {level}");
            }
        }
        if exp.algorithms.is_empty() {
            bail!("algorithm roster is empty");
        }
        let mut seen = Vec::new();
        for name in &exp.algorithms {
            let canonical = canonical_algorithm(name)
                .ok_or_else(|| anyhow!("unknown algorithm {name:?} in roster"))?;
            if seen.contains(&canonical) {
                bail!("algorithm {canonical:?} appears twice in the roster");
            }
            seen.push(canonical);
        }
        if seen.contains(&SFFS) && !seen.contains(&CONTROL_ALGORITHM) {
            bail!("sffs needs {CONTROL_ALGORITHM:?} in the roster: its target cardinality comes from that champion");
        }

        // Per-algorithm parameter ranges, checked on the effective (override
        // or default) values so runner preconditions cannot fire mid-sweep.
        for &algo in &seen {
            let population = match algo {
                "ga" => {
                    let c = self.ga_config(0);
                    if c.population < 2 {
                        bail!("ga population must be at least 2");
                    }
                    if !(0.0..=1.0).contains(&c.crossover_probability)
                        || !(0.0..=1.0).contains(&c.mutation_probability)
                    {
                        bail!("ga probabilities must lie in [0, 1]");
                    }
                    c.population as u64
                }
                "aco" => {
                    let c = self.aco_config(0);
                    if !(c.tau_min > 0.0 && c.tau_min < c.tau_max) {
                        bail!("aco pheromone bounds must satisfy 0 < tau_min < tau_max");
                    }
                    if !(0.0..=1.0).contains(&c.evaporation) {
                        bail!("aco evaporation must lie in [0, 1]");
                    }
                    if c.colony_size < 1 {
                        bail!("aco colony must have at least one ant");
                    }
                    c.colony_size as u64
                }
                "bpso" | "cbpso" | "chbpso" => {
                    let c = self.bpso_config(0);
                    if c.swarm_size < 1 {
                        bail!("bpso swarm must have at least one particle");
                    }
                    if !(c.velocity_min < c.velocity_max) {
                        bail!("bpso velocity bounds must satisfy min < max");
                    }
                    if c.catfish_count < 1 {
                        bail!("bpso catfish_count must be at least 1");
                    }
                    c.swarm_size as u64
                }
                "2d-upso" => {
                    let c = self.upso_config(0);
                    if c.swarm_size < 1 {
                        bail!("2d-upso swarm must have at least one particle");
                    }
                    if !(0.0..=1.0).contains(&c.unification) {
                        bail!("2d-upso unification factor must lie in [0, 1]");
                    }
                    c.swarm_size as u64
                }
                _ => 0, // sffs needs no budget
            };
            if exp.budget < population {
                bail!(
                    "budget {} cannot cover one sweep of {algo:?} (population {population})",
                    exp.budget
                );
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization, as lowercase hex. Stable
    /// across TOML formatting, comments, and re-serialization.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").unwrap();
            s
        })
    }

    /// Roster in file order, names canonicalized. Call after validation.
    pub fn canonical_roster(&self) -> Vec<&'static str> {
        self.experiment
            .algorithms
            .iter()
            .map(|a| canonical_algorithm(a).expect("roster was validated"))
            .collect()
    }

    /// Effective search parameters for one run.
    pub fn upso_config(&self, seed: u64) -> UpsoConfig {
        let mut c = self.search.upso.clone().unwrap_or_default();
        c.seed = seed;
        c.budget = self.experiment.budget;
        c
    }

    pub fn ga_config(&self, seed: u64) -> GaConfig {
        let mut c = self.search.ga.clone().unwrap_or_default();
        c.seed = seed;
        c
    }

    pub fn aco_config(&self, seed: u64) -> AcoConfig {
        let mut c = self.search.aco.clone().unwrap_or_default();
        c.seed = seed;
        c
    }

    pub fn bpso_config(&self, seed: u64) -> BpsoConfig {
        let mut c = self.search.bpso.clone().unwrap_or_default();
        c.seed = seed;
        c
    }
}

// ---------------------------------------------------------------------------
// Artifact persistence
// ---------------------------------------------------------------------------

/// Comment line prefix that stamps the producing configuration onto CSVs.
const HASH_PREFIX: &str = "# config_hash = ";

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes a feature matrix stamped with the producing config hash.
pub fn write_dataset(path: &Path, data: &Dataset, hash: &str) -> Result<()> {
    let text = format!("{HASH_PREFIX}{hash}\n{}", data.to_csv());
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Reads a feature matrix back, refusing files that carry no hash stamp or
/// one from a different configuration.
pub fn read_dataset(path: &Path, expected_hash: &str) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    match text.lines().find_map(|l| l.strip_prefix(HASH_PREFIX)) {
        None => bail!("{} carries no config hash stamp", path.display()),
        Some(found) if found.trim() != expected_hash => bail!(
            "{} was produced under config {}, current config is {}",
            path.display(),
            found.trim(),
            expected_hash
        ),
        Some(_) => {}
    }
    Dataset::from_csv(&text).with_context(|| format!("parsing {}", path.display()))
}

fn dataset_filename(snr: SnrDb) -> String {
    format!("dataset_{snr}.csv")
}

/// Loads the persisted feature matrix for one noise level, synthesizing,
/// featurizing, and persisting it first when absent.
pub fn ensure_dataset(
    config: &ExperimentConfig,
    out_dir: &Path,
    hash: &str,
    snr: SnrDb,
) -> Result<Dataset> {
    let path = out_dir.join(dataset_filename(snr));
    if path.exists() {
        return read_dataset(&path, hash);
    }
    let synthesis = config.dataset.synthesis();
    let waveforms = build_dataset(&synthesis, config.dataset.events_per_class, snr)?;
    let filter = WaveletFilter::sym6();
    let levels = required_levels(synthesis.fundamental_frequency, synthesis.sampling_frequency)?;
    let data = featurize_dataset(&waveforms, &filter, levels, &synthesis)?;
    write_dataset(&path, &data, hash)?;
    Ok(data)
}

/// One persisted search run: the record plus the hash of the configuration
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistedRun {
    pub config_hash: String,
    pub record: RunRecord,
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Worker threads for run sweeps, from the `PQFS_WORKERS` environment
/// variable (default 1).
pub fn worker_count() -> usize {
    std::env::var("PQFS_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w| w >= 1)
        .unwrap_or(1)
}

/// Executes independent jobs across up to `workers` threads, returning
/// results in job order. Each job is deterministic on its own, so the
/// schedule only decides who computes what, never the outcome.
fn run_jobs<J, T, F>(jobs: &[J], workers: usize, run: F) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync,
{
    let cursor = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<T>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let index = cursor.fetch_add(1, Ordering::Relaxed);
                if index >= jobs.len() {
                    break;
                }
                let result = run(&jobs[index]);
                *slots[index].lock().unwrap() = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.into_inner().unwrap().expect("every job ran"))
        .collect()
}

// ---------------------------------------------------------------------------
// Search dispatch
// ---------------------------------------------------------------------------

/// Runs one seeded search of a population algorithm against the environment.
/// The deterministic scan is dispatched separately because it needs a target
/// cardinality instead of a budget.
pub fn execute_search(
    env: &FitnessEnv<'_>,
    config: &ExperimentConfig,
    algorithm: &str,
    seed: u64,
) -> RunRecord {
    let budget = config.experiment.budget;
    match algorithm {
        "2d-upso" => run_2d_upso(env, &config.upso_config(seed)),
        "ga" => run_ga(env, &config.ga_config(seed), budget),
        "aco" => run_aco(env, &config.aco_config(seed), budget),
        "bpso" => run_bpso(env, &config.bpso_config(seed), BpsoVariant::Plain, budget),
        "cbpso" => run_bpso(env, &config.bpso_config(seed), BpsoVariant::Catfish, budget),
        "chbpso" => run_bpso(env, &config.bpso_config(seed), BpsoVariant::Chaotic, budget),
        other => unreachable!("roster validation admitted {other:?}"),
    }
}

/// The run with the lowest criterion value; ties break to the earliest run.
pub fn best_run(runs: &[RunRecord]) -> &RunRecord {
    runs.iter()
        .min_by(|a, b| a.best_j.partial_cmp(&b.best_j).expect("finite criterion"))
        .expect("at least one run")
}

// ---------------------------------------------------------------------------
// Stage I
// ---------------------------------------------------------------------------

/// One algorithm's complete Stage I result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmOutcome {
    pub algorithm: String,
    pub runs: Vec<RunRecord>,
    pub metrics: MetricsReport,
}

/// Everything Stage I produces: per-run records, per-algorithm aggregates,
/// and the paired rank statistics over the population algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    /// Echo of the producing configuration (covers every seed).
    pub config: ExperimentConfig,
    pub feature_count: usize,
    /// Cross-validated error of the full feature set on the pure dataset.
    pub full_set_j: f64,
    pub full_set_theta: f64,
    pub outcomes: Vec<AlgorithmOutcome>,
    /// Present when at least two population algorithms ran at least twice.
    pub friedman_j: Option<FriedmanResult>,
    pub posthoc_j: Option<PosthocTable>,
    pub friedman_xi: Option<FriedmanResult>,
    pub posthoc_xi: Option<PosthocTable>,
}

/// Rejection threshold for the post-hoc comparisons.
const POSTHOC_ALPHA: f64 = 0.05;

/// Runs the comparative stage: synthesize the pure dataset, run every
/// rostered algorithm `runs` times, aggregate, and rank. Finished runs found
/// in `out_dir/runs/` are reused after their hash and seed are verified.
pub fn stage1(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let hash = config.hash();
    let runs_dir = out_dir.join("runs");
    fs::create_dir_all(&runs_dir)
        .with_context(|| format!("creating {}", runs_dir.display()))?;
    fs::create_dir_all(out_dir.join("tables"))?;

    let data = ensure_dataset(config, out_dir, &hash, SnrDb::CLEAN)?;
    let plan = make_folds(&data, config.dataset.seed)?;
    let classifier = config.classifier.to_classifier()?;
    let n = data.feature_count();
    let full = evaluate(&data, &FeatureSubset::full(n), &classifier, &plan);

    let roster = config.canonical_roster();
    let meta: Vec<&'static str> = roster
        .iter()
        .copied()
        .filter(|&a| a != SFFS)
        .collect();

    struct Job {
        algorithm: &'static str,
        run_index: usize,
    }
    let jobs: Vec<Job> = meta
        .iter()
        .flat_map(|&algorithm| {
            (0..config.experiment.runs).map(move |run_index| Job {
                algorithm,
                run_index,
            })
        })
        .collect();

    let run_one = |job: &Job| -> Result<RunRecord> {
        let seed = config.experiment.seed_base + job.run_index as u64;
        let path = runs_dir.join(format!("{}_run{:02}.json", job.algorithm, job.run_index));
        load_or_search(&path, &hash, job.algorithm, seed, || {
            let env = FitnessEnv::new(&data, &plan, classifier);
            execute_search(&env, config, job.algorithm, seed)
        })
        .with_context(|| {
            format!(
                "algorithm {} run {} (seed {seed})",
                job.algorithm, job.run_index
            )
        })
    };
    let records = run_jobs(&jobs, worker_count(), run_one)?;

    // Group the flat job results back per algorithm, preserving roster order.
    let mut per_algorithm: Vec<(&'static str, Vec<RunRecord>)> =
        meta.iter().map(|&a| (a, Vec::new())).collect();
    for (job, record) in jobs.iter().zip(records) {
        let slot = per_algorithm
            .iter_mut()
            .find(|(a, _)| *a == job.algorithm)
            .expect("job algorithm is rostered");
        slot.1.push(record);
    }

    // The deterministic scan runs once, after the swarms: its target
    // cardinality is the size of the control champion's subset.
    if roster.contains(&SFFS) {
        let (_, upso_runs) = per_algorithm
            .iter()
            .find(|(a, _)| *a == CONTROL_ALGORITHM)
            .expect("validation requires the control alongside sffs");
        let target = best_run(upso_runs).best_cardinality;
        if target == 0 {
            bail!("control champion selected no features; cannot size the deterministic scan");
        }
        let seed = config.experiment.seed_base;
        let path = runs_dir.join(format!("{SFFS}_run00.json"));
        let record = load_or_search(&path, &hash, SFFS, seed, || {
            let env = FitnessEnv::new(&data, &plan, classifier);
            run_sffs(
                &env,
                &SffsConfig {
                    target_cardinality: target,
                    seed,
                },
            )
        })
        .context("deterministic scan")?;
        per_algorithm.push((SFFS, vec![record]));
    }

    let outcomes: Vec<AlgorithmOutcome> = per_algorithm
        .iter()
        .map(|(algorithm, runs)| AlgorithmOutcome {
            algorithm: algorithm.to_string(),
            runs: runs.clone(),
            metrics: aggregate(runs, full.j, n),
        })
        .collect();

    // Paired rank statistics over the population algorithms only: the scan
    // is a single deterministic run and has no run-to-run pairing.
    let mut friedman_j = None;
    let mut posthoc_j = None;
    let mut friedman_xi = None;
    let mut posthoc_xi = None;
    if meta.len() >= 2 && config.experiment.runs >= 2 {
        let meta_runs: Vec<&Vec<RunRecord>> = per_algorithm
            .iter()
            .filter(|(a, _)| *a != SFFS)
            .map(|(_, runs)| runs)
            .collect();
        let j_rows: Vec<Vec<f64>> = (0..config.experiment.runs)
            .map(|k| meta_runs.iter().map(|runs| runs[k].best_j).collect())
            .collect();
        let xi_rows: Vec<Vec<f64>> = (0..config.experiment.runs)
            .map(|k| {
                meta_runs
                    .iter()
                    .map(|runs| runs[k].best_cardinality as f64)
                    .collect()
            })
            .collect();
        let fr_j = friedman(&j_rows);
        let fr_xi = friedman(&xi_rows);
        if let Some(control) = meta.iter().position(|&a| a == CONTROL_ALGORITHM) {
            posthoc_j = Some(hommel_posthoc(
                &fr_j.average_ranks,
                config.experiment.runs,
                control,
                POSTHOC_ALPHA,
            ));
            posthoc_xi = Some(hommel_posthoc(
                &fr_xi.average_ranks,
                config.experiment.runs,
                control,
                POSTHOC_ALPHA,
            ));
        }
        friedman_j = Some(fr_j);
        friedman_xi = Some(fr_xi);
    }

    let report = ExperimentReport {
        config_hash: hash,
        config: config.clone(),
        feature_count: n,
        full_set_j: full.j,
        full_set_theta: full.theta,
        outcomes,
        friedman_j,
        posthoc_j,
        friedman_xi,
        posthoc_xi,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    write_stage1_tables(out_dir, &report)?;
    Ok(report)
}

/// Reuses a persisted run when its provenance matches; otherwise computes
/// and persists it.
fn load_or_search(
    path: &Path,
    hash: &str,
    algorithm: &str,
    seed: u64,
    search: impl FnOnce() -> RunRecord,
) -> Result<RunRecord> {
    if path.exists() {
        let persisted: PersistedRun = read_json(path)?;
        if persisted.config_hash != hash {
            bail!(
                "{} was produced under config {}, current config is {hash}",
                path.display(),
                persisted.config_hash
            );
        }
        if persisted.record.algorithm != algorithm || persisted.record.seed != seed {
            bail!(
                "{} records {} seed {}, expected {algorithm} seed {seed}",
                path.display(),
                persisted.record.algorithm,
                persisted.record.seed
            );
        }
        persisted
            .record
            .validate()
            .map_err(|e| anyhow!("{}: {e}", path.display()))?;
        return Ok(persisted.record);
    }
    let record = search();
    write_json(
        path,
        &PersistedRun {
            config_hash: hash.to_string(),
            record: record.clone(),
        },
    )?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// Stage II
// ---------------------------------------------------------------------------

/// One algorithm's champion subset carried from Stage I into the noise sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChampionMask {
    pub algorithm: String,
    pub mask: String,
    pub cardinality: usize,
    /// The champion's criterion value on the pure dataset.
    pub stage1_j: f64,
}

/// Stage II output: every champion re-scored on every noise level, plus the
/// pairwise contrast of their accuracies across the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub config_hash: String,
    /// Noise-free first, then the configured levels in order.
    pub snr_levels: Vec<SnrDb>,
    pub champions: Vec<ChampionMask>,
    pub entries: Vec<RobustnessEntry>,
    /// Pairwise mean-of-medians differences of champion accuracies (percent)
    /// across the sweep; present with at least two levels and two champions.
    pub contrast: Option<Vec<Vec<f64>>>,
}

/// Runs the robustness stage: pick each algorithm's champion from the Stage I
/// report, re-render the same events at every noise level, and re-score both
/// the champion and the full set on each.
pub fn stage2(config: &ExperimentConfig, out_dir: &Path) -> Result<RobustnessReport> {
    config.validate()?;
    let hash = config.hash();
    let report: ExperimentReport = read_json(&out_dir.join("report.json"))
        .context("stage 1 must complete before stage 2")?;
    if report.config_hash != hash {
        bail!(
            "stage 1 artifacts were produced under config {}, current config is {hash}",
            report.config_hash
        );
    }

    let champions: Vec<ChampionMask> = report
        .outcomes
        .iter()
        .map(|o| {
            let best = best_run(&o.runs);
            ChampionMask {
                algorithm: o.algorithm.clone(),
                mask: best.best_mask.clone(),
                cardinality: best.best_cardinality,
                stage1_j: best.best_j,
            }
        })
        .collect();

    let mut levels = vec![SnrDb::CLEAN];
    for &db in &config.experiment.snr_levels_db {
        let level = SnrDb::db(db);
        if !levels.iter().any(|l| l.key_bits() == level.key_bits()) {
            levels.push(level);
        }
    }

    let mut scored: Vec<(SnrDb, Dataset, FoldPlan)> = Vec::with_capacity(levels.len());
    for &snr in &levels {
        let data = ensure_dataset(config, out_dir, &hash, snr)?;
        let plan = make_folds(&data, config.dataset.seed)?;
        scored.push((snr, data, plan));
    }

    let masks: Vec<(String, FeatureSubset)> = champions
        .iter()
        .map(|c| {
            let subset: FeatureSubset = c
                .mask
                .parse()
                .map_err(|e| anyhow!("champion mask for {}: {e}", c.algorithm))?;
            Ok((c.algorithm.clone(), subset))
        })
        .collect::<Result<_>>()?;
    let classifier = config.classifier.to_classifier()?;
    let entries = robustness_eval(&masks, &scored, &classifier);

    // Contrast the champions' accuracies (percent) across the sweep.
    let contrast = if levels.len() >= 2 && champions.len() >= 2 {
        let sample: Vec<Vec<f64>> = levels
            .iter()
            .map(|&snr| {
                champions
                    .iter()
                    .map(|c| {
                        let entry = entries
                            .iter()
                            .find(|e| {
                                e.snr_db.key_bits() == snr.key_bits() && e.algorithm == c.algorithm
                            })
                            .expect("robustness covers every (level, champion) pair");
                        entry.theta_x * 100.0
                    })
                    .collect()
            })
            .collect();
        Some(contrast_estimation(&sample))
    } else {
        None
    };

    let robustness = RobustnessReport {
        config_hash: hash,
        snr_levels: levels,
        champions,
        entries,
        contrast,
    };
    write_json(&out_dir.join("robustness.json"), &robustness)?;
    write_stage2_tables(out_dir, &robustness)?;
    Ok(robustness)
}

// ---------------------------------------------------------------------------
// Single-run entry point (CLI `search`)
// ---------------------------------------------------------------------------

/// Runs one seeded search against a persisted feature matrix and persists
/// the record. Identical invocations produce byte-identical files.
pub fn run_single_search(
    config: &ExperimentConfig,
    data_path: &Path,
    algorithm: &str,
    seed: u64,
    target_cardinality: Option<usize>,
    out_path: &Path,
) -> Result<RunRecord> {
    config.validate()?;
    let hash = config.hash();
    let canonical = canonical_algorithm(algorithm)
        .ok_or_else(|| anyhow!("unknown algorithm {algorithm:?}"))?;
    let data = read_dataset(data_path, &hash)?;
    let plan = make_folds(&data, config.dataset.seed)?;
    let classifier = config.classifier.to_classifier()?;
    let env = FitnessEnv::new(&data, &plan, classifier);
    let record = if canonical == SFFS {
        let target = target_cardinality
            .ok_or_else(|| anyhow!("the deterministic scan needs --target-cardinality"))?;
        if target < 1 || target > data.feature_count() {
            bail!(
                "target cardinality {target} outside 1..={}",
                data.feature_count()
            );
        }
        run_sffs(
            &env,
            &SffsConfig {
                target_cardinality: target,
                seed,
            },
        )
    } else {
        execute_search(&env, config, canonical, seed)
    };
    write_json(
        out_path,
        &PersistedRun {
            config_hash: hash,
            record: record.clone(),
        },
    )?;
    Ok(record)
}

// ---------------------------------------------------------------------------
// Waveform archives (CLI `synth` / `featurize`)
// ---------------------------------------------------------------------------

/// A rendered event corpus at one noise level, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformArchive {
    pub config_hash: String,
    pub snr_db: SnrDb,
    pub waveforms: Vec<Waveform>,
}

/// Renders the full corpus at one noise level and writes it as an archive.
pub fn synthesize_archive(
    config: &ExperimentConfig,
    snr: SnrDb,
    out_path: &Path,
) -> Result<WaveformArchive> {
    config.validate()?;
    let synthesis = config.dataset.synthesis();
    let waveforms = build_dataset(&synthesis, config.dataset.events_per_class, snr)?;
    let archive = WaveformArchive {
        config_hash: config.hash(),
        snr_db: snr,
        waveforms,
    };
    write_json(out_path, &archive)?;
    Ok(archive)
}

/// Extracts the feature matrix from a persisted waveform archive.
pub fn featurize_archive(
    config: &ExperimentConfig,
    archive_path: &Path,
    out_path: &Path,
) -> Result<Dataset> {
    config.validate()?;
    let hash = config.hash();
    let archive: WaveformArchive = read_json(archive_path)?;
    if archive.config_hash != hash {
        bail!(
            "{} was produced under config {}, current config is {hash}",
            archive_path.display(),
            archive.config_hash
        );
    }
    let synthesis = config.dataset.synthesis();
    let filter = WaveletFilter::sym6();
    let levels = required_levels(synthesis.fundamental_frequency, synthesis.sampling_frequency)?;
    let data = featurize_dataset(&archive.waveforms, &filter, levels, &synthesis)?;
    write_dataset(out_path, &data, &hash)?;
    Ok(data)
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

/// Regenerates every table from the persisted reports. Pure function of the
/// report contents, so repeated runs are byte-identical.
pub fn regenerate_tables(out_dir: &Path) -> Result<()> {
    let report: ExperimentReport = read_json(&out_dir.join("report.json"))?;
    if report.config.hash() != report.config_hash {
        bail!("report.json config echo does not match its recorded hash");
    }
    fs::create_dir_all(out_dir.join("tables"))?;
    write_stage1_tables(out_dir, &report)?;
    let robustness_path = out_dir.join("robustness.json");
    if robustness_path.exists() {
        let robustness: RobustnessReport = read_json(&robustness_path)?;
        if robustness.config_hash != report.config_hash {
            bail!(
                "robustness.json was produced under config {}, report.json under {}",
                robustness.config_hash,
                report.config_hash
            );
        }
        write_stage2_tables(out_dir, &robustness)?;
    }
    Ok(())
}

fn write_stage1_tables(out_dir: &Path, report: &ExperimentReport) -> Result<()> {
    let tables = out_dir.join("tables");
    fs::write(tables.join("summary.csv"), summary_csv(report))
        .context("writing summary.csv")?;
    let meta_names: Vec<&str> = report
        .outcomes
        .iter()
        .map(|o| o.algorithm.as_str())
        .filter(|&a| a != SFFS)
        .collect();
    if let Some(fr) = &report.friedman_j {
        let text = friedman_csv(fr, report.posthoc_j.as_ref(), &meta_names);
        fs::write(tables.join("friedman_j.csv"), text).context("writing friedman_j.csv")?;
    }
    if let Some(fr) = &report.friedman_xi {
        let text = friedman_csv(fr, report.posthoc_xi.as_ref(), &meta_names);
        fs::write(tables.join("friedman_xi.csv"), text).context("writing friedman_xi.csv")?;
    }
    Ok(())
}

fn write_stage2_tables(out_dir: &Path, robustness: &RobustnessReport) -> Result<()> {
    let tables = out_dir.join("tables");
    fs::write(tables.join("robustness.csv"), robustness_csv(robustness))
        .context("writing robustness.csv")?;
    if let Some(contrast) = &robustness.contrast {
        let names: Vec<&str> = robustness
            .champions
            .iter()
            .map(|c| c.algorithm.as_str())
            .collect();
        fs::write(tables.join("contrast.csv"), contrast_csv(&names, contrast))
            .context("writing contrast.csv")?;
    }
    Ok(())
}

/// Per-algorithm aggregate table. Floats print in shortest round-trip form.
fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::new();
    writeln!(out, "{HASH_PREFIX}{}", report.config_hash).unwrap();
    writeln!(out, "# full_set_j = {:?}", report.full_set_j).unwrap();
    writeln!(
        out,
        "algorithm,runs,mean_j,sd_j,xi_avg,sd_xi,pi_percent,xi_percent,score"
    )
    .unwrap();
    for outcome in &report.outcomes {
        let m = &outcome.metrics;
        let pi = m
            .pi_percent
            .map(|v| format!("{v:?}"))
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{:?},{:?},{:?},{:?},{pi},{:?},{:?}",
            outcome.algorithm, m.run_count, m.mean_j, m.sd_j, m.xi_avg, m.sd_xi, m.xi_percent,
            m.score
        )
        .unwrap();
    }
    out
}

/// Rank table: one row per algorithm, with the post-hoc comparison columns
/// empty on the control's own row.
fn friedman_csv(fr: &FriedmanResult, posthoc: Option<&PosthocTable>, names: &[&str]) -> String {
    let mut out = String::new();
    writeln!(out, "# statistic = {:?}", fr.statistic).unwrap();
    writeln!(out, "# p_value = {:?}", fr.p_value).unwrap();
    if let Some(table) = posthoc {
        writeln!(out, "# control = {}", names[table.control]).unwrap();
        writeln!(out, "# alpha = {:?}", table.alpha).unwrap();
    }
    writeln!(out, "algorithm,average_rank,z,p_raw,p_adjusted,rejected").unwrap();
    for (index, name) in names.iter().enumerate() {
        let rank = fr.average_ranks[index];
        let comparison = posthoc.and_then(|t| t.comparisons.iter().find(|c| c.index == index));
        match comparison {
            Some(c) => writeln!(
                out,
                "{name},{rank:?},{:?},{:?},{:?},{}",
                c.z, c.p_raw, c.p_adjusted, c.rejected
            )
            .unwrap(),
            None => writeln!(out, "{name},{rank:?},,,,").unwrap(),
        }
    }
    out
}

/// Accuracy sweep: one row per (noise level, algorithm), in percent points.
fn robustness_csv(robustness: &RobustnessReport) -> String {
    let mut out = String::new();
    writeln!(out, "{HASH_PREFIX}{}", robustness.config_hash).unwrap();
    writeln!(
        out,
        "snr_db,algorithm,theta_x_percent,theta_u_percent,theta_diff_points"
    )
    .unwrap();
    for entry in &robustness.entries {
        writeln!(
            out,
            "{},{},{:?},{:?},{:?}",
            entry.snr_db,
            entry.algorithm,
            entry.theta_x * 100.0,
            entry.theta_u * 100.0,
            entry.theta_diff * 100.0
        )
        .unwrap();
    }
    out
}

/// Pairwise contrast matrix of champion accuracies, percent points.
fn contrast_csv(names: &[&str], contrast: &[Vec<f64>]) -> String {
    let mut out = String::new();
    writeln!(out, "algorithm,{}", names.join(",")).unwrap();
    for (row_name, row) in names.iter().zip(contrast) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{row_name},{}", cells.join(",")).unwrap();
    }
    out
}
