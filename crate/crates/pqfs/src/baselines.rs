//! Reference search strategies sharing the criterion and budget
//! accounting of the two-axis swarm: a generational genetic algorithm, a
//! binary ant system, three binary particle-swarm variants, and a
//! deterministic floating forward-selection scan.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::evalcore::{FeatureSubset, FitnessEnv, RunTracker};
use crate::metrics::RunRecord;
use crate::rng::{purpose, stream};

/// Genetic-algorithm parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub crossover_probability: f64,
    pub mutation_probability: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 30,
            crossover_probability: 0.8,
            mutation_probability: 0.2,
            seed: 0,
        }
    }
}

/// Ant-system parameters. Each feature carries a select and a deselect
/// edge whose pheromone stays within `[tau_min, tau_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcoConfig {
    pub colony_size: usize,
    /// Scale of the deposit placed on the iteration-best ant's edges.
    pub deposit_factor: f64,
    pub evaporation: f64,
    pub tau_min: f64,
    pub tau_max: f64,
    pub seed: u64,
}

impl Default for AcoConfig {
    fn default() -> Self {
        Self {
            colony_size: 50,
            deposit_factor: 5.0,
            evaporation: 0.2,
            tau_min: 0.3,
            tau_max: 1.5,
            seed: 0,
        }
    }
}

/// Binary swarm parameters, shared by the plain, catfish, and chaotic
/// variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpsoConfig {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub velocity_min: f64,
    pub velocity_max: f64,
    /// Catfish only: particles replaced when the swarm best stalls.
    pub catfish_count: usize,
    /// Catfish only: stalled sweeps before the replacement fires.
    pub refresh_gap: u32,
    pub seed: u64,
}

impl Default for BpsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            inertia: 1.0,
            cognitive: 2.0,
            social: 2.0,
            velocity_min: -6.0,
            velocity_max: 6.0,
            catfish_count: 3,
            refresh_gap: 3,
            seed: 0,
        }
    }
}

/// Which binary-swarm behavior to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BpsoVariant {
    /// Fixed inertia.
    Plain,
    /// Replaces the worst particles with all-ones/all-zeros probes when
    /// the swarm best stalls.
    Catfish,
    /// Inertia follows the logistic map.
    Chaotic,
}

impl BpsoVariant {
    pub fn name(self) -> &'static str {
        match self {
            Self::Plain => "bpso",
            Self::Catfish => "cbpso",
            Self::Chaotic => "chbpso",
        }
    }
}

/// Floating forward-selection parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SffsConfig {
    /// Cardinality of the subset to report.
    pub target_cardinality: usize,
    /// Recorded for provenance; the scan itself is deterministic.
    pub seed: u64,
}

/// Probability of taking the select edge given the two pheromone levels.
pub fn select_probability(tau_select: f64, tau_deselect: f64) -> f64 {
    tau_select / (tau_select + tau_deselect)
}

/// Standard logistic squashing for velocity-to-probability mapping.
pub fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One step of the logistic map used for chaotic inertia.
pub fn logistic_step(w: f64) -> f64 {
    4.0 * w * (1.0 - w)
}

/// Draws a logistic-map start value in `(0, 1)` avoiding the fixed points
/// and period-two points where the map degenerates.
pub fn draw_chaotic_seed(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let w = rng.random::<f64>();
        if w > 0.0 && [0.25, 0.5, 0.75].iter().all(|&p| w != p) {
            return w;
        }
    }
}

/// The replacement probes inserted when a catfish trigger fires: the
/// first half (rounded up) at all-ones, the rest at all-zeros.
pub fn catfish_positions(count: usize, n: usize) -> Vec<FeatureSubset> {
    (0..count)
        .map(|k| {
            if k < count.div_ceil(2) {
                FeatureSubset::full(n)
            } else {
                FeatureSubset::empty(n)
            }
        })
        .collect()
}

fn random_position(n: usize, rng: &mut ChaCha12Rng) -> FeatureSubset {
    FeatureSubset::from_bits((0..n).map(|_| rng.random::<bool>()).collect())
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Roulette index over non-negative weights: first slot whose running sum
/// reaches the draw.
fn roulette(weights: &[f64], rng: &mut ChaCha12Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let r = (1.0 - rng.random::<f64>()) * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if acc >= r {
            return i;
        }
    }
    weights.len() - 1
}

/// Generational genetic search: roulette parent selection on shifted
/// complement-of-error fitness, single-point crossover, per-bit mutation,
/// and a single elite carried over without re-scoring.
pub fn run_ga(env: &FitnessEnv<'_>, config: &GaConfig, budget: u64) -> RunRecord {
    let n = env.feature_count();
    assert!(config.population >= 2, "need at least two parents");
    assert!((0.0..=1.0).contains(&config.crossover_probability));
    assert!((0.0..=1.0).contains(&config.mutation_probability));
    assert!(
        budget >= config.population as u64,
        "budget must cover the initial population"
    );
    let mut tracker = RunTracker::new(env, budget);
    let mut rng = stream(config.seed, &[purpose::RUN]);

    let mut population: Vec<(FeatureSubset, f64)> = (0..config.population)
        .map(|_| {
            let mask = random_position(n, &mut rng);
            let j = tracker.query(&mask).j;
            (mask, j)
        })
        .collect();

    'search: while !tracker.exhausted() {
        // Strictly positive roulette mass even at J = 1.
        let weights: Vec<f64> = population.iter().map(|(_, j)| 1.0 - j + 1e-9).collect();
        let elite = argmin(&population.iter().map(|&(_, j)| j).collect::<Vec<_>>());
        let mut next = vec![population[elite].clone()];
        while next.len() < config.population {
            let a = &population[roulette(&weights, &mut rng)].0;
            let b = &population[roulette(&weights, &mut rng)].0;
            let mut child = if rng.random::<f64>() < config.crossover_probability {
                let point = rng.random_range(1..n);
                FeatureSubset::from_bits(
                    a.bits()[..point]
                        .iter()
                        .chain(&b.bits()[point..])
                        .copied()
                        .collect(),
                )
            } else {
                a.clone()
            };
            for j in 0..n {
                if rng.random::<f64>() < config.mutation_probability {
                    child.set(j, !child.is_selected(j));
                }
            }
            if tracker.exhausted() {
                break 'search;
            }
            let j = tracker.query(&child).j;
            next.push((child, j));
        }
        population = next;
    }

    RunRecord::from_tracker(
        "ga",
        config.seed,
        &tracker,
        serde_json::to_value(config).expect("config serializes"),
    )
}

/// Binary ant system: every ant picks each feature's select or deselect
/// edge in proportion to pheromone; each iteration evaporates all edges
/// and rewards the iteration-best ant's path, keeping pheromone clamped.
pub fn run_aco(env: &FitnessEnv<'_>, config: &AcoConfig, budget: u64) -> RunRecord {
    let n = env.feature_count();
    assert!(
        config.tau_min > 0.0 && config.tau_min < config.tau_max,
        "pheromone bounds must satisfy 0 < min < max"
    );
    assert!((0.0..=1.0).contains(&config.evaporation));
    assert!(
        budget >= config.colony_size as u64,
        "budget must cover one colony"
    );
    let mut tracker = RunTracker::new(env, budget);
    let mut rngs: Vec<ChaCha12Rng> = (0..config.colony_size)
        .map(|i| stream(config.seed, &[purpose::AGENT, i as u64]))
        .collect();

    let start = config.tau_min + (config.tau_max - config.tau_min) / 2.0;
    let mut tau_select = vec![start; n];
    let mut tau_deselect = vec![start; n];

    'search: while !tracker.exhausted() {
        let mut best: Option<(FeatureSubset, f64)> = None;
        for rng in rngs.iter_mut() {
            if tracker.exhausted() {
                break 'search;
            }
            let mask = FeatureSubset::from_bits(
                (0..n)
                    .map(|j| {
                        rng.random::<f64>() < select_probability(tau_select[j], tau_deselect[j])
                    })
                    .collect(),
            );
            let j = tracker.query(&mask).j;
            if best.as_ref().is_none_or(|(_, bj)| j < *bj) {
                best = Some((mask, j));
            }
        }
        let (mask, j) = best.expect("colony is never empty");
        let deposit = config.deposit_factor * (1.0 - j);
        for f in 0..n {
            tau_select[f] *= 1.0 - config.evaporation;
            tau_deselect[f] *= 1.0 - config.evaporation;
            if mask.is_selected(f) {
                tau_select[f] += deposit;
            } else {
                tau_deselect[f] += deposit;
            }
            tau_select[f] = tau_select[f].clamp(config.tau_min, config.tau_max);
            tau_deselect[f] = tau_deselect[f].clamp(config.tau_min, config.tau_max);
            assert!(
                tau_select[f] >= config.tau_min && tau_select[f] <= config.tau_max,
                "pheromone escaped its bounds"
            );
            assert!(
                tau_deselect[f] >= config.tau_min && tau_deselect[f] <= config.tau_max,
                "pheromone escaped its bounds"
            );
        }
    }

    RunRecord::from_tracker(
        "aco",
        config.seed,
        &tracker,
        serde_json::to_value(config).expect("config serializes"),
    )
}

/// Binary particle swarm with per-bit velocities squashed to selection
/// probabilities. The variant adds catfish replacement or chaotic
/// inertia on top of the plain update.
pub fn run_bpso(
    env: &FitnessEnv<'_>,
    config: &BpsoConfig,
    variant: BpsoVariant,
    budget: u64,
) -> RunRecord {
    let n = env.feature_count();
    let ps = config.swarm_size;
    assert!(config.velocity_min < config.velocity_max);
    assert!(config.catfish_count >= 1);
    assert!(budget >= ps as u64, "budget must cover one sweep");
    let mut tracker = RunTracker::new(env, budget);
    let mut run_rng = stream(config.seed, &[purpose::RUN]);
    let mut rngs: Vec<ChaCha12Rng> = (0..ps)
        .map(|i| stream(config.seed, &[purpose::AGENT, i as u64]))
        .collect();

    let mut positions: Vec<FeatureSubset> = Vec::with_capacity(ps);
    let mut velocities: Vec<Vec<f64>> = Vec::with_capacity(ps);
    for rng in &mut rngs {
        positions.push(random_position(n, rng));
        velocities.push(
            (0..n)
                .map(|_| rng.random_range(config.velocity_min..config.velocity_max))
                .collect(),
        );
    }

    let mut pbest = positions.clone();
    let mut pbestval: Vec<f64> = positions.iter().map(|p| tracker.query(p).j).collect();
    let mut gbest_idx = argmin(&pbestval);
    let mut gbest = pbest[gbest_idx].clone();
    let mut gbestval = pbestval[gbest_idx];
    let mut omega = match variant {
        BpsoVariant::Chaotic => draw_chaotic_seed(&mut run_rng),
        _ => config.inertia,
    };
    let mut stall = 0u32;

    'search: while !tracker.exhausted() {
        // Catfish replacement fires before the sweep's update so the
        // boundary probes reach the evaluation step intact.
        let mut frozen = vec![false; ps];
        if variant == BpsoVariant::Catfish && stall >= config.refresh_gap {
            let mut order: Vec<usize> = (0..ps).collect();
            order.sort_by(|&a, &b| {
                pbestval[b].partial_cmp(&pbestval[a]).unwrap().then(a.cmp(&b))
            });
            let probes = catfish_positions(config.catfish_count.min(ps), n);
            for (k, probe) in probes.into_iter().enumerate() {
                let idx = order[k];
                positions[idx] = probe.clone();
                velocities[idx] = vec![0.0; n];
                pbest[idx] = probe;
                pbestval[idx] = f64::INFINITY;
                frozen[idx] = true;
            }
            stall = 0;
        }

        for i in 0..ps {
            if frozen[i] {
                continue;
            }
            let rng = &mut rngs[i];
            for j in 0..n {
                let r1 = rng.random::<f64>();
                let r2 = rng.random::<f64>();
                let x = f64::from(u8::from(positions[i].is_selected(j)));
                let pb = f64::from(u8::from(pbest[i].is_selected(j)));
                let gb = f64::from(u8::from(gbest.is_selected(j)));
                let v = omega * velocities[i][j]
                    + config.cognitive * r1 * (pb - x)
                    + config.social * r2 * (gb - x);
                velocities[i][j] = v.clamp(config.velocity_min, config.velocity_max);
            }
            for j in 0..n {
                let keep = rng.random::<f64>() < sigmoid(velocities[i][j]);
                positions[i].set(j, keep);
            }
        }

        for i in 0..ps {
            if tracker.exhausted() {
                break 'search;
            }
            let report = tracker.query(&positions[i]);
            if report.j < pbestval[i] {
                pbest[i] = positions[i].clone();
                pbestval[i] = report.j;
            }
        }
        gbest_idx = argmin(&pbestval);
        if pbestval[gbest_idx] < gbestval {
            gbest = pbest[gbest_idx].clone();
            gbestval = pbestval[gbest_idx];
            stall = 0;
        } else {
            stall += 1;
        }
        if variant == BpsoVariant::Chaotic {
            omega = logistic_step(omega);
        }
    }

    RunRecord::from_tracker(
        variant.name(),
        config.seed,
        &tracker,
        serde_json::to_value(config).expect("config serializes"),
    )
}

/// Floating forward selection: grow the subset by the best single
/// addition, then drop features while a removal strictly beats the best
/// subset already recorded at the smaller size. Scans to the full set and
/// reports the best subset of the requested cardinality. Deterministic
/// for a given fold plan; ties go to the lower feature index.
pub fn run_sffs(env: &FitnessEnv<'_>, config: &SffsConfig) -> RunRecord {
    let n = env.feature_count();
    assert!(
        (1..=n).contains(&config.target_cardinality),
        "target cardinality must lie in 1..=n"
    );
    // The scan is budgetless by design; the cap only guards the
    // strictly-improving backward loop against a runaway.
    let cap = 4 * (n as u64) * (n as u64) + 16;
    let mut tracker = RunTracker::new(env, cap);

    let mut best_at: Vec<Option<(FeatureSubset, f64)>> = vec![None; n + 1];
    let mut current = FeatureSubset::empty(n);

    while current.cardinality() < n {
        let mut best_add: Option<(usize, f64)> = None;
        for j in 0..n {
            if current.is_selected(j) {
                continue;
            }
            let mut candidate = current.clone();
            candidate.set(j, true);
            let report = tracker.query(&candidate);
            if best_add.is_none_or(|(_, bj)| report.j < bj) {
                best_add = Some((j, report.j));
            }
        }
        let (add, added_j) = best_add.expect("at least one feature is addable");
        current.set(add, true);
        let k = current.cardinality();
        if best_at[k].as_ref().is_none_or(|(_, bj)| added_j < *bj) {
            best_at[k] = Some((current.clone(), added_j));
        }

        while current.cardinality() >= 2 {
            let k = current.cardinality();
            let mut best_drop: Option<(usize, f64)> = None;
            for j in current.indices() {
                let mut candidate = current.clone();
                candidate.set(j, false);
                let report = tracker.query(&candidate);
                if best_drop.is_none_or(|(_, bj)| report.j < bj) {
                    best_drop = Some((j, report.j));
                }
            }
            let (drop, dropped_j) = best_drop.expect("subset has removable features");
            let improves = best_at[k - 1].as_ref().is_none_or(|(_, bj)| dropped_j < *bj);
            if !improves {
                break;
            }
            current.set(drop, false);
            best_at[k - 1] = Some((current.clone(), dropped_j));
        }
    }

    let (mask, j) = best_at[config.target_cardinality]
        .clone()
        .expect("every cardinality is visited by the forward scan");
    RunRecord {
        algorithm: "sffs".to_string(),
        seed: config.seed,
        best_mask: mask.to_string(),
        best_j: j,
        best_cardinality: config.target_cardinality,
        j_trace: tracker.j_trace.clone(),
        xi_trace: tracker.xi_trace.clone(),
        evaluations: tracker.used(),
        config_echo: serde_json::to_value(config).expect("config serializes"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{ClassifierConfig, KnnConfig, Metric};
    use crate::evalcore::{evaluate, make_folds, FoldPlan};
    use crate::features::{Dataset, FeatureVector};
    use crate::synth::SynthesisConfig;
    use crate::types::{ClassId, SnrDb};

    fn knn_config() -> ClassifierConfig {
        ClassifierConfig::Knn(KnnConfig {
            k: 1,
            metric: Metric::Manhattan,
        })
    }

    /// Column 0 encodes the class; the rest are constant filler.
    fn planted_dataset(width: usize) -> Dataset {
        let rows = (0..30)
            .map(|i| {
                let class = (i % 3 + 1) as u8;
                let mut values = vec![0.5; width];
                values[0] = f64::from(class);
                FeatureVector {
                    values,
                    label: ClassId::new(class).unwrap(),
                }
            })
            .collect();
        Dataset::new(rows, SnrDb::CLEAN, SynthesisConfig::default())
    }

    /// Columns 0..2 each separate one class pair; later columns are
    /// seeded noise, so no single column is perfect.
    fn graded_dataset(width: usize, seed: u64) -> Dataset {
        let mut rng = stream(seed, &[0xDA7A]);
        let rows = (0..60)
            .map(|i| {
                let class = (i % 3 + 1) as u8;
                let mut values: Vec<f64> = (0..width).map(|_| rng.random::<f64>()).collect();
                values[0] = f64::from(class) + 0.3 * (rng.random::<f64>() - 0.5);
                values[1] = f64::from(class % 2) + 0.4 * (rng.random::<f64>() - 0.5);
                values[2] = f64::from(u8::from(class == 3)) + 0.4 * (rng.random::<f64>() - 0.5);
                FeatureVector {
                    values,
                    label: ClassId::new(class).unwrap(),
                }
            })
            .collect();
        Dataset::new(rows, SnrDb::CLEAN, SynthesisConfig::default())
    }

    fn plan_for(data: &Dataset) -> FoldPlan {
        make_folds(data, 5).unwrap()
    }

    #[test]
    fn ga_without_operators_keeps_the_initial_best() {
        let data = planted_dataset(6);
        let plan = plan_for(&data);
        let env = FitnessEnv::new(&data, &plan, knn_config());
        let config = GaConfig {
            population: 10,
            crossover_probability: 0.0,
            mutation_probability: 0.0,
            seed: 8,
        };
        let record = run_ga(&env, &config, 60);
        // With both operators off, later generations only clone existing
        // masks, so the best is decided by the first population.
        assert_eq!(record.j_trace[config.population - 1], record.best_j);
        assert_eq!(record.evaluations, 60);
    }

    #[test]
    fn ga_finds_the_planted_feature_on_nearly_every_seed() {
        let data = planted_dataset(8);
        let plan = plan_for(&data);
        let mut hits = 0;
        for seed in 0..20 {
            let env = FitnessEnv::new(&data, &plan, knn_config());
            let config = GaConfig {
                population: 10,
                seed,
                ..GaConfig::default()
            };
            let record = run_ga(&env, &config, 200);
            if record.best_j == 0.0 && record.subset().is_selected(0) {
                hits += 1;
            }
        }
        assert!(hits >= 19, "only {hits}/20 seeds found the separator");
    }

    #[test]
    fn ga_same_seed_is_identical_and_best_matches_reevaluation() {
        let data = graded_dataset(8, 1);
        let plan = plan_for(&data);
        let config = GaConfig {
            population: 10,
            seed: 4,
            ..GaConfig::default()
        };
        let env_a = FitnessEnv::new(&data, &plan, knn_config());
        let env_b = FitnessEnv::new(&data, &plan, knn_config());
        let a = run_ga(&env_a, &config, 97);
        let b = run_ga(&env_b, &config, 97);
        assert_eq!(a, b);
        assert_eq!(a.evaluations, 97);
        let again = evaluate(&data, &a.subset(), &knn_config(), &plan);
        assert_eq!(again.j, a.best_j);
        a.validate().unwrap();
    }

    #[test]
    fn symmetric_pheromone_splits_the_edge_evenly() {
        assert_eq!(select_probability(0.9, 0.9), 0.5);
        assert!(select_probability(1.2, 0.9) > 0.5);
        assert!(select_probability(0.31, 1.5) < 0.5);
    }

    #[test]
    fn deposits_raise_the_selection_probability() {
        // One evaporate-and-deposit round on the select edge.
        let config = AcoConfig::default();
        let start = config.tau_min + (config.tau_max - config.tau_min) / 2.0;
        let tau_sel = (start * (1.0 - config.evaporation)
            + config.deposit_factor * (1.0 - 0.1))
            .clamp(config.tau_min, config.tau_max);
        let tau_des = (start * (1.0 - config.evaporation)).clamp(config.tau_min, config.tau_max);
        assert!(select_probability(tau_sel, tau_des) > 0.5);
    }

    #[test]
    fn aco_respects_budget_and_bounds_over_many_iterations() {
        let data = graded_dataset(6, 2);
        let plan = plan_for(&data);
        let env = FitnessEnv::new(&data, &plan, knn_config());
        let config = AcoConfig {
            colony_size: 5,
            seed: 6,
            ..AcoConfig::default()
        };
        // 200 full iterations plus a partial one; the in-loop assertions
        // check the clamp on every edge update.
        let record = run_aco(&env, &config, 1003);
        assert_eq!(record.evaluations, 1003);
        record.validate().unwrap();
        let env_b = FitnessEnv::new(&data, &plan, knn_config());
        let again = run_aco(&env_b, &config, 1003);
        assert_eq!(record, again);
    }

    #[test]
    fn squashing_maps_zero_velocity_to_a_fair_coin() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(6.0) > 0.99);
        assert!(sigmoid(-6.0) < 0.01);
    }

    #[test]
    fn logistic_map_matches_direct_iteration() {
        let mut w = 0.3;
        let mut oracle = 0.3;
        for _ in 0..100 {
            w = logistic_step(w);
            oracle = 4.0 * oracle * (1.0 - oracle);
            assert!((w - oracle).abs() < 1e-12);
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn chaotic_seeds_avoid_the_degenerate_points() {
        let mut rng = stream(3, &[0xC4A0]);
        for _ in 0..1000 {
            let w = draw_chaotic_seed(&mut rng);
            assert!(w > 0.0 && w < 1.0);
            for p in [0.25, 0.5, 0.75] {
                assert_ne!(w, p);
            }
        }
    }

    #[test]
    fn catfish_probes_split_between_the_extremes() {
        let probes = catfish_positions(3, 5);
        assert_eq!(probes.len(), 3);
        assert_eq!(probes[0].cardinality(), 5);
        assert_eq!(probes[1].cardinality(), 5);
        assert_eq!(probes[2].cardinality(), 0);
        let probes = catfish_positions(4, 3);
        assert_eq!(probes.iter().filter(|p| p.cardinality() == 3).count(), 2);
        assert_eq!(probes.iter().filter(|p| p.cardinality() == 0).count(), 2);
    }

    #[test]
    fn swarm_variants_are_deterministic_and_budget_exact() {
        let data = graded_dataset(8, 3);
        let plan = plan_for(&data);
        for variant in [BpsoVariant::Plain, BpsoVariant::Catfish, BpsoVariant::Chaotic] {
            let config = BpsoConfig {
                swarm_size: 8,
                seed: 12,
                ..BpsoConfig::default()
            };
            let env_a = FitnessEnv::new(&data, &plan, knn_config());
            let env_b = FitnessEnv::new(&data, &plan, knn_config());
            let a = run_bpso(&env_a, &config, variant, 85);
            let b = run_bpso(&env_b, &config, variant, 85);
            assert_eq!(a, b);
            assert_eq!(a.evaluations, 85);
            assert_eq!(a.algorithm, variant.name());
            a.validate().unwrap();
        }
    }

    #[test]
    fn catfish_trigger_injects_the_boundary_probes() {
        let data = graded_dataset(12, 2);
        let plan = plan_for(&data);
        let config = BpsoConfig {
            swarm_size: 6,
            refresh_gap: 2,
            catfish_count: 2,
            seed: 5,
            ..BpsoConfig::default()
        };
        let env_plain = FitnessEnv::new(&data, &plan, knn_config());
        let env_catfish = FitnessEnv::new(&data, &plan, knn_config());
        run_bpso(&env_plain, &config, BpsoVariant::Plain, 300);
        run_bpso(&env_catfish, &config, BpsoVariant::Catfish, 300);
        // Once the swarm best stalls, the replacement must score the
        // all-ones and all-zeros probes; the plain run has no mechanism
        // that reaches those twelve-bit extremes.
        let full = FeatureSubset::full(12);
        let empty = FeatureSubset::empty(12);
        assert!(env_catfish.was_queried(&full));
        assert!(env_catfish.was_queried(&empty));
        assert!(!env_plain.was_queried(&full));
        assert!(!env_plain.was_queried(&empty));
    }

    #[test]
    fn singleton_scan_returns_the_best_single_feature() {
        let data = graded_dataset(6, 7);
        let plan = plan_for(&data);
        let env = FitnessEnv::new(&data, &plan, knn_config());
        let record = run_sffs(
            &env,
            &SffsConfig {
                target_cardinality: 1,
                seed: 0,
            },
        );
        // Exhaustive singleton oracle.
        let mut best: Option<(usize, f64)> = None;
        for j in 0..6 {
            let subset = FeatureSubset::from_indices(6, &[j]);
            let rep = evaluate(&data, &subset, &knn_config(), &plan);
            if best.is_none_or(|(_, bj)| rep.j < bj) {
                best = Some((j, rep.j));
            }
        }
        let (feature, j) = best.unwrap();
        assert_eq!(record.subset().indices(), vec![feature]);
        assert_eq!(record.best_j, j);
        assert_eq!(record.best_cardinality, 1);
    }

    #[test]
    fn floating_scan_never_beats_the_exhaustive_optimum() {
        let data = graded_dataset(8, 9);
        let plan = plan_for(&data);
        let env = FitnessEnv::new(&data, &plan, knn_config());
        let record = run_sffs(
            &env,
            &SffsConfig {
                target_cardinality: 3,
                seed: 0,
            },
        );
        let mut exhaustive = f64::INFINITY;
        for a in 0..8 {
            for b in (a + 1)..8 {
                for c in (b + 1)..8 {
                    let subset = FeatureSubset::from_indices(8, &[a, b, c]);
                    exhaustive = exhaustive.min(evaluate(&data, &subset, &knn_config(), &plan).j);
                }
            }
        }
        assert!(record.best_j >= exhaustive);
        assert_eq!(record.best_cardinality, 3);
        record.validate().unwrap();
    }

    #[test]
    fn floating_scan_is_deterministic() {
        let data = graded_dataset(7, 11);
        let plan = plan_for(&data);
        let config = SffsConfig {
            target_cardinality: 2,
            seed: 0,
        };
        let env_a = FitnessEnv::new(&data, &plan, knn_config());
        let env_b = FitnessEnv::new(&data, &plan, knn_config());
        assert_eq!(run_sffs(&env_a, &config), run_sffs(&env_b, &config));
    }
}
