//! Two-axis likelihood-driven swarm search over feature subsets.
//!
//! Each particle's velocity is a 2 x n matrix: the first row scores how
//! many features the particle should keep (one likelihood per candidate
//! cardinality), the second scores which features to prefer. Position
//! updates first draw a cardinality by roulette over the first row, then
//! keep that many features ranked by the second row. Velocities blend a
//! global pull (personal and swarm-wide bests) with a local pull (ring
//! neighborhood best), plus a self term whose sign tracks whether the
//! particle's own error is improving.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::evalcore::{FeatureSubset, FitnessEnv, RunTracker};
use crate::metrics::RunRecord;
use crate::rng::{purpose, stream};

/// Likelihoods below this floor still get a sliver of selection mass, so
/// no cardinality or feature is ever permanently unreachable.
pub const SELECTION_FLOOR: f64 = 1e-6;

/// A particle velocity: row one holds cardinality likelihoods, row two
/// feature likelihoods. Entries may be negative; flooring happens only at
/// selection time.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityMatrix {
    pub cardinality: Vec<f64>,
    pub features: Vec<f64>,
}

impl VelocityMatrix {
    /// Fresh velocity with every entry drawn uniformly from `[0, 1)`.
    pub fn random_unit(n: usize, rng: &mut ChaCha12Rng) -> Self {
        let cardinality = (0..n).map(|_| rng.random::<f64>()).collect();
        let features = (0..n).map(|_| rng.random::<f64>()).collect();
        Self {
            cardinality,
            features,
        }
    }

    pub fn len(&self) -> usize {
        self.cardinality.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cardinality.is_empty()
    }
}

/// A binary attraction target with the same two-row shape as a velocity.
/// The cardinality row flags at most one entry (the exemplar's subset
/// size); the feature row flags individual features worth acquiring.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningSet {
    pub cardinality: Vec<f64>,
    pub features: Vec<f64>,
}

/// Builds the attraction targets a particle at `position` extracts from an
/// `exemplar` mask. Returns the exemplar's target and the particle's own
/// (self) target.
///
/// The exemplar target flags the exemplar's cardinality and the features
/// the exemplar has that the particle lacks. The self target flags the
/// particle's own cardinality and its own features. A cardinality of zero
/// flags nothing.
pub fn derive_learning_sets(
    position: &FeatureSubset,
    exemplar: &FeatureSubset,
) -> (LearningSet, LearningSet) {
    let n = position.len();
    assert_eq!(n, exemplar.len(), "mask lengths must agree");
    let cardinality_row = |xi: usize| -> Vec<f64> {
        let mut row = vec![0.0; n];
        if xi >= 1 {
            row[xi - 1] = 1.0;
        }
        row
    };
    let exemplar_set = LearningSet {
        cardinality: cardinality_row(exemplar.cardinality()),
        features: (0..n)
            .map(|j| f64::from(u8::from(exemplar.is_selected(j) && !position.is_selected(j))))
            .collect(),
    };
    let self_set = LearningSet {
        cardinality: cardinality_row(position.cardinality()),
        features: (0..n)
            .map(|j| f64::from(u8::from(position.is_selected(j))))
            .collect(),
    };
    (exemplar_set, self_set)
}

/// Fitness readings that set the sign and size of the self term.
#[derive(Debug, Clone, Copy)]
pub struct FitnessContext {
    /// The particle's latest error.
    pub current: f64,
    /// The particle's error one sweep earlier.
    pub previous: f64,
    /// The worst (largest) latest error across the swarm.
    pub swarm_max: f64,
}

impl FitnessContext {
    /// Signed self-term weight: magnitude grows as the particle beats the
    /// swarm's worst error, sign is positive only while the particle is
    /// strictly improving. A swarm whose errors are all zero contributes
    /// nothing.
    pub fn delta(&self) -> f64 {
        if self.swarm_max == 0.0 {
            return 0.0;
        }
        let magnitude = 1.0 - self.current / self.swarm_max;
        if self.current / self.previous < 1.0 {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Search parameters. Defaults match the reference configuration used
/// throughout the experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpsoConfig {
    pub swarm_size: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Blend weight between the global and local velocity components.
    pub unification: f64,
    /// Sweeps without personal improvement before a velocity reset.
    pub refresh_gap: u32,
    /// Ring half-width for the neighborhood best.
    pub neighborhood_radius: usize,
    /// Total criterion evaluations allowed.
    pub budget: u64,
    pub seed: u64,
}

impl Default for UpsoConfig {
    fn default() -> Self {
        Self {
            swarm_size: 30,
            inertia: 1.0,
            cognitive: 2.0,
            social: 2.0,
            unification: 0.9,
            refresh_gap: 30,
            neighborhood_radius: 1,
            budget: 6000,
            seed: 0,
        }
    }
}

/// One velocity step. The global component pulls toward the personal best
/// and the swarm best, the local component toward the neighborhood best;
/// `unification` blends the two. `r1` and `r2` scale the cognitive and
/// social pulls for this whole update.
#[allow(clippy::too_many_arguments)]
pub fn update_velocity(
    velocity: &VelocityMatrix,
    personal: &LearningSet,
    swarm: &LearningSet,
    neighborhood: &LearningSet,
    own: &LearningSet,
    config: &UpsoConfig,
    context: &FitnessContext,
    r1: f64,
    r2: f64,
) -> VelocityMatrix {
    let delta = context.delta();
    let u = config.unification;
    let blend = |v: &[f64], pb: &[f64], sb: &[f64], nb: &[f64], own: &[f64]| -> Vec<f64> {
        (0..v.len())
            .map(|j| {
                let common =
                    config.inertia * v[j] + config.cognitive * r1 * pb[j] + delta * own[j];
                let global = common + config.social * r2 * sb[j];
                let local = common + config.social * r2 * nb[j];
                u * global + (1.0 - u) * local
            })
            .collect()
    };
    VelocityMatrix {
        cardinality: blend(
            &velocity.cardinality,
            &personal.cardinality,
            &swarm.cardinality,
            &neighborhood.cardinality,
            &own.cardinality,
        ),
        features: blend(
            &velocity.features,
            &personal.features,
            &swarm.features,
            &neighborhood.features,
            &own.features,
        ),
    }
}

/// Running sums of the floored cardinality row; the final entry is the
/// total roulette mass.
pub fn cumulative_likelihoods(velocity: &VelocityMatrix) -> Vec<f64> {
    let mut total = 0.0;
    velocity
        .cardinality
        .iter()
        .map(|&v| {
            total += v.max(SELECTION_FLOOR);
            total
        })
        .collect()
}

/// Maps a roulette draw `r` in `(0, total]` to a 1-based cardinality: the
/// first slot whose running sum reaches `r`.
pub fn roulette_cardinality(cumulative: &[f64], r: f64) -> usize {
    cumulative.partition_point(|&c| c < r) + 1
}

/// Feature indices ordered best-first: descending floored likelihood,
/// ties broken toward the lower index.
pub fn feature_ranking(velocity: &VelocityMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..velocity.features.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = velocity.features[a].max(SELECTION_FLOOR);
        let fb = velocity.features[b].max(SELECTION_FLOOR);
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    order
}

/// The mask keeping the `xi` best-ranked features of `velocity`.
pub fn position_with_cardinality(velocity: &VelocityMatrix, xi: usize) -> FeatureSubset {
    FeatureSubset::from_indices(velocity.len(), &feature_ranking(velocity)[..xi])
}

/// Draws the next position: a roulette spin over the cardinality row
/// picks how many features to keep, the feature ranking picks which.
pub fn update_position(velocity: &VelocityMatrix, rng: &mut ChaCha12Rng) -> FeatureSubset {
    let cumulative = cumulative_likelihoods(velocity);
    let total = *cumulative.last().expect("velocity must be non-empty");
    // (1 - u) maps the uniform draw from [0, 1) onto (0, total], keeping
    // the last slot reachable and excluding a zero draw.
    let r = (1.0 - rng.random::<f64>()) * total;
    let xi = roulette_cardinality(&cumulative, r);
    position_with_cardinality(velocity, xi)
}

fn random_position(n: usize, rng: &mut ChaCha12Rng) -> FeatureSubset {
    FeatureSubset::from_bits((0..n).map(|_| rng.random::<bool>()).collect())
}

/// Index of the smallest value, earliest on ties.
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Best personal-best index within the ring around `i`, ascending order,
/// strict comparison (so ties stay with the lowest particle index).
fn ring_best(i: usize, ps: usize, radius: usize, pbestval: &[f64]) -> usize {
    let mut members = std::collections::BTreeSet::new();
    for d in 0..=radius {
        members.insert((i + ps - (d % ps)) % ps);
        members.insert((i + d) % ps);
    }
    let mut best = None;
    for &m in &members {
        match best {
            None => best = Some(m),
            Some(b) if pbestval[m] < pbestval[b] => best = Some(m),
            _ => {}
        }
    }
    best.expect("ring is never empty")
}

/// Runs the full search against `env` and returns the packaged outcome.
/// Spends exactly `config.budget` criterion queries unless the swarm
/// cannot even be initialized. Each particle draws from its own seeded
/// stream, so results do not depend on evaluation order or thread count.
pub fn run_2d_upso(env: &FitnessEnv<'_>, config: &UpsoConfig) -> RunRecord {
    let n = env.feature_count();
    let ps = config.swarm_size;
    assert!(ps >= 1, "swarm must have at least one particle");
    assert!(
        config.budget >= ps as u64,
        "budget must cover one sweep of the swarm"
    );
    let mut tracker = RunTracker::new(env, config.budget);
    let mut rngs: Vec<ChaCha12Rng> = (0..ps)
        .map(|i| stream(config.seed, &[purpose::AGENT, i as u64]))
        .collect();

    let mut positions: Vec<FeatureSubset> = Vec::with_capacity(ps);
    let mut velocities: Vec<VelocityMatrix> = Vec::with_capacity(ps);
    for rng in &mut rngs {
        positions.push(random_position(n, rng));
        velocities.push(VelocityMatrix::random_unit(n, rng));
    }

    let mut latest: Vec<f64> = positions
        .iter()
        .map(|p| tracker.query(p).j)
        .collect();
    // Before the first sweep the particle has no earlier reading; reusing
    // the initial error makes the self term start out negative.
    let mut previous = latest.clone();
    let mut pbest = positions.clone();
    let mut pbestval = latest.clone();
    let mut gbest = pbest[argmin(&pbestval)].clone();
    let mut nbest: Vec<FeatureSubset> = (0..ps)
        .map(|i| pbest[ring_best(i, ps, config.neighborhood_radius, &pbestval)].clone())
        .collect();
    let mut stagnation = vec![0u32; ps];

    'search: while !tracker.exhausted() {
        let swarm_max = latest.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        for i in 0..ps {
            let rng = &mut rngs[i];
            if stagnation[i] >= config.refresh_gap {
                velocities[i] = VelocityMatrix::random_unit(n, rng);
                stagnation[i] = 0;
            }
            let (personal, own) = derive_learning_sets(&positions[i], &pbest[i]);
            let (swarm, _) = derive_learning_sets(&positions[i], &gbest);
            let (neighborhood, _) = derive_learning_sets(&positions[i], &nbest[i]);
            let context = FitnessContext {
                current: latest[i],
                previous: previous[i],
                swarm_max,
            };
            let r1 = rng.random::<f64>();
            let r2 = rng.random::<f64>();
            velocities[i] = update_velocity(
                &velocities[i],
                &personal,
                &swarm,
                &neighborhood,
                &own,
                config,
                &context,
                r1,
                r2,
            );
            positions[i] = update_position(&velocities[i], rng);
        }

        previous.copy_from_slice(&latest);
        let before: Vec<f64> = pbestval.clone();
        for i in 0..ps {
            if tracker.exhausted() {
                // The budget ran out mid-sweep; the tracker already holds
                // everything the record needs.
                break 'search;
            }
            let report = tracker.query(&positions[i]);
            latest[i] = report.j;
            if report.j < pbestval[i] {
                pbest[i] = positions[i].clone();
                pbestval[i] = report.j;
            }
        }
        for i in 0..ps {
            if pbestval[i] >= before[i] {
                stagnation[i] += 1;
            }
        }
        gbest = pbest[argmin(&pbestval)].clone();
        for i in 0..ps {
            nbest[i] = pbest[ring_best(i, ps, config.neighborhood_radius, &pbestval)].clone();
        }
    }

    RunRecord::from_tracker(
        "2d-upso",
        config.seed,
        &tracker,
        serde_json::to_value(config).expect("config serializes"),
    )
}
