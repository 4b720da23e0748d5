//! Throwaway diagnostic (deleted before commit).
use pqfs::baselines::{run_aco, run_bpso, run_ga, run_sffs, AcoConfig, BpsoConfig, BpsoVariant, GaConfig, SffsConfig};
use pqfs::classify::{ClassifierConfig, KnnConfig};
use pqfs::evalcore::{evaluate, make_folds, FeatureSubset, FitnessEnv};
use pqfs::features::featurize_dataset;
use pqfs::synth::{build_dataset, SynthesisConfig};
use pqfs::twodim::{run_2d_upso, UpsoConfig};
use pqfs::types::SnrDb;
use pqfs::wavelet::{required_levels, WaveletFilter};

fn corpus() -> (pqfs::features::Dataset, pqfs::evalcore::FoldPlan) {
    let config = SynthesisConfig {
        rng_seed: 2024,
        ..SynthesisConfig::default()
    };
    let waves = build_dataset(&config, 50, SnrDb::CLEAN).unwrap();
    let filter = WaveletFilter::sym6();
    let levels = required_levels(config.fundamental_frequency, config.sampling_frequency).unwrap();
    let data = featurize_dataset(&waves, &filter, levels, &config).unwrap();
    let plan = make_folds(&data, config.rng_seed).unwrap();
    (data, plan)
}

#[test]
fn probe_runs() {
    let (data, plan) = corpus();
    let classifier = ClassifierConfig::Knn(KnnConfig::default());
    let full = evaluate(&data, &FeatureSubset::full(data.feature_count()), &classifier, &plan);
    println!("full-set J {:.4}", full.j);
    for seed in [4000u64, 4003, 4007] {
        let env = FitnessEnv::new(&data, &plan, classifier);
        let r = run_2d_upso(&env, &UpsoConfig { budget: 2000, seed, ..UpsoConfig::default() });
        println!("seed {seed} 2d-upso  J {:.4} xi {:2}", r.best_j, r.best_cardinality);
        for (name, rec) in [
            ("ga", run_ga(&FitnessEnv::new(&data, &plan, classifier), &GaConfig { seed, ..Default::default() }, 2000)),
            ("aco", run_aco(&FitnessEnv::new(&data, &plan, classifier), &AcoConfig { seed, ..Default::default() }, 2000)),
            ("bpso", run_bpso(&FitnessEnv::new(&data, &plan, classifier), &BpsoConfig { seed, ..Default::default() }, BpsoVariant::Plain, 2000)),
        ] {
            println!("seed {seed} {name:8} J {:.4} xi {:2}", rec.best_j, rec.best_cardinality);
        }
    }
}

#[test]
fn probe_sffs_profile() {
    let (data, plan) = corpus();
    let classifier = ClassifierConfig::Knn(KnnConfig::default());
    let env = FitnessEnv::new(&data, &plan, classifier);
    for target in [10usize, 20, 30, 40, 50, 60] {
        let r = run_sffs(&env, &SffsConfig { target_cardinality: target, seed: 1 });
        println!("sffs target {target:2}: J {:.4} xi {:2}", r.best_j, r.best_cardinality);
    }
}
