//! Command-line front end for the experiment pipeline. Subcommands mirror
//! the pipeline stages: render waveforms, extract features, run a single
//! search, run the two experiment stages, and regenerate report tables.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use pqfs::harness::{
    featurize_archive, regenerate_tables, run_single_search, stage1, stage2, synthesize_archive,
    ExperimentConfig,
};
use pqfs::types::SnrDb;

#[derive(Parser)]
#[command(
    name = "pqfs",
    about = "Power-quality event synthesis, wavelet features, and swarm-based feature selection",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the event corpus at one noise level into a waveform archive.
    Synth {
        /// Experiment definition (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Noise level in dB, or "inf" for the noise-free corpus.
        #[arg(long, default_value = "inf")]
        snr: String,
        /// Archive file to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract the feature matrix from a waveform archive.
    Featurize {
        #[arg(long)]
        config: PathBuf,
        /// Waveform archive produced by `synth`.
        #[arg(long)]
        input: PathBuf,
        /// Feature matrix to write (CSV).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one seeded search over a persisted feature matrix.
    Search {
        #[arg(long)]
        config: PathBuf,
        /// Feature matrix produced by `featurize` or a stage run.
        #[arg(long)]
        data: PathBuf,
        /// ga | aco | bpso | cbpso | chbpso | 2d-upso | sffs
        #[arg(long)]
        algo: String,
        #[arg(long)]
        seed: u64,
        /// Subset size for the deterministic scan (sffs only).
        #[arg(long)]
        target_cardinality: Option<usize>,
        /// Run record to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage I: comparative runs on the pure dataset plus rank statistics.
    Stage1 {
        #[arg(long)]
        config: PathBuf,
        /// Experiment directory for datasets, runs, and reports.
        #[arg(long)]
        out: PathBuf,
    },
    /// Stage II: noise-robustness sweep of the Stage I champions.
    Stage2 {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the report tables from persisted artifacts.
    Report {
        /// Experiment directory holding report.json (and robustness.json).
        #[arg(long = "in")]
        dir: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Synth { config, snr, out } => {
            let config = ExperimentConfig::load(&config)?;
            let snr: SnrDb = snr.parse().map_err(anyhow::Error::msg)?;
            let archive = synthesize_archive(&config, snr, &out)?;
            println!(
                "rendered {} waveforms at SNR {} -> {}",
                archive.waveforms.len(),
                archive.snr_db,
                out.display()
            );
        }
        Command::Featurize { config, input, out } => {
            let config = ExperimentConfig::load(&config)?;
            let data = featurize_archive(&config, &input, &out)?;
            println!(
                "extracted {} rows x {} features -> {}",
                data.len(),
                data.feature_count(),
                out.display()
            );
        }
        Command::Search {
            config,
            data,
            algo,
            seed,
            target_cardinality,
            out,
        } => {
            let config = ExperimentConfig::load(&config)?;
            let record =
                run_single_search(&config, &data, &algo, seed, target_cardinality, &out)?;
            println!(
                "{} seed {}: J = {:?}, {} features, {} evaluations -> {}",
                record.algorithm,
                record.seed,
                record.best_j,
                record.best_cardinality,
                record.evaluations,
                out.display()
            );
        }
        Command::Stage1 { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let report = stage1(&config, &out)?;
            println!(
                "stage 1: {} rows x {} features, full-set J = {:?}",
                14 * config.dataset.events_per_class,
                report.feature_count,
                report.full_set_j
            );
            for outcome in &report.outcomes {
                let m = &outcome.metrics;
                println!(
                    "  {:8} mean J {:.4} (sd {:.4}), mean size {:.1}",
                    outcome.algorithm, m.mean_j, m.sd_j, m.xi_avg
                );
            }
            if let Some(fr) = &report.friedman_j {
                println!(
                    "  Friedman on J: statistic {:.4}, p = {:.4}",
                    fr.statistic, fr.p_value
                );
            }
            println!("report: {}", out.join("report.json").display());
        }
        Command::Stage2 { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let robustness = stage2(&config, &out)?;
            println!(
                "stage 2: {} champions x {} noise levels",
                robustness.champions.len(),
                robustness.snr_levels.len()
            );
            for entry in &robustness.entries {
                println!(
                    "  SNR {:>4} {:8} accuracy {:6.2}% (full set {:6.2}%)",
                    entry.snr_db.to_string(),
                    entry.algorithm,
                    entry.theta_x * 100.0,
                    entry.theta_u * 100.0
                );
            }
            println!("report: {}", out.join("robustness.json").display());
        }
        Command::Report { dir } => {
            regenerate_tables(&dir)?;
            println!("tables regenerated under {}", dir.join("tables").display());
        }
    }
    Ok(())
}
