//! Paired comparison: train on every client vs. only on unflagged clients.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{generate_synthetic, SyntheticFedSpec, LABEL};
use super::train::{fedavg, FedTrainConfig, Samples};
use super::FlError;
use crate::config::EvalConfig;
use crate::federated::{evaluate_local_at, ReadinessFlag};

pub const MIN_SEEDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub seed: u64,
    pub acc_all: f64,
    pub acc_excluded: f64,
    pub excluded_clients: Vec<String>,
    pub flags: Vec<ReadinessFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub trials: Vec<Trial>,
    pub mean_acc_all: f64,
    pub mean_acc_excluded: f64,
}

impl ExperimentOutcome {
    pub fn mean_difference(&self) -> f64 {
        self.mean_acc_excluded - self.mean_acc_all
    }

    pub fn acc_all(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.acc_all).collect()
    }

    pub fn acc_excluded(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.acc_excluded).collect()
    }
}

fn split(s: &Samples, test_fraction: f64, rng: &mut ChaCha8Rng) -> (Samples, Samples) {
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.shuffle(rng);
    let n_test = ((s.len() as f64) * test_fraction).round() as usize;
    let (test, train) = idx.split_at(n_test.min(s.len()));
    (s.select(train), s.select(test))
}

/// One seed: generate, evaluate each client locally, exclude clients with
/// critical flags, and train both arms against the same held-out test set
/// drawn from unflagged clients.
pub fn run_trial(
    spec: &SyntheticFedSpec,
    train_cfg: &FedTrainConfig,
    eval_cfg: &EvalConfig,
    seed: u64,
) -> Result<Trial, FlError> {
    let spec = SyntheticFedSpec { seed, ..spec.clone() };
    let train_cfg = FedTrainConfig { seed, ..train_cfg.clone() };
    train_cfg.validate()?;
    let datasets = generate_synthetic(&spec)?;

    let mut flags = Vec::new();
    let mut excluded = Vec::new();
    let epoch = chrono::DateTime::UNIX_EPOCH;
    for d in &datasets {
        let summary = evaluate_local_at(d, eval_cfg, d.source_id(), epoch)
            .map_err(|e| FlError::Evaluation(e.to_string()))?;
        if summary.has_critical_flag() {
            excluded.push(d.source_id().to_string());
        }
        flags.extend(summary.flags);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed ^ 0x5eed_5eed);
    let mut train_all = Vec::new();
    let mut train_kept = Vec::new();
    let mut test = Samples::default();
    for d in &datasets {
        let (_, s) = Samples::from_dataset(d, LABEL)?;
        let (train, held_out) = split(&s, train_cfg.test_fraction, &mut rng);
        if excluded.iter().any(|e| e == d.source_id()) {
            train_all.push(train);
        } else {
            test.extend(&held_out);
            train_all.push(train.clone());
            train_kept.push(train);
        }
    }
    if train_kept.is_empty() {
        return Err(FlError::NoHealthyClients);
    }
    let acc_all = fedavg(&train_all, &test, &train_cfg)?.test_accuracy;
    let acc_excluded = fedavg(&train_kept, &test, &train_cfg)?.test_accuracy;
    Ok(Trial {
        seed,
        acc_all,
        acc_excluded,
        excluded_clients: excluded,
        flags,
    })
}

/// Runs [`run_trial`] for each seed in parallel. Results are in seed order
/// and bit-identical across runs.
pub fn exclusion_experiment(
    spec: &SyntheticFedSpec,
    train_cfg: &FedTrainConfig,
    eval_cfg: &EvalConfig,
    seeds: &[u64],
) -> Result<ExperimentOutcome, FlError> {
    if seeds.len() < MIN_SEEDS {
        return Err(FlError::TooFewSeeds(seeds.len()));
    }
    let trials = seeds
        .par_iter()
        .map(|&seed| run_trial(spec, train_cfg, eval_cfg, seed))
        .collect::<Result<Vec<_>, _>>()?;
    let n = trials.len() as f64;
    Ok(ExperimentOutcome {
        mean_acc_all: trials.iter().map(|t| t.acc_all).sum::<f64>() / n,
        mean_acc_excluded: trials.iter().map(|t| t.acc_excluded).sum::<f64>() / n,
        trials,
    })
}
