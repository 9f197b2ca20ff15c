//! Desk-scale federated learning simulation.
//!
//! Generates a small synthetic federation (optionally with one degenerate
//! client), trains logistic regression with FedAvg, and compares accuracy
//! with and without the clients the readiness checks flag as critical.

mod experiment;
mod synth;
mod train;

use thiserror::Error;

pub use experiment::{exclusion_experiment, run_trial, ExperimentOutcome, Trial, MIN_SEEDS};
pub use synth::{feature_name, generate_synthetic, DegenerateClient, SyntheticFedSpec, LABEL};
pub use train::{
    accuracy, fedavg, local_train, logistic_gradient, logistic_loss, train_fedavg, FedOutcome, FedTrainConfig,
    Samples,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("clients do not share a schema: {0}")]
    SchemaMismatch(String),
    #[error("target must be 0/1 with no missing values")]
    NonBinaryTarget,
    #[error("dataset `{0}` has missing feature values")]
    MissingValues(String),
    #[error("no clients to train on")]
    NoClients,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("every client was flagged; nothing left to train on")]
    NoHealthyClients,
    #[error("at least {MIN_SEEDS} seeds are required, got {0}")]
    TooFewSeeds(usize),
    #[error("local evaluation failed: {0}")]
    Evaluation(String),
}
