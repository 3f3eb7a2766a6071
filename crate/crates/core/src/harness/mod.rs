//! Experiment driver: scenarios, Monte Carlo trials and CSV output.

pub mod experiment;
pub mod montecarlo;
pub mod scenario;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub use experiment::{run_experiment, ExperimentId, ExperimentSpec, ExperimentSummary};
pub use montecarlo::{mean_and_std_error, montecarlo, run_trials, MonteCarloSummary};
pub use scenario::Scenario;

/// First 16 hex digits of the SHA-256 of the value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}
