//! Seeded Monte Carlo trials with deterministic, trial-ordered output.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Runs `f` on seeds `seed_base..seed_base + trials`, possibly in
/// parallel, and returns the results in seed order.
pub fn run_trials<T, F>(trials: usize, seed_base: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    (0..trials as u64).into_par_iter().map(|i| f(seed_base.wrapping_add(i))).collect()
}

/// Sample mean and standard error of the mean (zero for a single value).
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialValue {
    pub seed: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std_error: f64,
    pub trials: Vec<TrialValue>,
}

pub fn montecarlo<F>(f: F, trials: usize, seed_base: u64) -> Result<MonteCarloSummary>
where
    F: Fn(u64) -> f64 + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one trial".into()));
    }
    let rows: Vec<TrialValue> = run_trials(trials, seed_base, |seed| TrialValue { seed, value: f(seed) });
    let values: Vec<f64> = rows.iter().map(|r| r.value).collect();
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(MonteCarloSummary { mean, std_error, trials: rows })
}
