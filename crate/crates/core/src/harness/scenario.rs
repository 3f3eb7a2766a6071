//! Scenario files: radio parameters, topology, learner and search settings.
//!
//! Every block is optional and falls back to the built-in defaults. Powers
//! accept plain watts or strings such as `"20 dBm"`, ratios accept `"3 dB"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discrete::LearnerConfig;
use crate::error::{Error, Result};
use crate::network::{generate_topology, NetworkInstance, ScenarioParams, TopologyConfig};
use crate::pricing::{HeuristicConfig, PriceSearchConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub params: ScenarioParams,
    pub topology: TopologyConfig,
    /// Followers per generated topology.
    pub num_followers: usize,
    /// Follower counts compared by the multi-K experiments.
    pub k_values: Vec<usize>,
    /// Fixed instance used instead of random drops.
    pub network: Option<NetworkInstance>,
    pub learner: LearnerConfig,
    pub search: PriceSearchConfig,
    pub heuristic: HeuristicConfig,
    /// Grid size of discrete-game price sweeps.
    pub discrete_sweep_points: usize,
    /// Price grid density of continuous sweeps, points per decade.
    pub sweep_points_per_decade: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            params: ScenarioParams::default(),
            topology: TopologyConfig::default(),
            num_followers: 6,
            k_values: (1..=6).collect(),
            network: None,
            learner: LearnerConfig::default(),
            search: PriceSearchConfig { mc_trials: 5, ..Default::default() },
            heuristic: HeuristicConfig::default(),
            discrete_sweep_points: 24,
            sweep_points_per_decade: 8.0,
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.learner.validate()?;
        self.search.validate()?;
        if self.num_followers == 0 || self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidConfig("follower counts must be positive".into()));
        }
        if self.discrete_sweep_points < 2 {
            return Err(Error::InvalidConfig("discrete_sweep_points must be at least 2".into()));
        }
        if !(self.sweep_points_per_decade > 0.0) {
            return Err(Error::InvalidConfig("sweep_points_per_decade must be positive".into()));
        }
        if let Some(net) = &self.network {
            if self.k_values.iter().any(|&k| k != net.num_followers()) || self.num_followers != net.num_followers() {
                return Err(Error::InvalidConfig(format!(
                    "explicit network has {} followers; set num_followers and k_values to match",
                    net.num_followers()
                )));
            }
        }
        Ok(())
    }

    /// The explicit network, or a drop of `k` followers with topology seed `seed`.
    pub fn network_for(&self, k: usize, seed: u64) -> Result<NetworkInstance> {
        match &self.network {
            Some(net) if net.num_followers() == k => Ok(net.clone()),
            Some(net) => Err(Error::InvalidConfig(format!(
                "explicit network has {} followers, {k} requested",
                net.num_followers()
            ))),
            None => generate_topology(&self.topology.clone().with_seed(seed), k, &self.params),
        }
    }
}
