#![allow(dead_code)]

use femtogame::discrete::{ActionSet, MixedStrategy};
use femtogame::network::generate_topology;
use femtogame::{NetworkInstance, PowerProfile, ScenarioParams, TopologyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random drop with the default radio parameters.
pub fn random_drop(seed: u64, k: usize) -> NetworkInstance {
    generate_topology(&TopologyConfig::default().with_seed(seed), k, &ScenarioParams::default()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform powers in `[0, p_max]` per follower.
pub fn random_profile(rng: &mut ChaCha8Rng, net: &NetworkInstance) -> PowerProfile {
    PowerProfile::from_vec((0..net.num_followers()).map(|k| rng.random_range(0.0..=net.power_max(k))).collect())
}

/// Strategy with every probability bounded away from zero.
pub fn random_strategy(rng: &mut ChaCha8Rng, m: usize) -> MixedStrategy {
    let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    let mut probs: Vec<f64> = w.iter().map(|x| x / s).collect();
    let head: f64 = probs[..m - 1].iter().sum();
    probs[m - 1] = 1.0 - head;
    MixedStrategy::new(probs).unwrap()
}

pub fn random_strategies(rng: &mut ChaCha8Rng, actions: &[ActionSet]) -> Vec<MixedStrategy> {
    actions.iter().map(|a| random_strategy(rng, a.len())).collect()
}
