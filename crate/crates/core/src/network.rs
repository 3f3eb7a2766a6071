//! Two-tier topology, channel gains and SINR.
//!
//! Node 0 is the macro pair (macro user transmitting to the macro base
//! station). Follower `k` (zero-based, `0..K`) is femtocell pair node `k + 1`.
//! `gain(i, j)` is the linear power gain from the transmitter of node `i` to
//! the receiver of node `j`, so the matrix is in general not symmetric.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::payoff::PowerProfile;
use crate::units::{db_to_linear, dbm_to_watts, Ratio, Watts};

/// Scenario constants shared by every generated topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Shared bandwidth in Hz.
    pub bandwidth: f64,
    /// Fixed macro user transmit power.
    pub mu_power: Watts,
    /// Upper bound on every follower's transmit power.
    pub power_max: Watts,
    /// Additional circuit power of a femtocell link.
    pub circuit_power: Watts,
    /// Receiver noise power, identical at every receiver.
    pub noise: Watts,
    /// SINR the macro user needs.
    pub mu_sinr_threshold: Ratio,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            bandwidth: 1e6,
            mu_power: Watts(dbm_to_watts(27.0)),
            power_max: Watts(dbm_to_watts(20.0)),
            circuit_power: Watts(dbm_to_watts(3.0)),
            noise: Watts(dbm_to_watts(-40.0)),
            mu_sinr_threshold: Ratio(db_to_linear(3.0)),
        }
    }
}

/// Geometry of the random drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    /// Radius of the disc around the macro base station holding access points and the macro user.
    pub macro_radius: f64,
    /// Radius of the disc around each access point holding its user.
    pub femto_user_radius: f64,
    /// Path-loss exponent of links transmitted by femtocell users.
    pub pathloss_exponent_fu: f64,
    /// Path-loss exponent of links transmitted by the macro user.
    pub pathloss_exponent_mu: f64,
    /// Lower clamp applied to every transmitter-receiver distance.
    pub min_distance: f64,
    /// Standard deviation of an optional lognormal shadowing term in dB.
    /// Zero disables shadowing, which keeps `h = d^-k` exact.
    pub shadowing_sigma_db: f64,
    pub rng_seed: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            macro_radius: 300.0,
            femto_user_radius: 15.0,
            pathloss_exponent_fu: 4.0,
            pathloss_exponent_mu: 2.5,
            min_distance: 1.0,
            shadowing_sigma_db: 0.0,
            rng_seed: 0,
        }
    }
}

impl TopologyConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("macro_radius", self.macro_radius)?;
        positive("femto_user_radius", self.femto_user_radius)?;
        positive("pathloss_exponent_fu", self.pathloss_exponent_fu)?;
        positive("pathloss_exponent_mu", self.pathloss_exponent_mu)?;
        positive("min_distance", self.min_distance)?;
        if !(self.shadowing_sigma_db.is_finite() && self.shadowing_sigma_db >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "shadowing_sigma_db must be non-negative, got {}",
                self.shadowing_sigma_db
            )));
        }
        Ok(())
    }
}

/// Planar node positions of a generated drop, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub macro_station: [f64; 2],
    pub macro_user: [f64; 2],
    pub access_points: Vec<[f64; 2]>,
    pub femto_users: Vec<[f64; 2]>,
}

/// Everything a follower game needs to know about the radio environment.
/// Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRecord", into = "NetworkRecord")]
pub struct NetworkInstance {
    bandwidth: f64,
    /// Row-major `(K+1) x (K+1)`, transmitter row, receiver column.
    gain: Vec<f64>,
    noise: Vec<f64>,
    mu_power: f64,
    power_max: Vec<f64>,
    circuit_power: f64,
    mu_sinr_threshold: f64,
}

impl NetworkInstance {
    pub fn new(
        bandwidth: f64,
        gain: Vec<Vec<f64>>,
        noise: Vec<f64>,
        mu_power: f64,
        power_max: Vec<f64>,
        circuit_power: f64,
        mu_sinr_threshold: f64,
    ) -> Result<Self> {
        let nodes = gain.len();
        if nodes < 2 {
            return Err(Error::InvalidNetwork("need at least one follower".into()));
        }
        let k = nodes - 1;
        if gain.iter().any(|row| row.len() != nodes) {
            return Err(Error::InvalidNetwork("gain matrix must be square".into()));
        }
        if noise.len() != nodes {
            return Err(Error::InvalidNetwork(format!("expected {nodes} noise powers, got {}", noise.len())));
        }
        if power_max.len() != k {
            return Err(Error::InvalidNetwork(format!("expected {k} power bounds, got {}", power_max.len())));
        }
        let strictly_positive = |v: f64| v.is_finite() && v > 0.0;
        if !strictly_positive(bandwidth) {
            return Err(Error::InvalidNetwork(format!("bandwidth must be positive, got {bandwidth}")));
        }
        for (i, row) in gain.iter().enumerate() {
            for (j, &g) in row.iter().enumerate() {
                if !strictly_positive(g) {
                    return Err(Error::InvalidNetwork(format!(
                        "gain h[{i}][{j}] must be positive and finite, got {g}"
                    )));
                }
            }
        }
        if let Some(n) = noise.iter().find(|&&n| !strictly_positive(n)) {
            return Err(Error::InvalidNetwork(format!("noise power must be positive, got {n}")));
        }
        if let Some(p) = power_max.iter().find(|&&p| !strictly_positive(p)) {
            return Err(Error::InvalidNetwork(format!("power bound must be positive and finite, got {p}")));
        }
        if !strictly_positive(circuit_power) {
            return Err(Error::InvalidNetwork(format!("circuit power must be positive, got {circuit_power}")));
        }
        if !(mu_power.is_finite() && mu_power >= 0.0) {
            return Err(Error::InvalidNetwork(format!("macro user power must be non-negative, got {mu_power}")));
        }
        if !(mu_sinr_threshold.is_finite() && mu_sinr_threshold >= 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "macro SINR threshold must be non-negative, got {mu_sinr_threshold}"
            )));
        }
        Ok(Self {
            bandwidth,
            gain: gain.into_iter().flatten().collect(),
            noise,
            mu_power,
            power_max,
            circuit_power,
            mu_sinr_threshold,
        })
    }

    /// Builds an instance from explicit gains with every other field taken
    /// from `params`.
    pub fn from_gains(gain: Vec<Vec<f64>>, params: &ScenarioParams) -> Result<Self> {
        let nodes = gain.len();
        Self::new(
            params.bandwidth,
            gain,
            vec![params.noise.0; nodes],
            params.mu_power.0,
            vec![params.power_max.0; nodes.saturating_sub(1)],
            params.circuit_power.0,
            params.mu_sinr_threshold.0,
        )
    }

    pub fn num_followers(&self) -> usize {
        self.noise.len() - 1
    }

    fn nodes(&self) -> usize {
        self.noise.len()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Node-indexed gain from transmitter `i` to receiver `j`.
    pub fn gain(&self, i: usize, j: usize) -> f64 {
        self.gain[i * self.nodes() + j]
    }

    pub fn noise(&self, node: usize) -> f64 {
        self.noise[node]
    }

    pub fn mu_power(&self) -> f64 {
        self.mu_power
    }

    pub fn power_max(&self, k: usize) -> f64 {
        self.power_max[k]
    }

    pub fn power_bounds(&self) -> &[f64] {
        &self.power_max
    }

    pub fn circuit_power(&self) -> f64 {
        self.circuit_power
    }

    pub fn mu_sinr_threshold(&self) -> f64 {
        self.mu_sinr_threshold
    }

    pub fn own_gain(&self, k: usize) -> f64 {
        self.gain(k + 1, k + 1)
    }

    /// Gain from follower `k`'s transmitter to the macro base station.
    pub fn gain_to_macro(&self, k: usize) -> f64 {
        self.gain(k + 1, 0)
    }

    /// Gain from the macro user to follower `k`'s receiver.
    pub fn macro_gain_to(&self, k: usize) -> f64 {
        self.gain(0, k + 1)
    }

    /// Gain from follower `from`'s transmitter to follower `to`'s receiver.
    pub fn cross_gain(&self, from: usize, to: usize) -> f64 {
        self.gain(from + 1, to + 1)
    }

    pub fn follower_noise(&self, k: usize) -> f64 {
        self.noise[k + 1]
    }

    /// Noise plus macro-user interference at follower `k`: `N_k + h_{0,k} p_0`.
    pub fn background_interference(&self, k: usize) -> f64 {
        self.follower_noise(k) + self.macro_gain_to(k) * self.mu_power
    }

    pub fn check_follower(&self, k: usize) -> Result<()> {
        if k < self.num_followers() {
            Ok(())
        } else {
            Err(Error::FollowerOutOfRange { index: k, count: self.num_followers() })
        }
    }

    /// Copy of this instance with a different macro-user SINR threshold.
    pub fn with_mu_sinr_threshold(&self, threshold: f64) -> Self {
        Self { mu_sinr_threshold: threshold, ..self.clone() }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    num_followers: usize,
    bandwidth: f64,
    gain: Vec<Vec<f64>>,
    noise: Vec<Watts>,
    mu_power: Watts,
    power_max: Vec<Watts>,
    circuit_power: Watts,
    mu_sinr_threshold: Ratio,
}

impl TryFrom<NetworkRecord> for NetworkInstance {
    type Error = Error;

    fn try_from(r: NetworkRecord) -> Result<Self> {
        if r.gain.len() != r.num_followers + 1 {
            return Err(Error::InvalidNetwork(format!(
                "num_followers = {} but gain matrix has {} rows",
                r.num_followers,
                r.gain.len()
            )));
        }
        NetworkInstance::new(
            r.bandwidth,
            r.gain,
            r.noise.into_iter().map(|w| w.0).collect(),
            r.mu_power.0,
            r.power_max.into_iter().map(|w| w.0).collect(),
            r.circuit_power.0,
            r.mu_sinr_threshold.0,
        )
    }
}

impl From<NetworkInstance> for NetworkRecord {
    fn from(n: NetworkInstance) -> Self {
        let nodes = n.nodes();
        NetworkRecord {
            num_followers: n.num_followers(),
            bandwidth: n.bandwidth,
            gain: n.gain.chunks(nodes).map(|c| c.to_vec()).collect(),
            noise: n.noise.iter().map(|&w| Watts(w)).collect(),
            mu_power: Watts(n.mu_power),
            power_max: n.power_max.iter().map(|&w| Watts(w)).collect(),
            circuit_power: Watts(n.circuit_power),
            mu_sinr_threshold: Ratio(n.mu_sinr_threshold),
        }
    }
}

fn uniform_in_disc<R: Rng>(rng: &mut R, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Path-loss gain `max(d, d_min)^-exponent`.
pub fn pathloss_gain(distance: f64, min_distance: f64, exponent: f64) -> f64 {
    distance.max(min_distance).powf(-exponent)
}

/// Draws a random drop and returns both the positions and the resulting instance.
pub fn generate_layout(
    cfg: &TopologyConfig,
    num_followers: usize,
    params: &ScenarioParams,
) -> Result<(Layout, NetworkInstance)> {
    if num_followers == 0 {
        return Err(Error::InvalidConfig("topology needs at least one follower".into()));
    }
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let origin = [0.0, 0.0];
    let access_points: Vec<[f64; 2]> =
        (0..num_followers).map(|_| uniform_in_disc(&mut rng, origin, cfg.macro_radius)).collect();
    let femto_users: Vec<[f64; 2]> =
        access_points.iter().map(|&ap| uniform_in_disc(&mut rng, ap, cfg.femto_user_radius)).collect();
    let macro_user = uniform_in_disc(&mut rng, origin, cfg.macro_radius);

    let transmitters: Vec<[f64; 2]> = std::iter::once(macro_user).chain(femto_users.iter().copied()).collect();
    let receivers: Vec<[f64; 2]> = std::iter::once(origin).chain(access_points.iter().copied()).collect();

    let shadowing = if cfg.shadowing_sigma_db > 0.0 {
        Some(Normal::new(0.0, cfg.shadowing_sigma_db).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };

    let nodes = num_followers + 1;
    let mut gain = vec![vec![0.0; nodes]; nodes];
    for (i, &tx) in transmitters.iter().enumerate() {
        let exponent = if i == 0 { cfg.pathloss_exponent_mu } else { cfg.pathloss_exponent_fu };
        for (j, &rx) in receivers.iter().enumerate() {
            let mut h = pathloss_gain(distance(tx, rx), cfg.min_distance, exponent);
            if let Some(dist) = &shadowing {
                h *= db_to_linear(dist.sample(&mut rng));
            }
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "gain h[{i}][{j}] = {h} is not finite and positive; raise min_distance"
                )));
            }
            gain[i][j] = h;
        }
    }

    let layout = Layout { macro_station: origin, macro_user, access_points, femto_users };
    Ok((layout, NetworkInstance::from_gains(gain, params)?))
}

pub fn generate_topology(
    cfg: &TopologyConfig,
    num_followers: usize,
    params: &ScenarioParams,
) -> Result<NetworkInstance> {
    generate_layout(cfg, num_followers, params).map(|(_, net)| net)
}

/// Interference plus noise at follower `k`'s receiver, excluding its own signal.
pub fn interference_plus_noise(net: &NetworkInstance, k: usize, p: &PowerProfile) -> f64 {
    let others: f64 = (0..net.num_followers()).filter(|&j| j != k).map(|j| net.cross_gain(j, k) * p[j]).sum();
    net.background_interference(k) + others
}

/// SINR at the macro base station.
pub fn sinr_macro(net: &NetworkInstance, p: &PowerProfile) -> f64 {
    let interference: f64 = (0..net.num_followers()).map(|k| net.gain_to_macro(k) * p[k]).sum();
    net.gain(0, 0) * net.mu_power() / (net.noise(0) + interference)
}

/// SINR at follower `k`'s access point.
pub fn sinr_follower(net: &NetworkInstance, k: usize, p: &PowerProfile) -> f64 {
    net.own_gain(k) * p[k] / interference_plus_noise(net, k, p)
}
