//! Follower utility, leader revenue and their derivatives.
//!
//! A follower's payoff is its energy efficiency `W ln(1 + gamma_k) / (p_k + p_a)`
//! minus the interference charge `lambda_k h_{k,0} p_k`.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{interference_plus_noise, NetworkInstance};

/// Transmit powers of all followers, in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerProfile(Vec<f64>);

impl PowerProfile {
    /// Validated profile: every entry within `[0, p_max]`.
    pub fn new(net: &NetworkInstance, powers: Vec<f64>) -> Result<Self> {
        let p = Self(powers);
        p.validate(net)?;
        Ok(p)
    }

    pub fn from_vec(powers: Vec<f64>) -> Self {
        Self(powers)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn at_max(net: &NetworkInstance) -> Self {
        Self(net.power_bounds().to_vec())
    }

    pub fn validate(&self, net: &NetworkInstance) -> Result<()> {
        if self.0.len() != net.num_followers() {
            return Err(Error::InvalidConfig(format!(
                "power profile has {} entries for {} followers",
                self.0.len(),
                net.num_followers()
            )));
        }
        for (k, &p) in self.0.iter().enumerate() {
            if !(p.is_finite() && (0.0..=net.power_max(k)).contains(&p)) {
                return Err(Error::InvalidConfig(format!(
                    "power of follower {k} = {p} outside [0, {}]",
                    net.power_max(k)
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn set(&mut self, k: usize, value: f64) {
        self.0[k] = value;
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Largest componentwise absolute difference.
    pub fn max_abs_diff(&self, other: &PowerProfile) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

impl Index<usize> for PowerProfile {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// Per-link interference prices set by the leader.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if let Some(bad) = prices.iter().find(|&&l| !(l.is_finite() && l >= 0.0)) {
            return Err(Error::InvalidConfig(format!("price must be finite and non-negative, got {bad}")));
        }
        Ok(Self(prices))
    }

    /// For prices computed internally from valid quantities.
    pub(crate) fn from_vec_unchecked(prices: Vec<f64>) -> Self {
        Self(prices)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn uniform(k: usize, lambda: f64) -> Self {
        Self(vec![lambda; k])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|l| l * factor).collect())
    }
}

impl Index<usize> for PriceVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

/// One follower's payoff as a function of its own power, with the
/// opponents' powers and the price frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerView {
    pub bandwidth: f64,
    pub own_gain: f64,
    /// `N_k + h_{0,k} p_0 + sum_{j != k} h_{j,k} p_j`.
    pub interference: f64,
    pub circuit_power: f64,
    /// `lambda_k h_{k,0}`: marginal charge per watt.
    pub price_slope: f64,
    pub power_max: f64,
}

impl FollowerView {
    pub fn new(net: &NetworkInstance, k: usize, p: &PowerProfile, prices: &PriceVector) -> Self {
        Self {
            bandwidth: net.bandwidth(),
            own_gain: net.own_gain(k),
            interference: interference_plus_noise(net, k, p),
            circuit_power: net.circuit_power(),
            price_slope: prices[k] * net.gain_to_macro(k),
            power_max: net.power_max(k),
        }
    }

    /// `G_k`: SINR per watt of own power.
    pub fn sinr_slope(&self) -> f64 {
        self.own_gain / self.interference
    }

    pub fn sinr(&self, power: f64) -> f64 {
        self.sinr_slope() * power
    }

    pub fn efficiency(&self, power: f64) -> f64 {
        self.bandwidth * self.sinr(power).ln_1p() / (power + self.circuit_power)
    }

    pub fn payoff(&self, power: f64) -> f64 {
        self.efficiency(power) - self.price_slope * power
    }

    /// `d u_k / d p_k`.
    pub fn gradient(&self, power: f64) -> f64 {
        let g = self.sinr_slope();
        let gamma = g * power;
        let total = power + self.circuit_power;
        -self.bandwidth * gamma.ln_1p() / (total * total) + self.bandwidth * g / ((1.0 + gamma) * total)
            - self.price_slope
    }

    /// Gradient at zero power, `W G_k / p_a - lambda_k h_{k,0}`.
    pub fn gradient_at_zero(&self) -> f64 {
        self.bandwidth * self.sinr_slope() / self.circuit_power - self.price_slope
    }

    /// Natural scale of the gradient, `W G_k / p_a`.
    pub fn gradient_scale(&self) -> f64 {
        self.bandwidth * self.sinr_slope() / self.circuit_power
    }

    /// `d^2 u_k / (d p_k d p_j)` for an opponent whose gain into this
    /// receiver is `cross_gain`.
    ///
    /// The three-term bracket collapses to `(p_k gamma_k - p_a) / ((1+gamma_k)^2 (p_k+p_a)^2)`,
    /// which keeps the sign exact at the supermodularity boundary.
    pub fn cross_second_derivative(&self, power: f64, cross_gain: f64) -> f64 {
        let i = self.interference;
        let h = cross_gain * self.own_gain / (i * i);
        let gamma = self.sinr(power);
        let total = power + self.circuit_power;
        let one_plus = 1.0 + gamma;
        self.bandwidth * h * (power * gamma - self.circuit_power) / (one_plus * one_plus * total * total)
    }
}

/// Energy efficiency of follower `k` in bits per joule.
pub fn efficiency(net: &NetworkInstance, k: usize, p: &PowerProfile) -> f64 {
    FollowerView::new(net, k, p, &PriceVector::zeros(net.num_followers())).efficiency(p[k])
}

/// Net payoff of follower `k`: efficiency minus interference charge.
pub fn follower_payoff(net: &NetworkInstance, k: usize, p: &PowerProfile, prices: &PriceVector) -> f64 {
    FollowerView::new(net, k, p, prices).payoff(p[k])
}

/// Total payment collected by the leader.
pub fn leader_revenue(net: &NetworkInstance, p: &PowerProfile, prices: &PriceVector) -> f64 {
    (0..net.num_followers()).map(|k| prices[k] * net.gain_to_macro(k) * p[k]).sum()
}

pub fn payoff_gradient(net: &NetworkInstance, k: usize, p: &PowerProfile, prices: &PriceVector) -> f64 {
    FollowerView::new(net, k, p, prices).gradient(p[k])
}

pub fn cross_second_derivative(net: &NetworkInstance, k: usize, j: usize, p: &PowerProfile) -> Result<f64> {
    net.check_follower(k)?;
    net.check_follower(j)?;
    if j == k {
        return Err(Error::InvalidConfig(format!("cross derivative needs distinct followers, got k = j = {k}")));
    }
    let view = FollowerView::new(net, k, p, &PriceVector::zeros(net.num_followers()));
    Ok(view.cross_second_derivative(p[k], net.cross_gain(j, k)))
}
