//! Independent oracles used to check the primary solvers.
//!
//! Derivative oracles evaluate their own payoff kernel in double-double
//! arithmetic, because cross-link gains are many orders of magnitude below
//! the direct gain and plain `f64` differences lose most of the signal.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::discrete::{ActionSet, MixedStrategy};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::payoff::{follower_payoff, PowerProfile, PriceVector};

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`, about 106 bits.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

const LN2: DoubleDouble = DoubleDouble { hi: std::f64::consts::LN_2, lo: 2.319_046_813_846_299_6e-17 };

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl DoubleDouble {
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let (hi, lo) = quick_two_sum(hi, lo);
        Self { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn scale_pow2(self, e: i32) -> Self {
        let f = 2f64.powi(e);
        Self { hi: self.hi * f, lo: self.lo * f }
    }

    /// `e^r - 1` for `|r| <= ln 2 / 2`, without forming `e^r` first.
    fn expm1_reduced(r: Self) -> Self {
        let r = r.scale_pow2(-10);
        // Taylor series of exp(r) - 1 for |r| < 4e-4
        let mut term = r;
        let mut sum = r;
        for n in 2..=14 {
            term = term * r / Self::new(n as f64);
            sum = sum + term;
        }
        // (1 + s)^2 - 1 = s (2 + s), applied ten times
        for _ in 0..10 {
            sum = sum * (sum + Self::new(2.0));
        }
        sum
    }

    pub fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::new(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::new(0.0);
        }
        let k = (self.hi / LN2.hi).round();
        let e = Self::expm1_reduced(self - LN2 * Self::new(k)) + Self::ONE;
        // split the power of two so neither factor overflows
        let k = k as i32;
        let half = k / 2;
        e.scale_pow2(half).scale_pow2(k - half)
    }

    pub fn exp_m1(self) -> Self {
        if self.hi.abs() <= 0.5 * LN2.hi {
            Self::expm1_reduced(self)
        } else {
            self.exp() - Self::ONE
        }
    }

    /// Natural logarithm by Newton iteration on `exp`.
    pub fn ln(self) -> Self {
        if !(self.hi > 0.0) {
            return Self::new(f64::NAN);
        }
        let mut y = Self::new(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::ONE;
        }
        y
    }

    /// `ln(1 + x)` keeping full relative accuracy for small `x`.
    pub fn ln_1p(self) -> Self {
        let one_plus = Self::ONE + self;
        let mut y = Self::new(self.to_f64().ln_1p());
        for _ in 0..2 {
            // Newton step y += (1 + x) e^{-y} - 1, rearranged to avoid cancellation
            y = y + one_plus * (-y).exp_m1() + self;
        }
        y
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Self::renorm(s1, s2 + t2)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, b: Self) -> Self {
        let (p, e) = two_prod(self.hi, b.hi);
        Self::renorm(p, e + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * Self::new(q1);
        let q2 = r.hi / b.hi;
        let r = r - b * Self::new(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::new(q3)
    }
}

/// Arithmetic needed by the oracle payoff kernel.
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn ln_1p(self) -> Self;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
}

impl Scalar for DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self::new(x)
    }
    fn to_f64(self) -> f64 {
        DoubleDouble::to_f64(self)
    }
    fn ln_1p(self) -> Self {
        DoubleDouble::ln_1p(self)
    }
}

/// Follower `k`'s net payoff from raw gains and powers, in any scalar type.
/// Written independently of the `payoff` module.
pub fn oracle_payoff<S: Scalar>(net: &NetworkInstance, k: usize, powers: &[S], price: f64) -> S {
    let s = S::from_f64;
    let node = k + 1;
    let mut received = s(net.noise(node)) + s(net.gain(0, node)) * s(net.mu_power());
    for (j, &pj) in powers.iter().enumerate() {
        if j != k {
            received = received + s(net.gain(j + 1, node)) * pj;
        }
    }
    let pk = powers[k];
    let gamma = s(net.gain(node, node)) * pk / received;
    let efficiency = s(net.bandwidth()) * gamma.ln_1p() / (pk + s(net.circuit_power()));
    efficiency - s(price) * s(net.gain(node, 0)) * pk
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub grid_points: usize,
    pub fd_step: f64,
    pub sample_count: usize,
    pub rng_seed: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { grid_points: 1_000_000, fd_step: 1e-6, sample_count: 100, rng_seed: 0 }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid_points < 1000 {
            return Err(Error::InvalidConfig(format!("grid_points must be at least 1000, got {}", self.grid_points)));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 1e-3) {
            return Err(Error::InvalidConfig(format!("fd_step must lie in (0, 1e-3], got {}", self.fd_step)));
        }
        Ok(())
    }

    pub fn grid_step(&self, power_max: f64) -> f64 {
        power_max / (self.grid_points - 1) as f64
    }
}

/// Argmax of follower `k`'s payoff over `grid_points` evenly spaced powers
/// in `[0, p_max]`. Ties go to the lower power.
pub fn grid_best_response(
    net: &NetworkInstance,
    k: usize,
    opponents: &PowerProfile,
    prices: &PriceVector,
    cfg: &OracleConfig,
) -> f64 {
    let p_max = net.power_max(k);
    let n = cfg.grid_points;
    let mut powers: Vec<f64> = opponents.as_slice().to_vec();
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..n {
        let x = p_max * i as f64 / (n - 1) as f64;
        powers[k] = x;
        let u = oracle_payoff(net, k, &powers, prices[k]);
        if u > best.1 {
            best = (x, u);
        }
    }
    best.0
}

/// Central difference `(f(x+h) - f(x-h)) / 2h` with `h = step * max(|x|, scale)`.
pub fn finite_difference_gradient<S: Scalar, F: Fn(S) -> S>(f: F, x: f64, step: f64, scale: f64) -> f64 {
    let h = step * x.abs().max(scale);
    let (xp, xm) = (S::from_f64(x + h), S::from_f64(x - h));
    let h_eff = S::from_f64(x + h) - S::from_f64(x - h);
    ((f(xp) - f(xm)) / h_eff).to_f64()
}

/// Mixed central difference of `f(x, y)` with steps scaled like
/// `finite_difference_gradient`.
pub fn finite_difference_mixed<S: Scalar, F: Fn(S, S) -> S>(f: F, x: f64, y: f64, step: f64, scale: f64) -> f64 {
    let hx = step * x.abs().max(scale);
    let hy = step * y.abs().max(scale);
    let s = S::from_f64;
    let (xp, xm, yp, ym) = (s(x + hx), s(x - hx), s(y + hy), s(y - hy));
    let num = f(xp, yp) - f(xp, ym) - f(xm, yp) + f(xm, ym);
    (num / ((xp - xm) * (yp - ym))).to_f64()
}

/// Oracle for `d u_k / d p_k`.
pub fn oracle_gradient(
    net: &NetworkInstance,
    k: usize,
    p: &PowerProfile,
    prices: &PriceVector,
    cfg: &OracleConfig,
) -> f64 {
    let base: Vec<DoubleDouble> = p.as_slice().iter().map(|&x| DoubleDouble::new(x)).collect();
    let f = |x: DoubleDouble| {
        let mut v = base.clone();
        v[k] = x;
        oracle_payoff(net, k, &v, prices[k])
    };
    finite_difference_gradient(f, p[k], cfg.fd_step, net.circuit_power())
}

/// Oracle for `d^2 u_k / (d p_k d p_j)`.
pub fn oracle_cross_derivative(net: &NetworkInstance, k: usize, j: usize, p: &PowerProfile, cfg: &OracleConfig) -> f64 {
    let base: Vec<DoubleDouble> = p.as_slice().iter().map(|&x| DoubleDouble::new(x)).collect();
    let f = |x: DoubleDouble, y: DoubleDouble| {
        let mut v = base.clone();
        v[k] = x;
        v[j] = y;
        oracle_payoff(net, k, &v, 0.0)
    };
    finite_difference_mixed(f, p[k], p[j], cfg.fd_step, net.circuit_power())
}

/// Expected payoff of follower `k` by literal enumeration of every joint
/// profile, including zero-probability ones. Profile index `n` is decoded in
/// mixed radix with the last follower as the fastest digit; probabilities
/// are multiplied in follower order.
pub fn enumerate_expected_payoff(
    net: &NetworkInstance,
    k: usize,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    prices: &PriceVector,
    cap: u128,
) -> Result<f64> {
    let sizes: Vec<usize> = actions.iter().map(ActionSet::len).collect();
    let profiles: u128 = sizes.iter().map(|&m| m as u128).product();
    let size = profiles * sizes.len() as u128;
    if size > cap {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    let mut total = 0.0;
    let mut digits = vec![0usize; sizes.len()];
    for n in 0..profiles as usize {
        let mut rem = n;
        for i in (0..sizes.len()).rev() {
            digits[i] = rem % sizes[i];
            rem /= sizes[i];
        }
        let mut prob = 1.0;
        for (i, &d) in digits.iter().enumerate() {
            prob *= strategies[i].probs()[d];
        }
        let p = PowerProfile::from_vec(digits.iter().zip(actions).map(|(&d, a)| a.power(d)).collect());
        total += follower_payoff(net, k, &p, prices) * prob;
    }
    Ok(total)
}
