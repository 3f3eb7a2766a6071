//! Discrete follower game with mixed strategies and two-timescale
//! stochastic learning.
//!
//! Each follower keeps payoff estimates `U_k` per action (fast timescale)
//! and a mixed strategy `pi_k` that drifts toward the logit response of
//! those estimates (slow timescale).

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{sinr_macro, NetworkInstance};
use crate::payoff::{FollowerView, PowerProfile, PriceVector};

/// Default cap on `K * M^K` for exact expectations.
pub const DEFAULT_ENUMERATION_CAP: u128 = 50_000_000;

/// Sorted candidate powers of one follower; the first is always zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ActionSet(Vec<f64>);

impl ActionSet {
    pub fn new(powers: Vec<f64>) -> Result<Self> {
        match powers.first() {
            None => return Err(Error::InvalidConfig("action set is empty".into())),
            Some(&first) if first != 0.0 => {
                return Err(Error::InvalidConfig(format!("first action must be exactly 0 W, got {first}")))
            }
            _ => {}
        }
        if powers.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(Error::InvalidConfig("action powers must be finite and strictly increasing".into()));
        }
        Ok(Self(powers))
    }

    /// `M` points `p^j = (1 - j/M) p_min + (j/M) p_max` for `j = 0..M`
    /// (exclusive), with `p_min = 0`.
    pub fn sampled(power_max: f64, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("need at least one action".into()));
        }
        let p_min = 0.0;
        let step = |j: usize| {
            let frac = j as f64 / m as f64;
            (1.0 - frac) * p_min + frac * power_max
        };
        Self::new((0..m).map(step).collect())
    }

    /// `sampled` for every follower of `net`.
    pub fn for_network(net: &NetworkInstance, m: usize) -> Result<Vec<ActionSet>> {
        (0..net.num_followers()).map(|k| Self::sampled(net.power_max(k), m)).collect()
    }

    pub fn check_bound(&self, power_max: f64) -> Result<()> {
        let last = *self.0.last().expect("non-empty");
        if last > power_max {
            return Err(Error::InvalidConfig(format!("largest action {last} exceeds p_max {power_max}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> &[f64] {
        &self.0
    }

    pub fn power(&self, j: usize) -> f64 {
        self.0[j]
    }
}

impl TryFrom<Vec<f64>> for ActionSet {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ActionSet> for Vec<f64> {
    fn from(a: ActionSet) -> Self {
        a.0
    }
}

/// Probability distribution over an action set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MixedStrategy(Vec<f64>);

pub const SIMPLEX_TOL: f64 = 1e-12;

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let s = Self(probs);
        s.check_simplex()?;
        Ok(s)
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn degenerate(m: usize, j: usize) -> Self {
        let mut v = vec![0.0; m];
        v[j] = 1.0;
        Self(v)
    }

    pub fn check_simplex(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidStrategy("empty strategy".into()));
        }
        if let Some(bad) = self.0.iter().find(|&&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::InvalidStrategy(format!("probability {bad} outside [0, 1]")));
        }
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidStrategy(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Expected transmit power under this strategy.
    pub fn expected_power(&self, actions: &ActionSet) -> f64 {
        self.0.iter().zip(actions.powers()).map(|(pi, p)| pi * p).sum()
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, other: &MixedStrategy, alpha: f64) -> MixedStrategy {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect())
    }

    pub fn max_abs_diff(&self, other: &MixedStrategy) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn check_joint(net: &NetworkInstance, strategies: &[MixedStrategy], actions: &[ActionSet]) -> Result<()> {
    let k = net.num_followers();
    if strategies.len() != k || actions.len() != k {
        return Err(Error::InvalidConfig(format!(
            "need {k} strategies and action sets, got {} and {}",
            strategies.len(),
            actions.len()
        )));
    }
    for (s, a) in strategies.iter().zip(actions) {
        if s.len() != a.len() {
            return Err(Error::InvalidConfig("strategy length differs from its action set".into()));
        }
        s.check_simplex()?;
    }
    Ok(())
}

fn enumeration_size(actions: &[ActionSet]) -> u128 {
    let profiles = actions.iter().fold(1u128, |acc, a| acc.saturating_mul(a.len() as u128));
    profiles.saturating_mul(actions.len() as u128)
}

/// Calls `visit(profile, probability)` for every joint pure profile with
/// positive probability. Profiles are visited in lexicographic order with
/// follower 0 most significant; the probability is the product
/// `prod_i pi_i(p_i)` taken in follower order.
fn for_each_profile<F: FnMut(&PowerProfile, f64)>(
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    cap: u128,
    mut visit: F,
) -> Result<()> {
    let size = enumeration_size(actions);
    if size > cap {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    let k = actions.len();
    let support: Vec<Vec<usize>> =
        strategies.iter().map(|s| (0..s.len()).filter(|&j| s.probs()[j] > 0.0).collect()).collect();
    let mut digits = vec![0usize; k];
    let mut profile = PowerProfile::from_vec(support.iter().zip(actions).map(|(s, a)| a.power(s[0])).collect());
    loop {
        let mut prob = 1.0;
        for i in 0..k {
            prob *= strategies[i].probs()[support[i][digits[i]]];
        }
        visit(&profile, prob);
        // odometer increment, last follower fastest
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < support[i].len() {
                profile.set(i, actions[i].power(support[i][digits[i]]));
                break;
            }
            digits[i] = 0;
            profile.set(i, actions[i].power(support[i][0]));
        }
    }
}

/// Expected net payoff of follower `k` under the joint mixed strategy.
pub fn expected_follower_payoff(
    net: &NetworkInstance,
    k: usize,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    prices: &PriceVector,
    cap: u128,
) -> Result<f64> {
    net.check_follower(k)?;
    check_joint(net, strategies, actions)?;
    let mut total = 0.0;
    for_each_profile(strategies, actions, cap, |p, prob| {
        total += FollowerView::new(net, k, p, prices).payoff(p[k]) * prob;
    })?;
    Ok(total)
}

/// Expected energy efficiency of every follower under the joint mixed strategy.
pub fn expected_efficiencies(
    net: &NetworkInstance,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    cap: u128,
) -> Result<Vec<f64>> {
    check_joint(net, strategies, actions)?;
    let k_count = net.num_followers();
    let zero = PriceVector::zeros(k_count);
    let mut totals = vec![0.0; k_count];
    for_each_profile(strategies, actions, cap, |p, prob| {
        for (k, t) in totals.iter_mut().enumerate() {
            *t += FollowerView::new(net, k, p, &zero).efficiency(p[k]) * prob;
        }
    })?;
    Ok(totals)
}

/// Expected leader revenue `sum_k lambda_k sum_j pi_k^j h_{k,0} p_k^j`.
pub fn expected_leader_revenue(
    net: &NetworkInstance,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    prices: &PriceVector,
) -> f64 {
    (0..net.num_followers()).map(|k| prices[k] * net.gain_to_macro(k) * strategies[k].expected_power(&actions[k])).sum()
}

pub fn expected_powers(strategies: &[MixedStrategy], actions: &[ActionSet]) -> PowerProfile {
    PowerProfile::from_vec(strategies.iter().zip(actions).map(|(s, a)| s.expected_power(a)).collect())
}

/// Macro SINR evaluated at the expected follower powers.
pub fn expected_macro_sinr(net: &NetworkInstance, strategies: &[MixedStrategy], actions: &[ActionSet]) -> f64 {
    sinr_macro(net, &expected_powers(strategies, actions))
}

/// Expected cross-tier interference `sum_k h_{k,0} E[p_k]`.
pub fn expected_cross_tier_interference(
    net: &NetworkInstance,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
) -> f64 {
    (0..net.num_followers()).map(|k| net.gain_to_macro(k) * strategies[k].expected_power(&actions[k])).sum()
}

/// Logit (Boltzmann) response `exp(U_j / tau) / sum_i exp(U_i / tau)`.
/// `tau` must be positive; the maximum is subtracted before exponentiating.
pub fn logit_response(values: &[f64], tau: f64) -> MixedStrategy {
    debug_assert!(tau > 0.0);
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = values.iter().map(|u| ((u - top) / tau).exp()).collect();
    let total: f64 = weights.iter().sum();
    MixedStrategy(weights.into_iter().map(|w| w / total).collect())
}

/// Step-size sequence `scale / (t + offset)^exponent`, `t = 1, 2, ...`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub scale: f64,
    pub offset: f64,
    pub exponent: f64,
}

impl StepSchedule {
    pub const HARMONIC: StepSchedule = StepSchedule { scale: 1.0, offset: 0.0, exponent: 1.0 };
    pub const INVERSE_SQUARE: StepSchedule = StepSchedule { scale: 1.0, offset: 0.0, exponent: 2.0 };

    pub fn general(scale: f64, offset: f64, exponent: f64) -> Self {
        Self { scale, offset, exponent }
    }

    pub fn rate(&self, t: u64) -> f64 {
        (self.scale / (t as f64 + self.offset).powf(self.exponent)).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.scale.is_finite()
            && self.scale > 0.0
            && self.offset.is_finite()
            && self.offset > -1.0
            && self.exponent.is_finite()
            && self.exponent > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid step schedule {self:?}")))
        }
    }

    pub fn diverges(&self) -> bool {
        self.exponent <= 1.0
    }

    pub fn square_summable(&self) -> bool {
        self.exponent > 0.5
    }
}

/// Structural check of the two-timescale step conditions for a pair of
/// power-law schedules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimescaleCheck {
    pub fast_diverges: bool,
    pub fast_square_summable: bool,
    pub slow_diverges: bool,
    pub slow_square_summable: bool,
    pub ratio_vanishes: bool,
}

impl TimescaleCheck {
    pub fn of(fast: &StepSchedule, slow: &StepSchedule) -> Self {
        Self {
            fast_diverges: fast.diverges(),
            fast_square_summable: fast.square_summable(),
            slow_diverges: slow.diverges(),
            slow_square_summable: slow.square_summable(),
            ratio_vanishes: slow.exponent > fast.exponent,
        }
    }

    pub fn satisfied(&self) -> bool {
        self.fast_diverges
            && self.fast_square_summable
            && self.slow_diverges
            && self.slow_square_summable
            && self.ratio_vanishes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    /// Boltzmann temperature.
    pub tau: f64,
    /// Number of candidate powers per follower.
    pub num_actions: usize,
    /// Step sizes of the payoff estimates.
    pub fast: StepSchedule,
    /// Step sizes of the mixed strategies.
    pub slow: StepSchedule,
    /// Reject schedule pairs that fail `TimescaleCheck::satisfied`.
    pub strict_schedules: bool,
    /// Standard deviation of additive noise on observed payoffs.
    pub observation_noise: f64,
    pub window: usize,
    pub window_tol: f64,
    pub max_iters: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            num_actions: 6,
            fast: StepSchedule::HARMONIC,
            slow: StepSchedule::INVERSE_SQUARE,
            strict_schedules: false,
            observation_noise: 0.0,
            window: 50,
            window_tol: 1e-3,
            max_iters: 600,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::InvalidConfig(format!("tau must be positive, got {}", self.tau)));
        }
        if self.num_actions < 2 {
            return Err(Error::InvalidConfig("need at least two actions".into()));
        }
        self.fast.validate()?;
        self.slow.validate()?;
        if self.strict_schedules && !TimescaleCheck::of(&self.fast, &self.slow).satisfied() {
            return Err(Error::InvalidConfig(format!(
                "step schedules violate the two-timescale conditions: {:?}",
                TimescaleCheck::of(&self.fast, &self.slow)
            )));
        }
        if !(self.observation_noise.is_finite() && self.observation_noise >= 0.0) {
            return Err(Error::InvalidConfig("observation noise must be non-negative".into()));
        }
        if self.window == 0 || !(self.window_tol > 0.0) {
            return Err(Error::InvalidConfig("convergence window and tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn timescales(&self) -> TimescaleCheck {
        TimescaleCheck::of(&self.fast, &self.slow)
    }
}

/// Mutable state of a learning run.
#[derive(Debug, Clone)]
pub struct LearningState {
    /// `values[k][j]`: estimated payoff of action `j` for follower `k`.
    pub values: Vec<Vec<f64>>,
    pub strategies: Vec<MixedStrategy>,
    /// Index of the next slot, starting at 1.
    pub t: u64,
    pub tau: f64,
    pub fast: StepSchedule,
    pub slow: StepSchedule,
    pub observation_noise: f64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub sampled: Vec<usize>,
    pub payoffs: Vec<f64>,
}

impl LearningState {
    /// Zero estimates and uniform strategies.
    pub fn new(actions: &[ActionSet], cfg: &LearnerConfig, seed: u64) -> Self {
        let strategies = actions.iter().map(|a| MixedStrategy::uniform(a.len())).collect();
        Self::with_strategies(actions, strategies, cfg, seed)
    }

    pub fn with_strategies(
        actions: &[ActionSet],
        strategies: Vec<MixedStrategy>,
        cfg: &LearnerConfig,
        seed: u64,
    ) -> Self {
        Self {
            values: actions.iter().map(|a| vec![0.0; a.len()]).collect(),
            strategies,
            t: 1,
            tau: cfg.tau,
            fast: cfg.fast,
            slow: cfg.slow,
            observation_noise: cfg.observation_noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Restarts the step counter while keeping estimates and strategies.
    pub fn restart_clock(&mut self) {
        self.t = 1;
    }

    fn sample(&mut self, k: usize) -> usize {
        let u: f64 = self.rng.random();
        let probs = self.strategies[k].probs();
        let mut acc = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return j;
            }
        }
        // rounding left u above the cumulative sum; take the last supported action
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    /// One slot: sample, observe, update estimates of the played actions,
    /// then move every strategy toward the logit response of the estimates
    /// held before this slot's observation.
    pub fn step(&mut self, net: &NetworkInstance, actions: &[ActionSet], prices: &PriceVector) -> StepOutcome {
        let k_count = net.num_followers();
        let sampled: Vec<usize> = (0..k_count).map(|k| self.sample(k)).collect();
        let profile = PowerProfile::from_vec(sampled.iter().zip(actions).map(|(&j, a)| a.power(j)).collect());
        let noise =
            (self.observation_noise > 0.0).then(|| Normal::new(0.0, self.observation_noise).expect("validated"));
        let payoffs: Vec<f64> = (0..k_count)
            .map(|k| {
                let u = FollowerView::new(net, k, &profile, prices).payoff(profile[k]);
                match &noise {
                    Some(n) => u + n.sample(&mut self.rng),
                    None => u,
                }
            })
            .collect();

        let fast = self.fast.rate(self.t);
        let slow = self.slow.rate(self.t);
        for k in 0..k_count {
            let beta = logit_response(&self.values[k], self.tau);
            let j = sampled[k];
            let v = &mut self.values[k][j];
            *v += fast * (payoffs[k] - *v);
            let pi = &mut self.strategies[k].0;
            for (p, b) in pi.iter_mut().zip(beta.probs()) {
                *p = ((1.0 - slow) * *p + slow * b).clamp(0.0, 1.0);
            }
        }
        self.t += 1;
        StepOutcome { sampled, payoffs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub window: usize,
    pub window_tol: f64,
    pub max_iters: u64,
    /// Keep running to `max_iters` after the detector fires.
    pub run_to_max: bool,
    pub record_strategies: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &LearnerConfig) -> Self {
        Self {
            window: cfg.window,
            window_tol: cfg.window_tol,
            max_iters: cfg.max_iters,
            run_to_max: false,
            record_strategies: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearningOutcome {
    pub strategies: Vec<MixedStrategy>,
    /// Running average of the strategies over all slots.
    pub time_average: Vec<MixedStrategy>,
    /// `expected_power[t][k]` after slot `t + 1`.
    pub expected_power: Vec<Vec<f64>>,
    /// Full strategies per slot when requested.
    pub strategy_trace: Vec<Vec<MixedStrategy>>,
    pub converged: bool,
    /// Slot at which the detector first fired.
    pub converged_at: Option<u64>,
    pub iterations: u64,
    /// Largest simplex violation seen after any slot.
    pub worst_simplex_error: f64,
}

fn simplex_error(strategies: &[MixedStrategy]) -> f64 {
    strategies
        .iter()
        .map(|s| {
            let sum_err = (s.probs().iter().sum::<f64>() - 1.0).abs();
            let range_err = s.probs().iter().map(|&x| (-x).max(x - 1.0).max(0.0)).fold(0.0, f64::max);
            sum_err.max(range_err)
        })
        .fold(0.0, f64::max)
}

/// Runs learning slots until the sliding-window detector fires: every
/// probability stayed within `window_tol` of its current value over the
/// last `window` slots.
pub fn run_learning(
    net: &NetworkInstance,
    actions: &[ActionSet],
    prices: &PriceVector,
    state: &mut LearningState,
    opts: RunOptions,
) -> LearningOutcome {
    let mut history: VecDeque<Vec<MixedStrategy>> = VecDeque::with_capacity(opts.window + 1);
    let mut expected_power = Vec::new();
    let mut strategy_trace = Vec::new();
    let mut sum: Vec<Vec<f64>> = actions.iter().map(|a| vec![0.0; a.len()]).collect();
    let mut converged_at = None;
    let mut worst = 0.0f64;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        state.step(net, actions, prices);
        iterations += 1;
        worst = worst.max(simplex_error(&state.strategies));
        for (acc, s) in sum.iter_mut().zip(&state.strategies) {
            for (a, p) in acc.iter_mut().zip(s.probs()) {
                *a += p;
            }
        }
        expected_power.push(state.strategies.iter().zip(actions).map(|(s, a)| s.expected_power(a)).collect());
        if opts.record_strategies {
            strategy_trace.push(state.strategies.clone());
        }
        if history.len() == opts.window {
            history.pop_front();
        }
        history.push_back(state.strategies.clone());
        if converged_at.is_none() && history.len() == opts.window {
            let drift = history
                .iter()
                .flat_map(|past| past.iter().zip(&state.strategies).map(|(a, b)| a.max_abs_diff(b)))
                .fold(0.0, f64::max);
            if drift < opts.window_tol {
                converged_at = Some(iterations);
                if !opts.run_to_max {
                    break;
                }
            }
        }
    }

    let n = iterations.max(1) as f64;
    let time_average = sum.into_iter().map(|v| MixedStrategy(v.into_iter().map(|x| x / n).collect())).collect();
    LearningOutcome {
        strategies: state.strategies.clone(),
        time_average,
        expected_power,
        strategy_trace,
        converged: converged_at.is_some(),
        converged_at,
        iterations,
        worst_simplex_error: worst,
    }
}

/// Writes `iteration,k,expected_power,pi_0..pi_{M-1}`, one row per slot
/// and follower. Needs a run with `record_strategies` set.
pub fn write_learning_trace_csv<W: std::io::Write>(outcome: &LearningOutcome, out: &mut W) -> Result<()> {
    let m = outcome.strategies.iter().map(MixedStrategy::len).max().unwrap_or(0);
    write!(out, "iteration,k,expected_power")?;
    for j in 0..m {
        write!(out, ",pi_{j}")?;
    }
    writeln!(out)?;
    for (t, (powers, slot)) in outcome.expected_power.iter().zip(&outcome.strategy_trace).enumerate() {
        for (k, (p, pi)) in powers.iter().zip(slot).enumerate() {
            write!(out, "{},{k},{p:e}", t + 1)?;
            for x in pi.probs() {
                write!(out, ",{x:e}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
