//! Continuous follower game: best response, asynchronous best-response
//! dynamics, and equilibrium diagnostics.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{interference_plus_noise, sinr_follower, NetworkInstance};
use crate::payoff::{follower_payoff, FollowerView, PowerProfile, PriceVector};

/// Power tolerance of the best-response bisection, in watts.
pub const DEFAULT_BR_TOL: f64 = 1e-9;
/// Early exit when `|gradient|` falls below this fraction of `W G_k / p_a`.
pub const GRADIENT_REL_TOL: f64 = 1e-9;
pub const MAX_BISECTION_STEPS: usize = 500;

impl FollowerView {
    /// Unique maximizer of the payoff over `[0, p_max]`.
    ///
    /// The payoff is strictly quasiconcave in own power so its gradient
    /// changes sign at most once, from positive to negative.
    pub fn best_response(&self, tol: f64) -> std::result::Result<f64, usize> {
        let at_zero = self.gradient_at_zero();
        if at_zero.is_nan() {
            return Err(0);
        }
        if at_zero <= 0.0 {
            return Ok(0.0);
        }
        let at_max = self.gradient(self.power_max);
        if at_max.is_nan() {
            return Err(0);
        }
        if at_max >= 0.0 {
            return Ok(self.power_max);
        }
        let gtol = GRADIENT_REL_TOL * self.gradient_scale();
        let (mut lo, mut hi) = (0.0, self.power_max);
        let mut root = None;
        for _ in 0..MAX_BISECTION_STEPS {
            if hi - lo <= tol {
                root = Some(0.5 * (lo + hi));
                break;
            }
            let mid = 0.5 * (lo + hi);
            let g = self.gradient(mid);
            if g.is_nan() {
                return Err(MAX_BISECTION_STEPS);
            }
            if g.abs() <= gtol {
                root = Some(mid);
                break;
            }
            if g > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = root.ok_or(MAX_BISECTION_STEPS)?;
        // ties go to the smaller power
        if self.payoff(0.0) >= self.payoff(root) {
            Ok(0.0)
        } else {
            Ok(root)
        }
    }
}

/// Best response of follower `k` to the opponents in `profile`; the entry
/// of `profile` at `k` is ignored.
pub fn best_response(
    net: &NetworkInstance,
    k: usize,
    profile: &PowerProfile,
    prices: &PriceVector,
    tol: f64,
) -> Result<f64> {
    net.check_follower(k)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidConfig(format!("best-response tolerance must be positive, got {tol}")));
    }
    FollowerView::new(net, k, profile, prices)
        .best_response(tol)
        .map_err(|iterations| Error::BisectionFailed { follower: k, iterations })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleMode {
    /// Followers update in index order, each seeing the latest powers.
    #[default]
    RoundRobin,
    /// A fresh random order every round.
    RandomPermutation,
    /// Random single-follower wake-ups; a round ends once every follower has woken at least once.
    IndependentClocks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BrSchedule {
    pub mode: ScheduleMode,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsOptions {
    /// Stop when the per-round infinity-norm change falls below this (watts).
    pub tol: f64,
    pub br_tol: f64,
    pub max_rounds: usize,
    pub record_trace: bool,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { tol: 1e-7, br_tol: DEFAULT_BR_TOL, max_rounds: 10_000, record_trace: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub profile: PowerProfile,
    pub payoffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub final_profile: PowerProfile,
    /// Completed rounds.
    pub iterations: usize,
    pub converged: bool,
    /// Round 0 holds the initial profile. Only the first and last entries
    /// are kept when trace recording is off.
    pub trace: Vec<TraceEntry>,
    /// Infinity-norm change over the last round, in watts.
    pub max_residual: f64,
}

fn snapshot(net: &NetworkInstance, round: usize, p: &PowerProfile, prices: &PriceVector) -> TraceEntry {
    TraceEntry {
        round,
        profile: p.clone(),
        payoffs: (0..net.num_followers()).map(|k| follower_payoff(net, k, p, prices)).collect(),
    }
}

/// Asynchronous best-response dynamics: each round every follower replaces
/// its power by its best response to the latest powers of the others.
pub fn best_response_dynamics(
    net: &NetworkInstance,
    prices: &PriceVector,
    init: &PowerProfile,
    schedule: BrSchedule,
    opts: DynamicsOptions,
) -> Result<EquilibriumReport> {
    init.validate(net)?;
    if prices.len() != net.num_followers() {
        return Err(Error::InvalidConfig(format!("{} prices for {} followers", prices.len(), net.num_followers())));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::InvalidConfig(format!("convergence tolerance must be positive, got {}", opts.tol)));
    }
    let k_count = net.num_followers();
    let mut rng = ChaCha8Rng::seed_from_u64(schedule.rng_seed);
    let mut order: Vec<usize> = (0..k_count).collect();
    let mut p = init.clone();
    let mut trace = vec![snapshot(net, 0, &p, prices)];
    let mut converged = false;
    let mut residual = f64::INFINITY;
    let mut rounds = 0;

    while rounds < opts.max_rounds {
        let before = p.clone();
        match schedule.mode {
            ScheduleMode::RoundRobin => {
                for k in 0..k_count {
                    let br = best_response(net, k, &p, prices, opts.br_tol)?;
                    p.set(k, br);
                }
            }
            ScheduleMode::RandomPermutation => {
                order.shuffle(&mut rng);
                for &k in &order {
                    let br = best_response(net, k, &p, prices, opts.br_tol)?;
                    p.set(k, br);
                }
            }
            ScheduleMode::IndependentClocks => {
                let mut woken = vec![false; k_count];
                let mut remaining = k_count;
                while remaining > 0 {
                    let k = rng.random_range(0..k_count);
                    let br = best_response(net, k, &p, prices, opts.br_tol)?;
                    p.set(k, br);
                    if !woken[k] {
                        woken[k] = true;
                        remaining -= 1;
                    }
                }
            }
        }
        rounds += 1;
        residual = p.max_abs_diff(&before);
        if opts.record_trace {
            trace.push(snapshot(net, rounds, &p, prices));
        }
        if residual < opts.tol {
            converged = true;
            break;
        }
    }
    if !opts.record_trace && rounds > 0 {
        trace.push(snapshot(net, rounds, &p, prices));
    }
    Ok(EquilibriumReport { final_profile: p, iterations: rounds, converged, trace, max_residual: residual })
}

/// Writes the trace as CSV with columns `round,k,p_k,u_k,gamma_k`.
pub fn write_trace_csv<W: Write>(net: &NetworkInstance, report: &EquilibriumReport, out: &mut W) -> Result<()> {
    writeln!(out, "round,k,p_k,u_k,gamma_k")?;
    for entry in &report.trace {
        for k in 0..net.num_followers() {
            let gamma = sinr_follower(net, k, &entry.profile);
            writeln!(out, "{},{},{},{},{}", entry.round, k, entry.profile[k], entry.payoffs[k], gamma)?;
        }
    }
    Ok(())
}

/// Per-follower uniqueness test
/// `h_kk p_k / (N_k + h_0k p_0 + sum_j h_jk p_j) >= p_a / p_k`, where the sum
/// runs over every follower including `k` itself. False whenever `p_k = 0`.
pub fn check_uniqueness_condition(net: &NetworkInstance, p: &PowerProfile) -> Vec<bool> {
    (0..net.num_followers())
        .map(|k| {
            let pk = p[k];
            if pk <= 0.0 {
                return false;
            }
            let own = net.own_gain(k) * pk;
            let denominator = interference_plus_noise(net, k, p) + own;
            own / denominator >= net.circuit_power() / pk
        })
        .collect()
}

/// Increasing-differences test `gamma_k >= p_a / p_k`. False at `p_k = 0`.
///
/// Evaluated as `p_k gamma_k >= p_a` with the same arithmetic as the cross
/// derivative's sign factor, so a passing point never yields a negative
/// derivative through rounding.
pub fn check_supermodularity(net: &NetworkInstance, k: usize, p: &PowerProfile) -> bool {
    let pk = p[k];
    let view = FollowerView::new(net, k, p, &PriceVector::zeros(net.num_followers()));
    pk > 0.0 && pk * view.sinr(pk) >= net.circuit_power()
}

/// Projected-gradient gap of follower `k`: `|g|` in the interior, the
/// positive part of `g` at zero power and of `-g` at `p_max`.
pub fn stationarity_gap(net: &NetworkInstance, k: usize, p: &PowerProfile, prices: &PriceVector) -> f64 {
    let v = FollowerView::new(net, k, p, prices);
    let g = v.gradient(p[k]);
    if p[k] <= 0.0 {
        g.max(0.0)
    } else if p[k] >= v.power_max {
        (-g).max(0.0)
    } else {
        g.abs()
    }
}
