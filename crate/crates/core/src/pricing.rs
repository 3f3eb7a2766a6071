//! Leader-side pricing: zero-price equilibrium, the asymptote-intersection
//! price, revenue-maximising price search, and the heuristic price update
//! used with the discrete game.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuous::{best_response_dynamics, BrSchedule, DynamicsOptions, EquilibriumReport};
use crate::discrete::{
    expected_cross_tier_interference, expected_efficiencies, expected_leader_revenue, expected_macro_sinr,
    run_learning, ActionSet, LearnerConfig, LearningState, MixedStrategy, RunOptions,
};
use crate::error::{Error, Result};
use crate::network::{sinr_follower, sinr_macro, NetworkInstance};
use crate::payoff::{efficiency, leader_revenue, PowerProfile, PriceVector};

/// Equilibrium of the follower game with every price at zero, reached by
/// best-response dynamics from all-zero powers.
pub fn zero_price_equilibrium(net: &NetworkInstance, opts: DynamicsOptions) -> Result<EquilibriumReport> {
    let k = net.num_followers();
    best_response_dynamics(net, &PriceVector::zeros(k), &PowerProfile::zeros(k), BrSchedule::default(), opts)
}

/// Residual of the zero-price first-order condition
/// `(1 + gamma) ln(1 + gamma) - gamma - G_k p_a`, divided by `G_k p_a`.
pub fn zero_price_condition_residual(net: &NetworkInstance, k: usize, p: &PowerProfile) -> f64 {
    let gamma = sinr_follower(net, k, p);
    let g_pa = gamma / p[k] * net.circuit_power();
    ((1.0 + gamma) * gamma.ln_1p() - gamma - g_pa) / g_pa
}

/// Per-link price at which the low- and high-price asymptotes of the
/// payment intersect: `W / ((p*_k + p_a)(N_k + h_{0,k} p_0))`.
pub fn asymptote_price(net: &NetworkInstance, p_star: &PowerProfile) -> PriceVector {
    let prices = (0..net.num_followers())
        .map(|k| net.bandwidth() / ((p_star[k] + net.circuit_power()) * net.background_interference(k)))
        .collect();
    PriceVector::from_vec_unchecked(prices)
}

/// High-price approximation of the equilibrium power,
/// `W / (lambda_k (N_k + h_{0,k} p_0)) - p_a`. May be negative.
pub fn high_price_asymptote_power(net: &NetworkInstance, k: usize, lambda: f64) -> f64 {
    net.bandwidth() / (lambda * net.background_interference(k)) - net.circuit_power()
}

/// Low-price approximation of follower `k`'s payment, `h_{k,0} p*_k lambda_k`.
pub fn low_price_payment(net: &NetworkInstance, k: usize, p_star: &PowerProfile, lambda: f64) -> f64 {
    net.gain_to_macro(k) * p_star[k] * lambda
}

/// Price above which follower `k` transmits nothing even when everybody
/// else is silent: `W G_k^max / (p_a h_{k,0})`.
pub fn dropout_price(net: &NetworkInstance, k: usize) -> f64 {
    let g_max = net.own_gain(k) / net.background_interference(k);
    net.bandwidth() * g_max / (net.circuit_power() * net.gain_to_macro(k))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PriceMode {
    #[default]
    UniformPrice,
    PerLink,
}

/// Log-spaced price grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl PriceGrid {
    pub fn validate(&self) -> Result<()> {
        if !(self.min > 0.0 && self.min.is_finite() && self.max > self.min && self.max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "price grid needs 0 < min < max, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count < 2 {
            return Err(Error::InvalidConfig("price grid needs at least two points".into()));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let (a, b) = (self.min.ln(), self.max.ln());
        let n = self.count - 1;
        (0..self.count)
            .map(|i| match i {
                0 => self.min,
                i if i == n => self.max,
                i => (a + (b - a) * i as f64 / n as f64).exp(),
            })
            .collect()
    }

    /// From `1e-3 min_k lambda^a_k` to the larger of `1e3 max_k lambda^a_k`
    /// and ten times the largest dropout price, with at least 60 points and
    /// about eight per decade.
    pub fn covering(net: &NetworkInstance, asymptote: &PriceVector) -> Self {
        let fold = |init: f64, f: fn(f64, f64) -> f64| asymptote.as_slice().iter().copied().fold(init, f);
        let min = 1e-3 * fold(f64::INFINITY, f64::min);
        let cutoff = (0..net.num_followers()).map(|k| dropout_price(net, k)).fold(0.0, f64::max);
        let max = (1e3 * fold(0.0, f64::max)).max(10.0 * cutoff);
        let decades = (max / min).log10();
        Self { min, max, count: ((8.0 * decades).ceil() as usize).max(60) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriceSearchConfig {
    pub mode: PriceMode,
    /// `None` selects `PriceGrid::covering`.
    pub grid: Option<PriceGrid>,
    /// Relative width of the final bracket around the best price.
    pub bisection_refinement_tol: f64,
    /// Learning runs averaged per price in discrete sweeps.
    pub mc_trials: usize,
    /// Coordinate-ascent passes in per-link mode.
    pub max_passes: usize,
    pub dynamics: DynamicsOptions,
}

impl Default for PriceSearchConfig {
    fn default() -> Self {
        Self {
            mode: PriceMode::UniformPrice,
            grid: None,
            bisection_refinement_tol: 1e-6,
            mc_trials: 1,
            max_passes: 4,
            dynamics: DynamicsOptions { record_trace: false, ..Default::default() },
        }
    }
}

impl PriceSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if !(self.bisection_refinement_tol > 0.0 && self.bisection_refinement_tol < 1.0) {
            return Err(Error::InvalidConfig("refinement tolerance must lie in (0, 1)".into()));
        }
        if self.mc_trials == 0 {
            return Err(Error::InvalidConfig("mc_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Follower equilibrium and leader outcome at one price vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePoint {
    pub prices: PriceVector,
    pub revenue: f64,
    pub mean_efficiency: f64,
    pub macro_sinr: f64,
    pub profile: PowerProfile,
    pub converged: bool,
    pub rounds: usize,
}

impl PricePoint {
    /// Uniform price, or the first link's price otherwise.
    pub fn lambda(&self) -> f64 {
        self.prices[0]
    }
}

pub fn mean_efficiency(net: &NetworkInstance, p: &PowerProfile) -> f64 {
    let k = net.num_followers();
    (0..k).map(|i| efficiency(net, i, p)).sum::<f64>() / k as f64
}

/// Solves the follower game at `prices` from all-zero powers.
pub fn evaluate_prices(net: &NetworkInstance, prices: &PriceVector, opts: DynamicsOptions) -> Result<PricePoint> {
    let k = net.num_followers();
    let report = best_response_dynamics(net, prices, &PowerProfile::zeros(k), BrSchedule::default(), opts)?;
    let p = report.final_profile;
    Ok(PricePoint {
        prices: prices.clone(),
        revenue: leader_revenue(net, &p, prices),
        mean_efficiency: mean_efficiency(net, &p),
        macro_sinr: sinr_macro(net, &p),
        converged: report.converged,
        rounds: report.iterations,
        profile: p,
    })
}

/// Uniform-price sweep; points are evaluated in parallel and returned in
/// input order.
pub fn price_sweep(net: &NetworkInstance, lambdas: &[f64], opts: DynamicsOptions) -> Result<Vec<PricePoint>> {
    let k = net.num_followers();
    lambdas.par_iter().map(|&l| evaluate_prices(net, &PriceVector::uniform(k, l), opts)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: PricePoint,
    /// The best grid point sat on the first or last grid value.
    pub at_boundary: bool,
    pub grid: PriceGrid,
    /// Uniform-price grid evaluations, in grid order.
    pub sweep: Vec<PricePoint>,
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximisation of `f` over `log lambda` in `[lo, hi]`.
fn golden_max<F: FnMut(f64) -> Result<(f64, PricePoint)>>(
    lo: f64,
    hi: f64,
    tol: f64,
    mut f: F,
) -> Result<(f64, PricePoint)> {
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let mut f1 = f(x1.exp())?;
    let mut f2 = f(x2.exp())?;
    // bracket width in log space approximates relative width in lambda
    while b - a > tol {
        if f1.0 >= f2.0 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1.exp())?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2.exp())?;
        }
    }
    Ok(if f1.0 >= f2.0 { f1 } else { f2 })
}

fn refine_cell(
    grid: &[f64],
    best: usize,
    tol: f64,
    f: impl FnMut(f64) -> Result<(f64, PricePoint)>,
) -> Result<(f64, PricePoint)> {
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    golden_max(lo, hi, tol, f)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Revenue-maximising price: grid scan of a uniform price, golden-section
/// refinement around the best grid cell, then (in per-link mode)
/// coordinate ascent over individual link prices.
pub fn se_price_search(net: &NetworkInstance, cfg: &PriceSearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let k = net.num_followers();
    let grid = match cfg.grid {
        Some(g) => g,
        None => {
            let p_star = zero_price_equilibrium(net, cfg.dynamics)?.final_profile;
            PriceGrid::covering(net, &asymptote_price(net, &p_star))
        }
    };
    let lambdas = grid.points();
    let sweep = price_sweep(net, &lambdas, cfg.dynamics)?;
    let revenues: Vec<f64> = sweep.iter().map(|s| s.revenue).collect();
    let i = argmax(&revenues);
    let at_boundary = i == 0 || i == lambdas.len() - 1;

    let uniform = |l: f64| {
        let pt = evaluate_prices(net, &PriceVector::uniform(k, l), cfg.dynamics)?;
        Ok((pt.revenue, pt))
    };
    let (_, refined) = refine_cell(&lambdas, i, cfg.bisection_refinement_tol, uniform)?;
    let mut best = if refined.revenue >= sweep[i].revenue { refined } else { sweep[i].clone() };

    if cfg.mode == PriceMode::PerLink {
        for _ in 0..cfg.max_passes {
            let start = best.revenue;
            for link in 0..k {
                let base = best.prices.clone();
                let with_link = |l: f64| {
                    let mut v = base.as_slice().to_vec();
                    v[link] = l;
                    let pt = evaluate_prices(net, &PriceVector::from_vec_unchecked(v), cfg.dynamics)?;
                    Ok((pt.revenue, pt))
                };
                let scan: Vec<(f64, PricePoint)> = lambdas.par_iter().map(|&l| with_link(l)).collect::<Result<_>>()?;
                let vals: Vec<f64> = scan.iter().map(|s| s.0).collect();
                let j = argmax(&vals);
                let (_, pt) = refine_cell(&lambdas, j, cfg.bisection_refinement_tol, with_link)?;
                let candidate = if pt.revenue >= scan[j].0 { pt } else { scan[j].1.clone() };
                if candidate.revenue > best.revenue {
                    best = candidate;
                }
            }
            if best.revenue - start <= cfg.bisection_refinement_tol * start.abs() {
                break;
            }
        }
    }
    Ok(SearchOutcome { best, at_boundary, grid, sweep })
}

/// Result of one heuristic price update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceStep {
    pub prices: PriceVector,
    /// Links whose expected power was zero; their price is set to 0.
    pub zero_power: Vec<bool>,
}

/// Price that makes each follower's expected net payoff zero at its
/// current mixed strategy: expected efficiency over expected payment base.
pub fn expected_efficiency_price(
    net: &NetworkInstance,
    strategies: &[MixedStrategy],
    actions: &[ActionSet],
    cap: u128,
) -> Result<PriceStep> {
    let num = expected_efficiencies(net, strategies, actions, cap)?;
    let mut zero_power = vec![false; num.len()];
    let prices = (0..num.len())
        .map(|k| {
            let base = net.gain_to_macro(k) * strategies[k].expected_power(&actions[k]);
            if base > 0.0 {
                num[k] / base
            } else {
                zero_power[k] = true;
                0.0
            }
        })
        .collect();
    Ok(PriceStep { prices: PriceVector::from_vec_unchecked(prices), zero_power })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub iteration: usize,
    pub prices: PriceVector,
    pub expected_macro_sinr: f64,
    pub cross_tier_interference: f64,
    pub learning_converged: bool,
    pub learning_iterations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub prices: PriceVector,
    pub strategies: Vec<MixedStrategy>,
    /// Entry 0 is the zero-price run; entry `i` follows the `i`-th update.
    pub trace: Vec<OuterIteration>,
    pub zero_power: Vec<bool>,
    /// The loop stopped on the iteration cap with the SINR target unmet.
    pub cap_reached: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub max_outer: usize,
    /// Report the time-averaged strategy to the leader instead of the final one.
    pub report_time_average: bool,
    pub enumeration_cap: u128,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self { max_outer: 20, report_time_average: false, enumeration_cap: crate::discrete::DEFAULT_ENUMERATION_CAP }
    }
}

/// Heuristic leader loop for the discrete game: learn at the current
/// prices, and while the expected macro SINR stays below `threshold`,
/// price each link at its expected efficiency per unit of expected
/// interference and learn again from the current strategies.
pub fn run_heuristic_pricing(
    net: &NetworkInstance,
    actions: &[ActionSet],
    learner: &LearnerConfig,
    threshold: f64,
    cfg: &HeuristicConfig,
    seed: u64,
) -> Result<HeuristicOutcome> {
    learner.validate()?;
    if !(threshold.is_finite() && threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!("SINR threshold must be non-negative, got {threshold}")));
    }
    let k = net.num_followers();
    let mut prices = PriceVector::zeros(k);
    let mut state = LearningState::new(actions, learner, seed);
    let opts = RunOptions::from_config(learner);
    let mut trace = Vec::new();
    let mut zero_power = vec![false; k];
    let mut reported;
    let mut iteration = 0;
    loop {
        let out = run_learning(net, actions, &prices, &mut state, opts);
        reported = if cfg.report_time_average { out.time_average } else { out.strategies };
        let sinr = expected_macro_sinr(net, &reported, actions);
        trace.push(OuterIteration {
            iteration,
            prices: prices.clone(),
            expected_macro_sinr: sinr,
            cross_tier_interference: expected_cross_tier_interference(net, &reported, actions),
            learning_converged: out.converged,
            learning_iterations: out.iterations,
        });
        if sinr >= threshold {
            return Ok(HeuristicOutcome { prices, strategies: reported, trace, zero_power, cap_reached: false });
        }
        if iteration == cfg.max_outer {
            return Ok(HeuristicOutcome { prices, strategies: reported, trace, zero_power, cap_reached: true });
        }
        let step = expected_efficiency_price(net, &reported, actions, cfg.enumeration_cap)?;
        prices = step.prices;
        zero_power = step.zero_power;
        state.restart_clock();
        iteration += 1;
    }
}

/// Learned-strategy outcome at one price vector, averaged over learning runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePricePoint {
    /// Mean of the link prices; the price itself for a uniform vector.
    pub lambda: f64,
    pub revenue: f64,
    pub mean_efficiency: f64,
    pub macro_sinr: f64,
    pub converged_runs: usize,
    pub runs: usize,
    /// Most slots any of the runs used.
    pub max_iterations: u64,
}

/// Expected revenue over the learned mixed strategies and
/// expected efficiency at `prices`, averaged over `trials` learning runs
/// seeded `seed..seed+trials`.
pub fn evaluate_discrete_prices(
    net: &NetworkInstance,
    actions: &[ActionSet],
    learner: &LearnerConfig,
    prices: &PriceVector,
    trials: usize,
    seed: u64,
    cap: u128,
) -> Result<DiscretePricePoint> {
    if trials == 0 {
        return Err(Error::InvalidConfig("need at least one learning run per price".into()));
    }
    let k = net.num_followers();
    let opts = RunOptions::from_config(learner);
    let lambda = prices.as_slice().iter().sum::<f64>() / k as f64;
    let mut point = DiscretePricePoint {
        lambda,
        revenue: 0.0,
        mean_efficiency: 0.0,
        macro_sinr: 0.0,
        converged_runs: 0,
        runs: trials,
        max_iterations: 0,
    };
    for t in 0..trials as u64 {
        let mut state = LearningState::new(actions, learner, seed.wrapping_add(t));
        let out = run_learning(net, actions, prices, &mut state, opts);
        let eff = expected_efficiencies(net, &out.strategies, actions, cap)?;
        point.revenue += expected_leader_revenue(net, &out.strategies, actions, prices);
        point.mean_efficiency += eff.iter().sum::<f64>() / k as f64;
        point.macro_sinr += expected_macro_sinr(net, &out.strategies, actions);
        point.converged_runs += usize::from(out.converged);
        point.max_iterations = point.max_iterations.max(out.iterations);
    }
    let n = trials as f64;
    point.revenue /= n;
    point.mean_efficiency /= n;
    point.macro_sinr /= n;
    Ok(point)
}

/// Uniform-price sweep of the discrete game, evaluated in parallel and
/// returned in input order.
pub fn discrete_price_sweep(
    net: &NetworkInstance,
    actions: &[ActionSet],
    learner: &LearnerConfig,
    lambdas: &[f64],
    trials: usize,
    seed: u64,
    cap: u128,
) -> Result<Vec<DiscretePricePoint>> {
    learner.validate()?;
    let k = net.num_followers();
    lambdas
        .par_iter()
        .map(|&l| evaluate_discrete_prices(net, actions, learner, &PriceVector::uniform(k, l), trials, seed, cap))
        .collect()
}

/// Writes `lambda,revenue,mean_efficiency,macro_sinr,rounds,converged`.
pub fn write_sweep_csv<W: std::io::Write>(points: &[PricePoint], out: &mut W) -> Result<()> {
    writeln!(out, "lambda,revenue,mean_efficiency,macro_sinr,rounds,converged")?;
    for p in points {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{},{}",
            p.lambda(),
            p.revenue,
            p.mean_efficiency,
            p.macro_sinr,
            p.rounds,
            p.converged
        )?;
    }
    Ok(())
}

/// Writes `lambda,revenue,mean_efficiency,macro_sinr,converged_runs,runs`.
pub fn write_discrete_sweep_csv<W: std::io::Write>(points: &[DiscretePricePoint], out: &mut W) -> Result<()> {
    writeln!(out, "lambda,revenue,mean_efficiency,macro_sinr,converged_runs,runs")?;
    for p in points {
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{},{}",
            p.lambda, p.revenue, p.mean_efficiency, p.macro_sinr, p.converged_runs, p.runs
        )?;
    }
    Ok(())
}
