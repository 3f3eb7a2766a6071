//! Acceptance criteria. Each test prints one `PASS` or `FAIL` line with
//! the measured values and then asserts the criterion.

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use femtogame::continuous::{
    best_response, best_response_dynamics, check_supermodularity, check_uniqueness_condition, BrSchedule,
    DynamicsOptions,
};
use femtogame::discrete::{
    expected_follower_payoff, run_learning, ActionSet, LearnerConfig, LearningState, MixedStrategy, RunOptions,
    DEFAULT_ENUMERATION_CAP, SIMPLEX_TOL,
};
use femtogame::harness::{run_experiment, ExperimentId, ExperimentSpec, Scenario};
use femtogame::network::{generate_topology, interference_plus_noise, sinr_macro};
use femtogame::payoff::{cross_second_derivative, follower_payoff, payoff_gradient};
use femtogame::pricing::{
    asymptote_price, discrete_price_sweep, evaluate_prices, high_price_asymptote_power, price_sweep, se_price_search,
    zero_price_equilibrium, PriceGrid, PriceSearchConfig,
};
use femtogame::units::linear_to_db;
use femtogame::verification::{
    enumerate_expected_payoff, grid_best_response, oracle_cross_derivative, oracle_gradient, OracleConfig,
};
use femtogame::{NetworkInstance, PowerProfile, PriceVector, ScenarioParams, TopologyConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Prints the verdict outside the test harness's output capture, then asserts it.
fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    let line = format!("{} C{id:02} {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn net(seed: u64, k: usize) -> NetworkInstance {
    generate_topology(&TopologyConfig::default().with_seed(seed), k, &ScenarioParams::default()).unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_profile(r: &mut ChaCha8Rng, net: &NetworkInstance, frac: f64) -> PowerProfile {
    PowerProfile::from_vec((0..net.num_followers()).map(|k| r.random_range(0.0..=frac * net.power_max(k))).collect())
}

/// Zero with probability 0.2, otherwise log-uniform between 1e8 and 1e17.
fn random_price(r: &mut ChaCha8Rng) -> f64 {
    if r.random_bool(0.2) {
        0.0
    } else {
        10f64.powf(r.random_range(8.0..17.0))
    }
}

fn quiet() -> DynamicsOptions {
    DynamicsOptions { record_trace: false, ..Default::default() }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn with_power(p: &PowerProfile, k: usize, x: f64) -> PowerProfile {
    let mut q = p.clone();
    q.set(k, x);
    q
}

#[test]
fn c01_gradient_correctness() {
    let cfg = OracleConfig::default();
    let start = Instant::now();
    let mut r = rng(101);
    let (mut worst_grad, mut worst_cross) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let net = net(10_000 + i, 6);
        let p = random_profile(&mut r, &net, 1.0);
        let k = r.random_range(0..6);
        let j = (k + r.random_range(1..6)) % 6;
        let prices = PriceVector::uniform(6, random_price(&mut r));

        let g = payoff_gradient(&net, k, &p, &prices);
        let g_ref = oracle_gradient(&net, k, &p, &prices, &cfg);
        worst_grad = worst_grad.max((g - g_ref).abs() / g_ref.abs());

        let c = cross_second_derivative(&net, k, j, &p).unwrap();
        let c_ref = oracle_cross_derivative(&net, k, j, &p, &cfg);
        worst_cross = worst_cross.max((c - c_ref).abs() / c_ref.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient correctness",
        worst_grad <= 1e-5 && worst_cross <= 1e-4 && secs < 5.0,
        format!(
            "100 instances, max relative error gradient {worst_grad:.2e} (tol 1e-5), cross derivative {worst_cross:.2e} (tol 1e-4), {secs:.2} s (limit 5 s)"
        ),
    );
}

#[test]
fn c02_supermodularity() {
    let mut r = rng(102);
    let (mut checked, mut violations, mut boundary) = (0usize, 0usize, 0usize);
    let mut most_negative = 0.0f64;
    for i in 0..1000u64 {
        let net = net(20_000 + i % 50, 6);
        let mut p = random_profile(&mut r, &net, 1.0);
        let k = r.random_range(0..6);
        if i % 2 == 1 {
            // put p_k on the boundary gamma_k = p_a / p_k, nudged by a few ulps
            let g = net.own_gain(k) / interference_plus_noise(&net, k, &p);
            let edge = (net.circuit_power() / g).sqrt();
            if edge <= net.power_max(k) {
                let ulps = r.random_range(-4i64..=4);
                p.set(k, f64::from_bits((edge.to_bits() as i64 + ulps) as u64));
                boundary += 1;
            }
        }
        if !check_supermodularity(&net, k, &p) {
            continue;
        }
        for j in (0..6).filter(|&j| j != k) {
            checked += 1;
            let d = cross_second_derivative(&net, k, j, &p).unwrap();
            most_negative = most_negative.min(d);
            if d < -1e-12 {
                violations += 1;
            }
        }
    }
    verdict(
        2,
        "supermodularity",
        violations == 0 && checked > 0,
        format!(
            "1000 points ({boundary} on the boundary), {checked} (k, j) pairs in the region, {violations} violations, most negative {most_negative:.3e} (floor -1e-12)"
        ),
    );
}

#[test]
fn c03_best_response_oracle_equivalence() {
    let cfg = OracleConfig::default();
    let mut r = rng(103);
    let (mut failures, mut worst) = (0usize, 0.0f64);
    for i in 0..100 {
        let net = net(30_000 + i, 6);
        let p = random_profile(&mut r, &net, 1.0);
        let k = r.random_range(0..6);
        let prices = PriceVector::uniform(6, random_price(&mut r));
        let bisect = best_response(&net, k, &p, &prices, 1e-12).unwrap();
        let grid = grid_best_response(&net, k, &p, &prices, &cfg);
        let gap = (bisect - grid).abs();
        worst = worst.max(gap);
        if gap > 1e-6f64.max(cfg.grid_step(net.power_max(k))) {
            failures += 1;
        }
    }
    verdict(
        3,
        "best-response oracle equivalence",
        failures == 0,
        format!("100 instances against a 1e6-point grid, {failures} failures, largest gap {worst:.3e} W (tol max(1e-6 W, grid step))"),
    );
}

/// Best response of `k` to `opponents` and whether the uniqueness
/// condition holds for `k` at that point.
fn br_point(net: &NetworkInstance, k: usize, opponents: &PowerProfile, prices: &PriceVector) -> (f64, bool) {
    let br = best_response(net, k, opponents, prices, 1e-13).unwrap();
    (br, check_uniqueness_condition(net, &with_power(opponents, k, br))[k])
}

#[test]
fn c04_standard_function_properties() {
    let mut r = rng(104);
    let k_total = 6;
    let (mut pos_n, mut pos_fail) = (0, 0);
    let (mut mono_n, mut mono_fail) = (0, 0);
    let (mut scale_n, mut scale_fail) = (0, 0);
    let mut samples = 0;
    while mono_n < 200 && samples < 20_000 {
        samples += 1;
        let net = net(40_000 + samples % 97, k_total);
        let k = r.random_range(0..k_total);
        let prices =
            PriceVector::uniform(k_total, if r.random_bool(0.5) { 0.0 } else { 10f64.powf(r.random_range(8.0..14.0)) });
        let low = random_profile(&mut r, &net, 0.25);
        let mut high = low.clone();
        for j in 0..k_total {
            high.set(j, low[j] + r.random_range(0.0..=0.25 * net.power_max(j)));
        }
        let (br_low, ok_low) = br_point(&net, k, &low, &prices);
        let (br_high, ok_high) = br_point(&net, k, &high, &prices);
        if ok_low {
            pos_n += 1;
            pos_fail += usize::from(br_low <= 0.0);
            for alpha in [1.5, 2.0, 4.0] {
                let scaled = PowerProfile::from_vec(low.as_slice().iter().map(|x| alpha * x).collect());
                let (br_scaled, _) = br_point(&net, k, &scaled, &prices);
                scale_n += 1;
                scale_fail += usize::from(!(alpha * br_low > br_scaled));
            }
        }
        if ok_low && ok_high {
            mono_n += 1;
            mono_fail += usize::from(br_high < br_low);
        }
    }
    verdict(
        4,
        "standard-function suite",
        pos_fail + mono_fail + scale_fail == 0 && mono_n >= 200,
        format!(
            "positivity {pos_fail}/{pos_n} failures, monotonicity {mono_fail}/{mono_n} ordered pairs, scalability {scale_fail}/{scale_n} (alpha in 1.5, 2, 4)"
        ),
    );
}

#[test]
fn c05_unique_equilibrium_convergence() {
    let opts = DynamicsOptions { tol: 1e-9, ..Default::default() };
    let (mut qualifying, mut failures, mut non_monotone) = (0, 0, 0);
    let (mut worst_spread, mut most_rounds) = (0.0f64, 0usize);
    for seed in 0..60u64 {
        let net = net(50_000 + seed, 6);
        let p_star = zero_price_equilibrium(&net, quiet()).unwrap().final_profile;
        for prices in [PriceVector::zeros(6), asymptote_price(&net, &p_star)] {
            let run =
                |init: &PowerProfile| best_response_dynamics(&net, &prices, init, BrSchedule::default(), opts).unwrap();
            let from_zero = run(&PowerProfile::zeros(6));
            if !check_uniqueness_condition(&net, &from_zero.final_profile).iter().all(|&b| b) {
                continue;
            }
            qualifying += 1;
            let monotone = from_zero.trace.windows(2).all(|w| (0..6).all(|k| w[1].profile[k] >= w[0].profile[k]));
            non_monotone += usize::from(!monotone);
            let mut r = rng(seed);
            let mut inits: Vec<PowerProfile> = (0..10).map(|_| random_profile(&mut r, &net, 1.0)).collect();
            inits.push(PowerProfile::at_max(&net));
            let mut all_ok = from_zero.converged && from_zero.iterations <= 10_000;
            most_rounds = most_rounds.max(from_zero.iterations);
            for init in &inits {
                let rep = run(init);
                most_rounds = most_rounds.max(rep.iterations);
                let spread = rep.final_profile.max_abs_diff(&from_zero.final_profile);
                worst_spread = worst_spread.max(spread);
                all_ok &= rep.converged && rep.iterations <= 10_000 && spread <= 1e-5;
            }
            failures += usize::from(!all_ok);
        }
    }
    verdict(
        5,
        "unique-equilibrium convergence",
        qualifying > 0 && failures == 0 && non_monotone == 0,
        format!(
            "{qualifying} qualifying (instance, price) cases, {failures} failed to agree, largest spread {worst_spread:.2e} W (tol 1e-5), at most {most_rounds} rounds, {non_monotone} non-monotone runs from zero"
        ),
    );
}

/// Longest run of consecutive grid prices whose efficiency stays within
/// 10% of the zero-price value, as `(lambda_lo, lambda_hi)`.
fn plateau(lambdas: &[f64], efficiency: &[f64], at_zero: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    let mut start = None;
    for i in 0..=lambdas.len() {
        let inside = i < lambdas.len() && (efficiency[i] / at_zero - 1.0).abs() <= 0.1;
        match (inside, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                let span = (lambdas[s], lambdas[i - 1]);
                if best.is_none_or(|b| span.1 / span.0 > b.1 / b.0) {
                    best = Some(span);
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

fn interior_peak(revenue: &[f64], at_zero: f64) -> bool {
    let ends = at_zero.max(*revenue.last().unwrap());
    revenue[..revenue.len() - 1].iter().any(|&r| r > ends)
}

#[test]
fn c06_revenue_peak_and_plateau() {
    let (mut peaks, mut plateaus, mut narrowest) = (0, 0, f64::INFINITY);
    for seed in 0..20u64 {
        let net = net(seed, 6);
        let zero = evaluate_prices(&net, &PriceVector::zeros(6), quiet()).unwrap();
        let out = se_price_search(&net, &PriceSearchConfig::default()).unwrap();
        let lambdas: Vec<f64> = out.sweep.iter().map(|p| p.lambda()).collect();
        let revenue: Vec<f64> = out.sweep.iter().map(|p| p.revenue).collect();
        let eff: Vec<f64> = out.sweep.iter().map(|p| p.mean_efficiency).collect();
        peaks += usize::from(interior_peak(&revenue, zero.revenue));
        if let Some((lo, hi)) = plateau(&lambdas, &eff, zero.mean_efficiency) {
            let decades = (hi / lo).log10();
            narrowest = narrowest.min(decades);
            plateaus += usize::from(decades >= 1.0);
        }
    }
    verdict(
        6,
        "revenue peak and plateau",
        peaks >= 19 && plateaus == 20,
        format!("interior revenue maximum in {peaks}/20 seeds (need 19), plateau of at least one decade in {plateaus}/20 (narrowest {narrowest:.1} decades)"),
    );
}

#[test]
fn c07_asymptote_price_quality() {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [2usize, 4, 6] {
        let n = 100;
        let (mut eff_a, mut eff_se, mut rev_a, mut rev_se) = (0.0, 0.0, 0.0, 0.0);
        let (mut sinr0, mut sinr_a, mut sinr_se) = (0.0, 0.0, 0.0);
        for seed in 0..n as u64 {
            let net = net(70_000 + 1000 * k as u64 + seed, k);
            let zero = zero_price_equilibrium(&net, quiet()).unwrap().final_profile;
            let a = evaluate_prices(&net, &asymptote_price(&net, &zero), quiet()).unwrap();
            let se = se_price_search(&net, &PriceSearchConfig::default()).unwrap().best;
            eff_a += a.mean_efficiency;
            eff_se += se.mean_efficiency;
            rev_a += a.revenue;
            rev_se += se.revenue;
            sinr0 += linear_to_db(sinr_macro(&net, &zero));
            sinr_a += linear_to_db(a.macro_sinr);
            sinr_se += linear_to_db(se.macro_sinr);
        }
        let m = n as f64;
        ok &= eff_a >= eff_se && rev_a <= rev_se;
        parts.push(format!(
            "K={k}: efficiency {:.3e} vs {:.3e}, revenue {:.3e} vs {:.3e}, MU SINR {:.2}/{:.2}/{:.2} dB (zero/asymptote/SE)",
            eff_a / m,
            eff_se / m,
            rev_a / m,
            rev_se / m,
            sinr0 / m,
            sinr_a / m,
            sinr_se / m
        ));
    }
    verdict(
        7,
        "asymptote price quality",
        ok,
        format!("asymptote vs SE means over 100 topologies; {}", parts.join("; ")),
    );
}

#[test]
fn c08_high_price_asymptote() {
    let (mut matched, mut zeros, mut total) = (0, 0, 0);
    let mut errors = Vec::new();
    for seed in 0..50u64 {
        let net = net(80_000 + seed, 6);
        let p_star = zero_price_equilibrium(&net, quiet()).unwrap().final_profile;
        let prices = asymptote_price(&net, &p_star).scaled(100.0);
        let p = evaluate_prices(&net, &prices, quiet()).unwrap().profile;
        for k in 0..6 {
            total += 1;
            let predicted = high_price_asymptote_power(&net, k, prices[k]);
            if p[k] == 0.0 {
                zeros += 1;
                matched += 1;
            } else {
                let rel = ((p[k] - predicted) / predicted).abs();
                errors.push(rel);
                matched += usize::from(rel <= 0.2);
            }
        }
    }
    let share = matched as f64 / total as f64;
    verdict(
        8,
        "high-price asymptote",
        share >= 0.9,
        format!(
            "{matched}/{total} followers within 20% or silent ({zeros} silent), share {share:.3} (need 0.9), median relative error of the rest {:.3}",
            median(errors)
        ),
    );
}

#[test]
fn c09_discrete_learning_convergence() {
    let learner = LearnerConfig::default();
    let opts = RunOptions::from_config(&learner);
    let (mut converged, mut simplex_ok) = (0, 0);
    let mut slots = Vec::new();
    for seed in 0..100u64 {
        let net = net(90_000 + seed, 6);
        let actions = ActionSet::for_network(&net, 6).unwrap();
        let mut state = LearningState::new(&actions, &learner, seed);
        let out = run_learning(&net, &actions, &PriceVector::zeros(6), &mut state, opts);
        if let Some(t) = out.converged_at.filter(|&t| t <= 600) {
            converged += 1;
            slots.push(t as f64);
        }
        simplex_ok += usize::from(out.worst_simplex_error <= SIMPLEX_TOL);
    }
    verdict(
        9,
        "discrete learning convergence",
        converged >= 90 && simplex_ok == 100,
        format!(
            "{converged}/100 runs met the detector within 600 slots (need 90), median slot {:.0}, simplex invariants held in {simplex_ok}/100 runs at every slot",
            if slots.is_empty() { f64::NAN } else { median(slots) }
        ),
    );
}

#[test]
fn c10_discrete_expected_payoff_oracle() {
    let mut r = rng(110);
    let (mut worst_oracle, mut worst_linear) = (0.0f64, 0.0f64);
    let mut degenerate_exact = true;
    for seed in 0..50u64 {
        let net = net(100_000 + seed, 3);
        let actions = ActionSet::for_network(&net, 3).unwrap();
        let strategies: Vec<MixedStrategy> = (0..3)
            .map(|_| {
                let w: Vec<f64> = (0..3).map(|_| r.random_range(0.0..1.0)).collect();
                let s: f64 = w.iter().sum();
                MixedStrategy::new(vec![w[0] / s, w[1] / s, 1.0 - w[0] / s - w[1] / s]).unwrap()
            })
            .collect();
        let prices = PriceVector::uniform(3, random_price(&mut r));
        for k in 0..3 {
            let fast =
                expected_follower_payoff(&net, k, &strategies, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
            let slow =
                enumerate_expected_payoff(&net, k, &strategies, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
            worst_oracle = worst_oracle.max((fast - slow).abs());

            // own-strategy expansion over pure actions
            let pure: Vec<f64> = (0..3)
                .map(|j| {
                    let mut s = strategies.clone();
                    s[k] = MixedStrategy::degenerate(3, j);
                    expected_follower_payoff(&net, k, &s, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap()
                })
                .collect();
            let expanded: f64 = strategies[k].probs().iter().zip(&pure).map(|(p, u)| p * u).sum();
            worst_linear = worst_linear.max((expanded - fast).abs() / fast.abs().max(f64::MIN_POSITIVE));
        }
        // a fully pure profile reproduces the pointwise payoff exactly
        let picks: Vec<usize> = (0..3).map(|_| r.random_range(0..3)).collect();
        let pure: Vec<MixedStrategy> = picks.iter().map(|&j| MixedStrategy::degenerate(3, j)).collect();
        let profile = PowerProfile::from_vec(picks.iter().zip(&actions).map(|(&j, a)| a.power(j)).collect());
        for k in 0..3 {
            let e = expected_follower_payoff(&net, k, &pure, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
            degenerate_exact &= e.to_bits() == follower_payoff(&net, k, &profile, &prices).to_bits();
        }
    }
    verdict(
        10,
        "discrete expected-payoff oracle",
        worst_oracle <= 1e-12 && degenerate_exact && worst_linear <= 1e-12,
        format!(
            "K=3 M=3: largest |fast - enumeration| {worst_oracle:.1e} (tol 1e-12), pure profiles exact: {degenerate_exact}, own-strategy expansion relative error {worst_linear:.1e}"
        ),
    );
}

/// Shared discrete and continuous sweeps for the last two discrete criteria.
struct DiscreteStudy {
    interior: Vec<bool>,
    /// Per seed: median over plateau prices of discrete / continuous efficiency.
    ratios: Vec<f64>,
}

fn discrete_study() -> &'static DiscreteStudy {
    static STUDY: OnceLock<DiscreteStudy> = OnceLock::new();
    STUDY.get_or_init(|| {
        let learner = LearnerConfig::default();
        let mc_trials = 5;
        let mut interior = Vec::new();
        let mut ratios = Vec::new();
        for seed in 0..20u64 {
            let net = net(seed, 6);
            let actions = ActionSet::for_network(&net, 6).unwrap();
            let p_star = zero_price_equilibrium(&net, quiet()).unwrap().final_profile;
            let grid = PriceGrid { count: 40, ..PriceGrid::covering(&net, &asymptote_price(&net, &p_star)) };
            let lambdas = grid.points();
            let learn_seed = seed * 1000;
            let discrete = discrete_price_sweep(
                &net,
                &actions,
                &learner,
                &lambdas,
                mc_trials,
                learn_seed,
                DEFAULT_ENUMERATION_CAP,
            )
            .unwrap();
            let revenue: Vec<f64> = discrete.iter().map(|p| p.revenue).collect();
            // expected revenue at zero price is zero
            interior.push(interior_peak(&revenue, 0.0));

            let continuous = price_sweep(&net, &lambdas, quiet()).unwrap();
            let at_zero = evaluate_prices(&net, &PriceVector::zeros(6), quiet()).unwrap().mean_efficiency;
            let r: Vec<f64> = continuous
                .iter()
                .zip(&discrete)
                .filter(|(c, _)| (c.mean_efficiency / at_zero - 1.0).abs() <= 0.1)
                .map(|(c, d)| d.mean_efficiency / c.mean_efficiency)
                .collect();
            ratios.push(median(r));
        }
        DiscreteStudy { interior, ratios }
    })
}

#[test]
fn c11_discrete_revenue_peak() {
    let study = discrete_study();
    let peaks = study.interior.iter().filter(|&&b| b).count();
    verdict(
        11,
        "discrete revenue peak",
        peaks * 5 >= study.interior.len() * 4,
        format!("interior expected-revenue maximum in {peaks}/{} seeds (need 80%)", study.interior.len()),
    );
}

#[test]
fn c12_discrete_continuous_efficiency_gap() {
    let study = discrete_study();
    let m = median(study.ratios.clone());
    let lo = study.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = study.ratios.iter().cloned().fold(0.0, f64::max);
    verdict(
        12,
        "discrete-vs-continuous efficiency gap",
        (0.3..=0.7).contains(&m),
        format!("median seed ratio {m:.3} (need [0.3, 0.7]), per-seed range [{lo:.3}, {hi:.3}] over 20 seeds"),
    );
}

#[test]
fn c13_determinism() {
    let mut identical = 0;
    let mut notes = Vec::new();
    for id in ExperimentId::ALL {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let spec = |dir: &std::path::Path| ExperimentSpec {
            id,
            trials: 2,
            seed_base: 42,
            scenario: Scenario::default(),
            output: dir.join(format!("{id}.csv")),
        };
        let (sa, sb) = (run_experiment(&spec(a.path())).unwrap(), run_experiment(&spec(b.path())).unwrap());
        let same = std::fs::read(&sa.output).unwrap() == std::fs::read(&sb.output).unwrap()
            && std::fs::read(&sa.summary).unwrap() == std::fs::read(&sb.summary).unwrap();
        identical += usize::from(same);
        notes.push(format!("{id} {} rows", sa.rows));
    }
    verdict(
        13,
        "determinism",
        identical == ExperimentId::ALL.len(),
        format!("{identical}/{} experiments byte-identical on rerun ({})", ExperimentId::ALL.len(), notes.join(", ")),
    );
}
