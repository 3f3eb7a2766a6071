//! Production routines against their independent oracles.

mod common;

use common::{random_drop, random_profile, random_strategies, rng};
use femtogame::continuous::best_response;
use femtogame::discrete::{expected_follower_payoff, ActionSet, DEFAULT_ENUMERATION_CAP};
use femtogame::payoff::follower_payoff;
use femtogame::verification::{enumerate_expected_payoff, grid_best_response, OracleConfig};
use femtogame::{PowerProfile, PriceVector};
use rand::Rng;

fn random_price(r: &mut impl Rng) -> f64 {
    if r.random_bool(0.2) {
        0.0
    } else {
        10f64.powf(r.random_range(8.0..17.0))
    }
}

#[test]
fn bisection_agrees_with_grid_oracle_on_100_instances() {
    let cfg = OracleConfig::default();
    let mut r = rng(11);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let net = random_drop(1000 + i, 6);
        let k = r.random_range(0..6);
        let p = random_profile(&mut r, &net);
        let prices = PriceVector::uniform(6, random_price(&mut r));
        let bisect = best_response(&net, k, &p, &prices, 1e-12).unwrap();
        let grid = grid_best_response(&net, k, &p, &prices, &cfg);
        let tol = 1e-6f64.max(cfg.grid_step(net.power_max(k)));
        worst = worst.max((bisect - grid).abs());
        assert!((bisect - grid).abs() <= tol, "instance {i}: bisection {bisect} vs grid {grid}");
    }
    println!("largest bisection/grid gap: {worst:e} W");
}

#[test]
fn grid_oracle_is_stable_under_refinement() {
    let coarse = OracleConfig { grid_points: 100_000, ..Default::default() };
    let fine = OracleConfig { grid_points: 200_000, ..Default::default() };
    let mut r = rng(12);
    for i in 0..20 {
        let net = random_drop(2000 + i, 4);
        let k = r.random_range(0..4);
        let p = random_profile(&mut r, &net);
        let prices = PriceVector::uniform(4, random_price(&mut r));
        let a = grid_best_response(&net, k, &p, &prices, &coarse);
        let b = grid_best_response(&net, k, &p, &prices, &fine);
        assert!((a - b).abs() < coarse.grid_step(net.power_max(k)), "instance {i}: {a} vs {b}");
    }
}

#[test]
fn grid_oracle_returns_zero_at_prohibitive_price() {
    let cfg = OracleConfig { grid_points: 10_000, ..Default::default() };
    for seed in 0..10 {
        let net = random_drop(seed, 3);
        let p = PowerProfile::at_max(&net);
        let prices = PriceVector::uniform(3, 1e30);
        for k in 0..3 {
            assert_eq!(grid_best_response(&net, k, &p, &prices, &cfg), 0.0);
            assert_eq!(best_response(&net, k, &p, &prices, 1e-12).unwrap(), 0.0);
        }
    }
}

#[test]
fn enumeration_matches_expected_payoff_bit_for_bit() {
    let mut r = rng(13);
    for seed in 0..30 {
        let net = random_drop(seed, 3);
        let actions = ActionSet::for_network(&net, 3).unwrap();
        let strategies = random_strategies(&mut r, &actions);
        let prices = PriceVector::uniform(3, random_price(&mut r));
        for k in 0..3 {
            let fast =
                expected_follower_payoff(&net, k, &strategies, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
            let slow =
                enumerate_expected_payoff(&net, k, &strategies, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
            assert_eq!(fast.to_bits(), slow.to_bits(), "seed {seed} follower {k}");
        }
    }
}

#[test]
fn monte_carlo_average_matches_expected_payoff() {
    let mut r = rng(14);
    let net = random_drop(5, 3);
    let actions = ActionSet::for_network(&net, 3).unwrap();
    let strategies = random_strategies(&mut r, &actions);
    let prices = PriceVector::uniform(3, 1e14);
    let n = 100_000;
    for k in 0..3 {
        let exact = expected_follower_payoff(&net, k, &strategies, &actions, &prices, DEFAULT_ENUMERATION_CAP).unwrap();
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let powers = strategies
                .iter()
                .zip(&actions)
                .map(|(s, a)| {
                    let u: f64 = r.random();
                    let mut acc = 0.0;
                    let mut pick = a.len() - 1;
                    for (j, &p) in s.probs().iter().enumerate() {
                        acc += p;
                        if u < acc {
                            pick = j;
                            break;
                        }
                    }
                    a.power(pick)
                })
                .collect();
            let u = follower_payoff(&net, k, &PowerProfile::from_vec(powers), &prices);
            sum += u;
            sum_sq += u * u;
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean) * n as f64 / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - exact).abs() <= 3.0 * se, "follower {k}: mc {mean} +- {se} vs exact {exact}");
    }
}
