//! Named studies that write per-trial CSV rows and per-group summaries.

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config_hash;
use super::montecarlo::{mean_and_std_error, run_trials};
use super::scenario::Scenario;
use crate::discrete::{run_learning, ActionSet, LearningState, RunOptions};
use crate::error::{Error, Result};
use crate::network::NetworkInstance;
use crate::payoff::PriceVector;
use crate::pricing::{
    asymptote_price, discrete_price_sweep, evaluate_discrete_prices, evaluate_prices, price_sweep,
    run_heuristic_pricing, se_price_search, zero_price_equilibrium, DiscretePricePoint, PriceGrid, PricePoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExperimentId {
    #[serde(rename = "fig1-sweep")]
    Fig1Sweep,
    #[serde(rename = "fig2-3-se-compare")]
    Fig23SeCompare,
    #[serde(rename = "fig4-discrete-sweep")]
    Fig4DiscreteSweep,
    #[serde(rename = "fig5-discrete-compare")]
    Fig5DiscreteCompare,
    #[serde(rename = "fig6-7-convergence")]
    Fig67Convergence,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 5] = [
        ExperimentId::Fig1Sweep,
        ExperimentId::Fig23SeCompare,
        ExperimentId::Fig4DiscreteSweep,
        ExperimentId::Fig5DiscreteCompare,
        ExperimentId::Fig67Convergence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentId::Fig1Sweep => "fig1-sweep",
            ExperimentId::Fig23SeCompare => "fig2-3-se-compare",
            ExperimentId::Fig4DiscreteSweep => "fig4-discrete-sweep",
            ExperimentId::Fig5DiscreteCompare => "fig5-discrete-compare",
            ExperimentId::Fig67Convergence => "fig6-7-convergence",
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub id: ExperimentId,
    pub trials: usize,
    pub seed_base: u64,
    pub scenario: Scenario,
    pub output: PathBuf,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        self.scenario.validate()
    }

    /// Hash of everything that determines the output rows.
    pub fn config_hash(&self) -> Result<String> {
        config_hash(&(self.id, self.trials, self.seed_base, &self.scenario))
    }

    pub fn summary_path(&self) -> PathBuf {
        summary_path(&self.output)
    }
}

/// `out.csv` becomes `out.summary.csv`.
pub fn summary_path(output: &Path) -> PathBuf {
    output.with_extension("summary.csv")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub rows: usize,
    pub failed_rows: usize,
    pub nonconverged_rows: usize,
    pub output: PathBuf,
    pub summary: PathBuf,
}

// ---------------------------------------------------------------------------
// Typed study results

/// Common log grid spanning the covering grids of every instance.
pub fn common_grid(nets: &[NetworkInstance], scenario: &Scenario, count: Option<usize>) -> Result<PriceGrid> {
    if let Some(g) = scenario.search.grid {
        return Ok(PriceGrid { count: count.unwrap_or(g.count), ..g });
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for net in nets {
        let p = zero_price_equilibrium(net, scenario.search.dynamics)?.final_profile;
        let g = PriceGrid::covering(net, &asymptote_price(net, &p));
        lo = lo.min(g.min);
        hi = hi.max(g.max);
    }
    let per_decade = ((hi / lo).log10() * scenario.sweep_points_per_decade).ceil() as usize;
    Ok(PriceGrid { min: lo, max: hi, count: count.unwrap_or(per_decade.max(60)) })
}

fn trial_nets(scenario: &Scenario, k: usize, trials: usize, seed_base: u64) -> Result<Vec<(u64, NetworkInstance)>> {
    (0..trials as u64)
        .map(|i| {
            let seed = seed_base.wrapping_add(i);
            scenario.network_for(k, seed).map(|n| (seed, n))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSweepTrial {
    pub seed: u64,
    /// Equilibrium at zero price.
    pub zero: PricePoint,
    pub sweep: Vec<PricePoint>,
}

impl ContinuousSweepTrial {
    /// Some grid price earns strictly more than both sweep endpoints
    /// (zero price and the largest grid price).
    pub fn has_interior_peak(&self) -> bool {
        let last = self.sweep.last().map_or(0.0, |p| p.revenue);
        let ends = self.zero.revenue.max(last);
        self.sweep[..self.sweep.len().saturating_sub(1)].iter().any(|p| p.revenue > ends)
    }
}

pub type TrialResult<T> = std::result::Result<T, String>;

/// `(k, seed, schemes)` per topology of a comparison study.
pub type SchemeResults = Vec<(usize, u64, TrialResult<Vec<SchemeRow>>)>;

/// Uniform-price sweep of the continuous game on `trials` seeded topologies.
pub fn continuous_sweep(
    scenario: &Scenario,
    trials: usize,
    seed_base: u64,
) -> Result<(PriceGrid, Vec<TrialResult<ContinuousSweepTrial>>)> {
    let nets = trial_nets(scenario, scenario.num_followers, trials, seed_base)?;
    let just_nets: Vec<NetworkInstance> = nets.iter().map(|(_, n)| n.clone()).collect();
    let grid = common_grid(&just_nets, scenario, None)?;
    let lambdas = grid.points();
    let opts = scenario.search.dynamics;
    let results = run_trials(trials, 0, |i| {
        let (seed, net) = &nets[i as usize];
        let k = net.num_followers();
        let run = || -> Result<ContinuousSweepTrial> {
            Ok(ContinuousSweepTrial {
                seed: *seed,
                zero: evaluate_prices(net, &PriceVector::zeros(k), opts)?,
                sweep: price_sweep(net, &lambdas, opts)?,
            })
        };
        run().map_err(|e| e.to_string())
    });
    Ok((grid, results))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSweepTrial {
    pub seed: u64,
    pub zero: DiscretePricePoint,
    pub sweep: Vec<DiscretePricePoint>,
}

impl DiscreteSweepTrial {
    pub fn has_interior_peak(&self) -> bool {
        let last = self.sweep.last().map_or(0.0, |p| p.revenue);
        let ends = self.zero.revenue.max(last);
        self.sweep[..self.sweep.len().saturating_sub(1)].iter().any(|p| p.revenue > ends)
    }
}

/// Uniform-price sweep of the discrete game. Each price averages
/// `scenario.search.mc_trials` learning runs.
pub fn discrete_sweep(
    scenario: &Scenario,
    trials: usize,
    seed_base: u64,
) -> Result<(PriceGrid, Vec<TrialResult<DiscreteSweepTrial>>)> {
    let nets = trial_nets(scenario, scenario.num_followers, trials, seed_base)?;
    let just_nets: Vec<NetworkInstance> = nets.iter().map(|(_, n)| n.clone()).collect();
    let grid = common_grid(&just_nets, scenario, Some(scenario.discrete_sweep_points))?;
    let lambdas = grid.points();
    let mc = scenario.search.mc_trials;
    let cap = scenario.heuristic.enumeration_cap;
    let learner = scenario.learner;
    let results = run_trials(trials, 0, |i| {
        let (seed, net) = &nets[i as usize];
        let run = || -> Result<DiscreteSweepTrial> {
            let actions = ActionSet::for_network(net, learner.num_actions)?;
            let learn_seed = seed.wrapping_mul(1_000_003);
            let k = net.num_followers();
            Ok(DiscreteSweepTrial {
                seed: *seed,
                zero: evaluate_discrete_prices(net, &actions, &learner, &PriceVector::zeros(k), mc, learn_seed, cap)?,
                sweep: discrete_price_sweep(net, &actions, &learner, &lambdas, mc, learn_seed, cap)?,
            })
        };
        run().map_err(|e| e.to_string())
    });
    Ok((grid, results))
}

/// One pricing scheme evaluated on one topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRow {
    pub k: usize,
    pub seed: u64,
    pub scheme: String,
    pub lambda_mean: f64,
    pub revenue: f64,
    pub mean_efficiency: f64,
    pub macro_sinr: f64,
    pub converged: bool,
}

fn scheme_row(k: usize, seed: u64, scheme: &str, pt: &PricePoint) -> SchemeRow {
    SchemeRow {
        k,
        seed,
        scheme: scheme.into(),
        lambda_mean: pt.prices.as_slice().iter().sum::<f64>() / k as f64,
        revenue: pt.revenue,
        mean_efficiency: pt.mean_efficiency,
        macro_sinr: pt.macro_sinr,
        converged: pt.converged,
    }
}

/// Continuous game at zero price, at the asymptote price and at the
/// searched revenue-maximising price, for every K in `scenario.k_values`.
pub fn continuous_compare(scenario: &Scenario, trials: usize, seed_base: u64) -> Result<SchemeResults> {
    let opts = scenario.search.dynamics;
    let mut out = Vec::new();
    for &k in &scenario.k_values {
        let nets = trial_nets(scenario, k, trials, seed_base)?;
        let rows = run_trials(trials, 0, |i| {
            let (seed, net) = &nets[i as usize];
            let run = || -> Result<Vec<SchemeRow>> {
                let p_star = zero_price_equilibrium(net, opts)?.final_profile;
                let zero = evaluate_prices(net, &PriceVector::zeros(k), opts)?;
                let asym = evaluate_prices(net, &asymptote_price(net, &p_star), opts)?;
                let se = se_price_search(net, &scenario.search)?.best;
                Ok(vec![
                    scheme_row(k, *seed, "zero", &zero),
                    scheme_row(k, *seed, "asymptote", &asym),
                    scheme_row(k, *seed, "se", &se),
                ])
            };
            (k, *seed, run().map_err(|e| e.to_string()))
        });
        out.extend(rows);
    }
    Ok(out)
}

fn discrete_row(k: usize, seed: u64, scheme: &str, pt: &DiscretePricePoint) -> SchemeRow {
    SchemeRow {
        k,
        seed,
        scheme: scheme.into(),
        lambda_mean: pt.lambda,
        revenue: pt.revenue,
        mean_efficiency: pt.mean_efficiency,
        macro_sinr: pt.macro_sinr,
        converged: pt.converged_runs == pt.runs,
    }
}

/// Discrete game at zero price, at the heuristic leader price, at the
/// asymptote price and at the continuous revenue-maximising price.
pub fn discrete_compare(scenario: &Scenario, trials: usize, seed_base: u64) -> Result<SchemeResults> {
    let opts = scenario.search.dynamics;
    let learner = scenario.learner;
    let mc = scenario.search.mc_trials;
    let cap = scenario.heuristic.enumeration_cap;
    let mut out = Vec::new();
    for &k in &scenario.k_values {
        let nets = trial_nets(scenario, k, trials, seed_base)?;
        let rows = run_trials(trials, 0, |i| {
            let (seed, net) = &nets[i as usize];
            let run = || -> Result<Vec<SchemeRow>> {
                let actions = ActionSet::for_network(net, learner.num_actions)?;
                let learn_seed = seed.wrapping_mul(1_000_003);
                let at = |prices: &PriceVector| {
                    evaluate_discrete_prices(net, &actions, &learner, prices, mc, learn_seed, cap)
                };
                let p_star = zero_price_equilibrium(net, opts)?.final_profile;
                let heuristic = run_heuristic_pricing(
                    net,
                    &actions,
                    &learner,
                    net.mu_sinr_threshold(),
                    &scenario.heuristic,
                    learn_seed,
                )?;
                let se = se_price_search(net, &scenario.search)?.best.prices;
                Ok(vec![
                    discrete_row(k, *seed, "zero", &at(&PriceVector::zeros(k))?),
                    discrete_row(k, *seed, "heuristic", &at(&heuristic.prices)?),
                    discrete_row(k, *seed, "asymptote", &at(&asymptote_price(net, &p_star))?),
                    discrete_row(k, *seed, "se", &at(&se)?),
                ])
            };
            (k, *seed, run().map_err(|e| e.to_string()))
        });
        out.extend(rows);
    }
    Ok(out)
}

/// Learning trace of one run at one price.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub seed: u64,
    pub label: &'static str,
    /// `expected_power[t][k]` after slot `t + 1`.
    pub expected_power: Vec<Vec<f64>>,
    /// `strategies[t][k][j]`.
    pub strategies: Vec<Vec<Vec<f64>>>,
    pub converged_at: Option<u64>,
}

/// Expected-power traces of discrete learning at zero price and at the
/// asymptote price, each run for the full iteration budget.
pub fn learning_traces(
    scenario: &Scenario,
    trials: usize,
    seed_base: u64,
) -> Result<Vec<(u64, TrialResult<Vec<LearningTrace>>)>> {
    let nets = trial_nets(scenario, scenario.num_followers, trials, seed_base)?;
    let learner = scenario.learner;
    let opts = RunOptions { run_to_max: true, record_strategies: true, ..RunOptions::from_config(&learner) };
    Ok(run_trials(trials, 0, |i| {
        let (seed, net) = &nets[i as usize];
        let run = || -> Result<Vec<LearningTrace>> {
            learner.validate()?;
            let actions = ActionSet::for_network(net, learner.num_actions)?;
            let p_star = zero_price_equilibrium(net, scenario.search.dynamics)?.final_profile;
            let k = net.num_followers();
            let mut traces = Vec::new();
            for (label, prices) in [("zero", PriceVector::zeros(k)), ("asymptote", asymptote_price(net, &p_star))] {
                let mut state = LearningState::new(&actions, &learner, seed.wrapping_mul(1_000_003));
                let out = run_learning(net, &actions, &prices, &mut state, opts);
                traces.push(LearningTrace {
                    seed: *seed,
                    label,
                    expected_power: out.expected_power,
                    strategies: out
                        .strategy_trace
                        .iter()
                        .map(|slot| slot.iter().map(|s| s.probs().to_vec()).collect())
                        .collect(),
                    converged_at: out.converged_at,
                });
            }
            Ok(traces)
        };
        (*seed, run().map_err(|e| e.to_string()))
    }))
}

// ---------------------------------------------------------------------------
// CSV emission

enum Cell {
    F(f64),
    U(u64),
    S(String),
}

struct Table {
    header: Vec<String>,
    rows: Vec<(u64, Vec<Cell>, String)>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { header: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, seed: u64, cells: Vec<Cell>, status: impl Into<String>) {
        self.rows.push((seed, cells, status.into()));
    }

    fn fail(&mut self, seed: u64, msg: &str) {
        let cells = (0..self.header.len()).map(|_| Cell::S(String::new())).collect();
        self.rows.push((seed, cells, format!("failed: {msg}")));
    }

    /// Writes `experiment,seed,config_hash,<columns>,status`. Non-finite
    /// values are left blank and the row is marked failed.
    fn write(&self, path: &Path, id: ExperimentId, hash: &str, counts: &mut ExperimentSummary) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = csv::Writer::from_writer(File::create(path)?);
        let mut header = vec!["experiment".to_string(), "seed".into(), "config_hash".into()];
        header.extend(self.header.iter().cloned());
        header.push("status".into());
        w.write_record(&header).map_err(csv_err)?;
        for (seed, cells, status) in &self.rows {
            let mut status = status.clone();
            let mut rec = vec![id.as_str().to_string(), seed.to_string(), hash.to_string()];
            for c in cells {
                rec.push(match c {
                    Cell::F(x) if x.is_finite() => format_float(*x),
                    Cell::F(_) => {
                        status = "failed: non-finite value".into();
                        String::new()
                    }
                    Cell::U(u) => u.to_string(),
                    Cell::S(s) => s.clone(),
                });
            }
            counts.rows += 1;
            if status.starts_with("failed") {
                counts.failed_rows += 1;
            } else if status == "nonconverged" {
                counts.nonconverged_rows += 1;
            }
            rec.push(status);
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Shortest round-trip representation in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:e}")
}

fn status(converged: bool) -> &'static str {
    if converged {
        "ok"
    } else {
        "nonconverged"
    }
}

/// Aggregates `(group key, values)` rows into mean and standard error per
/// column, preserving first-seen group order.
fn aggregate(groups: Vec<(Vec<Cell>, Vec<f64>)>, key_cols: &[&str], value_cols: &[&str], seed: u64) -> Table {
    let mut cols: Vec<String> = key_cols.iter().map(|s| s.to_string()).collect();
    cols.push("trials".into());
    for v in value_cols {
        cols.push(format!("mean_{v}"));
        cols.push(format!("se_{v}"));
    }
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(&col_refs);
    let mut order: Vec<String> = Vec::new();
    let mut bucket: Vec<(Vec<Cell>, Vec<Vec<f64>>)> = Vec::new();
    for (key, vals) in groups {
        let tag = key.iter().map(cell_text).collect::<Vec<_>>().join("|");
        let idx = match order.iter().position(|t| *t == tag) {
            Some(i) => i,
            None => {
                order.push(tag);
                bucket.push((key, vec![Vec::new(); vals.len()]));
                order.len() - 1
            }
        };
        for (acc, v) in bucket[idx].1.iter_mut().zip(vals) {
            acc.push(v);
        }
    }
    for (key, columns) in bucket {
        let n = columns.first().map_or(0, Vec::len) as u64;
        let mut cells = key;
        cells.push(Cell::U(n));
        for c in &columns {
            let (m, se) = mean_and_std_error(c);
            cells.push(Cell::F(m));
            cells.push(Cell::F(se));
        }
        table.push(seed, cells, "ok");
    }
    table
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::F(x) => format_float(*x),
        Cell::U(u) => u.to_string(),
        Cell::S(s) => s.clone(),
    }
}

fn sweep_tables<P, F>(trials: &[TrialResult<(u64, P, Vec<P>)>], fields: F, seeds: &[u64]) -> (Table, Table)
where
    F: Fn(&P) -> (f64, [f64; 3], bool, u64),
{
    let mut rows = Table::new(&["lambda", "revenue", "mean_efficiency", "macro_sinr", "iterations"]);
    let mut groups = Vec::new();
    for (t, &seed) in trials.iter().zip(seeds) {
        match t {
            Err(msg) => rows.fail(seed, msg),
            Ok((seed, zero, sweep)) => {
                for p in std::iter::once(zero).chain(sweep) {
                    let (lambda, vals, converged, iters) = fields(p);
                    rows.push(
                        *seed,
                        vec![Cell::F(lambda), Cell::F(vals[0]), Cell::F(vals[1]), Cell::F(vals[2]), Cell::U(iters)],
                        status(converged),
                    );
                    if vals.iter().all(|v| v.is_finite()) {
                        groups.push((vec![Cell::F(lambda)], vals.to_vec()));
                    }
                }
            }
        }
    }
    (rows, aggregate(groups, &["lambda"], &["revenue", "mean_efficiency", "macro_sinr"], seeds[0]))
}

fn scheme_tables(results: &SchemeResults, seed_base: u64) -> (Table, Table) {
    let mut rows = Table::new(&["k", "scheme", "lambda_mean", "revenue", "mean_efficiency", "macro_sinr"]);
    let mut groups = Vec::new();
    for (k, seed, r) in results {
        match r {
            Err(msg) => rows.fail(*seed, msg),
            Ok(list) => {
                for s in list {
                    rows.push(
                        *seed,
                        vec![
                            Cell::U(*k as u64),
                            Cell::S(s.scheme.clone()),
                            Cell::F(s.lambda_mean),
                            Cell::F(s.revenue),
                            Cell::F(s.mean_efficiency),
                            Cell::F(s.macro_sinr),
                        ],
                        status(s.converged),
                    );
                    groups.push((
                        vec![Cell::U(*k as u64), Cell::S(s.scheme.clone())],
                        vec![s.lambda_mean, s.revenue, s.mean_efficiency, s.macro_sinr],
                    ));
                }
            }
        }
    }
    (rows, aggregate(groups, &["k", "scheme"], &["lambda", "revenue", "mean_efficiency", "macro_sinr"], seed_base))
}

/// Runs the named study, writes the per-trial CSV and its summary, and
/// reports row counts. Trials that fail are kept as flagged rows.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let hash = spec.config_hash()?;
    let sc = &spec.scenario;
    let seeds: Vec<u64> = (0..spec.trials as u64).map(|i| spec.seed_base.wrapping_add(i)).collect();
    let (rows, summary) = match spec.id {
        ExperimentId::Fig1Sweep => {
            let (_, trials) = continuous_sweep(sc, spec.trials, spec.seed_base)?;
            let flat: Vec<_> = trials.into_iter().map(|t| t.map(|t| (t.seed, t.zero, t.sweep))).collect();
            sweep_tables(
                &flat,
                |p: &PricePoint| {
                    (p.lambda(), [p.revenue, p.mean_efficiency, p.macro_sinr], p.converged, p.rounds as u64)
                },
                &seeds,
            )
        }
        ExperimentId::Fig4DiscreteSweep => {
            let (_, trials) = discrete_sweep(sc, spec.trials, spec.seed_base)?;
            let flat: Vec<_> = trials.into_iter().map(|t| t.map(|t| (t.seed, t.zero, t.sweep))).collect();
            sweep_tables(
                &flat,
                |p: &DiscretePricePoint| {
                    (
                        p.lambda,
                        [p.revenue, p.mean_efficiency, p.macro_sinr],
                        p.converged_runs == p.runs,
                        p.max_iterations,
                    )
                },
                &seeds,
            )
        }
        ExperimentId::Fig23SeCompare => {
            scheme_tables(&continuous_compare(sc, spec.trials, spec.seed_base)?, spec.seed_base)
        }
        ExperimentId::Fig5DiscreteCompare => {
            scheme_tables(&discrete_compare(sc, spec.trials, spec.seed_base)?, spec.seed_base)
        }
        ExperimentId::Fig67Convergence => {
            let m = sc.learner.num_actions;
            let mut cols = vec!["label".to_string(), "iteration".into(), "k".into(), "expected_power".into()];
            cols.extend((0..m).map(|j| format!("pi_{j}")));
            let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
            let mut rows = Table::new(&col_refs);
            let mut summary = Table::new(&["label", "converged", "converged_at", "iterations", "final_mean_power"]);
            for (seed, r) in learning_traces(sc, spec.trials, spec.seed_base)? {
                match r {
                    Err(msg) => {
                        rows.fail(seed, &msg);
                        summary.fail(seed, &msg);
                    }
                    Ok(traces) => {
                        for tr in traces {
                            for (t, (powers, pis)) in tr.expected_power.iter().zip(&tr.strategies).enumerate() {
                                for (k, (p, pi)) in powers.iter().zip(pis).enumerate() {
                                    let mut cells = vec![
                                        Cell::S(tr.label.into()),
                                        Cell::U(t as u64 + 1),
                                        Cell::U(k as u64),
                                        Cell::F(*p),
                                    ];
                                    cells.extend(pi.iter().map(|&x| Cell::F(x)));
                                    rows.push(seed, cells, "ok");
                                }
                            }
                            let last = tr.expected_power.last().cloned().unwrap_or_default();
                            let mean = last.iter().sum::<f64>() / last.len().max(1) as f64;
                            summary.push(
                                seed,
                                vec![
                                    Cell::S(tr.label.into()),
                                    Cell::S(tr.converged_at.is_some().to_string()),
                                    Cell::S(tr.converged_at.map_or(String::new(), |t| t.to_string())),
                                    Cell::U(tr.expected_power.len() as u64),
                                    Cell::F(mean),
                                ],
                                status(tr.converged_at.is_some()),
                            );
                        }
                    }
                }
            }
            (rows, summary)
        }
    };
    let mut counts = ExperimentSummary {
        config_hash: hash.clone(),
        rows: 0,
        failed_rows: 0,
        nonconverged_rows: 0,
        output: spec.output.clone(),
        summary: spec.summary_path(),
    };
    rows.write(&spec.output, spec.id, &hash, &mut counts)?;
    let mut ignore = counts.clone();
    summary.write(&spec.summary_path(), spec.id, &hash, &mut ignore)?;
    Ok(counts)
}

/// Writes a serialisable value as pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, out: &mut W) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}
