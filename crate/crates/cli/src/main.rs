use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use femtogame::discrete::{run_learning, write_learning_trace_csv, ActionSet, LearningState, RunOptions};
use femtogame::harness::experiment::write_json;
use femtogame::harness::{run_experiment, ExperimentId, ExperimentSpec, Scenario};
use femtogame::network::generate_layout;
use femtogame::payoff::{efficiency, PowerProfile, PriceVector};
use femtogame::pricing::{
    asymptote_price, discrete_price_sweep, evaluate_prices, high_price_asymptote_power, price_sweep,
    run_heuristic_pricing, se_price_search, write_discrete_sweep_csv, write_sweep_csv, zero_price_equilibrium,
    PriceGrid, PriceMode,
};
use femtogame::Error;

#[derive(Parser)]
#[command(
    name = "femtogame",
    version,
    about = "Interference pricing and energy-efficient power control for femtocell networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Topology seed (first trial seed for experiments).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random topology and print it as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Include node positions alongside the network.
        #[arg(long)]
        layout: bool,
    },
    /// Uniform-price sweep: revenue, mean efficiency and macro SINR per price.
    #[command(alias = "price-sweep")]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep the discrete game instead of the continuous one.
        #[arg(long)]
        discrete: bool,
    },
    /// Revenue-maximising price search.
    #[command(alias = "price-search")]
    Search {
        #[command(flatten)]
        common: Common,
        /// Optimise each link's price separately.
        #[arg(long)]
        per_link: bool,
    },
    /// Asymptote price per link with zero-price and searched-price comparison.
    Asymptote {
        #[command(flatten)]
        common: Common,
    },
    /// Discrete learning trace, or the heuristic leader loop.
    Learn {
        #[command(flatten)]
        common: Common,
        /// Uniform price during learning.
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Run the heuristic price loop against the macro SINR target.
        #[arg(long)]
        heuristic: bool,
    },
    /// Run a named study and write its CSV plus a summary next to it.
    Experiment {
        /// fig1-sweep | fig2-3-se-compare | fig4-discrete-sweep | fig5-discrete-compare | fig6-7-convergence
        id: String,
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

enum Failure {
    Config(String),
    NonConvergence(String),
    Other(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Other(e.to_string()),
            Error::BisectionFailed { .. } => Failure::NonConvergence(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Other(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn load(common: &Common) -> Result<Scenario, Failure> {
    match &common.config {
        Some(path) => Ok(Scenario::load(path)?),
        None => Ok(Scenario::default()),
    }
}

fn sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(path)?))
        }
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn network(sc: &Scenario, seed: u64) -> Result<femtogame::NetworkInstance, Failure> {
    Ok(sc.network_for(sc.num_followers, seed)?)
}

fn default_grid(sc: &Scenario, net: &femtogame::NetworkInstance) -> Result<PriceGrid, Failure> {
    if let Some(g) = sc.search.grid {
        return Ok(g);
    }
    let p = zero_price_equilibrium(net, sc.search.dynamics)?.final_profile;
    Ok(PriceGrid::covering(net, &asymptote_price(net, &p)))
}

fn generate(common: &Common, layout: bool) -> CliResult {
    let sc = load(common)?;
    let mut out = sink(&common.out)?;
    if layout {
        if sc.network.is_some() {
            return Err(Failure::Config("--layout needs a random topology, not an explicit network".into()));
        }
        let (lay, net) = generate_layout(&sc.topology.clone().with_seed(common.seed), sc.num_followers, &sc.params)?;
        write_json(&serde_json::json!({ "layout": lay, "network": net }), &mut out)?;
    } else {
        write_json(&network(&sc, common.seed)?, &mut out)?;
    }
    out.flush()?;
    Ok(())
}

fn sweep(common: &Common, discrete: bool) -> CliResult {
    let sc = load(common)?;
    let net = network(&sc, common.seed)?;
    let mut out = sink(&common.out)?;
    if discrete {
        let grid = PriceGrid { count: sc.discrete_sweep_points, ..default_grid(&sc, &net)? };
        let actions = ActionSet::for_network(&net, sc.learner.num_actions)?;
        let pts = discrete_price_sweep(
            &net,
            &actions,
            &sc.learner,
            &grid.points(),
            sc.search.mc_trials,
            common.seed,
            sc.heuristic.enumeration_cap,
        )?;
        write_discrete_sweep_csv(&pts, &mut out)?;
        out.flush()?;
        if pts.iter().any(|p| p.converged_runs < p.runs) {
            return Err(Failure::NonConvergence("some learning runs did not meet the convergence detector".into()));
        }
    } else {
        let pts = price_sweep(&net, &default_grid(&sc, &net)?.points(), sc.search.dynamics)?;
        write_sweep_csv(&pts, &mut out)?;
        out.flush()?;
        if pts.iter().any(|p| !p.converged) {
            return Err(Failure::NonConvergence("best-response dynamics did not converge at some price".into()));
        }
    }
    Ok(())
}

fn search(common: &Common, per_link: bool) -> CliResult {
    let sc = load(common)?;
    let net = network(&sc, common.seed)?;
    let mut cfg = sc.search;
    if per_link {
        cfg.mode = PriceMode::PerLink;
    }
    let res = se_price_search(&net, &cfg)?;
    let report = serde_json::json!({
        "prices": res.best.prices,
        "revenue": res.best.revenue,
        "mean_efficiency": res.best.mean_efficiency,
        "macro_sinr": res.best.macro_sinr,
        "powers": res.best.profile,
        "at_grid_boundary": res.at_boundary,
        "grid": res.grid,
        "converged": res.best.converged,
    });
    let mut out = sink(&common.out)?;
    write_json(&report, &mut out)?;
    out.flush()?;
    if !res.best.converged {
        return Err(Failure::NonConvergence("equilibrium at the best price did not converge".into()));
    }
    Ok(())
}

fn asymptote(common: &Common) -> CliResult {
    let sc = load(common)?;
    let net = network(&sc, common.seed)?;
    let k = net.num_followers();
    let opts = sc.search.dynamics;
    let zero_rep = zero_price_equilibrium(&net, opts)?;
    let p_star = zero_rep.final_profile.clone();
    let lam = asymptote_price(&net, &p_star);
    let at_asym = evaluate_prices(&net, &lam, opts)?;
    let se = se_price_search(&net, &sc.search)?.best;
    let zero = evaluate_prices(&net, &PriceVector::zeros(k), opts)?;
    let mut out = sink(&common.out)?;
    writeln!(
        out,
        "k,p_star,lambda_a,high_price_power_at_100x,p_asymptote,p_se,p_zero,eff_asymptote,eff_se,eff_zero,payment_asymptote,payment_se,lambda_se,macro_sinr_asymptote,macro_sinr_se,macro_sinr_zero"
    )?;
    let eff = |p: &PowerProfile, i: usize| efficiency(&net, i, p);
    for i in 0..k {
        writeln!(
            out,
            "{i},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            p_star[i],
            lam[i],
            high_price_asymptote_power(&net, i, 100.0 * lam[i]),
            at_asym.profile[i],
            se.profile[i],
            zero.profile[i],
            eff(&at_asym.profile, i),
            eff(&se.profile, i),
            eff(&zero.profile, i),
            lam[i] * net.gain_to_macro(i) * at_asym.profile[i],
            se.prices[i] * net.gain_to_macro(i) * se.profile[i],
            se.prices[i],
            at_asym.macro_sinr,
            se.macro_sinr,
            zero.macro_sinr,
        )?;
    }
    out.flush()?;
    if !(zero_rep.converged && at_asym.converged && se.converged) {
        return Err(Failure::NonConvergence("best-response dynamics did not converge".into()));
    }
    Ok(())
}

fn learn(common: &Common, lambda: f64, heuristic: bool) -> CliResult {
    let sc = load(common)?;
    let net = network(&sc, common.seed)?;
    let actions = ActionSet::for_network(&net, sc.learner.num_actions)?;
    sc.learner.validate()?;
    let mut out = sink(&common.out)?;
    if heuristic {
        let res =
            run_heuristic_pricing(&net, &actions, &sc.learner, net.mu_sinr_threshold(), &sc.heuristic, common.seed)?;
        let report = serde_json::json!({
            "prices": res.prices,
            "strategies": res.strategies,
            "trace": res.trace,
            "zero_power_links": res.zero_power,
            "cap_reached": res.cap_reached,
        });
        write_json(&report, &mut out)?;
        out.flush()?;
        if res.cap_reached {
            return Err(Failure::NonConvergence("price loop hit its iteration cap".into()));
        }
        return Ok(());
    }
    let prices = PriceVector::new(vec![lambda; net.num_followers()])?;
    let mut state = LearningState::new(&actions, &sc.learner, common.seed);
    let opts = RunOptions { record_strategies: true, ..RunOptions::from_config(&sc.learner) };
    let res = run_learning(&net, &actions, &prices, &mut state, opts);
    write_learning_trace_csv(&res, &mut out)?;
    out.flush()?;
    if !res.converged {
        return Err(Failure::NonConvergence(format!("learning did not converge within {} iterations", res.iterations)));
    }
    Ok(())
}

fn experiment(id: &str, common: &Common, trials: usize) -> CliResult {
    let id: ExperimentId = id.parse()?;
    let scenario = load(common)?;
    let output = common.out.clone().unwrap_or_else(|| PathBuf::from(format!("{id}.csv")));
    let spec = ExperimentSpec { id, trials, seed_base: common.seed, scenario, output };
    let summary = run_experiment(&spec)?;
    eprintln!(
        "{}: {} rows ({} failed, {} nonconverged) -> {} and {}",
        id,
        summary.rows,
        summary.failed_rows,
        summary.nonconverged_rows,
        display(&summary.output),
        display(&summary.summary)
    );
    if summary.failed_rows > 0 {
        return Err(Failure::NonConvergence(format!("{} trial rows failed", summary.failed_rows)));
    }
    Ok(())
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate { common, layout } => generate(common, *layout),
        Command::Sweep { common, discrete } => sweep(common, *discrete),
        Command::Search { common, per_link } => search(common, *per_link),
        Command::Asymptote { common } => asymptote(common),
        Command::Learn { common, lambda, heuristic } => learn(common, *lambda, *heuristic),
        Command::Experiment { id, common, trials } => experiment(id, common, *trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::NonConvergence(msg)) => {
            eprintln!("did not converge: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
