//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the scenario has no solution
//! (singular system, ESE outside the strategy space, infeasible demands),
//! 2 on usage, I/O, or schema errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use satgame::scenario::{read_scenario, AlgorithmKind, Scenario};
use satgame::solver::{check_order_property, check_pareto, closed_form_ese, solve_ese};
use satgame::{
    chebyshev_bound, empirical_satisfaction_rate, estimate_moments, feasibility_check, run,
    write_trace, PowerVector,
};

#[derive(Parser)]
#[command(name = "satgame", version, about = "Satisfaction-game power control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args, Clone, Copy)]
struct Overrides {
    /// Override the scenario's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the scenario's horizon and iteration caps.
    #[arg(long, global = true)]
    max_iters: Option<u64>,
    /// Override the convergence threshold rho.
    #[arg(long, global = true)]
    rho: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve and verify the stationary ESE of a scenario's game.
    Ese {
        scenario: PathBuf,
    },
    /// Run the scenario's learner and write the trace as CSV.
    Simulate {
        scenario: PathBuf,
        /// Trace output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print per-user Chebyshev bounds next to empirical satisfaction rates.
    Bound {
        scenario: PathBuf,
        /// Monte-Carlo sample count.
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
    },
    /// Run progressive demand discovery and report the final demand total.
    Discover {
        scenario: PathBuf,
    },
}

fn apply_overrides(scenario: &mut Scenario, ov: &Overrides) {
    if let Some(seed) = ov.seed {
        scenario.seed = seed;
    }
    if let Some(iters) = ov.max_iters {
        scenario.horizon = iters;
        scenario.algorithm.params.max_iters = iters;
    }
    if let Some(rho) = ov.rho {
        scenario.algorithm.params.rho = rho;
    }
}

fn load(path: &PathBuf, ov: &Overrides) -> Result<Scenario, ExitCode> {
    match read_scenario(path) {
        Ok(mut s) => {
            apply_overrides(&mut s, ov);
            Ok(s)
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(2))
        }
    }
}

fn cmd_ese(scenario: &Scenario) -> ExitCode {
    let cfg = match scenario.game_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let total_demand: f64 = cfg.demands.iter().sum();
    println!(
        "feasibility: sum(theta) = {:.6} vs capacity C = {:.6} -> {}",
        total_demand,
        cfg.capacity,
        if feasibility_check(&cfg) { "feasible" } else { "infeasible" }
    );
    let sol = match solve_ese(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    println!("determinant: {:.16e}", sol.determinant);
    for i in 0..cfg.n_users() {
        println!(
            "user {i}: power = {:.16e} mW (p_max {}), demand = {:.6}",
            sol.powers[i], cfg.p_max[i], cfg.demands[i]
        );
    }
    println!("total power: {:.16e} mW", sol.powers.total());
    match closed_form_ese(&cfg) {
        Ok(cf) => {
            let gap = (0..cfg.n_users())
                .map(|i| ((cf.powers[i] - sol.powers[i]) / sol.powers[i]).abs())
                .fold(0.0, f64::max);
            println!("closed-form cross-check: max relative gap {gap:.3e}");
        }
        Err(e) => println!("closed-form cross-check failed: {e}"),
    }
    println!("order property (theta up => received power up): {}", check_order_property(&cfg, &sol));
    println!("pareto property (1% raise dissatisfies an opponent): {}", check_pareto(&cfg, &sol, 0.01));
    ExitCode::SUCCESS
}

fn cmd_simulate(scenario: &Scenario, out: &PathBuf) -> ExitCode {
    let trace = match run(scenario) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_trace(&trace, out) {
        eprintln!("error: cannot write trace: {e}");
        return ExitCode::from(2);
    }
    let s = &trace.summary;
    println!(
        "wrote {} rows to {}; converged = {}, t_converge = {}, sum(P) = {:.6}, all satisfied = {}, saturated = {}",
        trace.rows.len(),
        out.display(),
        s.converged,
        s.t_converge.map_or("-".to_string(), |t| t.to_string()),
        s.final_total_power,
        s.all_satisfied,
        s.saturated,
    );
    ExitCode::SUCCESS
}

fn cmd_bound(scenario: &Scenario, samples: u64) -> ExitCode {
    let cfg = match scenario.game_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let channel = match scenario.channel_model() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let p = PowerVector::from_unchecked(scenario.initial_powers.clone());
    let (means, vars) = estimate_moments(&cfg, &p, &channel, samples, scenario.seed);
    let rates = empirical_satisfaction_rate(&cfg, &p, &channel, samples, scenario.seed);
    println!("samples = {samples}, seed = {}", scenario.seed);
    for i in 0..cfg.n_users() {
        let bound = chebyshev_bound(cfg.demands[i], means[i], vars[i]);
        println!(
            "user {i}: mean = {:.16e}, var = {:.16e}, chebyshev bound = {:.16e}, empirical rate = {:.16e}",
            means[i], vars[i], bound, rates[i]
        );
    }
    ExitCode::SUCCESS
}

fn cmd_discover(scenario: &Scenario) -> ExitCode {
    let mut s = scenario.clone();
    s.algorithm.kind = AlgorithmKind::ProgressiveBp;
    let trace = match run(&s) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let summary = &trace.summary;
    let total: f64 = summary.final_demands.iter().sum();
    for (i, th) in summary.final_demands.iter().enumerate() {
        println!(
            "user {i}: final demand = {:.6}, final rate = {:.6}",
            th, summary.final_rates[i]
        );
    }
    println!(
        "discovered sum(theta) = {:.6} vs capacity C = {:.6} (converged = {}, all satisfied = {})",
        total, s.game.capacity, summary.converged, summary.all_satisfied
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Ese { scenario } => match load(scenario, &cli.overrides) {
            Ok(s) => cmd_ese(&s),
            Err(code) => code,
        },
        Command::Simulate { scenario, out } => match load(scenario, &cli.overrides) {
            Ok(s) => cmd_simulate(&s, out),
            Err(code) => code,
        },
        Command::Bound { scenario, samples } => match load(scenario, &cli.overrides) {
            Ok(s) => cmd_bound(&s, *samples),
            Err(code) => code,
        },
        Command::Discover { scenario } => match load(scenario, &cli.overrides) {
            Ok(s) => cmd_discover(&s),
            Err(code) => code,
        },
    }
}
