//! `sliceopt`: run slice-profit optimizations from scenario files and write
//! CSV results. Every output file starts with a `# manifest:` row recording
//! the invocation and a `# status=` row; logs go to stderr.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sliceopt::closed_loop::{solve_closed_loop_with, InnerSolver};
use sliceopt::ga::{solve_ga, GaParams};
use sliceopt::game::{
    market_grid, operators_from_scenario, run_market, solve_suboperator, verify_nash, MarketGame,
};
use sliceopt::longterm::{optimize_period, ReconfigCostModel};
use sliceopt::multiplex::{enumerate_candidates, solve_bcd, solve_exhaustive, DEFAULT_SCHEME_CAP};
use sliceopt::orthogonal::{
    brute_force_oracle_with, solve_objective_sum, solve_weighted_sum, SolveMeta,
    DEFAULT_ORACLE_BUDGET,
};
use sliceopt::report::{self, Table};
use sliceopt::scenario::load_trace;
use sliceopt::{load_scenario, Error, Scenario, SolveResult, Weights};

use manifest::Manifest;

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "sliceopt", version, about = "Profit optimization for 5G network slices")]
struct Cli {
    /// Worker threads for parallel solvers. Results do not depend on it.
    #[arg(long, global = true, env = "SLICEOPT_THREADS")]
    threads: Option<usize>,
    /// Print the run manifest to stdout and exit without solving.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a scenario file and print a one-line summary.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Solve for slice sizes (and a sharing scheme).
    Solve(SolveArgs),
    /// Approximate the per-slice profit front with the genetic explorer.
    Pareto(ParetoArgs),
    /// Exhaustive grid search over sizes; the reference for other solvers.
    Oracle(OracleArgs),
    /// Fixed-point iteration with configuration-dependent KPIs.
    ClosedLoop(ClosedLoopArgs),
    /// Pick the update period under time-varying demand.
    Longterm(LongtermArgs),
    /// Resource trading between operators, or the cooperative benchmark.
    Game(GameArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum SolverKind {
    ObjectiveSum,
    WeightedSum,
    Exhaustive,
    Bcd,
    Ga,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum InnerKind {
    ObjectiveSum,
    Exhaustive,
    Bcd,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum GameMode {
    Market,
    Suboperator,
}

#[derive(Args, Debug)]
struct GaArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    ga_pop: usize,
    #[arg(long, default_value_t = 100)]
    ga_gens: usize,
    /// Maximum number of candidate sharing schemes.
    #[arg(long, default_value_t = DEFAULT_SCHEME_CAP)]
    cap: usize,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "objective-sum")]
    solver: SolverKind,
    /// Per-slice weights for the weighted-sum solver, comma separated.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    max_rounds: usize,
    #[command(flatten)]
    ga: GaArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ParetoArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    ga: GaArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ORACLE_BUDGET)]
    budget: u128,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ClosedLoopArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "objective-sum")]
    inner: InnerKind,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SCHEME_CAP)]
    cap: usize,
    #[arg(long)]
    trace_out: PathBuf,
}

#[derive(Args, Debug)]
struct LongtermArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Trace file; defaults to the scenario's own trace block.
    #[arg(long)]
    trace_in: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    periods: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    reconfig_cost: f64,
    #[arg(long, value_enum, default_value = "objective-sum")]
    inner: InnerKind,
    #[arg(long, default_value_t = DEFAULT_SCHEME_CAP)]
    cap: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GameArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "market")]
    mode: GameMode,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Gain above which a unilateral deviation breaks the equilibrium.
    #[arg(long, default_value_t = 1e-6)]
    nash_tol: f64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Infeasible(_) => EXIT_INFEASIBLE,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

/// Result of a subcommand: exit status plus an optional file to write.
struct Output {
    status: String,
    ok: bool,
    table: Table,
    path: PathBuf,
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    Ok(load_scenario(path)?)
}

fn inner_solver(kind: InnerKind, cap: usize, max_rounds: usize) -> InnerSolver {
    match kind {
        InnerKind::ObjectiveSum => InnerSolver::ObjectiveSum,
        InnerKind::Exhaustive => InnerSolver::Exhaustive { cap },
        InnerKind::Bcd => InnerSolver::Bcd { cap, max_rounds },
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn ga_params(args: &GaArgs) -> GaParams {
    GaParams {
        population: args.ga_pop,
        generations: args.ga_gens,
        seed: args.seed,
        scheme_cap: args.cap,
        ..GaParams::default()
    }
}

fn record_ga(m: &mut Manifest, args: &GaArgs) {
    m.set("seed", args.seed);
    m.set("ga_pop", args.ga_pop);
    m.set("ga_gens", args.ga_gens);
    m.set("cap", args.cap);
}

fn input(m: &mut Manifest, key: &str, path: &Path) -> Result<(), Failure> {
    m.input(key, path)
        .map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn solve(args: &SolveArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    m.set("solver", args.solver.to_possible_value().unwrap().get_name());
    m.set("weights", join(&args.weights));
    m.set("max_rounds", args.max_rounds);
    record_ga(m, &args.ga);
    m.set("out", args.out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let run = || -> sliceopt::Result<SolveResult> {
        match args.solver {
            SolverKind::ObjectiveSum => solve_objective_sum(&s),
            SolverKind::WeightedSum => {
                if args.weights.is_empty() {
                    return Err(Error::Config("--weights is required for weighted-sum".into()));
                }
                solve_weighted_sum(&s, &Weights::new(args.weights.clone())?)
            }
            SolverKind::Exhaustive => solve_exhaustive(&s, args.ga.cap),
            SolverKind::Bcd => {
                let c = enumerate_candidates(&s, args.ga.cap)?;
                Ok(solve_bcd(&s, &c, 0, args.max_rounds)?.result)
            }
            SolverKind::Ga => {
                let params = ga_params(&args.ga);
                let c = enumerate_candidates(&s, args.ga.cap)?;
                let front = solve_ga(&s, &params)?;
                let best = front
                    .best_total()
                    .ok_or_else(|| Error::Infeasible("empty front".into()))?;
                let sharing = c.schemes()[best.scheme_index].clone();
                Ok(SolveResult {
                    outcome: s.evaluate_with(&sharing, &best.sizes)?,
                    sizes: best.sizes.clone(),
                    sharing,
                    scheme_index: best.scheme_index,
                    meta: SolveMeta {
                        solver: "ga".into(),
                        iterations: params.generations,
                        grid_step: None,
                        elapsed: Duration::ZERO,
                    },
                })
            }
        }
    };
    finish_solve(&s, args.ga.seed, run(), &args.out)
}

fn finish_solve(
    s: &Scenario,
    seed: u64,
    result: sliceopt::Result<SolveResult>,
    out: &Path,
) -> Result<Option<Output>, Failure> {
    match result {
        Ok(r) => {
            log(&format!(
                "{}: total profit {} ({} iterations)",
                r.meta.solver, r.outcome.total_profit, r.meta.iterations
            ));
            Ok(Some(Output {
                status: "status=ok".into(),
                ok: true,
                table: report::solve_table(s, seed, &[r])?,
                path: out.to_path_buf(),
            }))
        }
        Err(Error::Infeasible(msg)) => {
            log(&format!("infeasible: {msg}"));
            Ok(Some(Output {
                status: "status=infeasible".into(),
                ok: false,
                table: report::solve_table(s, seed, &[])?,
                path: out.to_path_buf(),
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn pareto(args: &ParetoArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    record_ga(m, &args.ga);
    m.set("out", args.out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let c = enumerate_candidates(&s, args.ga.cap)?;
    match solve_ga(&s, &ga_params(&args.ga)) {
        Ok(front) => {
            log(&format!("front with {} points", front.points.len()));
            Ok(Some(Output {
                status: format!("status=ok points={}", front.points.len()),
                ok: true,
                table: report::front_table(&s, &c, &front)?,
                path: args.out.clone(),
            }))
        }
        Err(Error::Infeasible(msg)) => {
            log(&format!("infeasible: {msg}"));
            Ok(Some(Output {
                status: "status=infeasible".into(),
                ok: false,
                table: report::front_table(&s, &c, &Default::default())?,
                path: args.out.clone(),
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn oracle(args: &OracleArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    m.set("step", args.step);
    m.set("weights", join(&args.weights));
    m.set("budget", args.budget);
    m.set("out", args.out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let weights = if args.weights.is_empty() {
        None
    } else {
        Some(Weights::new(args.weights.clone())?)
    };
    let r = brute_force_oracle_with(&s, &s.scheme.sharing, args.step, weights.as_ref(), args.budget);
    finish_solve(&s, 0, r, &args.out)
}

fn closed_loop(args: &ClosedLoopArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    m.set("inner", args.inner.to_possible_value().unwrap().get_name());
    m.set("tol", args.tol.map_or(String::new(), |v| v.to_string()));
    m.set("max_iter", args.max_iter.map_or(String::new(), |v| v.to_string()));
    m.set("damping", args.damping.map_or(String::new(), |v| v.to_string()));
    m.set("cap", args.cap);
    m.set("trace_out", args.trace_out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let mut env = s
        .environment
        .clone()
        .ok_or_else(|| usage(format!("scenario `{}` has no environment block", s.name)))?;
    if let Some(d) = args.damping {
        env = env.with_damping(d)?;
    }
    if args.tol.is_some() || args.max_iter.is_some() {
        let (tol, max_iter) = (args.tol.unwrap_or(env.tol()), args.max_iter.unwrap_or(env.max_iter()));
        env = env.with_limits(tol, max_iter)?;
    }
    let inner = inner_solver(args.inner, args.cap, 20);
    match solve_closed_loop_with(&s, &env, inner) {
        Ok(run) => {
            let last = run.residuals.last().copied().unwrap_or(0.0);
            log(&format!(
                "{} iterations, final residual {last}, converged {}",
                run.iterations, run.converged
            ));
            let state = if run.converged { "converged" } else { "not-converged" };
            Ok(Some(Output {
                status: format!("status={state} iterations={} residual={last}", run.iterations),
                ok: run.converged,
                table: report::closed_loop_table(&s, &run)?,
                path: args.trace_out.clone(),
            }))
        }
        Err(Error::Infeasible(msg)) => {
            log(&format!("infeasible: {msg}"));
            let empty = sliceopt::closed_loop::ClosedLoopResult {
                result: SolveResult {
                    sizes: vec![],
                    sharing: vec![],
                    scheme_index: 0,
                    outcome: s.evaluate(&vec![0.0; s.m()])?,
                    meta: SolveMeta {
                        solver: inner.label().into(),
                        iterations: 0,
                        grid_step: None,
                        elapsed: Duration::ZERO,
                    },
                },
                kpi: vec![],
                residuals: vec![],
                iterations: 0,
                converged: false,
            };
            Ok(Some(Output {
                status: "status=infeasible".into(),
                ok: false,
                table: report::closed_loop_table(&s, &empty)?,
                path: args.trace_out.clone(),
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn longterm(args: &LongtermArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    if let Some(t) = &args.trace_in {
        input(m, "trace_in", t)?;
    }
    m.set("periods", join(&args.periods));
    m.set("reconfig_cost", args.reconfig_cost);
    m.set("inner", args.inner.to_possible_value().unwrap().get_name());
    m.set("cap", args.cap);
    m.set("out", args.out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let trace = match &args.trace_in {
        Some(path) => load_trace(&s, path)?,
        None => s
            .trace
            .clone()
            .ok_or_else(|| usage(format!("scenario `{}` has no trace block; pass --trace-in", s.name)))?,
    };
    let cost = ReconfigCostModel::new(args.reconfig_cost)?;
    let inner = inner_solver(args.inner, args.cap, 20);
    let choice = optimize_period(&s, &trace, &args.periods, cost, inner)?;
    log(&format!("best update period {}", choice.best));
    Ok(Some(Output {
        status: format!("status=ok best_period={}", choice.best),
        ok: true,
        table: report::period_table(&choice)?,
        path: args.out.clone(),
    }))
}

fn game(args: &GameArgs, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", &args.scenario)?;
    m.set("mode", args.mode.to_possible_value().unwrap().get_name());
    m.set("eta", args.eta.map_or(String::new(), |v| v.to_string()));
    m.set("rounds", args.rounds.map_or(String::new(), |v| v.to_string()));
    m.set("tol", args.tol.map_or(String::new(), |v| v.to_string()));
    m.set("nash_tol", args.nash_tol);
    m.set("out", args.out.display());
    if m.dry_run {
        return Ok(None);
    }
    let s = load(&args.scenario)?;
    let cfg = s
        .operators
        .clone()
        .ok_or_else(|| usage(format!("scenario `{}` has no operators block", s.name)))?;
    let ids: Vec<String> = cfg.members.iter().map(|o| o.id.clone()).collect();
    match args.mode {
        GameMode::Suboperator => {
            let coop = solve_suboperator(&s, &cfg.members)?;
            log(&format!("cooperative total {}", coop.result.outcome.total_profit));
            Ok(Some(Output {
                status: format!("status=ok total={}", coop.result.outcome.total_profit),
                ok: true,
                table: report::suboperator_table(&ids, &coop)?,
                path: args.out.clone(),
            }))
        }
        GameMode::Market => {
            let mut market = cfg.market.clone();
            market.eta = args.eta.unwrap_or(market.eta);
            market.rounds = args.rounds.unwrap_or(market.rounds);
            market.tol = args.tol.unwrap_or(market.tol);
            let market = sliceopt::game::MarketConfig::new(
                market.eta,
                market.rounds,
                market.tol,
                market.initial_prices,
                market.grid_points,
                market.grid_span,
            )?;
            let operators = operators_from_scenario(&s)?;
            let outcome = run_market(&operators, &market)?;
            let grid = market_grid(&operators, &market)?;
            let game = MarketGame::new(&operators, &grid, outcome.prices.clone());
            let verdict = verify_nash(
                &game,
                &MarketGame::profile(&outcome),
                args.nash_tol,
                DEFAULT_ORACLE_BUDGET,
            )?;
            log(&format!(
                "{} rounds, prices {:?}, converged {}, nash {}",
                outcome.rounds(),
                outcome.prices,
                outcome.converged,
                verdict.is_nash
            ));
            let state = if outcome.converged { "converged" } else { "not-converged" };
            Ok(Some(Output {
                status: format!("status={state} nash={}", verdict.is_nash),
                ok: outcome.converged,
                table: report::trade_table(&s, &cfg.traded, &outcome)?,
                path: args.out.clone(),
            }))
        }
    }
}

fn validate(scenario: &Path, m: &mut Manifest) -> Result<Option<Output>, Failure> {
    input(m, "scenario", scenario)?;
    if m.dry_run {
        return Ok(None);
    }
    let s = load(scenario)?;
    let mut blocks = Vec::new();
    if s.environment.is_some() {
        blocks.push("environment");
    }
    if s.trace.is_some() {
        blocks.push("trace");
    }
    if s.operators.is_some() {
        blocks.push("operators");
    }
    println!(
        "ok: scenario `{}` M={} N={} L={} sharing_eligible={} blocks={}",
        s.name,
        s.m(),
        s.n(),
        s.l(),
        s.sharing_eligible.len(),
        if blocks.is_empty() { "none".to_string() } else { blocks.join(",") }
    );
    Ok(None)
}

fn log(message: &str) {
    eprintln!("sliceopt: {message}");
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| usage(e.to_string()))?;
    }
    let name = match &cli.command {
        Command::Validate { .. } => "validate",
        Command::Solve(_) => "solve",
        Command::Pareto(_) => "pareto",
        Command::Oracle(_) => "oracle",
        Command::ClosedLoop(_) => "closed-loop",
        Command::Longterm(_) => "longterm",
        Command::Game(_) => "game",
    };
    let mut m = Manifest::new(name);
    m.dry_run = cli.dry_run;
    m.set("version", env!("CARGO_PKG_VERSION"));
    let output = match &cli.command {
        Command::Validate { scenario } => validate(scenario, &mut m),
        Command::Solve(a) => solve(a, &mut m),
        Command::Pareto(a) => pareto(a, &mut m),
        Command::Oracle(a) => oracle(a, &mut m),
        Command::ClosedLoop(a) => closed_loop(a, &mut m),
        Command::Longterm(a) => longterm(a, &mut m),
        Command::Game(a) => game(a, &mut m),
    }?;
    if cli.dry_run {
        println!("# {}", m.line());
        return Ok(());
    }
    let Some(out) = output else {
        return Ok(());
    };
    out.table.save(&out.path, &[m.line(), out.status.clone()])?;
    log(&format!("{name}: wrote {}", out.path.display()));
    if out.ok {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_INFEASIBLE,
            message: out.status,
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("sliceopt: error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
