//! Command-line front end: `generate`, `solve`, `evaluate`, `compare`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bdd::DEFAULT_LSP2_ITERATIONS;
use crate::benders::{solve_benders, AbbcFeatures, BendersConfig, GammaVariant};
use crate::formulation::solve_bc;
use crate::greedy::greedy_warmstart;
use crate::io::{
    generate_instance, parse_instance, parse_solution, summary_line, write_instance,
    write_results_csv, write_solution, DomainTemplate, GeneratorParams,
};
use crate::localbranching::{solve_lb, LbFeatures, SepBTrigger, SepMode, SubMode};
use crate::milp::FractionalCuts;
use crate::model::{check_domain, coverage, coverage_by_period, Instance};
use crate::stats::{SolveOptions, SolveResult, SolveStatus};

#[derive(Debug, Parser)]
#[command(name = "dyncover", version, about = "Exact solvers for dynamic maximum covering location problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Solve an instance with one method.
    Solve(SolveArgs),
    /// Print the coverage of a given solution.
    Evaluate(EvaluateArgs),
    /// Solve an instance with several methods and tabulate the results.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DomainArg {
    Cardinality,
    Knapsack,
    Ev,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    users: usize,
    #[arg(long)]
    facilities: usize,
    #[arg(long)]
    periods: usize,
    #[arg(long, value_enum, default_value = "cardinality")]
    domain: DomainArg,
    /// Open facilities per period for the cardinality domain.
    #[arg(long, default_value_t = 2)]
    limit: usize,
    /// Per-period opening budget for the ev domain.
    #[arg(long, default_value_t = 3.0)]
    budget: f64,
    #[arg(long, default_value_t = 0.3)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    demand_low: f64,
    #[arg(long, default_value_t = 10.0)]
    demand_high: f64,
    #[arg(long, default_value_t = 1.1)]
    growth: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Greedy,
    Bc,
    Ubbc,
    Abbc,
    Lb,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Bc => "bc",
            Method::Ubbc => "ubbc",
            Method::Abbc => "abbc",
            Method::Lb => "lb",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CutsArg {
    B0,
    B1,
    B2,
    Pareto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SubArg {
    Subd,
    Subb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SepArg {
    Sepd,
    Sepb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TriggerArg {
    All,
    Improving,
}

/// Solver settings shared by `solve` and `compare`.
#[derive(Debug, Clone, Args)]
struct SolverArgs {
    /// Γ rule of the optimality cuts.
    #[arg(long, value_enum)]
    cuts: Option<CutsArg>,
    /// One θ per period (always on for abbc unless --single-cut).
    #[arg(long)]
    multicut: bool,
    #[arg(long, conflicts_with = "multicut")]
    single_cut: bool,
    /// Keep singly covered users in the main problem (on for abbc unless
    /// --no-partial).
    #[arg(long)]
    partial: bool,
    #[arg(long, conflicts_with = "partial")]
    no_partial: bool,
    #[arg(long)]
    no_warmstart: bool,
    /// Cuts at fractional candidates in every node instead of the root only.
    #[arg(long)]
    all_fractional: bool,
    /// Lagrangian cuts at fractional candidates.
    #[arg(long)]
    bdd: bool,
    #[arg(long, default_value_t = DEFAULT_LSP2_ITERATIONS)]
    bdd_iterations: usize,
    #[arg(long, value_enum, default_value = "subd")]
    sub: SubArg,
    #[arg(long, value_enum, default_value = "sepd")]
    sep: SepArg,
    #[arg(long, value_enum, default_value = "all")]
    sepb_trigger: TriggerArg,
    #[arg(long, default_value_t = 2)]
    kappa: usize,
    /// Overall time limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Time limit per restricted or diversified subproblem.
    #[arg(long, default_value_t = 60.0)]
    sp_time_limit: f64,
    #[arg(long)]
    node_limit: Option<usize>,
}

#[derive(Debug, Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "abbc")]
    method: Method,
    #[command(flatten)]
    solver: SolverArgs,
    /// Append the result as a CSV row (header written for a new file).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the best solution found as JSON.
    #[arg(long)]
    solution_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    instance: PathBuf,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    instance: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    csv: PathBuf,
}

fn benders_config(method: Method, a: &SolverArgs) -> BendersConfig {
    let mut cfg = match method {
        Method::Ubbc => {
            let mut c = BendersConfig::ubbc();
            c.multicut = a.multicut;
            c.partial = a.partial;
            c.warmstart = false;
            c
        }
        _ => {
            let f = AbbcFeatures {
                multicut: !a.single_cut,
                pareto: true,
                partial: !a.no_partial,
                warmstart: !a.no_warmstart,
                root_only_fractional: !a.all_fractional,
            };
            BendersConfig::abbc(&f)
        }
    };
    if let Some(c) = a.cuts {
        cfg.variant = match c {
            CutsArg::B0 => GammaVariant::B0,
            CutsArg::B1 => GammaVariant::B1,
            CutsArg::B2 => GammaVariant::B2,
            CutsArg::Pareto => GammaVariant::ParetoB1,
        };
    }
    if a.bdd {
        cfg.bdd_iterations = Some(a.bdd_iterations.max(1));
        if cfg.fractional == FractionalCuts::Off {
            cfg.fractional = FractionalCuts::RootOnly;
        }
    }
    cfg
}

fn lb_features(a: &SolverArgs) -> LbFeatures {
    LbFeatures {
        sub: match a.sub {
            SubArg::Subd => SubMode::SubD,
            SubArg::Subb => SubMode::SubB,
        },
        sep: match a.sep {
            SepArg::Sepd => SepMode::SepD,
            SepArg::Sepb => SepMode::SepB,
        },
        kappa: a.kappa,
        subproblem_time_limit: Some(a.sp_time_limit),
        sepb_trigger: match a.sepb_trigger {
            TriggerArg::All => SepBTrigger::All,
            TriggerArg::Improving => SepBTrigger::Improving,
        },
    }
}

fn greedy_result(inst: &Instance) -> SolveResult {
    let started = std::time::Instant::now();
    let mut out = SolveResult::new(inst.name(), "greedy", "");
    if let Some(x) = greedy_warmstart(inst) {
        out.status = SolveStatus::Feasible;
        out.objective = Some(coverage(inst, &x).expect("sized to the instance"));
        out.solution = Some(x);
        out.bound = f64::INFINITY;
    }
    out.refresh_gap();
    out.wall_seconds = started.elapsed().as_secs_f64();
    out
}

fn run_method(inst: &Instance, method: Method, a: &SolverArgs) -> Result<SolveResult, String> {
    let opts = SolveOptions {
        time_limit_seconds: a.time_limit,
        node_limit: a.node_limit,
    };
    match method {
        Method::Greedy => Ok(greedy_result(inst)),
        Method::Bc => solve_bc(inst, &opts).map_err(|e| e.to_string()),
        Method::Ubbc | Method::Abbc => {
            solve_benders(inst, &opts, &benders_config(method, a), method.name()).map_err(|e| e.to_string())
        }
        Method::Lb => solve_lb(inst, &opts, &lb_features(a)).map_err(|e| e.to_string()),
    }
}

fn load_instance(path: &Path) -> Result<Instance, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let inst = parse_instance(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if inst.name().is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(rename(inst, &stem));
    }
    Ok(inst)
}

fn rename(inst: Instance, name: &str) -> Instance {
    Instance::new(
        name,
        inst.periods(),
        inst.facility_count(),
        inst.users().to_vec(),
        inst.domain().clone(),
    )
    .expect("already validated")
}

fn append_csv(path: &Path, results: &[SolveResult]) -> Result<(), String> {
    let text = write_results_csv(results).map_err(|e| e.to_string())?;
    let exists = path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    let body = if exists {
        text.split_once('\n').map(|(_, rest)| rest.to_string()).unwrap_or_default()
    } else {
        text
    };
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    f.write_all(body.as_bytes()).map_err(|e| format!("{}: {e}", path.display()))
}

fn exit_code(r: &SolveResult) -> i32 {
    match r.status {
        SolveStatus::Infeasible => 1,
        _ => 0,
    }
}

fn execute(cmd: Command, out: &mut dyn Write) -> Result<i32, String> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| e.to_string());
    match cmd {
        Command::Generate(g) => {
            let params = GeneratorParams {
                seed: g.seed,
                periods: g.periods,
                facilities: g.facilities,
                users: g.users,
                radius: g.radius,
                demand_low: g.demand_low,
                demand_high: g.demand_high,
                growth: g.growth,
                domain: match g.domain {
                    DomainArg::Cardinality => DomainTemplate::Cardinality { limit: g.limit },
                    DomainArg::Knapsack => DomainTemplate::Knapsack,
                    DomainArg::Ev => DomainTemplate::EvStyle { budget: g.budget },
                },
            };
            let inst = generate_instance(&params).map_err(|e| e.to_string())?;
            fs::write(&g.out, write_instance(&inst)).map_err(|e| format!("{}: {e}", g.out.display()))?;
            w(out, format!("wrote {} ({} users)", g.out.display(), inst.user_count()))?;
            Ok(0)
        }
        Command::Solve(s) => {
            let inst = load_instance(&s.instance)?;
            let r = match run_method(&inst, s.method, &s.solver) {
                Ok(r) => r,
                Err(e) => {
                    let mut failed = SolveResult::new(inst.name(), s.method.name(), "");
                    failed.features = format!("error: {e}");
                    if let Some(p) = &s.csv {
                        append_csv(p, &[failed])?;
                    }
                    return Err(e);
                }
            };
            w(out, summary_line(&r))?;
            if let Some(x) = &r.solution {
                w(out, format!("solution {}", write_solution(x).trim_end()))?;
                if let Some(p) = &s.solution_out {
                    fs::write(p, write_solution(x)).map_err(|e| format!("{}: {e}", p.display()))?;
                }
            }
            if let Some(p) = &s.csv {
                append_csv(p, std::slice::from_ref(&r))?;
            }
            Ok(exit_code(&r))
        }
        Command::Evaluate(e) => {
            let inst = load_instance(&e.instance)?;
            let text = fs::read_to_string(&e.solution).map_err(|err| format!("{}: {err}", e.solution.display()))?;
            let x = parse_solution(&text).map_err(|err| format!("{}: {err}", e.solution.display()))?;
            let total = coverage(&inst, &x).map_err(|err| err.to_string())?;
            let per = coverage_by_period(&inst, &x).map_err(|err| err.to_string())?;
            let per: Vec<String> = per.iter().map(|&v| crate::io::format_g17(v)).collect();
            w(out, format!("coverage {}", crate::io::format_g17(total)))?;
            w(out, format!("per_period {}", per.join(" ")))?;
            w(out, format!("feasible {}", check_domain(&inst, &x)))?;
            Ok(0)
        }
        Command::Compare(c) => {
            let inst = load_instance(&c.instance)?;
            let mut results = Vec::with_capacity(c.methods.len());
            let mut code = 0;
            for &m in &c.methods {
                match run_method(&inst, m, &c.solver) {
                    Ok(r) => {
                        w(out, summary_line(&r))?;
                        code = code.max(exit_code(&r));
                        results.push(r);
                    }
                    Err(e) => {
                        log::error!("{}: {e}", m.name());
                        let mut failed = SolveResult::new(inst.name(), m.name(), "");
                        failed.features = format!("error: {e}");
                        results.push(failed);
                        code = 1;
                    }
                }
            }
            let text = write_results_csv(&results).map_err(|e| e.to_string())?;
            fs::write(&c.csv, text).map_err(|e| format!("{}: {e}", c.csv.display()))?;
            Ok(code)
        }
    }
}

/// Installs the stderr logger; `DYNCOVER_LOG` is `quiet`, `info` or `debug`
/// (default: warnings only).
pub fn init_logging() {
    let level = match std::env::var("DYNCOVER_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Runs the command line and returns the process exit code: 0 on success,
/// 1 on solver or file errors and infeasible instances, 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
