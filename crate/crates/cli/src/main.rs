//! `ccp`: command-line front end over JSON instance documents.

mod format;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use ccp_core::alsox::BisectionConfig;
use ccp_core::alsoxplus::AmConfig;
use ccp_core::compare::{compare, run_method, CompareReport, CompareRow, Method, MethodConfig};
use ccp_core::drccp::{parse_norm, robustify, worst_case_solve, DrccpMode, DrccpSpec};
use ccp_core::elliptical::{also_x_elliptical, solve_exact_conic, EllipticalCcp};
use ccp_core::generate::{generate, Family};
use ccp_core::loader::{load_problem, Problem};
use ccp_core::lowerlevel::{Backend, LowerLevelOptions};
use ccp_core::model::{CcpInstance, SolveReport};
use ccp_core::oracle::{check_nullspace_property, oracle_report, NullspaceVerdict, DEFAULT_SUBSET_CAP};
use ccp_core::CcpError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] CcpError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "IoError",
            CliError::Usage(_) => "UsageError",
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_infeasibility() => 2,
            CliError::Core(e) if e.is_limit() => 3,
            _ => 1,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "ccp", version, about = "Chance-constrained program solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance with one method.
    Solve(SolveArgs),
    /// Run several methods on one instance and report improvements over CVaR.
    Compare(CompareArgs),
    /// Exact value by scenario-subset enumeration.
    Oracle(OracleArgs),
    /// Generate a random instance document.
    Gen(GenArgs),
    /// Generate seeded instances and compare methods on each.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Auto,
    Lp,
    Sgd,
    Enumeration,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Auto => Backend::Auto,
            BackendArg::Lp => Backend::Lp,
            BackendArg::Sgd => Backend::Sgd,
            BackendArg::Enumeration => Backend::Enumeration,
        }
    }
}

#[derive(Args)]
struct Tolerances {
    /// Bisection tolerance on the budget t.
    #[arg(long, default_value_t = 1e-2)]
    delta1: f64,
    /// Stopping tolerance of alternating minimization.
    #[arg(long, default_value_t = 1e-2)]
    delta2: f64,
    #[arg(long, value_enum, default_value = "auto")]
    backend: BackendArg,
    /// Largest number of kept scenario sets the oracle may enumerate.
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    cap: u128,
}

impl Tolerances {
    fn config(&self) -> MethodConfig {
        MethodConfig {
            bisection: BisectionConfig::with_delta1(self.delta1),
            am: AmConfig { delta2: self.delta2, ..Default::default() },
            lower: LowerLevelOptions::with_backend(self.backend.into()),
            subset_cap: self.cap,
        }
    }
}

#[derive(Args)]
struct Robust {
    /// Wasserstein radius; turns a finite instance into its worst-case counterpart.
    #[arg(long)]
    theta: Option<f64>,
    /// l1, l2 or linf.
    #[arg(long)]
    norm: Option<String>,
    /// dual or shift.
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    method: String,
    #[command(flatten)]
    tol: Tolerances,
    #[command(flatten)]
    robust: Robust,
    /// Recorded in the report; every method is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "cvar,alsox,alsoxplus,oracle")]
    methods: Vec<String>,
    #[command(flatten)]
    tol: Tolerances,
    #[command(flatten)]
    robust: Robust,
    /// Overrides CCP_SOLVE_THREADS.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: OutputFormat,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SUBSET_CAP)]
    cap: u128,
    /// Also decide the equality nullspace property.
    #[arg(long)]
    nullspace: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long = "N")]
    n_scenarios: usize,
    #[arg(long)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    family: String,
    #[arg(long)]
    n: usize,
    #[arg(long = "N")]
    n_scenarios: usize,
    #[arg(long, value_delimiter = ',')]
    epsilon: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "cvar,alsox,alsoxplus")]
    methods: Vec<String>,
    #[command(flatten)]
    tol: Tolerances,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: OutputFormat,
}

fn threads(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("CCP_SOLVE_THREADS").ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(|n| n.get()))
        .unwrap_or(1)
        .max(1)
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    let text = if text.ends_with('\n') { text.to_string() } else { format!("{text}\n") };
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn parse_methods(names: &[String]) -> CliResult<Vec<Method>> {
    names.iter().map(|m| m.trim().parse::<Method>().map_err(CliError::from)).collect()
}

fn pretty(v: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(v).expect("reports serialize")
}

/// A finite or worst-case instance after applying the robustness flags.
enum Target {
    Finite(CcpInstance),
    Robust(DrccpSpec),
    Elliptical(EllipticalCcp),
}

fn load_target(path: &Path, robust: &Robust) -> CliResult<Target> {
    let problem = load_problem(&read(path)?)?;
    let flagged = robust.theta.is_some() || robust.norm.is_some() || robust.mode.is_some();
    let mode = |default: DrccpMode| robust.mode.as_deref().map_or(Ok(default), str::parse);
    Ok(match problem {
        Problem::Finite(inst) if !flagged => Target::Finite(inst),
        Problem::Finite(inst) => {
            let theta = robust.theta.ok_or_else(|| CliError::Usage("--norm and --mode need --theta".into()))?;
            let norm = parse_norm(robust.norm.as_deref().unwrap_or("linf"), None)?;
            Target::Robust(DrccpSpec::new(inst, theta, norm, mode(DrccpMode::BiAffineDual)?)?)
        }
        Problem::Drccp(mut spec) => {
            if let Some(theta) = robust.theta {
                spec.theta = theta;
            }
            if let Some(norm) = &robust.norm {
                spec.norm = parse_norm(norm, None)?;
            }
            spec.mode = mode(spec.mode)?;
            spec.validate()?;
            Target::Robust(spec)
        }
        Problem::Elliptical(inst) => {
            if robust.norm.is_some() || robust.mode.is_some() {
                return Err(CliError::Usage("elliptical instances take --theta only".into()));
            }
            match robust.theta {
                Some(theta) => Target::Elliptical(inst.with_theta(theta)?),
                None => Target::Elliptical(inst),
            }
        }
    })
}

fn solve_target(target: &Target, method: Method, cfg: &MethodConfig) -> CliResult<SolveReport> {
    Ok(match target {
        Target::Finite(inst) => run_method(inst, method, cfg)?,
        Target::Robust(spec) => worst_case_solve(spec, method, cfg)?,
        Target::Elliptical(inst) => match method {
            Method::AlsoX => also_x_elliptical(inst, &cfg.bisection)?,
            Method::Oracle => solve_exact_conic(inst)?,
            other => {
                return Err(CliError::Usage(format!("method {} is not available for elliptical instances", other.tag())))
            }
        },
    })
}

const REPORT_COLUMNS: [&str; 11] = [
    "method",
    "objective",
    "feasible",
    "violation_prob",
    "t_star",
    "iterations",
    "lower_bound_used",
    "upper_bound_used",
    "wall_time",
    "backend",
    "x_star",
];

fn report_csv(r: &SolveReport) -> String {
    let x = r.x_star.iter().map(|v| format::sig6(*v)).collect::<Vec<_>>().join(";");
    let cells = [
        r.method.clone(),
        format::sig6(r.objective),
        r.feasible.to_string(),
        format::sig6(r.violation_prob),
        format::sig6(r.t_star),
        r.iterations.to_string(),
        format::sig6(r.lower_bound_used),
        format::sig6(r.upper_bound_used),
        format::sig6(r.wall_time),
        r.backend.clone(),
        x,
    ];
    format!("{}\n{}\n", REPORT_COLUMNS.join(","), format::row(&cells))
}

fn cmd_solve(args: SolveArgs) -> CliResult<()> {
    let method: Method = args.method.parse()?;
    let target = load_target(&args.instance, &args.robust)?;
    let report = solve_target(&target, method, &args.tol.config())?.with_config("seed", args.seed);
    let text = match args.format {
        OutputFormat::Json => pretty(&report),
        OutputFormat::Csv => report_csv(&report),
    };
    emit(args.out.as_deref(), &text)?;
    if report.feasible {
        Ok(())
    } else {
        Err(CcpError::Infeasible(format!("{} returned a chance-infeasible point", report.method)).into())
    }
}

const COMPARE_COLUMNS: [&str; 7] = ["method", "objective", "feasible", "violation_prob", "time", "improvement_pct", "error"];

fn compare_cells(r: &CompareRow) -> Vec<String> {
    vec![
        r.method.tag().to_string(),
        format::opt(r.objective),
        r.feasible.map(|f| f.to_string()).unwrap_or_default(),
        format::opt(r.violation_prob),
        format::sig6(r.time),
        format::opt(r.improvement_pct),
        r.error_kind.clone().unwrap_or_default(),
    ]
}

fn cmd_compare(args: CompareArgs) -> CliResult<()> {
    let methods = parse_methods(&args.methods)?;
    let inst = match load_target(&args.instance, &args.robust)? {
        Target::Finite(inst) => inst,
        Target::Robust(spec) => robustify(&spec)?,
        Target::Elliptical(_) => return Err(CliError::Usage("compare takes finite-scenario instances".into())),
    };
    let report = compare(&inst, &methods, &args.tol.config(), threads(args.threads));
    let text = match args.format {
        OutputFormat::Json => pretty(&report),
        OutputFormat::Csv => {
            let mut s = COMPARE_COLUMNS.join(",") + "\n";
            for r in &report.rows {
                s += &format::row(&compare_cells(r));
                s.push('\n');
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_oracle(args: OracleArgs) -> CliResult<()> {
    let (report, verdict) = match load_problem(&read(&args.instance)?)? {
        Problem::Finite(inst) => {
            let verdict = args.nullspace.then(|| check_nullspace_property(&inst, args.cap)).transpose()?;
            (oracle_report(&inst, args.cap)?, verdict)
        }
        Problem::Drccp(spec) => (oracle_report(&robustify(&spec)?, args.cap)?, None),
        Problem::Elliptical(inst) => (solve_exact_conic(&inst)?, None),
    };
    let mut doc = json!({ "report": report });
    if let Some(v) = &verdict {
        doc["nullspace"] = serde_json::to_value(v).expect("verdict serializes");
    }
    emit(args.out.as_deref(), &pretty(&doc))?;
    match verdict {
        Some(NullspaceVerdict::CapExceeded { count, cap }) => Err(CcpError::CapExceeded { count, cap }.into()),
        _ => Ok(()),
    }
}

fn cmd_gen(args: GenArgs) -> CliResult<()> {
    let family: Family = args.family.parse()?;
    let inst = generate(family, args.n, args.n_scenarios, args.epsilon, args.seed)?;
    emit(args.out.as_deref(), &inst.to_json())
}

#[derive(serde::Serialize)]
struct BenchRun {
    epsilon: f64,
    seed: u64,
    #[serde(flatten)]
    report: CompareReport,
}

fn cmd_bench(args: BenchArgs) -> CliResult<()> {
    let family: Family = args.family.parse()?;
    let methods = parse_methods(&args.methods)?;
    if args.epsilon.is_empty() {
        return Err(CliError::Usage("--epsilon needs at least one value".into()));
    }
    let cfg = args.tol.config();
    let jobs: Vec<(f64, u64)> = args.epsilon.iter().flat_map(|&e| args.seeds.iter().map(move |&s| (e, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads(args.threads))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let runs: Vec<BenchRun> = pool.install(|| {
        jobs.par_iter()
            .map(|&(epsilon, seed)| {
                let inst = generate(family, args.n, args.n_scenarios, epsilon, seed)?;
                Ok(BenchRun { epsilon, seed, report: compare(&inst, &methods, &cfg, 1) })
            })
            .collect::<Result<_, CcpError>>()
    })?;
    let text = match args.format {
        OutputFormat::Json => pretty(&runs),
        OutputFormat::Csv => {
            let mut s = String::from("family,n,N,epsilon,seed,");
            s += &COMPARE_COLUMNS.join(",");
            s.push('\n');
            for run in &runs {
                for r in &run.report.rows {
                    let mut cells = vec![
                        args.family.clone(),
                        args.n.to_string(),
                        args.n_scenarios.to_string(),
                        format::sig6(run.epsilon),
                        run.seed.to_string(),
                    ];
                    cells.extend(compare_cells(r));
                    s += &format::row(&cells);
                    s.push('\n');
                }
            }
            s
        }
    };
    emit(args.out.as_deref(), &text)
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let detail = e.to_string();
            let message: Vec<&str> =
                detail.lines().map(str::trim).take_while(|l| !l.is_empty() && !l.starts_with("Usage:")).collect();
            return fail("UsageError", message.join(" ").trim_start_matches("error: "), 1);
        }
    };
    let res = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string(), e.exit_code()),
    }
}
