use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qline::bench::{
    fc_summary_csv, parse_runs_csv, performance_profile, profile_csv, profile_svg, run_fc_benchmark,
    run_suite_benchmark, runs_csv, trace_csv, write_file, FcConfig, Metric, SuiteConfig,
};
use qline::problems::{by_name, standard_suite};
use qline::qcalc::QSchedule;
use qline::usolve::{solve_bfgs, solve_qls, SolverConfig};
use qline::Error;

const EXIT_RUN_FAILURES: u8 = 3;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "qline", version, about = "q-Newton line search solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize one problem from one start.
    Solve(SolveArgs),
    /// Run a benchmark sweep.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Build performance profiles from a runs CSV.
    Profile(ProfileArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Qls,
    Bfgs,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    /// Parameter of the fc family.
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated start point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x0: Vec<f64>,
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long, default_value_t = 1)]
    gamma: u32,
    #[arg(long, default_value_t = 0.9)]
    q0: f64,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    /// Write the iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum BenchCommand {
    /// The fc family from the starts (c, 0.1), (c, 0.3), ..., (c, 1.9).
    Fc(FcArgs),
    /// The fifteen-function test set from random starts.
    Suite(SuiteArgs),
}

#[derive(Args)]
struct FcArgs {
    #[arg(long, default_value_t = 0.9)]
    q0: f64,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    gammas: Vec<u32>,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    /// Summary CSV path; per-run rows go next to it with a `.runs.csv` suffix.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SuiteArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 200)]
    attempt_cap: usize,
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
    #[arg(long, default_value_t = 100.0)]
    time_cap: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Iterations,
    Time,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long, value_enum)]
    metric: MetricArg,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn emit(path: Option<&PathBuf>, text: &str) -> Result<(), Error> {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(args: SolveArgs) -> Result<u8, Error> {
    let problem = by_name(&args.problem, args.c)?;
    if args.x0.len() != problem.dimension {
        return Err(Error::DimensionMismatch {
            expected: problem.dimension,
            got: args.x0.len(),
        });
    }
    let config = SolverConfig {
        grad_tolerance: args.eps,
        max_iterations: args.max_iter,
        ..Default::default()
    };
    config.validate()?;
    let result = match args.method {
        Method::Qls => solve_qls(&problem, &args.x0, &config, QSchedule::new(args.q0, args.gamma)?),
        Method::Bfgs => solve_bfgs(&problem, &args.x0, &config),
    };
    if let Some(path) = &args.trace {
        write_file(path, &trace_csv(&result.trace))?;
    }
    let x: Vec<String> = result.x_final.iter().map(|v| v.to_string()).collect();
    println!("status: {}", result.status.as_str());
    println!("iterations: {}", result.iterations);
    println!("x: {}", x.join(","));
    println!("f: {}", result.f_final);
    println!("grad_norm: {:e}", result.grad_norm);
    if let Some(e) = &result.error {
        println!("error: {e}");
    }
    Ok(if result.converged() { 0 } else { EXIT_RUN_FAILURES })
}

fn bench_fc(args: FcArgs) -> Result<u8, Error> {
    let config = FcConfig {
        q0: args.q0,
        gammas: args.gammas,
        solver: SolverConfig {
            grad_tolerance: args.eps,
            ..Default::default()
        },
        ..Default::default()
    };
    let bench = run_fc_benchmark(&config)?;
    emit(args.out.as_ref(), &fc_summary_csv(&bench))?;
    if let Some(out) = &args.out {
        write_file(&out.with_extension("runs.csv"), &runs_csv(&bench.table))?;
    }
    report_failures(bench.table.failures(), bench.table.rows.len())
}

fn bench_suite(args: SuiteArgs) -> Result<u8, Error> {
    let config = SuiteConfig {
        master_seed: args.seed,
        runs_required: args.runs,
        attempt_cap: args.attempt_cap,
        solver: SolverConfig {
            grad_tolerance: args.eps,
            time_cap_seconds: args.time_cap,
            ..Default::default()
        },
        ..Default::default()
    };
    let bench = run_suite_benchmark(&standard_suite(), &config)?;
    emit(args.out.as_ref(), &runs_csv(&bench.table))?;
    let unsolved: Vec<String> = bench
        .cells
        .iter()
        .filter(|c| !c.solved)
        .map(|c| format!("{}/{}", c.problem, c.solver))
        .collect();
    if unsolved.is_empty() {
        Ok(0)
    } else {
        eprintln!("unsolved cells: {}", unsolved.join(", "));
        Ok(EXIT_RUN_FAILURES)
    }
}

fn report_failures(failures: usize, total: usize) -> Result<u8, Error> {
    if failures == 0 {
        Ok(0)
    } else {
        eprintln!("{failures} of {total} runs did not reach a known minimizer");
        Ok(EXIT_RUN_FAILURES)
    }
}

fn profile(args: ProfileArgs) -> Result<u8, Error> {
    let text = std::fs::read_to_string(&args.input).map_err(|e| Error::Io {
        path: args.input.display().to_string(),
        message: e.to_string(),
    })?;
    let table = parse_runs_csv(&text)?;
    let (metric, label) = match args.metric {
        MetricArg::Iterations => (Metric::Iterations, "iterations"),
        MetricArg::Time => (Metric::Time, "time"),
    };
    let report = performance_profile(&table, metric);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    write_file(&args.out, &profile_csv(&report.curves))?;
    if let Some(svg) = &args.svg {
        write_file(svg, &profile_svg(&report.curves, &format!("performance profile ({label})")))?;
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(BenchCommand::Fc(a)) => bench_fc(a),
        Command::Bench(BenchCommand::Suite(a)) => bench_suite(a),
        Command::Profile(a) => profile(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
