//! Benchmark runners, success rule and performance profiles.

mod profile;
mod report;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use profile::{performance_profile, Metric, ProfileCurve, ProfileReport};
pub use report::{
    fc_summary_csv, parse_runs_csv, profile_csv, profile_svg, runs_csv, trace_csv, write_file,
};

use crate::error::{Error, Result};
use crate::problems::{make_fc, Problem};
use crate::qcalc::QSchedule;
use crate::usolve::{solve_bfgs, solve_qls, SolveResult, SolverConfig};

/// Distance to a known minimizer below which a converged run counts as a success.
pub const SUCCESS_DISTANCE: f64 = 1e-3;
/// Objective gap below which a converged run counts as a success.
pub const SUCCESS_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Bfgs,
    /// q-line search with schedule exponent `gamma`.
    Q(u32),
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolverKind::Bfgs => write!(f, "bfgs"),
            SolverKind::Q(g) => write!(f, "q{g}"),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bfgs" {
            return Ok(SolverKind::Bfgs);
        }
        s.strip_prefix('q')
            .and_then(|g| g.parse::<u32>().ok())
            .filter(|&g| g > 0)
            .map(SolverKind::Q)
            .ok_or_else(|| Error::Parse(format!("unknown solver {s:?}")))
    }
}

/// BFGS followed by `Q_gamma` for each gamma.
pub fn solver_lineup(gammas: &[u32]) -> Vec<SolverKind> {
    std::iter::once(SolverKind::Bfgs)
        .chain(gammas.iter().map(|&g| SolverKind::Q(g)))
        .collect()
}

/// Run one solver from `x0`.
pub fn run_solver(kind: SolverKind, problem: &Problem, x0: &[f64], config: &SolverConfig, q0: f64) -> Result<SolveResult> {
    Ok(match kind {
        SolverKind::Bfgs => solve_bfgs(problem, x0, config),
        SolverKind::Q(gamma) => solve_qls(problem, x0, config, QSchedule::new(q0, gamma)?),
    })
}

/// Converged, and either near a known minimizer or near the known minimum value.
pub fn is_success(problem: &Problem, result: &SolveResult) -> bool {
    result.converged()
        && (problem.distance_to_minimizer(&result.x_final) < SUCCESS_DISTANCE
            || (result.f_final - problem.known_min_value).abs() < SUCCESS_GAP)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub problem: String,
    pub solver: String,
    pub run_index: usize,
    pub seed: u64,
    pub success: bool,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub start_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkTable {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkTable {
    pub fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            (a.problem.as_str(), a.solver.as_str(), a.run_index).cmp(&(b.problem.as_str(), b.solver.as_str(), b.run_index))
        });
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.success).count()
    }
}

/// Checks of the descent-angle bound along traces.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MonitorSummary {
    pub records_checked: usize,
    /// One line per trace record with `cos_theta <= 0` or `cos_theta < 1/kappa - 1e-10`.
    pub violations: Vec<String>,
}

impl MonitorSummary {
    fn absorb(&mut self, label: &str, result: &SolveResult) {
        for rec in &result.trace {
            self.records_checked += 1;
            let bound = 1.0 / rec.condition_number - 1e-10;
            if !(rec.cos_theta > 0.0 && rec.cos_theta >= bound) {
                self.violations.push(format!(
                    "{label} k={}: cos_theta={:e} kappa={:e}",
                    rec.k, rec.cos_theta, rec.condition_number
                ));
            }
        }
    }

    fn merge(&mut self, other: MonitorSummary) {
        self.records_checked += other.records_checked;
        self.violations.extend(other.violations);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcConfig {
    pub c_values: Vec<f64>,
    pub q0: f64,
    pub gammas: Vec<u32>,
    pub solver: SolverConfig,
}

impl Default for FcConfig {
    fn default() -> Self {
        Self {
            c_values: odd_tenths(),
            q0: 0.9,
            gammas: vec![1, 2, 3],
            solver: SolverConfig::default(),
        }
    }
}

/// `0.1, 0.3, ..., 1.9`.
pub fn odd_tenths() -> Vec<f64> {
    (0..10).map(|i| (2 * i + 1) as f64 / 10.0).collect()
}

/// Per-c averages in solver order.
#[derive(Debug, Clone, PartialEq)]
pub struct FcSummaryRow {
    pub c: f64,
    pub mean_iterations: Vec<f64>,
    pub mean_seconds: Vec<f64>,
    pub successes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcBenchmark {
    pub solvers: Vec<SolverKind>,
    pub table: BenchmarkTable,
    pub summary: Vec<FcSummaryRow>,
    pub monitor: MonitorSummary,
}

impl FcBenchmark {
    /// Mean iterations for `(c, solver)`.
    pub fn mean_iterations(&self, c: f64, solver: SolverKind) -> Option<f64> {
        let col = self.solvers.iter().position(|&s| s == solver)?;
        self.summary.iter().find(|r| r.c == c).map(|r| r.mean_iterations[col])
    }
}

pub fn fc_problem_name(c: f64) -> String {
    format!("fc@{c}")
}

/// Run every solver from the starts `(c, y)`, `y = 0.1, 0.3, ..., 1.9`, for each `c`.
///
/// Means are taken over all ten starts, successful or not.
pub fn run_fc_benchmark(config: &FcConfig) -> Result<FcBenchmark> {
    config.solver.validate()?;
    QSchedule::new(config.q0, 1)?;
    let solvers = solver_lineup(&config.gammas);
    let problems: Vec<(f64, Problem)> = config
        .c_values
        .iter()
        .map(|&c| make_fc(c).map(|p| (c, p)))
        .collect::<Result<_>>()?;
    let ys = odd_tenths();

    let jobs: Vec<(usize, usize, usize)> = (0..problems.len())
        .flat_map(|pi| (0..solvers.len()).flat_map(move |si| (0..10).map(move |j| (pi, si, j))))
        .collect();
    let outcomes: Vec<((usize, usize, usize), BenchmarkRow, MonitorSummary)> = jobs
        .par_iter()
        .map(|&(pi, si, j)| {
            let (c, problem) = &problems[pi];
            let x0 = [*c, ys[j]];
            let kind = solvers[si];
            let name = fc_problem_name(*c);
            let mut monitor = MonitorSummary::default();
            let row = match run_solver(kind, problem, &x0, &config.solver, config.q0) {
                Ok(r) => {
                    monitor.absorb(&format!("{name}/{kind}/{j}"), &r);
                    BenchmarkRow {
                        problem: name,
                        solver: kind.to_string(),
                        run_index: j,
                        seed: 0,
                        success: is_success(problem, &r),
                        iterations: r.iterations,
                        elapsed_seconds: r.elapsed_seconds,
                        start_point: x0.to_vec(),
                    }
                }
                Err(_) => BenchmarkRow {
                    problem: name,
                    solver: kind.to_string(),
                    run_index: j,
                    seed: 0,
                    success: false,
                    iterations: 0,
                    elapsed_seconds: 0.0,
                    start_point: x0.to_vec(),
                },
            };
            ((pi, si, j), row, monitor)
        })
        .collect();

    let mut summary = Vec::new();
    for (pi, (c, _)) in problems.iter().enumerate() {
        let mut row = FcSummaryRow {
            c: *c,
            mean_iterations: Vec::new(),
            mean_seconds: Vec::new(),
            successes: Vec::new(),
        };
        for si in 0..solvers.len() {
            let runs: Vec<&BenchmarkRow> = outcomes
                .iter()
                .filter(|((p, s, _), _, _)| *p == pi && *s == si)
                .map(|(_, r, _)| r)
                .collect();
            let n = runs.len() as f64;
            row.mean_iterations.push(runs.iter().map(|r| r.iterations as f64).sum::<f64>() / n);
            row.mean_seconds.push(runs.iter().map(|r| r.elapsed_seconds).sum::<f64>() / n);
            row.successes.push(runs.iter().filter(|r| r.success).count());
        }
        summary.push(row);
    }

    let mut monitor = MonitorSummary::default();
    let mut table = BenchmarkTable::default();
    for (_, row, m) in outcomes {
        table.rows.push(row);
        monitor.merge(m);
    }
    table.sort();
    Ok(FcBenchmark {
        solvers,
        table,
        summary,
        monitor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub master_seed: u64,
    pub runs_required: usize,
    pub attempt_cap: usize,
    pub q0: f64,
    pub gammas: Vec<u32>,
    pub solver: SolverConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            runs_required: 10,
            attempt_cap: 200,
            q0: 0.9,
            gammas: vec![1, 2, 3],
            solver: SolverConfig::default(),
        }
    }
}

/// Per-(problem, solver) outcome of the suite run.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub problem: String,
    pub solver: String,
    pub attempts: usize,
    pub successes: usize,
    pub solved: bool,
    /// Means over successful runs; `NaN` when there are none.
    pub mean_iterations: f64,
    pub mean_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteBenchmark {
    pub table: BenchmarkTable,
    pub cells: Vec<CellSummary>,
    pub monitor: MonitorSummary,
}

/// Seed of one attempt, derived from the master seed and the cell identity.
pub fn run_seed(master_seed: u64, problem: &str, solver: &str, attempt: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(problem.as_bytes());
    h.update([0u8]);
    h.update(solver.as_bytes());
    h.update([0u8]);
    h.update((attempt as u64).to_le_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Uniform start in the problem's start box.
pub fn random_start(problem: &Problem, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = problem.start_box.side;
    problem
        .start_box
        .center
        .iter()
        .map(|c| c + side * (rng.random::<f64>() - 0.5))
        .collect()
}

/// Draw random starts for every (problem, solver) cell until `runs_required`
/// successes or `attempt_cap` attempts. Every attempt becomes a row.
pub fn run_suite_benchmark(suite: &[Problem], config: &SuiteConfig) -> Result<SuiteBenchmark> {
    if suite.is_empty() {
        return Err(Error::InvalidParameter("empty suite".into()));
    }
    config.solver.validate()?;
    QSchedule::new(config.q0, 1)?;
    let solvers = solver_lineup(&config.gammas);
    let cells: Vec<(usize, SolverKind)> = (0..suite.len())
        .flat_map(|p| solvers.iter().map(move |&s| (p, s)))
        .collect();

    let results: Vec<(CellSummary, Vec<BenchmarkRow>, MonitorSummary)> = cells
        .par_iter()
        .map(|&(pi, kind)| {
            let problem = &suite[pi];
            let solver = kind.to_string();
            let mut rows = Vec::new();
            let mut monitor = MonitorSummary::default();
            let mut successes = 0;
            for attempt in 0..config.attempt_cap {
                if successes >= config.runs_required {
                    break;
                }
                let seed = run_seed(config.master_seed, &problem.name, &solver, attempt);
                let x0 = random_start(problem, seed);
                let (success, iterations, elapsed) = match run_solver(kind, problem, &x0, &config.solver, config.q0) {
                    Ok(r) => {
                        monitor.absorb(&format!("{}/{solver}/{attempt}", problem.name), &r);
                        (is_success(problem, &r), r.iterations, r.elapsed_seconds)
                    }
                    Err(_) => (false, 0, 0.0),
                };
                successes += success as usize;
                rows.push(BenchmarkRow {
                    problem: problem.name.clone(),
                    solver: solver.clone(),
                    run_index: attempt,
                    seed,
                    success,
                    iterations,
                    elapsed_seconds: elapsed,
                    start_point: x0,
                });
            }
            let ok: Vec<&BenchmarkRow> = rows.iter().filter(|r| r.success).collect();
            let n = ok.len() as f64;
            let cell = CellSummary {
                problem: problem.name.clone(),
                solver,
                attempts: rows.len(),
                successes: ok.len(),
                solved: ok.len() >= config.runs_required,
                mean_iterations: ok.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
                mean_seconds: ok.iter().map(|r| r.elapsed_seconds).sum::<f64>() / n,
            };
            (cell, rows, monitor)
        })
        .collect();

    let mut table = BenchmarkTable::default();
    let mut summaries = Vec::new();
    let mut monitor = MonitorSummary::default();
    for (cell, rows, m) in results {
        summaries.push(cell);
        table.rows.extend(rows);
        monitor.merge(m);
    }
    table.sort();
    Ok(SuiteBenchmark {
        table,
        cells: summaries,
        monitor,
    })
}
