//! Dolan-Moré performance profiles.

use std::collections::BTreeMap;
use std::str::FromStr;

use super::BenchmarkTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Iterations,
    Time,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterations" => Ok(Metric::Iterations),
            "time" => Ok(Metric::Time),
            other => Err(Error::Parse(format!("unknown metric {other:?}"))),
        }
    }
}

/// Fraction of problems solved within ratio `tau`, sampled at each tau.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub solver: String,
    pub points: Vec<(f64, f64)>,
}

impl ProfileCurve {
    /// Step-function value at `tau`.
    pub fn at(&self, tau: f64) -> f64 {
        self.points
            .iter()
            .take_while(|(t, _)| *t <= tau)
            .last()
            .map_or(0.0, |&(_, f)| f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileReport {
    pub curves: Vec<ProfileCurve>,
    /// `(problem, solver, rho)`; unsolved cells carry `+inf`.
    pub ratios: Vec<(String, String, f64)>,
    pub warnings: Vec<String>,
}

/// Build profiles from a run table.
///
/// A cell is solved when its success count reaches the largest success count
/// of any cell, which is the required-success target of a suite run. Its
/// cost is the metric averaged over successful rows. Problems with no solved
/// cell are dropped with a warning.
pub fn performance_profile(table: &BenchmarkTable, metric: Metric) -> ProfileReport {
    // problem -> solver -> (successes, metric sum)
    let mut cells: BTreeMap<&str, BTreeMap<&str, (usize, f64)>> = BTreeMap::new();
    let mut solvers: Vec<&str> = Vec::new();
    for row in &table.rows {
        if !solvers.contains(&row.solver.as_str()) {
            solvers.push(&row.solver);
        }
        let e = cells.entry(&row.problem).or_default().entry(&row.solver).or_insert((0, 0.0));
        if row.success {
            e.0 += 1;
            e.1 += match metric {
                Metric::Iterations => row.iterations as f64,
                Metric::Time => row.elapsed_seconds,
            };
        }
    }
    solvers.sort_unstable();
    let target = cells
        .values()
        .flat_map(|m| m.values().map(|c| c.0))
        .max()
        .unwrap_or(0);

    let mut warnings = Vec::new();
    let mut ratios = Vec::new();
    let mut per_solver: BTreeMap<&str, Vec<f64>> = solvers.iter().map(|&s| (s, Vec::new())).collect();
    for (problem, by_solver) in &cells {
        let cost = |s: &str| -> Option<f64> {
            by_solver
                .get(s)
                .filter(|c| target > 0 && c.0 >= target)
                .map(|c| c.1 / c.0 as f64)
        };
        let best = solvers.iter().filter_map(|&s| cost(s)).fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            warnings.push(format!("problem {problem} has no solved cell; excluded"));
            continue;
        }
        for &s in &solvers {
            let rho = match cost(s) {
                Some(r) if r == best => 1.0,
                Some(r) if best > 0.0 => r / best,
                Some(_) => f64::INFINITY,
                None => f64::INFINITY,
            };
            ratios.push((problem.to_string(), s.to_string(), rho));
            per_solver.get_mut(s).expect("solver listed").push(rho);
        }
    }

    let n_p = cells.len() - warnings.len();
    let mut taus: Vec<f64> = ratios.iter().map(|r| r.2).filter(|r| r.is_finite()).collect();
    taus.push(1.0);
    taus.sort_by(f64::total_cmp);
    taus.dedup();

    let curves = solvers
        .iter()
        .map(|&s| {
            let rhos = &per_solver[s];
            let points = if n_p == 0 {
                Vec::new()
            } else {
                taus.iter()
                    .map(|&t| (t, rhos.iter().filter(|&&r| r <= t).count() as f64 / n_p as f64))
                    .collect()
            };
            ProfileCurve {
                solver: s.to_string(),
                points,
            }
        })
        .collect();
    ProfileReport {
        curves,
        ratios,
        warnings,
    }
}
