//! Unconstrained line-search solvers: the q-Newton scheme and a BFGS baseline.
//!
//! Both share one driver. Each iteration asks a [`Model`] for a direction,
//! backtracks along it, and hands the step back to the model.

use std::cell::RefCell;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linesearch::{backtracking_from, LineSearchParams};
use crate::problems::Problem;
use crate::psdfactor::{psd_modify, DeltaPolicy};
use crate::qcalc::QSchedule;
use crate::qmatrix::q_hessian;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub grad_tolerance: f64,
    pub max_iterations: usize,
    pub time_cap_seconds: f64,
    pub line_search: LineSearchParams,
    pub delta_policy: DeltaPolicy,
    /// For piecewise problems, build the q-Hessian from the gradient of the
    /// piece containing the current iterate rather than the raw gradient.
    pub anchor_pieces: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tolerance: 1e-5,
            max_iterations: 10_000,
            time_cap_seconds: 100.0,
            line_search: LineSearchParams::default(),
            delta_policy: DeltaPolicy::default(),
            anchor_pieces: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!("grad_tolerance {}", self.grad_tolerance)));
        }
        if !(self.time_cap_seconds > 0.0) {
            return Err(Error::InvalidParameter(format!("time_cap_seconds {}", self.time_cap_seconds)));
        }
        self.line_search.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Converged,
    MaxIterations,
    TimeCap,
    LineSearchFailure,
    NumericFailure,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max_iterations",
            Status::TimeCap => "time_cap",
            Status::LineSearchFailure => "line_search_failure",
            Status::NumericFailure => "numeric_failure",
        }
    }
}

/// One accepted iteration, recorded at the point the step was taken from.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub f_value: f64,
    pub grad_norm: f64,
    pub alpha: f64,
    pub q_k: Option<f64>,
    /// `-g.p / (|g| |p|)`
    pub cos_theta: f64,
    /// Condition number of the matrix that produced the direction.
    pub condition_number: f64,
    pub fallback_count: usize,
    pub curvature_holds: bool,
    /// The iterate `x_k` the record describes.
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: Status,
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub trace: Vec<IterationRecord>,
    /// The error behind a failure status, if any.
    pub error: Option<Error>,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Largest condition number seen along the trace.
    pub fn max_condition_number(&self) -> f64 {
        self.trace.iter().map(|r| r.condition_number).fold(1.0, f64::max)
    }
}

/// A search direction together with what the trace needs to know about it.
#[derive(Debug, Clone)]
pub struct Direction {
    pub p: DVector<f64>,
    pub condition_number: f64,
    pub q_k: Option<f64>,
    pub fallback_count: usize,
}

/// Source of search directions for the shared driver.
pub trait Model {
    fn direction(&mut self, x: &DVector<f64>, g: &DVector<f64>) -> Result<Direction>;
    /// Called after an accepted step `s` with gradient change `y`.
    fn accept(&mut self, s: &DVector<f64>, y: &DVector<f64>);
}

/// `x + alpha p`, coordinate by coordinate.
pub fn trial_point(x: &DVector<f64>, p: &DVector<f64>, alpha: f64) -> DVector<f64> {
    x.zip_map(p, |xi, pi| xi + alpha * pi)
}

/// Ratio of extreme eigenvalues of a symmetric positive definite matrix.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), &v| (lo.min(v), hi.max(v.abs())));
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

fn finite_gradient(problem: &Problem, x: &DVector<f64>) -> Result<DVector<f64>> {
    let g = problem.gradient(x.as_slice());
    if g.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: g.len(),
        });
    }
    if g.iter().all(|v| v.is_finite()) {
        Ok(DVector::from_vec(g))
    } else {
        Err(Error::NumericFailure {
            point: x.as_slice().to_vec(),
        })
    }
}

/// Shared iteration loop.
pub fn run<M: Model>(problem: &Problem, x0: &[f64], config: &SolverConfig, model: &mut M) -> SolveResult {
    let start = Instant::now();
    let mut x = DVector::from_column_slice(x0);
    let mut trace = Vec::new();
    let finish = |status: Status, x: &DVector<f64>, f: f64, gnorm: f64, trace: Vec<IterationRecord>, error| SolveResult {
        status,
        x_final: x.as_slice().to_vec(),
        f_final: f,
        grad_norm: gnorm,
        iterations: trace.len(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        trace,
        error,
    };

    let mut fx = problem.value(x.as_slice());
    let mut g = match finite_gradient(problem, &x) {
        Ok(g) if fx.is_finite() => g,
        Ok(_) => {
            let e = Error::NumericFailure { point: x0.to_vec() };
            return finish(Status::NumericFailure, &x, fx, f64::NAN, trace, Some(e));
        }
        Err(e) => return finish(Status::NumericFailure, &x, fx, f64::NAN, trace, Some(e)),
    };

    loop {
        let gnorm = g.norm();
        if gnorm < config.grad_tolerance {
            return finish(Status::Converged, &x, fx, gnorm, trace, None);
        }
        if trace.len() >= config.max_iterations {
            return finish(Status::MaxIterations, &x, fx, gnorm, trace, None);
        }
        if start.elapsed().as_secs_f64() > config.time_cap_seconds {
            return finish(Status::TimeCap, &x, fx, gnorm, trace, None);
        }

        let dir = match model.direction(&x, &g) {
            Ok(d) => d,
            Err(e) => return finish(Status::NumericFailure, &x, fx, gnorm, trace, Some(e)),
        };
        let p = &dir.p;
        let slope = g.dot(p);
        let cos_theta = -slope / (gnorm * p.norm());

        let accepted_grad: RefCell<Option<Result<DVector<f64>>>> = RefCell::new(None);
        let step = backtracking_from(
            |a| problem.value(trial_point(&x, p, a).as_slice()),
            |a| {
                let gp = finite_gradient(problem, &trial_point(&x, p, a));
                let slope = gp.as_ref().map(|v| v.dot(p)).unwrap_or(f64::NAN);
                *accepted_grad.borrow_mut() = Some(gp);
                slope
            },
            fx,
            slope,
            &config.line_search,
        );
        let step = match step {
            Ok(s) => s,
            Err(e) => return finish(Status::LineSearchFailure, &x, fx, gnorm, trace, Some(e)),
        };
        let x_new = trial_point(&x, p, step.alpha);
        let g_new = match accepted_grad.into_inner() {
            Some(Ok(v)) => v,
            Some(Err(e)) => return finish(Status::NumericFailure, &x_new, step.phi_alpha, f64::NAN, trace, Some(e)),
            None => unreachable!("line search evaluates the slope at the accepted step"),
        };

        trace.push(IterationRecord {
            k: trace.len(),
            f_value: fx,
            grad_norm: gnorm,
            alpha: step.alpha,
            q_k: dir.q_k,
            cos_theta,
            condition_number: dir.condition_number,
            fallback_count: dir.fallback_count,
            curvature_holds: step.curvature_holds,
            x: x.as_slice().to_vec(),
        });

        let s = &x_new - &x;
        let y = &g_new - &g;
        model.accept(&s, &y);
        x = x_new;
        g = g_new;
        fx = step.phi_alpha;
    }
}

/// q-Hessian model: `B_k` is the positive-definite modification of the
/// symmetrized q-Hessian at `x_k` with dilation `q_k`.
pub struct QModel<'a> {
    pub problem: &'a Problem,
    pub schedule: QSchedule,
    pub delta_policy: DeltaPolicy,
    pub anchor_pieces: bool,
}

impl Model for QModel<'_> {
    fn direction(&mut self, x: &DVector<f64>, g: &DVector<f64>) -> Result<Direction> {
        let q = self.schedule.q();
        let xs = x.as_slice();
        let h = if self.anchor_pieces && self.problem.has_pieces() {
            let anchor = xs.to_vec();
            q_hessian(&|z: &[f64]| self.problem.piece_gradient(&anchor, z), xs, q)?
        } else {
            q_hessian(&|z: &[f64]| self.problem.gradient(z), xs, q)?
        };
        let delta = self.delta_policy.delta_for(&h.matrix);
        let pm = psd_modify(&h.matrix, delta)?;
        let p = pm.solve(&(-g));
        Ok(Direction {
            p,
            condition_number: condition_number(&pm.modified_matrix),
            q_k: Some(q.get()),
            fallback_count: h.fallback_count,
        })
    }

    fn accept(&mut self, _s: &DVector<f64>, _y: &DVector<f64>) {
        self.schedule.advance();
    }
}

/// Run the q-Newton line search from `x0`.
pub fn solve_qls(problem: &Problem, x0: &[f64], config: &SolverConfig, schedule: QSchedule) -> SolveResult {
    let mut model = QModel {
        problem,
        schedule,
        delta_policy: config.delta_policy,
        anchor_pieces: config.anchor_pieces,
    };
    run(problem, x0, config, &mut model)
}

/// Threshold factor in the BFGS skip rule `y.s > 1e-10 |s| |y|`.
pub const BFGS_SKIP: f64 = 1e-10;

/// BFGS update `B - Bs (Bs)^T / s^T B s + y y^T / y^T s`, or `B` unchanged
/// when the curvature `y^T s` is not safely positive.
pub fn bfgs_update(b: &DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>) -> DMatrix<f64> {
    let ys = y.dot(s);
    if !(ys > BFGS_SKIP * s.norm() * y.norm()) {
        return b.clone();
    }
    let bs = b * s;
    let sbs = s.dot(&bs);
    let mut out = b - &bs * bs.transpose() / sbs + y * y.transpose() / ys;
    let sym = (&out + out.transpose()) * 0.5;
    out.copy_from(&sym);
    out
}

/// State of the BFGS baseline.
#[derive(Debug, Clone)]
pub struct BfgsState {
    pub b: DMatrix<f64>,
    /// Number of updates skipped by the curvature rule.
    pub skipped: usize,
}

impl BfgsState {
    pub fn new(n: usize) -> Self {
        Self {
            b: DMatrix::identity(n, n),
            skipped: 0,
        }
    }
}

impl Model for BfgsState {
    fn direction(&mut self, _x: &DVector<f64>, g: &DVector<f64>) -> Result<Direction> {
        let chol = match self.b.clone().cholesky() {
            Some(c) => c,
            None => {
                // rounding drift only; restart from the identity
                self.b = DMatrix::identity(g.len(), g.len());
                self.b.clone().cholesky().expect("identity is positive definite")
            }
        };
        Ok(Direction {
            p: chol.solve(&(-g)),
            condition_number: condition_number(&self.b),
            q_k: None,
            fallback_count: 0,
        })
    }

    fn accept(&mut self, s: &DVector<f64>, y: &DVector<f64>) {
        let next = bfgs_update(&self.b, s, y);
        if next == self.b {
            self.skipped += 1;
        }
        self.b = next;
    }
}

/// Run BFGS with `B_0 = I` from `x0`.
pub fn solve_bfgs(problem: &Problem, x0: &[f64], config: &SolverConfig) -> SolveResult {
    let mut state = BfgsState::new(x0.len());
    run(problem, x0, config, &mut state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::make_fc;
    use approx::assert_abs_diff_eq;

    fn norm_sq(n: usize) -> Problem {
        Problem::new(
            "normsq",
            n,
            |x| x.iter().map(|v| v * v).sum(),
            |x| x.iter().map(|v| 2.0 * v).collect(),
        )
        .with_minimizers(vec![vec![0.0; n]])
    }

    fn quartic(n: usize) -> Problem {
        Problem::new(
            "quartic",
            n,
            |x| x.iter().map(|v| v.powi(4) + v * v).sum(),
            |x| x.iter().map(|v| 4.0 * v.powi(3) + 2.0 * v).collect(),
        )
        .with_minimizers(vec![vec![0.0; n]])
    }

    fn sched(gamma: u32) -> QSchedule {
        QSchedule::new(0.9, gamma).unwrap()
    }

    fn starts(c: f64) -> Vec<[f64; 2]> {
        (0..10).map(|j| [c, 0.1 + 0.2 * j as f64]).collect()
    }

    #[test]
    fn quadratic_is_solved_in_one_step() {
        let r = solve_qls(&norm_sq(2), &[1.0, 1.0], &SolverConfig::default(), sched(1));
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 1);
        assert_abs_diff_eq!(r.x_final[0], 0.0, epsilon = 1e-12);
        assert_eq!(r.trace[0].alpha, 1.0);
        assert_eq!(r.trace[0].q_k, Some(0.9));
    }

    #[test]
    fn optimal_start_takes_no_iterations() {
        let r = solve_qls(&norm_sq(2), &[0.0, 0.0], &SolverConfig::default(), sched(1));
        assert_eq!(r.status, Status::Converged);
        assert_eq!(r.iterations, 0);
        let r = solve_bfgs(&norm_sq(2), &[0.0, 0.0], &SolverConfig::default());
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn bfgs_first_direction_is_steepest_descent() {
        let r = solve_bfgs(&norm_sq(2), &[1.0, 1.0], &SolverConfig::default());
        assert!(r.converged());
        assert_abs_diff_eq!(r.trace[0].cos_theta, 1.0, epsilon = 1e-15);
        assert_eq!(r.trace[0].q_k, None);
    }

    #[test]
    fn bfgs_update_examples() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        let e1 = DVector::from_column_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(bfgs_update(&i3, &e1, &e1), i3);
        let b = bfgs_update(&i3, &e1, &(&e1 * 2.0));
        assert_eq!(b, DMatrix::from_diagonal(&DVector::from_column_slice(&[2.0, 1.0, 1.0])));
        assert_eq!(bfgs_update(&i3, &e1, &(-&e1)), i3);
    }

    #[test]
    fn secant_condition_after_updates() {
        let mut b = DMatrix::<f64>::identity(3, 3);
        let pairs = [
            ([1.0, 0.5, -0.2], [2.0, 0.3, 0.1]),
            ([0.1, -1.0, 0.4], [0.2, -3.0, 0.5]),
            ([-0.3, 0.2, 1.0], [-0.1, 0.4, 2.5]),
        ];
        for (s, y) in pairs {
            let s = DVector::from_column_slice(&s);
            let y = DVector::from_column_slice(&y);
            b = bfgs_update(&b, &s, &y);
            assert!((&b * &s - &y).amax() < 1e-10);
            assert!(b.clone().cholesky().is_some());
        }
    }

    #[test]
    fn fc_half_iteration_means() {
        let config = SolverConfig::default();
        let p = make_fc(0.5).unwrap();
        let mean = |f: &dyn Fn(&[f64; 2]) -> SolveResult| {
            let rs: Vec<SolveResult> = starts(0.5).iter().map(f).collect();
            assert!(rs.iter().all(|r| r.converged()));
            rs.iter().map(|r| r.iterations as f64).sum::<f64>() / rs.len() as f64
        };
        let q1 = mean(&|x0| solve_qls(&p, x0, &config, sched(1)));
        assert!((3.0..=7.0).contains(&q1), "q1 mean {q1}");
        let bfgs = mean(&|x0| solve_bfgs(&p, x0, &config));
        assert!((6.0..=13.0).contains(&bfgs), "bfgs mean {bfgs}");
    }

    #[test]
    fn trace_respects_descent_and_condition_bound() {
        let config = SolverConfig::default();
        for c in [0.1, 0.5, 0.9, 1.3] {
            let p = make_fc(c).unwrap();
            for x0 in starts(c) {
                for r in [solve_qls(&p, &x0, &config, sched(2)), solve_bfgs(&p, &x0, &config)] {
                    let mut last = f64::INFINITY;
                    for rec in &r.trace {
                        assert!(rec.cos_theta > 0.0);
                        assert!(rec.cos_theta >= 1.0 / rec.condition_number - 1e-10);
                        assert!(rec.f_value < last);
                        last = rec.f_value;
                    }
                }
            }
        }
    }

    #[test]
    fn quartic_shows_superlinear_ratios() {
        let p = quartic(4);
        let r = solve_qls(&p, &[1.0; 4], &SolverConfig::default(), sched(2));
        assert!(r.converged());
        let mut xs: Vec<&[f64]> = r.trace.iter().map(|t| t.x.as_slice()).collect();
        xs.push(&r.x_final);
        assert_eq!(xs[0], &[1.0; 4]);
        let errs: Vec<f64> = xs.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
        let n = errs.len();
        assert!(n >= 4);
        for k in n - 4..n - 1 {
            assert!(errs[k + 1] / errs[k] < 0.1, "ratio {} at {k}", errs[k + 1] / errs[k]);
        }
    }

    #[test]
    fn max_iterations_and_time_cap() {
        let p = make_fc(0.5).unwrap();
        let config = SolverConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let r = solve_bfgs(&p, &[0.5, 0.1], &config);
        assert_eq!(r.status, Status::MaxIterations);
        assert_eq!(r.iterations, 1);
        let config = SolverConfig {
            time_cap_seconds: 1e-12,
            ..Default::default()
        };
        let r = solve_qls(&p, &[0.5, 0.1], &config, sched(1));
        assert_eq!(r.status, Status::TimeCap);
    }

    #[test]
    fn non_finite_start_is_reported() {
        let r = solve_qls(&norm_sq(2), &[f64::NAN, 1.0], &SolverConfig::default(), sched(1));
        assert_eq!(r.status, Status::NumericFailure);
        assert!(r.error.is_some());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            grad_tolerance: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
