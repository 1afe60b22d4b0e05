//! Sequential quadratic programming with q-Hessians of the Lagrangian.
//!
//! Each iteration builds the q-Hessian of `L(x, u, v) = f + u.h + v.g` at the
//! current multipliers, shifts it positive definite, solves the QP model,
//! and backtracks on the l1 merit function `f + mu (sum |h| + sum max(0, g))`.

mod qp;

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub use qp::{kkt_solve, qp_active_set, qp_kkt_residual, LinearConstraints, QpSolution, MAX_ENUMERATED_ROWS};

use crate::error::{Error, Result};
use crate::linesearch::backtracking_from;
use crate::problems::{GradientFn, ObjectiveFn, Problem};
use crate::psdfactor::psd_modify;
use crate::qcalc::{QSchedule, QValue};
use crate::qmatrix::{lagrangian_gradient, q_hessian_lagrangian, JacobianFn};
use crate::usolve::{trial_point, SolverConfig, Status};

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// A block of constraint functions with their `count x n` Jacobian.
#[derive(Clone)]
pub struct ConstraintSet {
    pub count: usize,
    pub values: VectorFn,
    pub jacobian: MatrixFn,
}

impl ConstraintSet {
    pub fn new<V, J>(count: usize, values: V, jacobian: J) -> Self
    where
        V: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self {
            count,
            values: Arc::new(values),
            jacobian: Arc::new(jacobian),
        }
    }
}

/// `min f(x)` subject to `h(x) = 0`, `g(x) <= 0`, with a starting triple.
#[derive(Clone)]
pub struct ConstrainedProblem {
    pub name: String,
    pub dimension: usize,
    objective: ObjectiveFn,
    gradient: GradientFn,
    pub equalities: Option<ConstraintSet>,
    pub inequalities: Option<ConstraintSet>,
    pub x0: Vec<f64>,
    pub u0: Vec<f64>,
    pub v0: Vec<f64>,
}

impl std::fmt::Debug for ConstrainedProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedProblem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("m", &self.eq_count())
            .field("p", &self.ineq_count())
            .field("x0", &self.x0)
            .finish_non_exhaustive()
    }
}

impl ConstrainedProblem {
    pub fn new<F, G>(name: impl Into<String>, dimension: usize, objective: F, gradient: G) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            dimension,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            equalities: None,
            inequalities: None,
            x0: vec![0.0; dimension],
            u0: Vec::new(),
            v0: Vec::new(),
        }
    }

    /// Wrap an unconstrained problem, starting from `x0`.
    pub fn unconstrained(problem: &Problem, x0: &[f64]) -> Self {
        let (pf, pg) = (problem.clone(), problem.clone());
        Self::new(
            problem.name.clone(),
            problem.dimension,
            move |x| pf.value(x),
            move |x| pg.gradient(x),
        )
        .with_start(x0.to_vec(), Vec::new(), Vec::new())
    }

    pub fn with_equalities(mut self, set: ConstraintSet) -> Self {
        self.u0 = vec![0.0; set.count];
        self.equalities = Some(set);
        self
    }

    pub fn with_inequalities(mut self, set: ConstraintSet) -> Self {
        self.v0 = vec![0.0; set.count];
        self.inequalities = Some(set);
        self
    }

    pub fn with_start(mut self, x0: Vec<f64>, u0: Vec<f64>, v0: Vec<f64>) -> Self {
        self.x0 = x0;
        if !u0.is_empty() || self.eq_count() == 0 {
            self.u0 = u0;
        }
        if !v0.is_empty() || self.ineq_count() == 0 {
            self.v0 = v0;
        }
        self
    }

    pub fn eq_count(&self) -> usize {
        self.equalities.as_ref().map_or(0, |s| s.count)
    }

    pub fn ineq_count(&self) -> usize {
        self.inequalities.as_ref().map_or(0, |s| s.count)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    fn h(&self, x: &[f64]) -> Vec<f64> {
        self.equalities.as_ref().map_or_else(Vec::new, |s| (s.values)(x))
    }

    fn g(&self, x: &[f64]) -> Vec<f64> {
        self.inequalities.as_ref().map_or_else(Vec::new, |s| (s.values)(x))
    }

    fn jac(set: &Option<ConstraintSet>, x: &[f64], n: usize) -> DMatrix<f64> {
        set.as_ref().map_or_else(|| DMatrix::zeros(0, n), |s| (s.jacobian)(x))
    }

    /// `sum |h| + sum max(0, g)` at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        violation(&self.h(x), &self.g(x))
    }

    fn validate(&self) -> Result<()> {
        let n = self.dimension;
        let bad = |what: &str| Err(Error::InvalidParameter(format!("{}: {what}", self.name)));
        if self.x0.len() != n {
            return bad("x0 length");
        }
        if self.u0.len() != self.eq_count() || self.v0.len() != self.ineq_count() {
            return bad("multiplier length");
        }
        if self.eq_count() >= n && self.eq_count() > 0 {
            return bad("needs fewer equalities than variables");
        }
        if self.v0.iter().any(|&v| v < 0.0) {
            return bad("inequality multipliers must be nonnegative");
        }
        Ok(())
    }
}

fn violation(h: &[f64], g: &[f64]) -> f64 {
    h.iter().map(|v| v.abs()).sum::<f64>() + g.iter().map(|v| v.max(0.0)).sum::<f64>()
}

/// `f + mu (sum |h_i| + sum max(0, g_j))`.
pub fn merit_l1(f_val: f64, h_vals: &[f64], g_vals: &[f64], mu: f64) -> f64 {
    f_val + mu * violation(h_vals, g_vals)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpTraceRecord {
    pub k: usize,
    pub merit_value: f64,
    /// Merit at the accepted trial point, same penalty weight.
    pub merit_accepted: f64,
    /// `|grad_x L|` at the iterate.
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub alpha: f64,
    pub q_k: f64,
    pub mu: f64,
    /// Smallest Rayleigh quotient of `B` over the null space of the equality Jacobian.
    pub beta1_observed: f64,
    /// Spectral norm of `B`.
    pub beta2_observed: f64,
    /// Spectral norm of `B^-1`.
    pub beta3_observed: f64,
    pub active_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpResult {
    pub status: SqpStatus,
    pub x_final: Vec<f64>,
    pub u_final: Vec<f64>,
    pub v_final: Vec<f64>,
    pub f_final: f64,
    pub kkt_residual: f64,
    pub constraint_violation: f64,
    pub iterations: usize,
    pub elapsed_seconds: f64,
    pub trace: Vec<SqpTraceRecord>,
    /// Iterates `x_0, ..., x_final`.
    pub iterates: Vec<Vec<f64>>,
    pub error: Option<Error>,
}

/// Unconstrained statuses plus a failed QP subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Solver(Status),
    QpFailure,
}

impl SqpResult {
    pub fn converged(&self) -> bool {
        self.status == SqpStatus::Solver(Status::Converged)
    }
}

/// Monitors for the bounds on `B`: Rayleigh floor on the null space, `|B|`, `|B^-1|`.
fn beta_monitors(b: &DMatrix<f64>, jac_h: &DMatrix<f64>) -> (f64, f64, f64) {
    let eig = SymmetricEigen::new(b.clone()).eigenvalues;
    let lo = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let hi = eig.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let n = b.nrows();
    let beta1 = if jac_h.nrows() == 0 {
        lo
    } else {
        let gram = jac_h.tr_mul(jac_h);
        let se = SymmetricEigen::new(gram);
        let top = se.eigenvalues.amax().max(1.0);
        let cols: Vec<usize> = (0..n).filter(|&i| se.eigenvalues[i] <= 1e-10 * top).collect();
        if cols.is_empty() {
            f64::INFINITY
        } else {
            let z = se.eigenvectors.select_columns(&cols);
            let reduced = z.transpose() * b * &z;
            SymmetricEigen::new(reduced).eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v))
        }
    };
    (beta1, hi, 1.0 / lo)
}

/// Initial l1 penalty weight.
pub const INITIAL_PENALTY: f64 = 1.0;

/// Run q-SQP from the problem's starting triple.
///
/// Stops once `|grad_x L| < eps` and the constraint violation is below `eps`.
pub fn solve_qsqp(problem: &ConstrainedProblem, config: &SolverConfig, schedule: QSchedule) -> SqpResult {
    let mut run = SqpRun {
        problem,
        start: Instant::now(),
        x: DVector::from_column_slice(&problem.x0),
        u: problem.u0.clone(),
        v: problem.v0.clone(),
        trace: Vec::new(),
        iterates: vec![problem.x0.clone()],
    };
    let (m, p) = (problem.eq_count(), problem.ineq_count());
    let mut schedule = schedule;
    let mut mu = INITIAL_PENALTY;
    let mut working: Vec<usize> = Vec::new();

    if let Err(e) = problem.validate() {
        return run.finish(SqpStatus::Solver(Status::NumericFailure), None, Some(e));
    }
    let mut cur = match run.evaluate() {
        Ok(e) => e,
        Err(e) => return run.finish(SqpStatus::Solver(Status::NumericFailure), None, Some(e)),
    };

    loop {
        let kkt = run.lagrangian_gradient().norm();
        let viol = violation(&cur.h, &cur.g);
        if kkt < config.grad_tolerance && viol < config.grad_tolerance {
            return run.finish(SqpStatus::Solver(Status::Converged), Some(&cur), None);
        }
        if run.trace.len() >= config.max_iterations {
            return run.finish(SqpStatus::Solver(Status::MaxIterations), Some(&cur), None);
        }
        if run.start.elapsed().as_secs_f64() > config.time_cap_seconds {
            return run.finish(SqpStatus::Solver(Status::TimeCap), Some(&cur), None);
        }

        let q = schedule.q();
        let pm = match run
            .q_hessian(q)
            .and_then(|h| psd_modify(&h, config.delta_policy.delta_for(&h)))
        {
            Ok(pm) => pm,
            Err(e) => return run.finish(SqpStatus::Solver(Status::NumericFailure), Some(&cur), Some(e)),
        };

        let (d, lambda, nu) = if m == 0 && p == 0 {
            (pm.solve(&(-&cur.grad)), DVector::zeros(0), DVector::zeros(0))
        } else {
            let eq = LinearConstraints::new(cur.jh.clone(), -DVector::from_column_slice(&cur.h));
            let ineq = LinearConstraints::new(cur.jg.clone(), -DVector::from_column_slice(&cur.g));
            match qp_active_set(&pm.modified_matrix, &cur.grad, &eq, &ineq, &working) {
                Ok(sol) => {
                    working = sol.active_set.clone();
                    (sol.d_x, sol.eq_multipliers, sol.ineq_multipliers)
                }
                Err(e) => return run.finish(SqpStatus::QpFailure, Some(&cur), Some(e)),
            }
        };

        if m + p > 0 {
            let mult_inf = lambda.iter().chain(nu.iter()).fold(0.0_f64, |acc, w| acc.max(w.abs()));
            mu = mu.max(mult_inf + 1.0);
        }
        let phi0 = merit_l1(cur.f, &cur.h, &cur.g, mu);
        let dphi0 = cur.grad.dot(&d) - mu * viol;
        let phi = |a: f64| {
            let y = trial_point(&run.x, &d, a);
            let ys = y.as_slice();
            merit_l1(problem.value(ys), &problem.h(ys), &problem.g(ys), mu)
        };
        let step = match backtracking_from(phi, |_| f64::NAN, phi0, dphi0, &config.line_search) {
            Ok(s) => s,
            Err(e) => return run.finish(SqpStatus::Solver(Status::LineSearchFailure), Some(&cur), Some(e)),
        };

        let (beta1, beta2, beta3) = beta_monitors(&pm.modified_matrix, &cur.jh);
        let k = run.trace.len();
        run.trace.push(SqpTraceRecord {
            k,
            merit_value: phi0,
            merit_accepted: step.phi_alpha,
            kkt_residual: kkt,
            constraint_violation: viol,
            alpha: step.alpha,
            q_k: q.get(),
            mu,
            beta1_observed: beta1,
            beta2_observed: beta2,
            beta3_observed: beta3,
            active_set: working.clone(),
        });

        let alpha = step.alpha;
        run.x = trial_point(&run.x, &d, alpha);
        for (ui, li) in run.u.iter_mut().zip(lambda.iter()) {
            *ui += alpha * (li - *ui);
        }
        for (vi, ni) in run.v.iter_mut().zip(nu.iter()) {
            *vi += alpha * (ni - *vi);
        }
        run.iterates.push(run.x.as_slice().to_vec());
        schedule.advance();
        cur = match run.evaluate() {
            Ok(e) => e,
            Err(e) => return run.finish(SqpStatus::Solver(Status::NumericFailure), None, Some(e)),
        };
    }
}

/// Function data at one iterate.
struct Eval {
    f: f64,
    grad: DVector<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
    jh: DMatrix<f64>,
    jg: DMatrix<f64>,
}

struct SqpRun<'a> {
    problem: &'a ConstrainedProblem,
    start: Instant,
    x: DVector<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    trace: Vec<SqpTraceRecord>,
    iterates: Vec<Vec<f64>>,
}

impl SqpRun<'_> {
    fn evaluate(&self) -> Result<Eval> {
        let pr = self.problem;
        let xs = self.x.as_slice();
        let n = pr.dimension;
        let e = Eval {
            f: pr.value(xs),
            grad: DVector::from_vec(pr.gradient(xs)),
            h: pr.h(xs),
            g: pr.g(xs),
            jh: ConstrainedProblem::jac(&pr.equalities, xs, n),
            jg: ConstrainedProblem::jac(&pr.inequalities, xs, n),
        };
        let finite = e.f.is_finite()
            && e.grad.len() == n
            && e.grad.iter().chain(&e.h).chain(&e.g).chain(e.jh.iter()).chain(e.jg.iter()).all(|v| v.is_finite());
        if finite {
            Ok(e)
        } else {
            Err(Error::NumericFailure { point: xs.to_vec() })
        }
    }

    fn with_lagrangian<T>(&self, body: impl FnOnce(&dyn Fn(&[f64]) -> Vec<f64>, Option<&JacobianFn<'_>>, Option<&JacobianFn<'_>>) -> T) -> T {
        let pr = self.problem;
        let n = pr.dimension;
        let grad_f = |z: &[f64]| pr.gradient(z);
        let jh = |z: &[f64]| ConstrainedProblem::jac(&pr.equalities, z, n);
        let jg = |z: &[f64]| ConstrainedProblem::jac(&pr.inequalities, z, n);
        let jh_ref: Option<&JacobianFn<'_>> = pr.equalities.as_ref().map(|_| &jh as &JacobianFn<'_>);
        let jg_ref: Option<&JacobianFn<'_>> = pr.inequalities.as_ref().map(|_| &jg as &JacobianFn<'_>);
        body(&grad_f, jh_ref, jg_ref)
    }

    fn lagrangian_gradient(&self) -> DVector<f64> {
        self.with_lagrangian(|gf, jh, jg| {
            DVector::from_vec(lagrangian_gradient(gf, jh, jg, &self.u, &self.v, self.x.as_slice()))
        })
    }

    fn q_hessian(&self, q: QValue) -> Result<DMatrix<f64>> {
        self.with_lagrangian(|gf, jh, jg| {
            q_hessian_lagrangian(gf, jh, jg, &self.u, &self.v, self.x.as_slice(), q).map(|h| h.matrix)
        })
    }

    fn finish(self, status: SqpStatus, cur: Option<&Eval>, error: Option<Error>) -> SqpResult {
        let (f_final, kkt, viol) = match cur {
            Some(e) => (e.f, self.lagrangian_gradient().norm(), violation(&e.h, &e.g)),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        SqpResult {
            status,
            x_final: self.x.as_slice().to_vec(),
            u_final: self.u,
            v_final: self.v,
            f_final,
            kkt_residual: kkt,
            constraint_violation: viol,
            iterations: self.trace.len(),
            elapsed_seconds: self.start.elapsed().as_secs_f64(),
            trace: self.trace,
            iterates: self.iterates,
            error,
        }
    }
}

/// `min x1 + x2` subject to `x1^2 + x2^2 = 2`; solution `(-1, -1)` with `u = 1/2`.
pub fn circle_problem(x0: [f64; 2]) -> ConstrainedProblem {
    ConstrainedProblem::new("circle", 2, |x| x[0] + x[1], |_| vec![1.0, 1.0])
        .with_equalities(ConstraintSet::new(
            1,
            |x| vec![x[0] * x[0] + x[1] * x[1] - 2.0],
            |x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
        ))
        .with_start(x0.to_vec(), vec![0.0], Vec::new())
}
