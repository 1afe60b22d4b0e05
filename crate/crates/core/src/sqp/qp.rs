//! Convex QP subproblems: `min g.d + d^T B d / 2` subject to `A_eq d = b_eq`
//! and `A_in d <= b_in`, with `B` positive definite.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::psdfactor::ldl_factor;

/// Linear constraint block `A d (=|<=) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl LinearConstraints {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Self {
        Self { matrix, rhs }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(0, n),
            rhs: DVector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rhs.is_empty()
    }

    fn rows(&self, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.matrix.ncols();
        let m = DMatrix::from_fn(idx.len(), n, |r, c| self.matrix[(idx[r], c)]);
        let b = DVector::from_fn(idx.len(), |r, _| self.rhs[idx[r]]);
        (m, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub d_x: DVector<f64>,
    /// Multipliers of the equality rows.
    pub eq_multipliers: DVector<f64>,
    /// Multipliers of the inequality rows; zero off the active set.
    pub ineq_multipliers: DVector<f64>,
    /// Inequality rows holding with equality at the solution, ascending.
    pub active_set: Vec<usize>,
}

fn rank_deficient(a: &DMatrix<f64>) -> bool {
    if a.nrows() == 0 {
        return false;
    }
    if a.nrows() > a.ncols() {
        return true;
    }
    let gram = a * a.transpose();
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let top = eig.amax();
    let low = eig.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    !(top > 0.0) || low <= 1e-14 * top
}

/// Solve `B d + grad + A^T lambda = 0`, `A d = rhs` through the symmetric
/// indefinite factorization of the KKT matrix.
pub fn kkt_solve(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    rhs: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = b.nrows();
    let m = a_eq.nrows();
    if b.ncols() != n || grad.len() != n || a_eq.ncols() != n || rhs.len() != m {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grad.len(),
        });
    }
    if rank_deficient(a_eq) {
        return Err(Error::DegenerateConstraints);
    }
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(b);
    k.view_mut((n, 0), (m, n)).copy_from(a_eq);
    k.view_mut((0, n), (n, m)).copy_from(&a_eq.transpose());
    let mut r = DVector::zeros(n + m);
    r.rows_mut(0, n).copy_from(&(-grad));
    r.rows_mut(n, m).copy_from(rhs);
    let sol = ldl_factor(&k)?.solve(&r).ok_or(Error::DegenerateConstraints)?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

/// Scale-aware tolerance for feasibility and multiplier signs.
fn tolerance(b: &DMatrix<f64>, grad: &DVector<f64>, eq: &LinearConstraints, ineq: &LinearConstraints) -> f64 {
    let scale = 1.0 + b.amax() + grad.amax() + eq.rhs.amax() + ineq.rhs.amax() + ineq.matrix.amax();
    1e-10 * scale
}

struct Subproblem<'a> {
    b: &'a DMatrix<f64>,
    grad: &'a DVector<f64>,
    eq: &'a LinearConstraints,
    ineq: &'a LinearConstraints,
}

impl Subproblem<'_> {
    /// Minimize with the equalities plus inequality rows `work` held tight.
    fn solve_working(&self, work: &[usize]) -> Result<(DVector<f64>, DVector<f64>, DVector<f64>)> {
        let (a_w, b_w) = self.ineq.rows(work);
        let a = stack(&self.eq.matrix, &a_w);
        let rhs = stack_vec(&self.eq.rhs, &b_w);
        let (d, lam) = kkt_solve(self.b, self.grad, &a, &rhs)?;
        let m = self.eq.len();
        Ok((d, lam.rows(0, m).into_owned(), lam.rows(m, work.len()).into_owned()))
    }

    fn violation(&self, d: &DVector<f64>) -> f64 {
        let s = &self.ineq.matrix * d - &self.ineq.rhs;
        s.iter().fold(0.0_f64, |m, &v| m.max(v))
    }
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let n = top.ncols().max(bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), n);
    if top.nrows() > 0 {
        out.view_mut((0, 0), (top.nrows(), n)).copy_from(top);
    }
    if bottom.nrows() > 0 {
        out.view_mut((top.nrows(), 0), (bottom.nrows(), n)).copy_from(bottom);
    }
    out
}

fn stack_vec(top: &DVector<f64>, bottom: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(top.len() + bottom.len(), top.iter().chain(bottom.iter()).copied())
}

/// Largest number of inequality rows for which a feasible starting working
/// set is searched exhaustively.
pub const MAX_ENUMERATED_ROWS: usize = 20;

/// Primal active-set method.
///
/// `warm_start` seeds the working set. When the point it produces is not
/// feasible, working sets of increasing size are tried until one yields a
/// feasible point, which then starts the primal iteration.
pub fn qp_active_set(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    eq: &LinearConstraints,
    ineq: &LinearConstraints,
    warm_start: &[usize],
) -> Result<QpSolution> {
    let n = b.nrows();
    let p = ineq.len();
    let sub = Subproblem { b, grad, eq, ineq };
    let tol = tolerance(b, grad, eq, ineq);

    if p == 0 {
        let (d, lam) = kkt_solve(b, grad, &eq.matrix, &eq.rhs)?;
        return Ok(QpSolution {
            d_x: d,
            eq_multipliers: lam,
            ineq_multipliers: DVector::zeros(0),
            active_set: Vec::new(),
        });
    }

    let mut work: Vec<usize> = warm_start.iter().copied().filter(|&i| i < p).collect();
    work.sort_unstable();
    work.dedup();
    let mut d = match sub.solve_working(&work) {
        Ok((d, _, _)) if sub.violation(&d) <= tol => d,
        _ => {
            let (w, d) = feasible_start(&sub, n, p, tol)?;
            work = w;
            d
        }
    };

    let max_iter = 50 * (n + p + 1);
    for _ in 0..max_iter {
        // step towards the minimizer on the current working set
        let shifted = b * &d + grad;
        let (a_w, _) = ineq.rows(&work);
        let a = stack(&eq.matrix, &a_w);
        let zeros = DVector::zeros(a.nrows());
        let (s, lam) = kkt_solve(b, &shifted, &a, &zeros)?;
        let m = eq.len();
        if s.amax() <= tol * (1.0 + d.amax()) {
            let mu_w = lam.rows(m, work.len());
            let worst = mu_w
                .iter()
                .enumerate()
                .filter(|(_, &v)| v < -tol)
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i);
            match worst {
                Some(i) => {
                    work.remove(i);
                    continue;
                }
                None => {
                    let mut mult = DVector::zeros(p);
                    for (slot, &row) in work.iter().enumerate() {
                        mult[row] = mu_w[slot].max(0.0);
                    }
                    return Ok(QpSolution {
                        d_x: d,
                        eq_multipliers: lam.rows(0, m).into_owned(),
                        ineq_multipliers: mult,
                        active_set: work,
                    });
                }
            }
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in (0..p).filter(|i| !work.contains(i)) {
            let row = ineq.matrix.row(i);
            let ais = row.dot(&s.transpose());
            if ais > tol * s.amax() {
                let slack = ineq.rhs[i] - row.dot(&d.transpose());
                let step = (slack / ais).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        d += &s * alpha;
        if let Some(i) = blocking {
            work.push(i);
            work.sort_unstable();
        }
    }
    Err(Error::QpFailure("active-set iteration limit reached".into()))
}

fn feasible_start(sub: &Subproblem<'_>, n: usize, p: usize, tol: f64) -> Result<(Vec<usize>, DVector<f64>)> {
    if p > MAX_ENUMERATED_ROWS {
        return Err(Error::QpFailure(format!("{p} inequality rows exceed the feasible-start search limit")));
    }
    let free = n.saturating_sub(sub.eq.len());
    for size in 0..=free.min(p) {
        for mask in 0u32..(1u32 << p) {
            if mask.count_ones() as usize != size {
                continue;
            }
            let work: Vec<usize> = (0..p).filter(|i| mask >> i & 1 == 1).collect();
            if let Ok((d, _, _)) = sub.solve_working(&work) {
                if sub.violation(&d) <= tol {
                    return Ok((work, d));
                }
            }
        }
    }
    Err(Error::QpFailure("no feasible point found".into()))
}

/// Largest violation among QP stationarity, feasibility, dual sign and
/// complementarity, computed from dense products.
pub fn qp_kkt_residual(
    b: &DMatrix<f64>,
    grad: &DVector<f64>,
    eq: &LinearConstraints,
    ineq: &LinearConstraints,
    sol: &QpSolution,
) -> f64 {
    let d = &sol.d_x;
    let stat = b * d + grad + eq.matrix.tr_mul(&sol.eq_multipliers) + ineq.matrix.tr_mul(&sol.ineq_multipliers);
    let eq_res = &eq.matrix * d - &eq.rhs;
    let slack = &ineq.matrix * d - &ineq.rhs;
    let mut worst = stat.amax().max(eq_res.amax());
    for (s, mu) in slack.iter().zip(sol.ineq_multipliers.iter()) {
        worst = worst.max(s.max(0.0)).max((-mu).max(0.0)).max((s * mu).abs());
    }
    worst
}
