//! Symmetrized q-Hessian surrogates assembled from gradient callbacks.
//!
//! Row `i` holds the q-partial in coordinate `i` of every gradient component,
//! `a_ij = D_{q, x_i} (df/dx_j)`, and the result is `(a_ij + a_ji) / 2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_finite, Error, Result};
use crate::qcalc::{default_fd_step, q_shift, zero_threshold, QValue};

#[derive(Debug, Clone, PartialEq)]
pub struct QHessian {
    pub matrix: DMatrix<f64>,
    pub q_used: QValue,
    /// Rows computed through the classical-derivative branch.
    pub fallback_count: usize,
}

fn eval_gradient<G>(gradient: &G, x: &[f64], n: usize) -> Result<Vec<f64>>
where
    G: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let g = gradient(x);
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    check_finite(x, &g)?;
    Ok(g)
}

/// Assemble the q-Hessian surrogate of the function whose gradient is `gradient`.
///
/// Uses one gradient call at `x` plus one per dilated point; rows whose
/// coordinate is numerically zero take two extra calls for a central difference.
pub fn q_hessian<G>(gradient: &G, x: &[f64], q: QValue) -> Result<QHessian>
where
    G: Fn(&[f64]) -> Vec<f64> + ?Sized,
{
    let n = x.len();
    let base = eval_gradient(gradient, x, n)?;
    let threshold = zero_threshold(x);
    let mut raw = DMatrix::<f64>::zeros(n, n);
    let mut fallback_count = 0;

    for i in 0..n {
        let xi = x[i];
        if xi.abs() <= threshold {
            fallback_count += 1;
            let h = default_fd_step(xi);
            let mut probe = x.to_vec();
            probe[i] = xi + h;
            let gp = eval_gradient(gradient, &probe, n)?;
            probe[i] = xi - h;
            let gm = eval_gradient(gradient, &probe, n)?;
            for j in 0..n {
                raw[(i, j)] = (gp[j] - gm[j]) / (2.0 * h);
            }
        } else {
            let shifted = q_shift(x, i, q)?;
            let gs = eval_gradient(gradient, &shifted, n)?;
            let denom = (1.0 - q.get()) * xi;
            for j in 0..n {
                raw[(i, j)] = (base[j] - gs[j]) / denom;
            }
        }
    }

    let mut matrix = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        matrix[(i, i)] = raw[(i, i)];
        for j in 0..i {
            let s = 0.5 * (raw[(i, j)] + raw[(j, i)]);
            matrix[(i, j)] = s;
            matrix[(j, i)] = s;
        }
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericFailure { point: x.to_vec() });
    }
    Ok(QHessian {
        matrix,
        q_used: q,
        fallback_count,
    })
}

/// Constraint Jacobian callback: returns the `m x n` Jacobian at a point.
pub type JacobianFn<'a> = dyn Fn(&[f64]) -> DMatrix<f64> + 'a;

/// x-gradient of `L(x, u, v) = f(x) + u.h(x) + v.g(x)` with the multipliers held fixed.
///
/// Terms whose multiplier is exactly zero are skipped, so zero multipliers
/// reproduce the objective gradient bit for bit.
pub fn lagrangian_gradient(
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    jac_h: Option<&JacobianFn<'_>>,
    jac_g: Option<&JacobianFn<'_>>,
    u: &[f64],
    v: &[f64],
    x: &[f64],
) -> Vec<f64> {
    let mut grad = grad_f(x);
    let mut add = |jac: Option<&JacobianFn<'_>>, mult: &[f64]| {
        if mult.iter().all(|&m| m == 0.0) {
            return;
        }
        if let Some(jac) = jac {
            let j = jac(x);
            let mult = DVector::from_column_slice(mult);
            let contrib = j.tr_mul(&mult);
            for (g, c) in grad.iter_mut().zip(contrib.iter()) {
                *g += c;
            }
        }
    };
    add(jac_h, u);
    add(jac_g, v);
    grad
}

/// q-Hessian surrogate of the Lagrangian in `x` at fixed multipliers.
pub fn q_hessian_lagrangian(
    grad_f: &dyn Fn(&[f64]) -> Vec<f64>,
    jac_h: Option<&JacobianFn<'_>>,
    jac_g: Option<&JacobianFn<'_>>,
    u: &[f64],
    v: &[f64],
    x: &[f64],
    q: QValue,
) -> Result<QHessian> {
    let grad_l = |z: &[f64]| lagrangian_gradient(grad_f, jac_h, jac_g, u, v, z);
    q_hessian(&grad_l, x, q)
}
