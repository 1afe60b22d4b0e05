//! q-derivative operators and the q-schedule.
//!
//! For a scalar function the q-derivative replaces the limit of the ordinary
//! difference quotient by the dilation `x -> q x`:
//!
//! ```text
//! D_q f(x) = (f(x) - f(q x)) / ((1 - q) x),   x != 0
//! D_q f(0) = f'(0)
//! ```
//!
//! The multivariate version dilates a single coordinate. At (numerically)
//! zero coordinates the classical partial derivative is used instead, which
//! is approximated here by a central difference.

use crate::error::{check_finite, Error, Result};

/// A dilation factor strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QValue(f64);

impl QValue {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_finite() && q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::InvalidQ(q))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

/// Band around zero inside which a coordinate takes the classical-derivative
/// branch: `|x_i| <= 1e-12 * max(1, ||x||_inf)`.
pub fn zero_threshold(x: &[f64]) -> f64 {
    let inf = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    1e-12 * inf.max(1.0)
}

/// Central-difference step used on the zero branch: `eps^(1/3) * max(1, |x_i|)`.
pub fn default_fd_step(xi: f64) -> f64 {
    f64::EPSILON.cbrt() * xi.abs().max(1.0)
}

/// `(f(x) - f(qx)) / ((1-q)x)`, or a central-difference `f'(0)` at zero.
pub fn q_derivative_1d<F>(f: F, x: f64, q: QValue) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let q = q.get();
    let value = if x.abs() <= zero_threshold(&[x]) {
        let h = default_fd_step(x);
        let (fp, fm) = (f(x + h), f(x - h));
        check_finite(&[x], &[fp, fm])?;
        (fp - fm) / (2.0 * h)
    } else {
        let (fx, fqx) = (f(x), f(q * x));
        check_finite(&[x], &[fx, fqx])?;
        (fx - fqx) / ((1.0 - q) * x)
    };
    check_finite(&[x], &[value])?;
    Ok(value)
}

/// Copy of `x` with coordinate `i` multiplied by `q`.
pub fn q_shift(x: &[f64], i: usize, q: QValue) -> Result<Vec<f64>> {
    if i >= x.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            dim: x.len(),
        });
    }
    let mut out = x.to_vec();
    out[i] *= q.get();
    Ok(out)
}

/// q-partial derivative of `g` with respect to coordinate `i`.
///
/// `fd_step` overrides the central-difference step on the zero branch.
pub fn q_partial<G>(g: G, x: &[f64], i: usize, q: QValue, fd_step: Option<f64>) -> Result<f64>
where
    G: Fn(&[f64]) -> f64,
{
    if i >= x.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            dim: x.len(),
        });
    }
    let xi = x[i];
    let value = if xi.abs() <= zero_threshold(x) {
        let h = fd_step.unwrap_or_else(|| default_fd_step(xi));
        let mut probe = x.to_vec();
        probe[i] = xi + h;
        let gp = g(&probe);
        probe[i] = xi - h;
        let gm = g(&probe);
        check_finite(x, &[gp, gm])?;
        (gp - gm) / (2.0 * h)
    } else {
        let shifted = q_shift(x, i, q)?;
        let (gx, gs) = (g(x), g(&shifted));
        check_finite(x, &[gx, gs])?;
        (gx - gs) / ((1.0 - q.get()) * xi)
    };
    check_finite(x, &[value])?;
    Ok(value)
}

/// The sequence `q_{k+1} = 1 - q_k^gamma / k` driving `q_k -> 1`.
///
/// The first transition (k = 0) divides by 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSchedule {
    q0: f64,
    gamma: u32,
    k: usize,
    q: f64,
}

impl QSchedule {
    pub fn new(q0: f64, gamma: u32) -> Result<Self> {
        QValue::new(q0)?;
        if gamma == 0 {
            return Err(Error::InvalidParameter("gamma must be a positive integer".into()));
        }
        Ok(Self {
            q0,
            gamma,
            k: 0,
            q: q0,
        })
    }

    /// Schedule positioned at iteration `k` with current value `q`.
    pub fn at(q: f64, gamma: u32, k: usize) -> Result<Self> {
        let mut s = Self::new(q, gamma)?;
        s.k = k;
        Ok(s)
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn gamma(&self) -> u32 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> QValue {
        QValue(self.q)
    }

    #[must_use]
    pub fn next(&self) -> Self {
        let divisor = self.k.max(1) as f64;
        let raw = 1.0 - self.q.powi(self.gamma as i32) / divisor;
        // 1 - tiny rounds to 1.0 once k is huge; stay strictly below.
        let q = raw.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP);
        Self {
            k: self.k + 1,
            q,
            ..*self
        }
    }

    pub fn advance(&mut self) {
        *self = self.next();
    }
}

const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn q(v: f64) -> QValue {
        QValue::new(v).unwrap()
    }

    #[test]
    fn rejects_q_outside_unit_interval() {
        assert!(QValue::new(1.0).is_err());
        assert!(QValue::new(0.0).is_err());
        assert!(QValue::new(-0.3).is_err());
        assert!(QValue::new(f64::NAN).is_err());
    }

    #[test]
    fn derivative_1d_examples() {
        assert_abs_diff_eq!(q_derivative_1d(|x| x * x, 2.0, q(0.5)).unwrap(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q_derivative_1d(|x| x * x, 0.0, q(0.5)).unwrap(), 0.0, epsilon = 1e-15);
        // x^2 (1 + q + q^2) at x = 1
        assert_abs_diff_eq!(q_derivative_1d(|x| x * x * x, 1.0, q(0.5)).unwrap(), 1.75, epsilon = 1e-15);
    }

    #[test]
    fn derivative_1d_non_finite() {
        let err = q_derivative_1d(|x| 1.0 / (x - 0.5), 1.0, q(0.5)).unwrap_err();
        assert!(matches!(err, Error::NumericFailure { .. }));
    }

    #[test]
    fn shift_examples() {
        assert_eq!(q_shift(&[1.0, 2.0], 0, q(0.5)).unwrap(), vec![0.5, 2.0]);
        assert_eq!(q_shift(&[0.0, 3.0], 0, q(0.9)).unwrap(), vec![0.0, 3.0]);
        assert_eq!(q_shift(&[1.0, 2.0, 3.0], 2, q(0.25)).unwrap(), vec![1.0, 2.0, 0.75]);
        assert_eq!(
            q_shift(&[1.0], 1, q(0.5)).unwrap_err(),
            Error::IndexOutOfRange { index: 1, dim: 1 }
        );
    }

    #[test]
    fn partial_worked_example() {
        let g = |v: &[f64]| v[1] * v[1] + 4.0 * v[0].powi(3);
        for &(x, y, qq) in &[(1.0, 2.0, 0.5), (-0.7, 0.3, 0.9), (2.5, -1.0, 0.2)] {
            let dx = q_partial(g, &[x, y], 0, q(qq), None).unwrap();
            let expected = 4.0 * x * x * (1.0 + qq + qq * qq);
            assert_abs_diff_eq!(dx, expected, epsilon = 1e-12 * expected.abs().max(1.0));
        }
        assert_abs_diff_eq!(q_partial(g, &[1.0, 2.0], 1, q(0.5), None).unwrap(), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_zero_branch_matches_classical_derivative() {
        let g = |v: &[f64]| v[0] * v[0] * v[1];
        let d = q_partial(g, &[0.0, 1.0], 0, q(0.5), None).unwrap();
        assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
        // below the threshold band counts as zero
        let g = |v: &[f64]| 3.0 * v[0] + v[1];
        let d = q_partial(g, &[1e-14, 1.0], 0, q(0.5), Some(1e-4)).unwrap();
        assert_abs_diff_eq!(d, 3.0, epsilon = 1e-9);
    }

    #[test]
    fn schedule_examples() {
        let s = QSchedule::at(0.9, 1, 1).unwrap().next();
        assert_abs_diff_eq!(s.q().get(), 0.1, epsilon = 1e-15);
        assert_eq!(s.k(), 2);
        let s = QSchedule::at(0.9, 3, 1).unwrap().next();
        assert_abs_diff_eq!(s.q().get(), 0.271, epsilon = 1e-15);
        let s = QSchedule::at(0.5, 2, 2).unwrap().next();
        assert_abs_diff_eq!(s.q().get(), 0.875, epsilon = 1e-15);
        // first transition divides by one
        let s = QSchedule::new(0.9, 1).unwrap().next();
        assert_abs_diff_eq!(s.q().get(), 0.1, epsilon = 1e-15);
        assert_eq!(s.k(), 1);
    }

    #[test]
    fn schedule_rejects_bad_parameters() {
        assert!(QSchedule::new(0.9, 0).is_err());
        assert!(QSchedule::new(1.2, 1).is_err());
    }

    #[test]
    fn partial_error_shrinks_linearly_in_one_minus_q() {
        // d/dx of 3x^2 via q-difference: 3x(1+q) vs 6x, error 3x(1-q)
        let g = |v: &[f64]| 3.0 * v[0] * v[0];
        let x = [1.3];
        let errs: Vec<f64> = [0.9, 0.99, 0.999]
            .iter()
            .map(|&qq| (q_partial(g, &x, 0, q(qq), None).unwrap() - 6.0 * x[0]).abs())
            .collect();
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).log10();
            assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
        }
    }

    proptest! {
        #[test]
        fn schedule_stays_in_unit_interval(q0 in 0.01f64..0.99, gamma in 1u32..6) {
            let mut s = QSchedule::new(q0, gamma).unwrap();
            for _ in 0..500 {
                s.advance();
                let qk = s.q().get();
                prop_assert!(qk > 0.0 && qk < 1.0);
                if s.k() >= 2 {
                    prop_assert!(1.0 - qk <= 1.0 / (s.k() as f64 - 1.0));
                }
            }
        }

        #[test]
        fn linear_functions_are_differentiated_exactly(
            a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
            x in 0.1f64..3.0, y in -3.0f64..3.0, qq in 0.05f64..0.95,
        ) {
            let g = |v: &[f64]| a * v[0] + b * v[1] + c;
            let d = q_partial(g, &[x, y], 0, q(qq), None).unwrap();
            prop_assert!((d - a).abs() <= 1e-11 * (1.0 + a.abs() + b.abs() + c.abs()));
        }

        #[test]
        fn shift_scales_only_the_chosen_coordinate(
            v in proptest::collection::vec(-10.0f64..10.0, 1..8), qq in 0.01f64..0.99, pick in 0usize..8,
        ) {
            let i = pick % v.len();
            let s = q_shift(&v, i, q(qq)).unwrap();
            for (j, (a, b)) in v.iter().zip(&s).enumerate() {
                if j == i {
                    prop_assert_eq!(b.to_bits(), (qq * a).to_bits());
                } else {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
