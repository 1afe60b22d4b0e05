//! Backtracking step-length selection.
//!
//! Trial steps `alpha0 * tau^j` are tried in order and the first one meeting
//! the sufficient-decrease (Armijo) condition is accepted. The curvature
//! condition is checked at the accepted step and reported, not enforced.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub alpha0: f64,
    pub backtrack_factor: f64,
    pub max_halvings: usize,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            c1: 1e-4,
            c2: 0.9,
            alpha0: 1.0,
            backtrack_factor: 0.5,
            max_halvings: 60,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.c1
            && self.c1 < self.c2
            && self.c2 < 1.0
            && 0.0 < self.backtrack_factor
            && self.backtrack_factor < 1.0
            && self.alpha0 > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("line search parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub alpha: f64,
    pub armijo_holds: bool,
    pub curvature_holds: bool,
    /// Number of trial steps evaluated.
    pub trials: usize,
    /// `phi(alpha)` at the accepted step.
    pub phi_alpha: f64,
}

/// Backtrack along a ray given `phi(alpha)` and its derivative `dphi(alpha)`.
///
/// `phi0` and `dphi0` are the values at `alpha = 0`; they are passed in
/// because callers already hold them.
pub fn backtracking_from<P, D>(
    mut phi: P,
    mut dphi: D,
    phi0: f64,
    dphi0: f64,
    params: &LineSearchParams,
) -> Result<StepResult>
where
    P: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    if !(dphi0 < 0.0) {
        return Err(Error::NotDescent(dphi0));
    }
    let mut alpha = params.alpha0;
    for j in 0..=params.max_halvings {
        let value = phi(alpha);
        if value.is_finite() && value <= phi0 + params.c1 * alpha * dphi0 {
            let slope = dphi(alpha);
            return Ok(StepResult {
                alpha,
                armijo_holds: true,
                curvature_holds: slope >= params.c2 * dphi0,
                trials: j + 1,
                phi_alpha: value,
            });
        }
        alpha *= params.backtrack_factor;
    }
    Err(Error::LineSearchFailed(params.max_halvings))
}

/// Same as [`backtracking_from`], evaluating `phi(0)` and `dphi(0)` itself.
pub fn backtracking_step<P, D>(phi: P, dphi: D, params: &LineSearchParams) -> Result<StepResult>
where
    P: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let (phi0, dphi0) = (phi(0.0), dphi(0.0));
    backtracking_from(&phi, &dphi, phi0, dphi0, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_model_accepts_full_step() {
        let r = backtracking_step(|a| 1.0 - a, |_| -1.0, &LineSearchParams::default()).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert!(r.armijo_holds);
        // slope stays at -1 < 0.9 * -1
        assert!(!r.curvature_holds);
        assert_eq!(r.trials, 1);
    }

    #[test]
    fn overshooting_quadratic_halves_once() {
        let phi = |a: f64| (1.0 - 2.0 * a).powi(2);
        let dphi = |a: f64| -4.0 * (1.0 - 2.0 * a);
        let r = backtracking_step(phi, dphi, &LineSearchParams::default()).unwrap();
        assert_eq!(r.alpha, 0.5);
        assert!(r.armijo_holds);
        assert!(r.curvature_holds);
        assert_eq!(r.trials, 2);
    }

    #[test]
    fn ascent_direction_is_rejected() {
        let err = backtracking_step(|a| a, |_| 1.0, &LineSearchParams::default()).unwrap_err();
        assert_eq!(err, Error::NotDescent(1.0));
    }

    #[test]
    fn reports_failure_when_decrease_is_impossible() {
        // claims descent but the function only rises
        let err = backtracking_step(|a| a * a + if a > 0.0 { 1.0 } else { 0.0 }, |_| -1.0, &LineSearchParams::default())
            .unwrap_err();
        assert_eq!(err, Error::LineSearchFailed(60));
    }

    #[test]
    fn non_finite_trial_values_are_backtracked() {
        let phi = |a: f64| if a > 0.3 { f64::NAN } else { 1.0 - a };
        let r = backtracking_step(phi, |_| -1.0, &LineSearchParams::default()).unwrap();
        assert_eq!(r.alpha, 0.25);
    }

    #[test]
    fn reports_curvature_failure_without_rejecting_step() {
        // phi = -a on [0, inf): slope never flattens
        let r = backtracking_step(|a| -a, |_| -1.0, &LineSearchParams::default()).unwrap();
        assert_eq!(r.alpha, 1.0);
        assert!(!r.curvature_holds);
    }

    #[test]
    fn parameter_validation() {
        assert!(LineSearchParams::default().validate().is_ok());
        let bad = LineSearchParams { c1: 0.95, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn accepted_step_is_largest_armijo_point(
            curv in 0.1f64..50.0, slope in 0.1f64..10.0, shift in -3.0f64..3.0,
        ) {
            // phi(a) = shift - slope*a + curv*a^2/2
            let phi = |a: f64| shift - slope * a + 0.5 * curv * a * a;
            let dphi = |a: f64| -slope + curv * a;
            let params = LineSearchParams::default();
            let r = backtracking_step(phi, dphi, &params).unwrap();
            prop_assert!(phi(r.alpha) <= phi(0.0) + params.c1 * r.alpha * dphi(0.0));
            let mut larger = r.alpha / params.backtrack_factor;
            while larger <= params.alpha0 {
                prop_assert!(phi(larger) > phi(0.0) + params.c1 * larger * dphi(0.0));
                larger /= params.backtrack_factor;
            }
        }
    }
}
