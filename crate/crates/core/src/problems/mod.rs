//! Test problems with analytic gradients.

mod fc;
mod suite;

use std::fmt;
use std::sync::Arc;

pub use fc::make_fc;
pub use suite::standard_suite;

use crate::error::{Error, Result};

pub type ObjectiveFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Gradient of the smooth piece active at `anchor`, continued to `x`.
pub type PieceGradientFn = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Axis-aligned hypercube from which random starts are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct StartBox {
    pub center: Vec<f64>,
    pub side: f64,
}

#[derive(Clone)]
pub struct Problem {
    pub name: String,
    pub dimension: usize,
    objective: ObjectiveFn,
    gradient: GradientFn,
    piece_gradient: Option<PieceGradientFn>,
    pub known_minimizers: Vec<Vec<f64>>,
    pub known_min_value: f64,
    pub start_box: StartBox,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("known_minimizers", &self.known_minimizers)
            .field("known_min_value", &self.known_min_value)
            .field("start_box", &self.start_box)
            .finish_non_exhaustive()
    }
}

impl Problem {
    /// A problem with no recorded minimizer, starting box centred at the origin.
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
            piece_gradient: None,
            known_minimizers: Vec::new(),
            known_min_value: f64::NAN,
            start_box: StartBox {
                center: vec![0.0; dimension],
                side: 1.0,
            },
        }
    }

    /// Record the global minimizers; the first one centres the start box and
    /// fixes the known minimum value.
    pub fn with_minimizers(mut self, minimizers: Vec<Vec<f64>>) -> Self {
        if let Some(first) = minimizers.first() {
            self.known_min_value = self.value(first);
            self.start_box.center = first.clone();
        }
        self.known_minimizers = minimizers;
        self
    }

    pub fn with_start_box(mut self, center: Vec<f64>, side: f64) -> Self {
        self.start_box = StartBox { center, side };
        self
    }

    pub fn with_piece_gradient<P>(mut self, piece: P) -> Self
    where
        P: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        self.piece_gradient = Some(Arc::new(piece));
        self
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.objective)(x)
    }

    #[inline]
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.gradient)(x)
    }

    pub fn has_pieces(&self) -> bool {
        self.piece_gradient.is_some()
    }

    /// Gradient of the piece active at `anchor`, evaluated at `x`. Falls back
    /// to the plain gradient for problems defined by a single formula.
    pub fn piece_gradient(&self, anchor: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.piece_gradient {
            Some(p) => p(anchor, x),
            None => self.gradient(x),
        }
    }

    /// Euclidean distance from `x` to the nearest known minimizer.
    pub fn distance_to_minimizer(&self, x: &[f64]) -> f64 {
        self.known_minimizers
            .iter()
            .map(|m| m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Max over coordinates of `|analytic - central difference| / max(1, |analytic|)`.
///
/// The difference step for coordinate `i` is `step * max(1, |x_i|)`.
pub fn check_gradient(problem: &Problem, x: &[f64], step: f64) -> f64 {
    let analytic = problem.gradient(x);
    let mut probe = x.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let h = step * x[i].abs().max(1.0);
        probe[i] = x[i] + h;
        let fp = problem.value(&probe);
        probe[i] = x[i] - h;
        let fm = problem.value(&probe);
        probe[i] = x[i];
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

/// Registry lookup by lowercase hyphenless name. `fc` needs the parameter `c`.
pub fn by_name(name: &str, c: Option<f64>) -> Result<Problem> {
    let key: String = name
        .chars()
        .filter(|ch| ch.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_lowercase();
    if key == "fc" {
        let c = c.ok_or_else(|| Error::InvalidParameter("problem fc requires c".into()))?;
        return make_fc(c);
    }
    standard_suite()
        .into_iter()
        .find(|p| p.name == key)
        .ok_or(Error::UnknownProblem(name.to_string()))
}

/// Names accepted by [`by_name`].
pub fn registry_names() -> Vec<String> {
    let mut names: Vec<String> = standard_suite().into_iter().map(|p| p.name).collect();
    names.push("fc".into());
    names
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_gradient_is_exact_under_central_differences() {
        let p = by_name("sphere", None).unwrap();
        assert!(check_gradient(&p, &[1.0; 8], 1e-6) < 1e-8);
    }

    #[test]
    fn lookup_normalises_names() {
        assert_eq!(by_name("Cross-in-Tray", None).unwrap().name, "crossintray");
        assert_eq!(by_name("Styblinski-Tang", None).unwrap().name, "styblinskitang");
        assert!(matches!(by_name("rosenbrock", None), Err(Error::UnknownProblem(_))));
        assert!(by_name("fc", None).is_err());
        assert_eq!(by_name("fc", Some(0.5)).unwrap().dimension, 2);
        assert_eq!(registry_names().len(), 16);
    }

    #[test]
    fn suite_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for p in standard_suite() {
            for _ in 0..20 {
                let x: Vec<f64> = p
                    .start_box
                    .center
                    .iter()
                    .map(|c| c + p.start_box.side * (rng.random::<f64>() - 0.5))
                    .collect();
                let err = check_gradient(&p, &x, 1e-6);
                assert!(err < 1e-5, "{} at {:?}: {}", p.name, x, err);
            }
        }
    }

    #[test]
    fn known_minimizers_share_the_recorded_value() {
        for p in standard_suite() {
            for m in &p.known_minimizers {
                assert!((p.value(m) - p.known_min_value).abs() < 1e-8, "{} {:?}", p.name, m);
            }
        }
    }

    #[test]
    fn known_minimizers_are_local_minima() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in standard_suite() {
            for m in &p.known_minimizers {
                let fm = p.value(m);
                for _ in 0..100 {
                    let y: Vec<f64> = m.iter().map(|v| v + 1e-3 * (rng.random::<f64>() - 0.5)).collect();
                    assert!(p.value(&y) >= fm - 1e-12, "{} perturbation below minimum", p.name);
                }
            }
        }
    }

    #[test]
    fn known_minimizers_are_stationary() {
        for p in standard_suite() {
            for m in &p.known_minimizers {
                let g = p.gradient(m);
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(norm < 1e-6, "{} gradient {norm:e} at {:?}", p.name, m);
            }
        }
    }
}
