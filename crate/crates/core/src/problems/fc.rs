//! The two-piece family `f_c`, smooth except for a jump in `d2f/dx2` on `x = c`.
//!
//! ```text
//! x >= c:  0.05 (y - x^2)^2 + (1 - x)^2 + c
//! x <  c:  (x/c)(1 - x)^2 + 0.05 (y - x^2)^2 - ((1 - c)^2 / c)(x - c) + c
//! ```

use super::Problem;
use crate::error::{Error, Result};

fn right_value(c: f64, x: f64, y: f64) -> f64 {
    let r = y - x * x;
    0.05 * r * r + (1.0 - x) * (1.0 - x) + c
}

fn left_value(c: f64, x: f64, y: f64) -> f64 {
    let r = y - x * x;
    let s = 1.0 - c;
    (x / c) * (1.0 - x) * (1.0 - x) + 0.05 * r * r - (s * s / c) * (x - c) + c
}

fn right_gradient(_c: f64, x: f64, y: f64) -> Vec<f64> {
    let r = y - x * x;
    vec![-0.2 * x * r - 2.0 * (1.0 - x), 0.1 * r]
}

fn left_gradient(c: f64, x: f64, y: f64) -> Vec<f64> {
    let r = y - x * x;
    let u = 1.0 - x;
    let s = 1.0 - c;
    vec![(u * u - 2.0 * x * u - s * s) / c - 0.2 * x * r, 0.1 * r]
}

/// Local minimizer of `f_c`. For `c <= 1` it is `(1, 1)`; for `c > 1` the
/// point `(1, 1)` lies on the left piece, where the stationary point solves
/// `3x^2 - 4x + 1 - (1-c)^2 = 0` with `y = x^2`.
fn minimizer(c: f64) -> Vec<f64> {
    if c <= 1.0 {
        vec![1.0, 1.0]
    } else {
        let s = 1.0 - c;
        let x = (2.0 + (1.0 + 3.0 * s * s).sqrt()) / 3.0;
        vec![x, x * x]
    }
}

/// Build `f_c`. The start box is the square `[0.1, 1.9]^2`.
pub fn make_fc(c: f64) -> Result<Problem> {
    if c == 0.0 || !c.is_finite() {
        return Err(Error::InvalidParameter(format!("fc requires a finite nonzero c, got {c}")));
    }
    let value = move |v: &[f64]| {
        if v[0] >= c {
            right_value(c, v[0], v[1])
        } else {
            left_value(c, v[0], v[1])
        }
    };
    let gradient = move |v: &[f64]| {
        if v[0] >= c {
            right_gradient(c, v[0], v[1])
        } else {
            left_gradient(c, v[0], v[1])
        }
    };
    let piece = move |anchor: &[f64], v: &[f64]| {
        if anchor[0] >= c {
            right_gradient(c, v[0], v[1])
        } else {
            left_gradient(c, v[0], v[1])
        }
    };
    Ok(Problem::new(format!("fc@{c}"), 2, value, gradient)
        .with_piece_gradient(piece)
        .with_minimizers(vec![minimizer(c)])
        .with_start_box(vec![1.0, 1.0], 1.8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::check_gradient;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c_values() -> Vec<f64> {
        (0..10).map(|i| 0.1 + 0.2 * i as f64).collect()
    }

    #[test]
    fn hand_values() {
        let p = make_fc(0.5).unwrap();
        assert_abs_diff_eq!(p.value(&[1.0, 1.0]), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.value(&[0.0, 0.0]), 0.75, epsilon = 1e-15);
        assert_eq!(p.known_minimizers, vec![vec![1.0, 1.0]]);
        assert_eq!(p.known_min_value, 0.5);
    }

    #[test]
    fn zero_c_is_rejected() {
        assert!(matches!(make_fc(0.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn pieces_agree_on_the_seam() {
        for c in c_values() {
            for j in 0..=20 {
                let y = 0.1 * j as f64;
                let expected = (1.0 - c) * (1.0 - c) + 0.05 * (y - c * c).powi(2) + c;
                assert!((right_value(c, c, y) - left_value(c, c, y)).abs() < 1e-12);
                assert!((right_value(c, c, y) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradient_is_continuous_across_the_seam() {
        let h = 1e-7;
        for c in c_values() {
            let p = make_fc(c).unwrap();
            for y in [0.1, 0.9, 1.7] {
                let right = (p.value(&[c + h, y]) - p.value(&[c, y])) / h;
                let left = (p.value(&[c, y]) - p.value(&[c - h, y])) / h;
                assert!((right - left).abs() < 1e-5, "c={c} y={y}: {left} vs {right}");
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let p = make_fc(0.5).unwrap();
        assert!(check_gradient(&p, &[1.2, 0.7], 1e-6) < 1e-5);
        assert!(check_gradient(&p, &[0.3, 0.7], 1e-6) < 1e-5);
    }

    #[test]
    fn gradient_matches_differences_on_both_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for c in c_values() {
            let p = make_fc(c).unwrap();
            let mut checked = 0;
            while checked < 20 {
                let x = [0.1 + 1.8 * rng.random::<f64>(), 0.1 + 1.8 * rng.random::<f64>()];
                if (x[0] - c).abs() < 1e-4 {
                    continue;
                }
                assert!(check_gradient(&p, &x, 1e-6) < 1e-5, "c={c} at {x:?}");
                checked += 1;
            }
        }
    }

    #[test]
    fn recorded_minimizer_is_stationary_and_local() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in c_values() {
            let p = make_fc(c).unwrap();
            let m = &p.known_minimizers[0];
            let g = p.gradient(m);
            assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12, "c={c}: {g:?}");
            for _ in 0..100 {
                let y = [m[0] + 1e-3 * (rng.random::<f64>() - 0.5), m[1] + 1e-3 * (rng.random::<f64>() - 0.5)];
                assert!(p.value(&y) >= p.known_min_value);
            }
        }
    }

    #[test]
    fn piece_gradient_follows_the_anchor() {
        let p = make_fc(0.5).unwrap();
        // anchored on the right piece, evaluated across the seam
        let g = p.piece_gradient(&[0.8, 1.0], &[0.2, 1.0]);
        assert_eq!(g, right_gradient(0.5, 0.2, 1.0));
        assert_eq!(p.gradient(&[0.2, 1.0]), left_gradient(0.5, 0.2, 1.0));
    }
}
