//! Fifteen standard low-dimensional test functions.

use std::f64::consts::PI;

use super::Problem;

/// The test set in its canonical order.
pub fn standard_suite() -> Vec<Problem> {
    vec![
        bohachevsky(),
        branin(),
        cross_in_tray(),
        dixon_price(2),
        easom(),
        griewank(4),
        hartmann3(),
        levy(4),
        mccormick(),
        rotated_hyper_ellipsoid(4),
        schwefel(2),
        sphere(8),
        styblinski_tang(4),
        sum_squares(10),
        zakharov(2),
    ]
}

fn bohachevsky() -> Problem {
    Problem::new(
        "bohachevsky",
        2,
        |x| {
            x[0] * x[0] + 2.0 * x[1] * x[1] - 0.3 * (3.0 * PI * x[0]).cos() - 0.4 * (4.0 * PI * x[1]).cos() + 0.7
        },
        |x| {
            vec![
                2.0 * x[0] + 0.9 * PI * (3.0 * PI * x[0]).sin(),
                4.0 * x[1] + 1.6 * PI * (4.0 * PI * x[1]).sin(),
            ]
        },
    )
    .with_minimizers(vec![vec![0.0, 0.0]])
}

const BRANIN_A: f64 = 1.0;
const BRANIN_B: f64 = 5.1 / (4.0 * PI * PI);
const BRANIN_C: f64 = 5.0 / PI;
const BRANIN_R: f64 = 6.0;
const BRANIN_S: f64 = 10.0;
const BRANIN_T: f64 = 1.0 / (8.0 * PI);

fn branin() -> Problem {
    let inner = |x: &[f64]| x[1] - BRANIN_B * x[0] * x[0] + BRANIN_C * x[0] - BRANIN_R;
    Problem::new(
        "branin",
        2,
        move |x| {
            let t = inner(x);
            BRANIN_A * t * t + BRANIN_S * (1.0 - BRANIN_T) * x[0].cos() + BRANIN_S
        },
        move |x| {
            let t = inner(x);
            vec![
                2.0 * BRANIN_A * t * (-2.0 * BRANIN_B * x[0] + BRANIN_C) - BRANIN_S * (1.0 - BRANIN_T) * x[0].sin(),
                2.0 * BRANIN_A * t,
            ]
        },
    )
    .with_minimizers(vec![vec![PI, 2.275], vec![-PI, 12.275], vec![3.0 * PI, 2.475]])
}

fn cross_in_tray() -> Problem {
    // S = sin x1 sin x2 exp|100 - r/pi|, f = -1e-4 (|S| + 1)^0.1
    fn parts(x: &[f64]) -> (f64, f64, f64) {
        let r = x[0].hypot(x[1]);
        let e = (100.0 - r / PI).abs().exp();
        (r, e, x[0].sin() * x[1].sin() * e)
    }
    let t = (PI * 2f64.sqrt()).atan();
    Problem::new(
        "crossintray",
        2,
        |x| {
            let (_, _, s) = parts(x);
            -1e-4 * (s.abs() + 1.0).powf(0.1)
        },
        |x| {
            let (r, e, s) = parts(x);
            let sign_inner = (100.0 - r / PI).signum();
            let outer = -1e-5 * (s.abs() + 1.0).powf(-0.9) * s.signum();
            let (s0, c0, s1, c1) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
            let de = |xi: f64| if r > 0.0 { -e * sign_inner * xi / (r * PI) } else { 0.0 };
            vec![
                outer * (c0 * s1 * e + s0 * s1 * de(x[0])),
                outer * (s0 * c1 * e + s0 * s1 * de(x[1])),
            ]
        },
    )
    .with_minimizers(vec![vec![t, t], vec![t, -t], vec![-t, t], vec![-t, -t]])
}

fn dixon_price(d: usize) -> Problem {
    Problem::new(
        "dixonprice",
        d,
        |x| {
            let mut f = (x[0] - 1.0).powi(2);
            for i in 1..x.len() {
                let r = 2.0 * x[i] * x[i] - x[i - 1];
                f += (i + 1) as f64 * r * r;
            }
            f
        },
        |x| {
            let mut g = vec![0.0; x.len()];
            g[0] = 2.0 * (x[0] - 1.0);
            for i in 1..x.len() {
                let w = (i + 1) as f64;
                let r = 2.0 * x[i] * x[i] - x[i - 1];
                g[i] += 8.0 * w * r * x[i];
                g[i - 1] -= 2.0 * w * r;
            }
            g
        },
    )
    .with_minimizers(dixon_price_minimizers(d))
}

/// `x_i = 2^-((2^i - 2) / 2^i)` for `i = 1..d`, with free signs after the first.
fn dixon_price_minimizers(d: usize) -> Vec<Vec<f64>> {
    let base: Vec<f64> = (1..=d)
        .map(|i| {
            let p = 2f64.powi(i as i32);
            2f64.powf(-(p - 2.0) / p)
        })
        .collect();
    let mut out = Vec::new();
    for mask in 0..(1usize << (d - 1)) {
        let mut m = base.clone();
        for (j, v) in m.iter_mut().enumerate().skip(1) {
            if mask >> (j - 1) & 1 == 1 {
                *v = -*v;
            }
        }
        out.push(m);
    }
    out
}

fn easom() -> Problem {
    let env = |x: &[f64]| (-((x[0] - PI).powi(2) + (x[1] - PI).powi(2))).exp();
    Problem::new(
        "easom",
        2,
        move |x| -x[0].cos() * x[1].cos() * env(x),
        move |x| {
            let e = env(x);
            let (s0, c0, s1, c1) = (x[0].sin(), x[0].cos(), x[1].sin(), x[1].cos());
            vec![
                e * c1 * (s0 + 2.0 * (x[0] - PI) * c0),
                e * c0 * (s1 + 2.0 * (x[1] - PI) * c1),
            ]
        },
    )
    .with_minimizers(vec![vec![PI, PI]])
}

fn griewank(d: usize) -> Problem {
    Problem::new(
        "griewank",
        d,
        |x| {
            let sum: f64 = x.iter().map(|v| v * v).sum::<f64>() / 4000.0;
            let prod: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| (v / ((i + 1) as f64).sqrt()).cos())
                .product();
            sum - prod + 1.0
        },
        |x| {
            let roots: Vec<f64> = (0..x.len()).map(|i| ((i + 1) as f64).sqrt()).collect();
            (0..x.len())
                .map(|k| {
                    let others: f64 = (0..x.len())
                        .filter(|&i| i != k)
                        .map(|i| (x[i] / roots[i]).cos())
                        .product();
                    x[k] / 2000.0 + (x[k] / roots[k]).sin() / roots[k] * others
                })
                .collect()
        },
    )
    .with_minimizers(vec![vec![0.0; d]])
}

const H3_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const H3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const H3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

fn hartmann3() -> Problem {
    let term = |i: usize, x: &[f64]| {
        let s: f64 = (0..3).map(|j| H3_A[i][j] * (x[j] - H3_P[i][j]).powi(2)).sum();
        H3_ALPHA[i] * (-s).exp()
    };
    Problem::new(
        "hartmann3",
        3,
        move |x| -(0..4).map(|i| term(i, x)).sum::<f64>(),
        move |x| {
            let mut g = vec![0.0; 3];
            for i in 0..4 {
                let t = term(i, x);
                for j in 0..3 {
                    g[j] += 2.0 * t * H3_A[i][j] * (x[j] - H3_P[i][j]);
                }
            }
            g
        },
    )
    .with_minimizers(vec![vec![0.11458887665506896, 0.5556488946169301, 0.8525469846866774]])
}

fn levy(d: usize) -> Problem {
    let w = |v: f64| 1.0 + (v - 1.0) / 4.0;
    Problem::new(
        "levy",
        d,
        move |x| {
            let n = x.len();
            let ws: Vec<f64> = x.iter().map(|&v| w(v)).collect();
            let mut f = (PI * ws[0]).sin().powi(2);
            for &wi in &ws[..n - 1] {
                f += (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2));
            }
            let wd = ws[n - 1];
            f + (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2))
        },
        move |x| {
            let n = x.len();
            let ws: Vec<f64> = x.iter().map(|&v| w(v)).collect();
            let mut g = vec![0.0; n];
            g[0] += PI * (2.0 * PI * ws[0]).sin();
            for i in 0..n - 1 {
                let wi = ws[i];
                let s = (PI * wi + 1.0).sin();
                g[i] += 2.0 * (wi - 1.0) * (1.0 + 10.0 * s * s)
                    + (wi - 1.0).powi(2) * 10.0 * PI * (2.0 * (PI * wi + 1.0)).sin();
            }
            let wd = ws[n - 1];
            let s = (2.0 * PI * wd).sin();
            g[n - 1] += 2.0 * (wd - 1.0) * (1.0 + s * s) + (wd - 1.0).powi(2) * 2.0 * PI * (4.0 * PI * wd).sin();
            g.iter().map(|v| v / 4.0).collect()
        },
    )
    .with_minimizers(vec![vec![1.0; d]])
}

fn mccormick() -> Problem {
    Problem::new(
        "mccormick",
        2,
        |x| (x[0] + x[1]).sin() + (x[0] - x[1]).powi(2) - 1.5 * x[0] + 2.5 * x[1] + 1.0,
        |x| {
            let c = (x[0] + x[1]).cos();
            let d = 2.0 * (x[0] - x[1]);
            vec![c + d - 1.5, c - d + 2.5]
        },
    )
    .with_minimizers(vec![vec![0.5 - PI / 3.0, -0.5 - PI / 3.0]])
}

fn rotated_hyper_ellipsoid(d: usize) -> Problem {
    // sum_i sum_{j<=i} x_j^2 = sum_j (d - j) x_j^2 with 0-based j
    Problem::new(
        "rotatedhyperellipsoid",
        d,
        |x| {
            let n = x.len();
            x.iter().enumerate().map(|(j, v)| (n - j) as f64 * v * v).sum()
        },
        |x| {
            let n = x.len();
            x.iter().enumerate().map(|(j, v)| 2.0 * (n - j) as f64 * v).collect()
        },
    )
    .with_minimizers(vec![vec![0.0; d]])
}

const SCHWEFEL_ARGMIN: f64 = 420.9687463599821;

fn schwefel(d: usize) -> Problem {
    Problem::new(
        "schwefel",
        d,
        |x| 418.9829 * x.len() as f64 - x.iter().map(|v| v * v.abs().sqrt().sin()).sum::<f64>(),
        |x| {
            x.iter()
                .map(|v| {
                    let r = v.abs().sqrt();
                    -(r.sin() + 0.5 * r * r.cos())
                })
                .collect()
        },
    )
    .with_minimizers(vec![vec![SCHWEFEL_ARGMIN; d]])
}

fn sphere(d: usize) -> Problem {
    Problem::new(
        "sphere",
        d,
        |x| x.iter().map(|v| v * v).sum(),
        |x| x.iter().map(|v| 2.0 * v).collect(),
    )
    .with_minimizers(vec![vec![0.0; d]])
}

/// Root of `4x^3 - 32x + 5` near -2.9, where the gradient vanishes.
const STYBTANG_ARGMIN: f64 = -2.903534027771177;

fn styblinski_tang(d: usize) -> Problem {
    Problem::new(
        "styblinskitang",
        d,
        |x| 0.5 * x.iter().map(|v| v.powi(4) - 16.0 * v * v + 5.0 * v).sum::<f64>(),
        |x| x.iter().map(|v| 0.5 * (4.0 * v.powi(3) - 32.0 * v + 5.0)).collect(),
    )
    .with_minimizers(vec![vec![STYBTANG_ARGMIN; d]])
}

fn sum_squares(d: usize) -> Problem {
    Problem::new(
        "sumsquares",
        d,
        |x| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum(),
        |x| x.iter().enumerate().map(|(i, v)| 2.0 * (i + 1) as f64 * v).collect(),
    )
    .with_minimizers(vec![vec![0.0; d]])
}

fn zakharov(d: usize) -> Problem {
    let weighted = |x: &[f64]| x.iter().enumerate().map(|(i, v)| 0.5 * (i + 1) as f64 * v).sum::<f64>();
    Problem::new(
        "zakharov",
        d,
        move |x| {
            let s = weighted(x);
            x.iter().map(|v| v * v).sum::<f64>() + s * s + s.powi(4)
        },
        move |x| {
            let s = weighted(x);
            let outer = 2.0 * s + 4.0 * s.powi(3);
            x.iter()
                .enumerate()
                .map(|(i, v)| 2.0 * v + outer * 0.5 * (i + 1) as f64)
                .collect()
        },
    )
    .with_minimizers(vec![vec![0.0; d]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dimensions_follow_the_table() {
        let dims: Vec<(String, usize)> = standard_suite().into_iter().map(|p| (p.name, p.dimension)).collect();
        let expected = [
            ("bohachevsky", 2),
            ("branin", 2),
            ("crossintray", 2),
            ("dixonprice", 2),
            ("easom", 2),
            ("griewank", 4),
            ("hartmann3", 3),
            ("levy", 4),
            ("mccormick", 2),
            ("rotatedhyperellipsoid", 4),
            ("schwefel", 2),
            ("sphere", 8),
            ("styblinskitang", 4),
            ("sumsquares", 10),
            ("zakharov", 2),
        ];
        assert_eq!(dims.len(), 15);
        for ((name, dim), (en, ed)) in dims.iter().zip(expected) {
            assert_eq!((name.as_str(), *dim), (en, ed));
        }
    }

    #[test]
    fn tabulated_minimizers_are_listed() {
        let suite = standard_suite();
        let find = |n: &str| suite.iter().find(|p| p.name == n).unwrap().clone();
        assert_eq!(find("sphere").known_minimizers[0], vec![0.0; 8]);
        assert_eq!(find("sphere").known_min_value, 0.0);
        let b = find("branin");
        assert_eq!(b.known_minimizers[0], vec![PI, 2.275]);
        assert_abs_diff_eq!(b.known_min_value, 0.397887357729738, epsilon = 1e-12);
        let m = &find("mccormick").known_minimizers[0];
        assert_abs_diff_eq!(m[0], -0.54719, epsilon = 1e-5);
        assert_abs_diff_eq!(m[1], -1.54719, epsilon = 1e-5);
        assert_eq!(find("crossintray").known_minimizers.len(), 4);
        let d = &find("dixonprice").known_minimizers;
        assert_eq!(d.len(), 2);
        assert_abs_diff_eq!(d[0][1], 0.5_f64.sqrt(), epsilon = 1e-12);
        let h = &find("hartmann3");
        assert_abs_diff_eq!(h.known_min_value, -3.86278, epsilon = 1e-5);
        assert_abs_diff_eq!(find("easom").known_min_value, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn styblinski_tang_minimizer_is_the_gradient_root() {
        let p = styblinski_tang(4);
        let g = p.gradient(&[STYBTANG_ARGMIN; 4]);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
        // the tabulated -2.0953 is not stationary for this formula
        assert!(p.gradient(&[-2.0953; 4])[0].abs() > 1.0);
        assert_abs_diff_eq!(p.known_min_value, -156.66466281508565, epsilon = 1e-10);
    }
}
