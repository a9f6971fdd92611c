use proptest::prelude::*;
use specdens::moments::{
    carleman_partial_sum, finite_moments, hankel_positive, lambda_det, laurent_moment, limit_moment,
    limit_moments, moment_convergence_report, MomentVector,
};
use specdens::recurrence::recurrence_table;
use specdens::scaling::{scaling_model, ScalingModel};
use specdens::weights::WeightSpec;

const TEST_POINTS: [(f64, f64); 4] = [(0.5, 0.0), (1.0, 1.0), (1.0 / 3.0, 0.0), (0.0, 0.0)];

fn model(lambda: f64, b: f64) -> ScalingModel {
    ScalingModel::new(lambda, b, 1.0).unwrap()
}

// Gauss-Legendre on [0, 1] by Newton iteration on the Legendre recurrence.
fn legendre01(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / dp;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (x + 1.0), 1.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

// (1 / (n+1)!) times the integral over [0, 1]^{n+1} of
// prod_{j<k} (t_j^lambda - t_k^lambda)^2, with t = v^4 so that the integrand
// is a polynomial for the lambda used here.
fn nested_lambda_det(lambda: f64, n: usize) -> f64 {
    let rule = legendre01(30);
    let dim = n + 1;
    let mut idx = vec![0usize; dim];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        let mut powers = Vec::with_capacity(dim);
        for &i in &idx {
            let (v, wv) = rule[i];
            w *= wv * 4.0 * v.powi(3);
            powers.push(v.powf(4.0 * lambda));
        }
        let mut vdm = 1.0;
        for j in 0..dim {
            for k in j + 1..dim {
                vdm *= (powers[j] - powers[k]).powi(2);
            }
        }
        total += w * vdm;
        let mut d = 0;
        while d < dim {
            idx[d] += 1;
            if idx[d] < rule.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dim {
            break;
        }
    }
    let factorial: f64 = (1..=dim).map(|i| i as f64).product();
    total / factorial
}

#[test]
fn hermite_moments_by_hand_summation() {
    let w = WeightSpec::hermite();
    let s = scaling_model(&w).unwrap();
    let table = recurrence_table(&w, 1004).unwrap();
    for n in [10usize, 100, 1000] {
        let m = finite_moments(&table, &s, n, 4).unwrap();
        // sum_{j<N} (a_j^2 + a_{j+1}^2) with a_j^2 = j/2, over N c_N^2 = 2 N^2
        let m2: f64 = (0..n).map(|j| (2 * j + 1) as f64 / 2.0).sum::<f64>() / (2.0 * (n * n) as f64);
        // closed walks of length 4 from j: (6 j^2 + 6 j + 3) / 4
        let m4: f64 = (0..n).map(|j| (6 * j * j + 6 * j + 3) as f64 / 4.0).sum::<f64>() / (4.0 * (n * n * n) as f64);
        assert!((m.values[2] - m2).abs() <= 1e-13);
        assert!((m.values[2] - 0.25).abs() <= 1e-13);
        assert!((m.values[4] - m4).abs() <= 1e-12);
        assert!((m.values[4] - (0.125 + 1.0 / (16.0 * (n * n) as f64))).abs() <= 1e-12);
    }
}

#[test]
fn laguerre_first_moment_is_one_half() {
    let w = WeightSpec::laguerre(0.0).unwrap();
    let s = scaling_model(&w).unwrap();
    let table = recurrence_table(&w, 1001).unwrap();
    for n in [10usize, 100, 1000] {
        // sum_{j<N} (2j + 1) / (N * 2N)
        let m1 = finite_moments(&table, &s, n, 1).unwrap().values[1];
        assert!((m1 - 0.5).abs() <= 1e-13, "N={n}: {m1}");
    }
}

#[test]
fn laurent_and_binomial_limit_moments_agree() {
    for (lambda, b) in TEST_POINTS {
        let s = model(lambda, b);
        for k in 0..=12 {
            let l = laurent_moment(&s, k);
            let m = limit_moment(&s, k);
            assert!((l - m).abs() <= 1e-13 * m.abs().max(1.0), "({lambda}, {b}) k={k}: {l} vs {m}");
        }
    }
}

#[test]
fn odd_moments_vanish_for_even_weights() {
    for w in [
        WeightSpec::hermite(),
        WeightSpec::jacobi(0.5, 0.5).unwrap(),
        WeightSpec::generalized_hermite(1.0, 4.0).unwrap(),
    ] {
        let s = scaling_model(&w).unwrap();
        let table = recurrence_table(&w, 60).unwrap();
        let m = finite_moments(&table, &s, 50, 9).unwrap();
        for k in (1..=9).step_by(2) {
            assert_eq!(m.values[k], 0.0, "{:?} k={k}", w.family());
            assert_eq!(limit_moment(&s, k), 0.0);
        }
    }
}

#[test]
fn finite_moments_converge_to_the_limit() {
    let n_list = [25, 50, 100, 200];
    for w in [WeightSpec::hermite(), WeightSpec::laguerre(0.0).unwrap(), WeightSpec::jacobi(0.0, 0.0).unwrap()] {
        let s = scaling_model(&w).unwrap();
        let table = recurrence_table(&w, 208).unwrap();
        let report = moment_convergence_report(&table, &s, &n_list, 8).unwrap();
        let errors: Vec<f64> = n_list.iter().map(|&n| report.max_error(n).unwrap()).collect();
        assert!(errors.windows(2).all(|e| e[1] < e[0]), "{:?}: {errors:?}", w.family());
        assert!(errors[3] <= 0.05, "{:?}: {errors:?}", w.family());
    }
}

#[test]
fn hermite_fourth_moment_error_is_exact() {
    let w = WeightSpec::hermite();
    let s = scaling_model(&w).unwrap();
    let table = recurrence_table(&w, 210).unwrap();
    let report = moment_convergence_report(&table, &s, &[50, 200], 4).unwrap();
    for r in report.rows.iter().filter(|r| r.k == 4) {
        assert!((r.abs_error - 1.0 / (16.0 * (r.n * r.n) as f64)).abs() < 1e-14);
    }
    assert!(report.rows.iter().filter(|r| r.k == 2).all(|r| r.abs_error == 0.0));
}

#[test]
fn limit_hankel_matrices_are_positive_definite() {
    for (lambda, b) in TEST_POINTS {
        let m = limit_moments(&model(lambda, b), 12);
        for n in 0..=6 {
            assert!(hankel_positive(&m, n), "({lambda}, {b}) n={n}");
        }
    }
}

#[test]
fn lambda_det_matches_nested_quadrature() {
    assert!((lambda_det(1.0, 1).unwrap() - 1.0 / 12.0).abs() <= 1e-12);
    for lambda in [0.25, 0.5, 1.0, 2.0] {
        for n in 0..=3 {
            let exact = lambda_det(lambda, n).unwrap();
            let oracle = nested_lambda_det(lambda, n);
            assert!((exact - oracle).abs() <= 1e-6, "lambda={lambda} n={n}: {exact} vs {oracle}");
            // the oracle integrand is a polynomial, so the agreement is far better
            assert!((exact - oracle).abs() <= 1e-9 * oracle, "lambda={lambda} n={n}: {exact} vs {oracle}");
            assert!(exact > 0.0);
        }
        assert!(lambda_det(lambda, 4).unwrap() > 0.0);
    }
}

#[test]
fn carleman_sums_grow_linearly() {
    for (lambda, b) in TEST_POINTS {
        let m = limit_moments(&model(lambda, b), 40);
        let floor = 1.0 / (3.0 * (0.5 + b.abs()));
        for k in 1..=20 {
            let s = carleman_partial_sum(&m, k).unwrap();
            assert!(s >= k as f64 * floor, "({lambda}, {b}) K={k}: {s}");
        }
    }
    let semicircle = limit_moments(&model(0.5, 0.0), 20);
    assert!(carleman_partial_sum(&semicircle, 10).unwrap() >= 10.0 / 1.5);
}

#[test]
fn carleman_terms_shrink_for_factorial_growth() {
    // m_{2k} = ((2k)!)^2: the terms decay geometrically
    let values: Vec<f64> = (0..=16u32)
        .map(|j| if j % 2 == 0 { (1..=j).map(f64::from).product::<f64>().powi(2) } else { 0.0 })
        .collect();
    let m = MomentVector::base(values);
    let terms: Vec<f64> = (1..=8)
        .map(|k| carleman_partial_sum(&m, k).unwrap() - if k > 1 { carleman_partial_sum(&m, k - 1).unwrap() } else { 0.0 })
        .collect();
    assert!(terms.windows(2).all(|t| t[1] / t[0] < 0.9), "{terms:?}");
}

proptest! {
    #[test]
    fn laurent_identity_on_random_parameters(lambda in 0.0f64..3.0, b in -2.0f64..2.0, k in 0usize..=12) {
        let s = model(lambda, b);
        let l = laurent_moment(&s, k);
        let m = limit_moment(&s, k);
        prop_assert!((l - m).abs() <= 1e-12 * m.abs().max(1.0));
    }

    #[test]
    fn limit_hankel_positive_on_random_parameters(lambda in 0.0f64..2.0, b in -1.5f64..1.5) {
        let m = limit_moments(&model(lambda, b), 6);
        prop_assert!(hankel_positive(&m, 3));
    }

    #[test]
    fn lambda_det_is_positive(lambda in 0.05f64..4.0, n in 0usize..=5) {
        prop_assert!(lambda_det(lambda, n).unwrap() > 0.0);
    }

    #[test]
    fn even_finite_moments_are_positive(n in 1usize..80, k in 1usize..=6) {
        let w = WeightSpec::laguerre(0.5).unwrap();
        let s = scaling_model(&w).unwrap();
        let table = recurrence_table(&w, 92).unwrap();
        let m = finite_moments(&table, &s, n, 2 * k).unwrap();
        prop_assert!(m.values[2 * k] > 0.0);
    }
}
