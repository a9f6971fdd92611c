//! Small special-function helpers shared by several modules.

use statrs::function::gamma::{gamma as gamma_lanczos, ln_gamma};

/// Binomial coefficient C(n, k) as an `f64`.
///
/// Computed by the multiplicative formula in `u128`, exact for every value
/// below 2^53 (n up to roughly 56 for the central coefficient).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    acc as f64
}

/// Bessel function J0 by its power series sum (-1)^k (t/2)^{2k} / (k!)^2.
///
/// Intended for |t| <= 12; beyond that cancellation eats the leading digits.
pub fn bessel_j0_series(t: f64) -> f64 {
    let q = 0.25 * t * t;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200u32 {
        let kf = f64::from(k);
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() <= f64::EPSILON * 1e-3 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Gamma function, exact (to rounding of the final product) at positive
/// integers and half-integers below 150.
pub fn gamma(x: f64) -> f64 {
    let twice = 2.0 * x;
    if x > 0.0 && x < 150.0 && twice == twice.round() {
        let (mut acc, mut y) = if x == x.round() {
            (1.0, 1.0)
        } else {
            (std::f64::consts::PI.sqrt(), 0.5)
        };
        while y < x {
            acc *= y;
            y += 1.0;
        }
        return acc;
    }
    gamma_lanczos(x)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Natural log of the gamma function.
pub fn lgamma(x: f64) -> f64 {
    ln_gamma(x)
}
