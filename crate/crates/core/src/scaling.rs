//! The contraction model c_n = kappa n^lambda with limits a_n/c_n -> 1/2 and
//! b_n/c_n -> b.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recurrence::RecurrenceTable;
use crate::special::gamma;
use crate::weights::{Family, WeightSpec};

/// Scaling of the recurrence coefficients.
///
/// The sequence is c_n = sqrt(kappa_sq) * n^lambda; `kappa_sq` is stored
/// rather than kappa so that integer squares such as 2 (Hermite) stay exact
/// in even powers of c_n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel {
    pub lambda: f64,
    pub a_limit: f64,
    pub b_limit: f64,
    pub kappa_sq: f64,
}

impl ScalingModel {
    /// A model with the normalisation a = 1/2.
    pub fn new(lambda: f64, b_limit: f64, kappa_sq: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(kappa_sq > 0.0) || !kappa_sq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa^2 must be positive, got {kappa_sq}"
            )));
        }
        if !b_limit.is_finite() {
            return Err(Error::InvalidParameter(format!("b must be finite, got {b_limit}")));
        }
        Ok(ScalingModel {
            lambda,
            a_limit: 0.5,
            b_limit,
            kappa_sq,
        })
    }

    /// c_n.
    pub fn c(&self, n: usize) -> f64 {
        self.kappa_sq.sqrt() * (n as f64).powf(self.lambda)
    }

    /// c_n^k, assembled from kappa^2 so that even powers avoid the square root.
    pub fn c_pow(&self, n: usize, k: u32) -> f64 {
        let kappa_part = self.kappa_sq.powi((k / 2) as i32)
            * if k % 2 == 1 { self.kappa_sq.sqrt() } else { 1.0 };
        let exponent = self.lambda * f64::from(k);
        kappa_part * (n as f64).powf(exponent)
    }

    /// (|a_n/c_n - a|, |b_n/c_n - b|) at index n.
    pub fn deviation(&self, table: &RecurrenceTable, n: usize) -> Result<(f64, f64)> {
        if n == 0 || n > table.n_max() {
            return Err(Error::Range {
                requested: n,
                available: table.n_max(),
            });
        }
        let c = self.c(n);
        Ok((
            (table.a(n) / c - self.a_limit).abs(),
            (table.b(n) / c - self.b_limit).abs(),
        ))
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b_limit = b;
        self
    }

    /// Support [B1, B2] of the limiting density: [b-1, b+1] when lambda = 0,
    /// otherwise the hull of that interval and 0.
    pub fn limit_support(&self) -> (f64, f64) {
        limit_support(self.lambda, self.b_limit)
    }
}

/// Support of the limiting density for parameters (lambda, b).
pub fn limit_support(lambda: f64, b: f64) -> (f64, f64) {
    if lambda == 0.0 {
        (b - 1.0, b + 1.0)
    } else {
        ((b - 1.0).min(0.0), (b + 1.0).max(0.0))
    }
}

/// The scaling model of a weight family.
///
/// Hermite: c_n = sqrt(2n), lambda = 1/2, b = 0. Laguerre: c_n = 2n,
/// lambda = 1, b = 1. Jacobi: c_n = 1, lambda = 0, b = 0. For
/// |x|^beta e^{-|x|^alpha}: lambda = 1/alpha, b = 0 and kappa from the Freud
/// asymptotics a_n ~ (n / l_alpha)^{1/alpha} / 2 with
/// l_alpha = Gamma((alpha+1)/2) / (sqrt(pi) Gamma(alpha/2)).
pub fn scaling_model(weight: &WeightSpec) -> Result<ScalingModel> {
    match weight.family() {
        Family::Hermite => ScalingModel::new(0.5, 0.0, 2.0),
        Family::Laguerre { .. } => ScalingModel::new(1.0, 1.0, 4.0),
        Family::Jacobi { .. } => ScalingModel::new(0.0, 0.0, 1.0),
        Family::GeneralizedHermite { alpha_exp, .. } => {
            let l_alpha = gamma((alpha_exp + 1.0) / 2.0)
                / (std::f64::consts::PI.sqrt() * gamma(alpha_exp / 2.0));
            let kappa = l_alpha.powf(-1.0 / alpha_exp);
            ScalingModel::new(1.0 / alpha_exp, 0.0, kappa * kappa)
        }
        Family::Custom => Err(Error::InvalidParameter(
            "custom weights need an explicit scaling model (lambda, b, kappa)".into(),
        )),
    }
}
