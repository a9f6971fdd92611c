//! The limiting density sigma of the scaled eigenvalues: the solution of
//! sigma - lambda (x sigma)' = f_b on its support, where f_b is the arcsine
//! density of (b - 1, b + 1).

use std::f64::consts::{FRAC_PI_2, PI};

use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_singular_integrate, adaptive_singular_integrate_rel, SingularEnds};
use crate::scaling::limit_support;
use crate::special::{bessel_j0_series, binomial, compensated_sum};

/// Default absolute accuracy of quadrature-evaluated densities.
pub const DENSITY_TOL: f64 = 1e-12;
/// Absolute accuracy of mass and moment integrals.
pub const INTEGRAL_TOL: f64 = 1e-10;
const ODE_REL_TOL: f64 = 1e-13;
const FORM_MATCH_EPS: f64 = 1e-12;
const MAX_CLOSED_INDEX: u32 = 60;

/// Support [B1, B2] of the limit density.
pub fn support(lambda: f64, b: f64) -> Result<(f64, f64)> {
    check_params(lambda, b)?;
    Ok(limit_support(lambda, b))
}

fn check_params(lambda: f64, b: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if !b.is_finite() {
        return Err(Error::InvalidParameter(format!("b must be finite, got {b}")));
    }
    Ok(())
}

/// The arcsine density f_b(x) = 1 / (pi sqrt(1 - (x - b)^2)) on (b - 1, b + 1).
pub fn arcsine_density(b: f64, x: f64) -> f64 {
    let u = x - b;
    if u.abs() < 1.0 {
        1.0 / (PI * ((1.0 - u) * (1.0 + u)).sqrt())
    } else {
        0.0
    }
}

/// The explicit solutions available for special (lambda, b).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    /// lambda = 0: sigma = f_b.
    Arcsine,
    /// b = 0, lambda = 1/(2m).
    EvenReciprocal { m: u32 },
    /// b = 0, lambda = 1/(2m - 1).
    OddReciprocal { m: u32 },
    /// b = 1, lambda = 1/(q + 1), on (0, 2).
    ShiftedInteger { q: u32 },
    /// b = 1, lambda = 1/(q + 1/2), on (0, 2).
    ShiftedHalfInteger { q: u32 },
}

impl ClosedForm {
    /// The form matching (lambda, b), if any. b = -1 is served through the
    /// reflection sigma(x) -> sigma(-x) of the b = 1 forms.
    pub fn detect(lambda: f64, b: f64) -> Option<ClosedForm> {
        if lambda == 0.0 {
            return Some(ClosedForm::Arcsine);
        }
        if !(lambda > 0.0) {
            return None;
        }
        let r = 1.0 / lambda;
        let near = |target: f64| (r - target).abs() <= FORM_MATCH_EPS * target;
        if b == 0.0 {
            let k = r.round();
            if k >= 1.0 && k <= f64::from(2 * MAX_CLOSED_INDEX) && near(k) {
                let k = k as u32;
                return Some(if k % 2 == 0 {
                    ClosedForm::EvenReciprocal { m: k / 2 }
                } else {
                    ClosedForm::OddReciprocal { m: (k + 1) / 2 }
                });
            }
        } else if b.abs() == 1.0 {
            let k = r.round();
            if k >= 1.0 && k <= f64::from(MAX_CLOSED_INDEX) && near(k) {
                return Some(ClosedForm::ShiftedInteger { q: k as u32 - 1 });
            }
            let h = (r - 0.5).round();
            if h >= 0.0 && h <= f64::from(MAX_CLOSED_INDEX) && near(h + 0.5) {
                return Some(ClosedForm::ShiftedHalfInteger { q: h as u32 });
            }
        }
        None
    }

    /// lambda of the form.
    pub fn lambda(&self) -> f64 {
        match *self {
            ClosedForm::Arcsine => 0.0,
            ClosedForm::EvenReciprocal { m } => 1.0 / f64::from(2 * m),
            ClosedForm::OddReciprocal { m } => 1.0 / f64::from(2 * m - 1),
            ClosedForm::ShiftedInteger { q } => 1.0 / f64::from(q + 1),
            ClosedForm::ShiftedHalfInteger { q } => 1.0 / (f64::from(q) + 0.5),
        }
    }
}

/// Evaluates a closed form at x. For the arcsine form, b is the centre; the
/// other forms use their own b (0 or 1) and ignore the argument.
///
/// Returns 0 outside the support and `Singular` at the logarithmic or
/// inverse-square-root singularity at 0.
pub fn closed_form_density(form: ClosedForm, b: f64, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain {
            what: "non-finite argument".into(),
            x,
        });
    }
    match form {
        ClosedForm::Arcsine => Ok(arcsine_density(b, x)),
        ClosedForm::EvenReciprocal { m } => {
            if x.abs() >= 1.0 {
                return Ok(0.0);
            }
            let m = m as i32;
            let sum = compensated_sum((1..=m).map(|j| {
                (2.0 * x).powi(2 * m - 2 * j) * binomial((2 * j - 2) as u32, (j - 1) as u32)
            }));
            Ok(4.0 / PI * ((1.0 - x) * (1.0 + x)).sqrt() * sum / binomial(2 * m as u32, m as u32))
        }
        ClosedForm::OddReciprocal { m } => {
            if x.abs() >= 1.0 {
                return Ok(0.0);
            }
            if x == 0.0 {
                return Err(Error::Singular { x });
            }
            let root = ((1.0 - x) * (1.0 + x)).sqrt();
            let log = root.ln_1p() - x.abs().ln();
            let half = x / 2.0;
            let mi = m as i32;
            let tail = compensated_sum((1..mi).map(|j| {
                half.powi(2 * mi - 2 - 2 * j) / (f64::from(j) * binomial(2 * j as u32, j as u32))
            }));
            let head = half.powi(2 * mi - 2) * log;
            Ok(f64::from(m) * binomial(2 * m, m) / (2.0 * PI) * (head + 0.5 * root * tail))
        }
        ClosedForm::ShiftedInteger { q } => {
            if x <= 0.0 || x >= 2.0 {
                return if x == 0.0 { Err(Error::Singular { x }) } else { Ok(0.0) };
            }
            let r = ((2.0 - x) / x).sqrt();
            let qi = q as i32;
            let sum = compensated_sum(
                (0..=qi).map(|j| binomial(q, j as u32) / f64::from(1 + 2 * j) * r.powi(1 + 2 * j)),
            );
            Ok(f64::from(q + 1) / PI * (x / 2.0).powi(qi) * sum)
        }
        ClosedForm::ShiftedHalfInteger { q } => {
            if x <= 0.0 || x >= 2.0 {
                return if x == 0.0 { Err(Error::Singular { x }) } else { Ok(0.0) };
            }
            let r = ((2.0 - x) / x).sqrt();
            let log = ((2.0 - x).sqrt() + 2f64.sqrt()).ln() - 0.5 * x.ln();
            let eighth = x / 8.0;
            let qi = q as i32;
            let tail = compensated_sum((1..=qi).map(|j| {
                eighth.powi(qi - j) / (f64::from(j) * binomial(2 * j as u32, j as u32))
            }));
            let head = eighth.powf(f64::from(q) - 0.5) * log;
            Ok(f64::from(2 * q + 1) / (4.0 * PI) * (head + r * tail) * binomial(2 * q, q))
        }
    }
}

/// sigma(lambda, b, x) for lambda > 0 from the integral representation of the
/// solution, to absolute accuracy about `tol`.
///
/// For x > 0, sigma(x) = (1 / (lambda x)) integral_{max(x, b-1)}^{b+1}
/// (x/s)^{1/lambda} f_b(s) ds, which is the Cauchy-Euler solution written with
/// a bounded kernel; below b - 1 (b > 1) it continues as C x^{1/lambda - 1}.
/// Negative x use sigma(lambda, b, x) = sigma(lambda, -b, -x). With
/// s = b + sin(theta), f_b(s) ds = dtheta / pi and the integrand is smooth.
pub fn ode_density(lambda: f64, b: f64, x: f64, tol: f64) -> Result<f64> {
    check_params(lambda, b)?;
    if lambda == 0.0 {
        return Ok(arcsine_density(b, x));
    }
    if !x.is_finite() {
        return Err(Error::Domain {
            what: "non-finite argument".into(),
            x,
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    if x == 0.0 {
        if lambda >= 1.0 || b.abs() == 1.0 {
            return Err(Error::Singular { x });
        }
        return Ok(if b.abs() < 1.0 {
            arcsine_density(b, 0.0) / (1.0 - lambda)
        } else {
            0.0
        });
    }
    if x > 0.0 {
        positive_branch(lambda, b, x, tol)
    } else {
        positive_branch(lambda, -b, -x, tol)
    }
}

fn positive_branch(lambda: f64, b: f64, x: f64, tol: f64) -> Result<f64> {
    if x >= b + 1.0 {
        return Ok(0.0);
    }
    // With s = b - cos(phi), f_b(s) ds = dphi / pi. The lower limit s_lo is
    // x or b - 1; writing phi = phi_lo + psi, s - s_lo is a product of sines
    // and keeps full relative accuracy however small s is.
    let (s_lo, phi_lo) = if x <= b - 1.0 {
        (b - 1.0, 0.0)
    } else {
        let half = (0.5 * (x - (b - 1.0))).sqrt().min(1.0);
        (x, 2.0 * half.asin())
    };
    let sin_lo = (0.5 * phi_lo).sin();
    let p = 1.0 / lambda;
    let g = |psi: f64| {
        let phi = phi_lo + psi;
        let rise = 4.0 * ((2.0 * phi_lo + psi) / 4.0).cos() * (psi / 4.0).sin() * ((0.5 * phi).sin() + sin_lo);
        let s = s_lo + rise.max(0.0);
        (x / s).min(1.0).powf(p) / PI
    };
    let scale = lambda * x;
    let integral =
        adaptive_singular_integrate_rel(g, 0.0, PI - phi_lo, SingularEnds::NONE, tol * scale, ODE_REL_TOL)?;
    Ok(integral / scale)
}

/// How a model evaluates its density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityForm {
    Arcsine,
    ClosedForm(ClosedForm),
    Quadrature,
}

/// A limit density with parameters (lambda, b).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    pub lambda: f64,
    pub b: f64,
    pub support: [f64; 2],
    pub form: DensityForm,
    #[serde(default = "default_quad_tol")]
    pub quad_tol: f64,
}

fn default_quad_tol() -> f64 {
    DENSITY_TOL
}

impl DensityModel {
    /// The model for (lambda, b), using a closed form whenever one applies.
    ///
    /// The half-integer forms on (0, 2) are admitted only after their total
    /// mass is confirmed to be 1 within 1e-8; otherwise an `Accuracy` error
    /// reports the defect.
    pub fn new(lambda: f64, b: f64) -> Result<Self> {
        let (lo, hi) = support(lambda, b)?;
        let form = match ClosedForm::detect(lambda, b) {
            Some(ClosedForm::Arcsine) => DensityForm::Arcsine,
            Some(c) => DensityForm::ClosedForm(c),
            None => DensityForm::Quadrature,
        };
        let model = DensityModel {
            lambda,
            b,
            support: [lo, hi],
            form,
            quad_tol: DENSITY_TOL,
        };
        if let DensityForm::ClosedForm(ClosedForm::ShiftedHalfInteger { .. }) = form {
            let mass = model.mass()?;
            if (mass - 1.0).abs() > 1e-8 {
                return Err(Error::Accuracy {
                    tol: 1e-8,
                    estimate: mass,
                    error: (mass - 1.0).abs(),
                });
            }
        }
        Ok(model)
    }

    /// The model forced onto quadrature evaluation.
    pub fn quadrature(lambda: f64, b: f64) -> Result<Self> {
        let (lo, hi) = support(lambda, b)?;
        if lambda == 0.0 {
            return Self::new(lambda, b);
        }
        Ok(DensityModel {
            lambda,
            b,
            support: [lo, hi],
            form: DensityForm::Quadrature,
            quad_tol: DENSITY_TOL,
        })
    }

    /// sigma(x); `Singular` at a singular point.
    pub fn density(&self, x: f64) -> Result<f64> {
        match self.form {
            DensityForm::Arcsine => Ok(arcsine_density(self.b, x)),
            DensityForm::ClosedForm(c) => {
                // forms on (0, 2) serve b = -1 by reflection
                if self.b < 0.0 {
                    closed_form_density(c, 1.0, -x)
                } else {
                    closed_form_density(c, self.b, x)
                }
            }
            DensityForm::Quadrature => ode_density(self.lambda, self.b, x, self.quad_tol),
        }
    }

    /// f_b(x) chi_{I_b}(x), the source term.
    pub fn source(&self, x: f64) -> f64 {
        arcsine_density(self.b, x)
    }

    /// Integral of sigma over the support.
    pub fn mass(&self) -> Result<f64> {
        self.integrate_weighted(|_| 1.0)
    }

    /// Integral of x^k sigma over the support.
    pub fn moment(&self, k: u32) -> Result<f64> {
        self.integrate_weighted(|x| x.powi(k as i32))
    }

    /// Integral of g sigma over the support, split at 0 and b +- 1.
    ///
    /// Pieces ending at 0 are integrated in u with x = +-u^m, m >= 2 lambda,
    /// which makes the power singularity x^{1/lambda - 1} of sigma at 0
    /// bounded; the arcsine density is integrated with the sine substitution.
    pub fn integrate_weighted<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        let [lo, hi] = self.support;
        if self.lambda == 0.0 {
            return adaptive_singular_integrate(
                |x| g(x) * arcsine_density(self.b, x),
                lo,
                hi,
                SingularEnds::BOTH,
                INTEGRAL_TOL,
            );
        }
        let mut cuts = vec![lo, hi];
        for c in [0.0, self.b - 1.0, self.b + 1.0] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let m = (2.0 * self.lambda).ceil().max(2.0);
        let tol = INTEGRAL_TOL / cuts.len() as f64;
        let eval = |x: f64| -> f64 {
            // singular points are never sampled by the open rules; a failure
            // elsewhere is surfaced through the NaN check below
            self.density(x).unwrap_or(f64::NAN) * g(x)
        };
        let mut pieces = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (p, q) = (w[0], w[1]);
            let value = if p == 0.0 {
                let top = q.powf(1.0 / m);
                adaptive_singular_integrate(
                    |u| eval(u.powf(m)) * m * u.powf(m - 1.0),
                    0.0,
                    top,
                    SingularEnds::NONE,
                    tol,
                )?
            } else if q == 0.0 {
                let top = (-p).powf(1.0 / m);
                adaptive_singular_integrate(
                    |u| eval(-u.powf(m)) * m * u.powf(m - 1.0),
                    0.0,
                    top,
                    SingularEnds::NONE,
                    tol,
                )?
            } else {
                adaptive_singular_integrate(eval, p, q, SingularEnds::NONE, tol)?
            };
            if value.is_nan() {
                return Err(Error::Domain {
                    what: "density evaluation failed inside the support".into(),
                    x: 0.5 * (p + q),
                });
            }
            pieces.push(value);
        }
        Ok(compensated_sum(pieces))
    }

    /// sigma on a grid, skipping singular points.
    pub fn table(&self, grid: &[f64]) -> Result<LimitTable> {
        let mut xs = Vec::with_capacity(grid.len());
        let mut values = Vec::with_capacity(grid.len());
        for &x in grid {
            match self.density(x) {
                Ok(v) => {
                    xs.push(x);
                    values.push(v);
                }
                Err(Error::Singular { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(LimitTable { grid: xs, values })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }
}

/// sigma sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTable {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl LimitTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,sigma_limit\n");
        for (x, v) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x:?},{v:?}\n"));
        }
        out
    }
}

/// |sigma(x) - lambda d/dx[x sigma(x)] - f(x)| with a central difference of
/// step h.
pub fn ode_residual<S, F>(sigma: S, source: F, lambda: f64, x: f64, h: f64) -> Result<f64>
where
    S: Fn(f64) -> Result<f64>,
    F: Fn(f64) -> f64,
{
    let derivative = ((x + h) * sigma(x + h)? - (x - h) * sigma(x - h)?) / (2.0 * h);
    Ok((sigma(x)? - lambda * derivative - source(x)).abs())
}

/// Outcome of an ODE residual check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeCheck {
    pub max_residual: f64,
    pub points_used: usize,
}

/// Largest ODE residual of the model over the grid points lying at least 5h
/// inside the support and at least 5h away from 0 and b +- 1.
pub fn verify_ode(model: &DensityModel, grid: &[f64], h: f64) -> Result<OdeCheck> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step must be positive, got {h}")));
    }
    let [lo, hi] = model.support;
    let margin = 5.0 * h;
    let avoid = [0.0, model.b - 1.0, model.b + 1.0];
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for &x in grid {
        if x < lo + margin || x > hi - margin || avoid.iter().any(|c| (x - c).abs() < margin) {
            continue;
        }
        let r = ode_residual(|t| model.density(t), |t| model.source(t), model.lambda, x, h)?;
        worst = worst.max(r);
        used += 1;
    }
    Ok(OdeCheck {
        max_residual: worst,
        points_used: used,
    })
}

/// Characteristic function of f_b: integral of e^{itx} f_b(x) dx, computed by
/// quadrature in x = b + sin(theta).
pub fn arcsine_cf(t: f64, b: f64) -> Result<Complex64> {
    check_params(0.0, b)?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be finite, got {t}")));
    }
    let re = adaptive_singular_integrate(
        |theta| (t * (b + theta.sin())).cos() / PI,
        -FRAC_PI_2,
        FRAC_PI_2,
        SingularEnds::NONE,
        1e-14,
    )?;
    let im = adaptive_singular_integrate(
        |theta| (t * (b + theta.sin())).sin() / PI,
        -FRAC_PI_2,
        FRAC_PI_2,
        SingularEnds::NONE,
        1e-14,
    )?;
    Ok(Complex64::new(re, im))
}

/// e^{itb} J_0(t).
pub fn arcsine_cf_exact(t: f64, b: f64) -> Complex64 {
    Complex64::from_polar(1.0, t * b) * bessel_j0_series(t)
}
