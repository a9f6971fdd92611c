//! Weight functions on an interval: the orthogonality measure of the ensemble.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::special::{gamma, lgamma};

/// Parametrised weight families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// e^{-x^2} on the real line.
    Hermite,
    /// x^alpha e^{-x} on (0, inf), alpha > -1.
    Laguerre { alpha: f64 },
    /// (1-x)^alpha (1+x)^beta on (-1, 1), alpha, beta > -1.
    Jacobi { alpha: f64, beta: f64 },
    /// |x|^beta_exp e^{-|x|^alpha_exp} on the real line.
    GeneralizedHermite { beta_exp: f64, alpha_exp: f64 },
    /// User-supplied evaluator.
    Custom,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Hermite => "hermite",
            Family::Laguerre { .. } => "laguerre",
            Family::Jacobi { .. } => "jacobi",
            Family::GeneralizedHermite { .. } => "genhermite",
            Family::Custom => "custom",
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(
            self,
            Family::Hermite | Family::Laguerre { .. } | Family::Jacobi { .. }
        )
    }
}

/// Support interval of a weight; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidParameter(format!(
                "support ({lo}, {hi}) is not a proper interval"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn real_line() -> Self {
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub fn contains_closure(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A weight function omega on an interval together with its total mass.
#[derive(Clone)]
pub struct WeightSpec {
    family: Family,
    support: Interval,
    mass: f64,
    custom: Option<Evaluator>,
}

impl fmt::Debug for WeightSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightSpec")
            .field("family", &self.family)
            .field("support", &self.support)
            .field("mass", &self.mass)
            .finish()
    }
}

impl WeightSpec {
    pub fn hermite() -> Self {
        WeightSpec {
            family: Family::Hermite,
            support: Interval::real_line(),
            mass: std::f64::consts::PI.sqrt(),
            custom: None,
        }
    }

    pub fn laguerre(alpha: f64) -> Result<Self> {
        if !(alpha > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "Laguerre requires alpha > -1, got {alpha}"
            )));
        }
        Ok(WeightSpec {
            family: Family::Laguerre { alpha },
            support: Interval {
                lo: 0.0,
                hi: f64::INFINITY,
            },
            mass: gamma(alpha + 1.0),
            custom: None,
        })
    }

    pub fn jacobi(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > -1.0 && beta > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "Jacobi requires alpha, beta > -1, got ({alpha}, {beta})"
            )));
        }
        let s = alpha + beta;
        let mass = if s + 2.0 < 150.0 {
            2f64.powf(s + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(s + 2.0)
        } else {
            ((s + 1.0) * std::f64::consts::LN_2 + lgamma(alpha + 1.0) + lgamma(beta + 1.0)
                - lgamma(s + 2.0))
            .exp()
        };
        Ok(WeightSpec {
            family: Family::Jacobi { alpha, beta },
            support: Interval { lo: -1.0, hi: 1.0 },
            mass,
            custom: None,
        })
    }

    /// |x|^beta_exp e^{-|x|^alpha_exp}, the Freud-type family.
    pub fn generalized_hermite(beta_exp: f64, alpha_exp: f64) -> Result<Self> {
        if !(beta_exp > -1.0 && alpha_exp > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "generalized Hermite requires beta > -1 and alpha > 0, got ({beta_exp}, {alpha_exp})"
            )));
        }
        // 2 * Gamma((beta+1)/alpha) / alpha
        let mass = 2.0 * gamma((beta_exp + 1.0) / alpha_exp) / alpha_exp;
        Ok(WeightSpec {
            family: Family::GeneralizedHermite {
                beta_exp,
                alpha_exp,
            },
            support: Interval::real_line(),
            mass,
            custom: None,
        })
    }

    /// A custom weight. The mass is computed by quadrature of the evaluator.
    pub fn custom<F>(support: Interval, evaluator: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut spec = WeightSpec {
            family: Family::Custom,
            support,
            mass: 1.0,
            custom: Some(Arc::new(evaluator)),
        };
        let mass = crate::recurrence::discretized_mass(&spec)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "custom weight has non-positive or infinite mass {mass}"
            )));
        }
        spec.mass = mass;
        Ok(spec)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn support(&self) -> Interval {
        self.support
    }

    /// Total mass mu_0 = integral of omega over the support.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// omega(x); zero outside the support.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.support.contains_closure(x) {
            return 0.0;
        }
        match (&self.family, &self.custom) {
            (Family::Custom, Some(f)) => f(x),
            _ => self.log_eval(x).exp(),
        }
    }

    /// ln omega(x), `-inf` where the weight vanishes.
    ///
    /// Exponential families are evaluated in log form so that the square root of
    /// the weight stays representable far beyond the underflow point of omega.
    pub fn log_eval(&self, x: f64) -> f64 {
        if !self.support.contains_closure(x) {
            return f64::NEG_INFINITY;
        }
        match self.family {
            Family::Hermite => -x * x,
            Family::Laguerre { alpha } => {
                if x == 0.0 {
                    power_at_zero(alpha)
                } else {
                    alpha * x.ln() - x
                }
            }
            Family::Jacobi { alpha, beta } => {
                let up = if x == 1.0 {
                    power_at_zero(alpha)
                } else {
                    alpha * (1.0 - x).ln()
                };
                let down = if x == -1.0 {
                    power_at_zero(beta)
                } else {
                    beta * (1.0 + x).ln()
                };
                up + down
            }
            Family::GeneralizedHermite {
                beta_exp,
                alpha_exp,
            } => {
                let ax = x.abs();
                if ax == 0.0 {
                    power_at_zero(beta_exp)
                } else {
                    beta_exp * ax.ln() - ax.powf(alpha_exp)
                }
            }
            Family::Custom => match &self.custom {
                Some(f) => f(x).ln(),
                None => f64::NEG_INFINITY,
            },
        }
    }
}

fn power_at_zero(exponent: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else if exponent > 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    }
}

// JSON form: {"family": ..., "alpha": ..., "beta": ..., "support": [lo, hi]}
// with infinite ends written as the strings "-inf" / "+inf".

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            Bound::Text("+inf".into())
        } else if v == f64::NEG_INFINITY {
            Bound::Text("-inf".into())
        } else {
            Bound::Num(v)
        }
    }

    fn to_f64(&self) -> std::result::Result<f64, String> {
        match self {
            Bound::Num(v) => Ok(*v),
            Bound::Text(s) => match s.as_str() {
                "-inf" => Ok(f64::NEG_INFINITY),
                "+inf" | "inf" => Ok(f64::INFINITY),
                other => Err(format!("bad support bound {other:?}")),
            },
        }
    }
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    support: Option<[Bound; 2]>,
}

impl Serialize for WeightSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let (alpha, beta) = match self.family {
            Family::Hermite | Family::Custom => (None, None),
            Family::Laguerre { alpha } => (Some(alpha), None),
            Family::Jacobi { alpha, beta } => (Some(alpha), Some(beta)),
            Family::GeneralizedHermite {
                beta_exp,
                alpha_exp,
            } => (Some(alpha_exp), Some(beta_exp)),
        };
        WeightJson {
            family: self.family.name().to_string(),
            alpha,
            beta,
            support: Some([
                Bound::from_f64(self.support.lo),
                Bound::from_f64(self.support.hi),
            ]),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for WeightSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = WeightJson::deserialize(deserializer)?;
        let spec = WeightSpec::from_parts(&raw.family, raw.alpha, raw.beta)
            .map_err(D::Error::custom)?;
        if let Some([lo, hi]) = raw.support {
            let lo = lo.to_f64().map_err(D::Error::custom)?;
            let hi = hi.to_f64().map_err(D::Error::custom)?;
            if lo != spec.support.lo || hi != spec.support.hi {
                return Err(D::Error::custom(format!(
                    "support [{lo}, {hi}] does not match the {} family support [{}, {}]",
                    raw.family, spec.support.lo, spec.support.hi
                )));
            }
        }
        Ok(spec)
    }
}

impl WeightSpec {
    /// Build a weight from a family name and its optional parameters, as used by
    /// the JSON form and the command line. For `genhermite`, `alpha` is the
    /// exponent inside the exponential and `beta` the power of |x|.
    pub fn from_parts(family: &str, alpha: Option<f64>, beta: Option<f64>) -> Result<Self> {
        match family {
            "hermite" => Ok(WeightSpec::hermite()),
            "laguerre" => WeightSpec::laguerre(alpha.unwrap_or(0.0)),
            "jacobi" => WeightSpec::jacobi(alpha.unwrap_or(0.0), beta.unwrap_or(0.0)),
            "genhermite" => {
                WeightSpec::generalized_hermite(beta.unwrap_or(0.0), alpha.unwrap_or(2.0))
            }
            "custom" => Err(Error::InvalidParameter(
                "custom weights carry an evaluator and cannot be read from JSON; build them with WeightSpec::custom".into(),
            )),
            other => Err(Error::InvalidParameter(format!("unknown weight family {other:?}"))),
        }
    }
}
