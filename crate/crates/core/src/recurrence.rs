//! Three-term recurrence coefficients of orthonormal polynomials and the
//! Jacobi matrices they define.
//!
//! Convention: x p_n = a_{n+1} p_{n+1} + b_n p_n + a_n p_{n-1}, p_{-1} = 0,
//! with a_n > 0.

use crate::error::{Error, Result};
use crate::quadrature::gauss_rule;
use crate::special::compensated_sum;
use crate::weights::{Family, WeightSpec};

/// Recurrence coefficients a_1..a_{n_max} and b_0..b_{n_max}.
///
/// Both a_n and a_n^2 are stored: the squares are exact for the classical
/// families (n/2, n(n+alpha), ...) and feed the moment traces, which then stay
/// exact in floating point where the underlying sums are.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceTable {
    // index 0 holds the a_0 = 0 convention
    a: Vec<f64>,
    a_sq: Vec<f64>,
    b: Vec<f64>,
}

impl RecurrenceTable {
    /// Build from squared off-diagonal coefficients a_1^2..a_n^2 and
    /// diagonal coefficients b_0..b_n (one more than `a_sq`).
    pub fn from_squares(a_sq: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if b.len() != a_sq.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "need one more b than a: got {} a and {} b",
                a_sq.len(),
                b.len()
            )));
        }
        if a_sq.is_empty() {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        for (i, &v) in a_sq.iter().enumerate() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::PrecisionExhausted { index: i + 1, value: v });
            }
        }
        let mut full_sq = Vec::with_capacity(a_sq.len() + 1);
        full_sq.push(0.0);
        full_sq.extend(a_sq);
        let a = full_sq.iter().map(|v| v.sqrt()).collect();
        Ok(RecurrenceTable { a, a_sq: full_sq, b })
    }

    /// Largest index n with both a_n and b_n stored.
    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    /// a_n for 0 <= n <= n_max (a_0 = 0).
    pub fn a(&self, n: usize) -> f64 {
        self.a[n]
    }

    pub fn a_sq(&self, n: usize) -> f64 {
        self.a_sq[n]
    }

    pub fn b(&self, n: usize) -> f64 {
        self.b[n]
    }

    pub fn a_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn a_sq_slice(&self) -> &[f64] {
        &self.a_sq
    }

    pub fn b_slice(&self) -> &[f64] {
        &self.b
    }

    /// The table cut down to n_max = `n`.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.n_max() {
            return Err(Error::Range {
                requested: n,
                available: self.n_max(),
            });
        }
        Ok(RecurrenceTable {
            a: self.a[..=n].to_vec(),
            a_sq: self.a_sq[..=n].to_vec(),
            b: self.b[..=n].to_vec(),
        })
    }
}

/// Orthonormal recurrence coefficients for the classical families.
pub fn classical_recurrence(weight: &WeightSpec, n_max: usize) -> Result<RecurrenceTable> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let (a_sq, b): (Vec<f64>, Vec<f64>) = match weight.family() {
        Family::Hermite => (
            (1..=n_max).map(|n| n as f64 / 2.0).collect(),
            vec![0.0; n_max + 1],
        ),
        Family::Laguerre { alpha } => (
            (1..=n_max).map(|n| n as f64 * (n as f64 + alpha)).collect(),
            (0..=n_max).map(|n| 2.0 * n as f64 + alpha + 1.0).collect(),
        ),
        Family::Jacobi { alpha, beta } => (
            (1..=n_max).map(|n| jacobi_a_sq(alpha, beta, n)).collect(),
            (0..=n_max).map(|n| jacobi_b(alpha, beta, n)).collect(),
        ),
        other => {
            return Err(Error::NoClosedForm {
                family: other.name().to_string(),
            })
        }
    };
    RecurrenceTable::from_squares(a_sq, b)
}

fn jacobi_b(alpha: f64, beta: f64, n: usize) -> f64 {
    let s = alpha + beta;
    if n == 0 {
        return (beta - alpha) / (s + 2.0);
    }
    let m = 2.0 * n as f64 + s;
    (beta * beta - alpha * alpha) / (m * (m + 2.0))
}

fn jacobi_a_sq(alpha: f64, beta: f64, n: usize) -> f64 {
    let s = alpha + beta;
    if n == 1 {
        // the general formula is 0/0 at n = 1 when s = -1
        return 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + s) * (2.0 + s) * (3.0 + s));
    }
    let nf = n as f64;
    let m = 2.0 * nf + s;
    4.0 * nf * (nf + alpha) * (nf + beta) * (nf + s) / (m * m * (m + 1.0) * (m - 1.0))
}

/// Symmetric tridiagonal matrix with diagonal b_0..b_{n-1} and off-diagonal
/// a_1..a_{n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiMatrix {
    diag: Vec<f64>,
    offdiag: Vec<f64>,
}

impl JacobiMatrix {
    pub fn new(diag: Vec<f64>, offdiag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || offdiag.len() + 1 != diag.len() {
            return Err(Error::InvalidParameter(format!(
                "Jacobi matrix needs n >= 1 diagonal and n-1 off-diagonal entries, got {} and {}",
                diag.len(),
                offdiag.len()
            )));
        }
        if let Some(i) = offdiag.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "off-diagonal entry {} is not positive",
                i + 1
            )));
        }
        Ok(JacobiMatrix { diag, offdiag })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn offdiag(&self) -> &[f64] {
        &self.offdiag
    }

    /// Entry (i, j) of the dense matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.offdiag[i]
        } else if j + 1 == i {
            self.offdiag[j]
        } else {
            0.0
        }
    }
}

/// The leading `dim` x `dim` Jacobi matrix of a table.
pub fn jacobi_matrix(table: &RecurrenceTable, dim: usize) -> Result<JacobiMatrix> {
    if dim == 0 || dim > table.n_max() {
        return Err(Error::Range {
            requested: dim,
            available: table.n_max(),
        });
    }
    JacobiMatrix::new(table.b[..dim].to_vec(), table.a[1..dim].to_vec())
}

// ---------------------------------------------------------------------------
// Discretized Stieltjes procedure

/// Convergence tolerance of the discretization refinement.
pub const STIELTJES_TOL: f64 = 1e-13;
const GRADING_LEVELS: usize = 50;
const MAX_REFINEMENTS: usize = 6;

/// A discrete measure sum_i w_i delta(x - x_i) approximating omega(x) dx.
#[derive(Debug, Clone, Default)]
pub struct DiscreteMeasure {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn mass(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }
}

/// Closed-form coefficients where available, the discretized Stieltjes
/// procedure otherwise.
pub fn recurrence_table(weight: &WeightSpec, n_max: usize) -> Result<RecurrenceTable> {
    match classical_recurrence(weight, n_max) {
        Err(Error::NoClosedForm { .. }) => {
            stieltjes_recurrence(weight, n_max, default_quad_order(n_max))
        }
        other => other,
    }
}

/// Recurrence coefficients of an arbitrary weight by the discretized
/// Stieltjes procedure.
///
/// The support is mapped onto (-1, 1), split at t = 0, and covered by panels
/// graded geometrically toward every panel end, each carrying a
/// `quad_order`-point Gauss-Legendre rule. Panels are subdivided until the
/// coefficients change by less than 1e-13 relative between refinements, or
/// by less than the rounding floor 16 n_max eps when that is larger.
pub fn stieltjes_recurrence(
    weight: &WeightSpec,
    n_max: usize,
    quad_order: usize,
) -> Result<RecurrenceTable> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let legendre = legendre_rule(quad_order.max(2))?;
    let mut previous: Option<RecurrenceTable> = None;
    let mut last_change = f64::INFINITY;
    let tol = STIELTJES_TOL.max(16.0 * n_max as f64 * f64::EPSILON);
    for level in 0..MAX_REFINEMENTS {
        let measure = discretize(weight, &legendre, 1 << level)?;
        let table = stieltjes_discrete(&measure, n_max)?;
        if let Some(prev) = &previous {
            last_change = relative_change(prev, &table);
            if last_change <= tol {
                return Ok(table);
            }
        }
        previous = Some(table);
    }
    Err(Error::NotConverged {
        tol,
        change: last_change,
    })
}

/// Default Gauss-Legendre order per panel for `stieltjes_recurrence`.
pub fn default_quad_order(n_max: usize) -> usize {
    4 * n_max + 20
}

/// Stieltjes procedure on a discrete measure.
///
/// Works with v_n(x_i) = sqrt(w_i / mu) p_n(x_i), which stay bounded by one
/// even where p_n overflows and w_i underflows.
pub fn stieltjes_discrete(measure: &DiscreteMeasure, n_max: usize) -> Result<RecurrenceTable> {
    stieltjes_scaled(&measure.nodes, &measure.weights, n_max)
}

/// Stieltjes procedure for the measure sum_i w_i f(x_i)^2 delta(x - x_i),
/// where `factor` gives f: a Christoffel modification of a discrete measure.
pub(crate) fn stieltjes_modified<F: Fn(f64) -> f64>(
    nodes: &[f64],
    root_weights: &[f64],
    factor: F,
    n_max: usize,
) -> Result<RecurrenceTable> {
    let start: Vec<f64> = nodes.iter().zip(root_weights).map(|(&x, &r)| r * factor(x)).collect();
    stieltjes_from_vector(nodes, start, n_max)
}

fn stieltjes_scaled(nodes: &[f64], weights: &[f64], n_max: usize) -> Result<RecurrenceTable> {
    stieltjes_from_vector(nodes, weights.iter().map(|w| w.sqrt()).collect(), n_max)
}

// The measure sum_i start_i^2 delta_{x_i}; `start` need not be normalised.
fn stieltjes_from_vector(nodes: &[f64], start: Vec<f64>, n_max: usize) -> Result<RecurrenceTable> {
    let mu = compensated_sum(start.iter().map(|v| v * v));
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidParameter("discrete measure has no mass".into()));
    }
    if nodes.len() <= n_max {
        return Err(Error::InvalidParameter(format!(
            "discrete measure with {} points cannot support degree {n_max}",
            nodes.len()
        )));
    }
    let mut prev = vec![0.0; nodes.len()];
    let root_mu = mu.sqrt();
    let mut cur: Vec<f64> = start.iter().map(|v| v / root_mu).collect();
    let mut a_sq = Vec::with_capacity(n_max);
    let mut b = Vec::with_capacity(n_max + 1);
    let mut a_prev = 0.0;
    for n in 0..=n_max {
        let bn = compensated_sum(nodes.iter().zip(&cur).map(|(x, v)| x * v * v));
        b.push(bn);
        if n == n_max {
            break;
        }
        let mut next: Vec<f64> = nodes
            .iter()
            .zip(cur.iter().zip(&prev))
            .map(|(x, (v, u))| (x - bn) * v - a_prev * u)
            .collect();
        let norm_sq = compensated_sum(next.iter().map(|v| v * v));
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::PrecisionExhausted {
                index: n + 1,
                value: norm_sq,
            });
        }
        let a_next = norm_sq.sqrt();
        next.iter_mut().for_each(|v| *v /= a_next);
        a_sq.push(norm_sq);
        a_prev = a_next;
        prev = cur;
        cur = next;
    }
    RecurrenceTable::from_squares(a_sq, b)
}

fn relative_change(old: &RecurrenceTable, new: &RecurrenceTable) -> f64 {
    let mut worst: f64 = 0.0;
    for n in 0..=new.n_max() {
        let scale = new.a(n.max(1)).max(new.b(n).abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((new.b(n) - old.b(n)).abs() / scale);
        if n >= 1 {
            worst = worst.max((new.a(n) - old.a(n)).abs() / new.a(n));
        }
    }
    worst
}

/// Gauss-Legendre rule on (-1, 1) via Golub-Welsch.
pub(crate) fn legendre_rule(n: usize) -> Result<crate::quadrature::GaussRule> {
    let w = WeightSpec::jacobi(0.0, 0.0)?;
    let t = classical_recurrence(&w, n)?;
    gauss_rule(&jacobi_matrix(&t, n)?, w.mass())
}

/// Mass of a weight by the same discretization used for Stieltjes.
pub(crate) fn discretized_mass(weight: &WeightSpec) -> Result<f64> {
    let legendre = legendre_rule(40)?;
    let mut previous = f64::NAN;
    for level in 0..MAX_REFINEMENTS {
        let mass = discretize(weight, &legendre, 1 << level)?.mass();
        if (mass - previous).abs() <= STIELTJES_TOL * mass.abs() {
            return Ok(mass);
        }
        previous = mass;
    }
    Ok(previous)
}

// A point of the reference interval (-1, 1) carried with accurate distances
// to both ends.
#[derive(Clone, Copy)]
struct RefPoint {
    t: f64,
    one_minus_t: f64,
    one_plus_t: f64,
}

/// Discretize omega over its support with `subdivisions` panels per grading
/// level.
pub fn discretize(
    weight: &WeightSpec,
    legendre: &crate::quadrature::GaussRule,
    subdivisions: usize,
) -> Result<DiscreteMeasure> {
    let support = weight.support();
    let (lo, hi) = (support.lo, support.hi);
    let mut out = DiscreteMeasure::default();

    // Panels on [0, 1] in a local coordinate r, graded toward both ends. A
    // panel is given by (near_zero_end, start, end) where the coordinates are
    // distances from the end it is graded toward.
    let mut panels: Vec<(bool, f64, f64)> = Vec::new();
    let mut edge = 0.5;
    for _ in 0..GRADING_LEVELS {
        let inner = edge * 0.5;
        panels.push((true, inner, edge));
        panels.push((false, inner, edge));
        edge = inner;
    }
    panels.push((true, 0.0, edge));
    panels.push((false, 0.0, edge));

    for &(near_zero, d0, d1) in &panels {
        let width = (d1 - d0) / subdivisions as f64;
        for s in 0..subdivisions {
            let p0 = d0 + width * s as f64;
            let half = 0.5 * width;
            let mid = p0 + half;
            for (&g, &gw) in legendre.nodes.iter().zip(&legendre.weights) {
                let d = mid + half * g;
                // r = distance from 0 in the half interval, q = 1 - r
                let (r, q) = if near_zero { (d, 1.0 - d) } else { (1.0 - d, d) };
                for side in [1.0, -1.0] {
                    let pt = if side > 0.0 {
                        RefPoint {
                            t: r,
                            one_minus_t: q,
                            one_plus_t: 1.0 + r,
                        }
                    } else {
                        RefPoint {
                            t: -r,
                            one_minus_t: 1.0 + r,
                            one_plus_t: q,
                        }
                    };
                    let (x, jac) = map_to_support(pt, lo, hi);
                    if !x.is_finite() || !jac.is_finite() {
                        continue;
                    }
                    let w = gw * half * jac * weight.eval(x);
                    if w > 0.0 && w.is_finite() {
                        out.nodes.push(x);
                        out.weights.push(w);
                    } else if !w.is_finite() {
                        return Err(Error::Domain {
                            what: "weight is not finite".into(),
                            x,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

fn map_to_support(p: RefPoint, lo: f64, hi: f64) -> (f64, f64) {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let half = 0.5 * (hi - lo);
            let x = if p.one_plus_t <= 1.0 {
                lo + half * p.one_plus_t
            } else {
                hi - half * p.one_minus_t
            };
            (x, half)
        }
        (true, false) => (
            lo + p.one_plus_t / p.one_minus_t,
            2.0 / (p.one_minus_t * p.one_minus_t),
        ),
        (false, true) => (
            hi - p.one_minus_t / p.one_plus_t,
            2.0 / (p.one_plus_t * p.one_plus_t),
        ),
        (false, false) => {
            let prod = p.one_minus_t * p.one_plus_t;
            (p.t / prod, (1.0 + p.t * p.t) / (prod * prod))
        }
    }
}
