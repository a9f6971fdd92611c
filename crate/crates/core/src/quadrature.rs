//! Gauss rules from Jacobi matrices, and adaptive integration with
//! inverse-square-root endpoint singularities.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::recurrence::JacobiMatrix;
use crate::special::compensated_sum;

const MAX_SWEEPS: usize = 50;
const DEFLATION_TOL: f64 = 1e-15;

/// Spectrum of a symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagEigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// First component of each unit eigenvector, aligned with `values`.
    pub first_components: Vec<f64>,
}

/// Eigenvalues and first eigenvector components by implicit-shift QL.
pub fn tridiag_eigen(jacobi: &JacobiMatrix) -> Result<TridiagEigen> {
    let (values, vectors) = implicit_ql(jacobi, 1)?;
    Ok(TridiagEigen {
        values,
        first_components: vectors.into_iter().next().unwrap_or_default(),
    })
}

/// Eigenvalues and the full eigenvector matrix; `vectors[row][col]` with one
/// eigenvector per column, columns aligned with the ascending eigenvalues.
pub fn tridiag_eigen_full(jacobi: &JacobiMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    implicit_ql(jacobi, jacobi.dim())
}

// QL with implicit Wilkinson-type shifts (tqli). Only the first `rows` rows
// of the accumulated rotation matrix are tracked: 1 for Golub-Welsch, n for
// full vectors.
fn implicit_ql(jacobi: &JacobiMatrix, rows: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = jacobi.dim();
    if n == 0 {
        return Err(Error::InvalidParameter("empty Jacobi matrix".into()));
    }
    let mut d = jacobi.diag().to_vec();
    let mut e = jacobi.offdiag().to_vec();
    e.push(0.0);
    let mut z: Vec<Vec<f64>> = (0..rows)
        .map(|r| {
            let mut row = vec![0.0; n];
            row[r] = 1.0;
            row
        })
        .collect();

    for l in 0..n {
        let mut sweeps = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= DEFLATION_TOL * dd || e[m].abs() + dd == dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            sweeps += 1;
            if sweeps > MAX_SWEEPS {
                return Err(Error::EigenFailure { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for row in z.iter_mut() {
                    let f = row[i + 1];
                    row[i + 1] = s * row[i] + c * f;
                    row[i] = c * row[i] - s * f;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = z
        .iter()
        .map(|row| order.iter().map(|&i| row[i]).collect())
        .collect();
    Ok((values, vectors))
}

/// An n-point Gauss rule for a weight of total mass `total_mass`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub total_mass: f64,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn degree_exact(&self) -> usize {
        2 * self.nodes.len() - 1
    }
}

/// Golub-Welsch: nodes are the eigenvalues of the Jacobi matrix and weights
/// are mu0 times the squared first components of the unit eigenvectors.
///
/// The eigenvalues come from QL and receive one guarded Newton correction on
/// the characteristic polynomial. The squared first component of the
/// eigenvector at node x equals 1 / sum_j q_j(x)^2 (q_j orthonormal for the
/// normalised measure), which is what is evaluated here; this keeps full
/// relative accuracy in the tiny weights of the outer nodes.
pub fn gauss_rule(jacobi: &JacobiMatrix, mu0: f64) -> Result<GaussRule> {
    if !(mu0 > 0.0) {
        return Err(Error::InvalidParameter(format!("mass must be positive, got {mu0}")));
    }
    let (nodes, log_weights) = nodes_and_log_weights(jacobi)?;
    Ok(GaussRule {
        nodes,
        weights: log_weights.iter().map(|lw| mu0 * lw.exp()).collect(),
        total_mass: mu0,
    })
}

/// Nodes of the Gauss rule with the square roots of the normalised weights
/// w_i / mu0, i.e. the first components of the unit eigenvectors. These stay
/// representable where the weights themselves underflow.
pub fn gauss_nodes_root_weights(jacobi: &JacobiMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let (nodes, log_weights) = nodes_and_log_weights(jacobi)?;
    Ok((nodes, log_weights.iter().map(|lw| (0.5 * lw).exp()).collect()))
}

fn nodes_and_log_weights(jacobi: &JacobiMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let eig = tridiag_eigen(jacobi)?;
    let diag = jacobi.diag();
    let off = jacobi.offdiag();
    let mut nodes: Vec<f64> = eig
        .values
        .iter()
        .map(|&x| newton_polish(diag, off, x))
        .collect();
    // the correction can never reorder well-separated roots, but keep the
    // ordering invariant explicit
    nodes.sort_by(f64::total_cmp);
    let mut log_weights: Vec<f64> = nodes.iter().map(|&x| log_christoffel(diag, off, x)).collect();
    if diag.iter().all(|&b| b == 0.0) {
        // even weight: the rule is symmetric about 0 in exact arithmetic
        let n = nodes.len();
        for i in 0..n / 2 {
            let j = n - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let (li, lj) = (log_weights[i], log_weights[j]);
            let hi = li.max(lj);
            let lw = hi + (0.5 * ((li - hi).exp() + (lj - hi).exp())).ln();
            nodes[i] = -x;
            nodes[j] = x;
            log_weights[i] = lw;
            log_weights[j] = lw;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
    }
    Ok((nodes, log_weights))
}

const RESCALE: f64 = 1e150;

fn newton_polish(diag: &[f64], off: &[f64], x: f64) -> f64 {
    // monic characteristic polynomial and its derivative, jointly rescaled
    let n = diag.len();
    let (mut p_prev, mut p) = (0.0, 1.0);
    let (mut dp_prev, mut dp) = (0.0, 0.0);
    for j in 0..n {
        let a2 = if j == 0 { 0.0 } else { off[j - 1] * off[j - 1] };
        let p_next = (x - diag[j]) * p - a2 * p_prev;
        let dp_next = p + (x - diag[j]) * dp - a2 * dp_prev;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
        let scale = p.abs().max(dp.abs());
        if scale > RESCALE {
            p /= scale;
            p_prev /= scale;
            dp /= scale;
            dp_prev /= scale;
        }
    }
    if dp == 0.0 || !dp.is_finite() || !p.is_finite() {
        return x;
    }
    let step = p / dp;
    if step.abs() <= 1e-8 * (1.0 + x.abs()) {
        x - step
    } else {
        x
    }
}

// -ln sum_{j<n} q_j(x)^2 with q_0 = 1, evaluated with overflow rescaling.
fn log_christoffel(diag: &[f64], off: &[f64], x: f64) -> f64 {
    let n = diag.len();
    let (mut q_prev, mut q) = (0.0, 1.0);
    let mut sum = 1.0;
    let mut log_scale = 0.0;
    for j in 0..n.saturating_sub(1) {
        let a_here = if j == 0 { 0.0 } else { off[j - 1] };
        let q_next = ((x - diag[j]) * q - a_here * q_prev) / off[j];
        q_prev = q;
        q = q_next;
        sum += q * q;
        if q.abs() > RESCALE {
            q /= RESCALE;
            q_prev /= RESCALE;
            sum /= RESCALE * RESCALE;
            log_scale += 2.0 * RESCALE.ln();
        }
    }
    -(sum.ln() + log_scale)
}

/// Sum of weights times f at the nodes.
///
/// Terms are accumulated from the outside in, alternating ends, so that odd
/// integrands cancel exactly on symmetric rules.
pub fn integrate<F: Fn(f64) -> f64>(f: F, rule: &GaussRule) -> Result<f64> {
    let n = rule.len();
    let mut terms = Vec::with_capacity(n);
    let order = (0..n).map(|i| if i % 2 == 0 { i / 2 } else { n - 1 - i / 2 });
    for (x, w) in order.map(|i| (rule.nodes[i], rule.weights[i])) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::Domain {
                what: format!("integrand value {v}"),
                x,
            });
        }
        terms.push(w * v);
    }
    Ok(compensated_sum(terms))
}

/// Which ends of an integration interval carry an inverse square-root
/// singularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SingularEnds {
    pub lo: bool,
    pub hi: bool,
}

impl SingularEnds {
    pub const NONE: Self = SingularEnds { lo: false, hi: false };
    pub const LO: Self = SingularEnds { lo: true, hi: false };
    pub const HI: Self = SingularEnds { lo: false, hi: true };
    pub const BOTH: Self = SingularEnds { lo: true, hi: true };
}

pub const DEFAULT_TOL: f64 = 1e-10;
pub const PANEL_CAP: usize = 1 << 16;

/// Integral of f over [lo, hi] to absolute tolerance `tol`.
///
/// Flagged ends are desingularised by substitution: x = c + h sin(theta) when
/// both ends are flagged, x = lo + L u^2 (or hi - L u^2) for a single end.
/// The smooth transformed integrand is handled by globally adaptive 15-point
/// Gauss-Kronrod panels.
pub fn adaptive_singular_integrate<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    ends: SingularEnds,
    tol: f64,
) -> Result<f64> {
    adaptive_singular_integrate_rel(f, lo, hi, ends, tol, 0.0)
}

/// As `adaptive_singular_integrate`, accepting the result once the error
/// bound is below `tol` or below `rel_tol` times the magnitude of the result.
pub fn adaptive_singular_integrate_rel<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    ends: SingularEnds,
    tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "integration bounds must be finite, got [{lo}, {hi}]"
        )));
    }
    if lo == hi {
        return Ok(0.0);
    }
    if lo > hi {
        let flipped = SingularEnds { lo: ends.hi, hi: ends.lo };
        return adaptive_singular_integrate_rel(f, hi, lo, flipped, tol, rel_tol).map(|v| -v);
    }
    let len = hi - lo;
    match (ends.lo, ends.hi) {
        (false, false) => adaptive_gk(&f, lo, hi, tol, rel_tol),
        (true, true) => {
            let c = 0.5 * (lo + hi);
            let h = 0.5 * len;
            let g = |theta: f64| {
                let (s, co) = theta.sin_cos();
                // keep the mapped point strictly inside
                let x = (c + h * s).clamp(lo, hi);
                f(x) * h * co
            };
            adaptive_gk(&g, -std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2, tol, rel_tol)
        }
        (true, false) => {
            let g = |u: f64| f(lo + len * u * u) * 2.0 * len * u;
            adaptive_gk(&g, 0.0, 1.0, tol, rel_tol)
        }
        (false, true) => {
            let g = |u: f64| f(hi - len * u * u) * 2.0 * len * u;
            adaptive_gk(&g, 0.0, 1.0, tol, rel_tol)
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let mut error = ((kronrod - gauss) * h).abs();
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Panel { a, b, value, error }
}

fn adaptive_gk<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, rel_tol: f64) -> Result<f64> {
    let first = gk15(f, a, b);
    let mut total_value = first.value;
    let mut total_error = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(first);
    let mut frozen_value = 0.0;
    let mut frozen_error = 0.0;
    let mut panels = 1usize;

    while total_error > tol.max(rel_tol * total_value.abs()) {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if panels >= PANEL_CAP || !(mid > worst.a && mid < worst.b) {
            // cannot split further; keep its contribution as is
            frozen_value += worst.value;
            frozen_error += worst.error;
            if panels >= PANEL_CAP {
                break;
            }
            continue;
        }
        let left = gk15(f, worst.a, mid);
        let right = gk15(f, mid, worst.b);
        total_value += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        panels += 1;
    }
    // re-sum to shed the drift of the running totals
    let value: f64 = heap.iter().map(|p| p.value).sum::<f64>() + frozen_value;
    let error: f64 = heap.iter().map(|p| p.error).sum::<f64>() + frozen_error;
    if !(error <= tol.max(rel_tol * value.abs())) || !value.is_finite() {
        return Err(Error::Accuracy {
            tol,
            estimate: if value.is_finite() { value } else { total_value },
            error,
        });
    }
    Ok(value)
}
