//! Scaled moments of the finite-N density from traces of Jacobi-matrix
//! powers, moments of the limit density, and moment-problem validators.

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::recurrence::RecurrenceTable;
use crate::scaling::ScalingModel;
use crate::special::{binomial, compensated_sum};

const HANKEL_PIVOT_TOL: f64 = 1e-12;
const EXACT_DET_MAX_N: usize = 6;
const MAX_LAMBDA_DENOMINATOR: i64 = 64;

/// Where a moment sequence comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentKind {
    FiniteN(usize),
    Limit,
    Base,
}

/// Moments m_0, ..., m_kmax.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentVector {
    pub kind: MomentKind,
    pub values: Vec<f64>,
    pub scaling: Option<ScalingModel>,
}

impl MomentVector {
    /// Raw moments of an arbitrary measure.
    pub fn base(values: Vec<f64>) -> Self {
        MomentVector {
            kind: MomentKind::Base,
            values,
            scaling: None,
        }
    }

    pub fn k_max(&self) -> Option<usize> {
        self.values.len().checked_sub(1)
    }
}

/// M_k^(N) = (1 / (N c_N^k)) sum_{j<N} (J^k)_jj.
pub fn finite_moment(table: &RecurrenceTable, scaling: &ScalingModel, n: usize, k: usize) -> Result<f64> {
    Ok(finite_moments(table, scaling, n, k)?.values[k])
}

/// M_0^(N), ..., M_kmax^(N) in one pass.
///
/// (J^k)_jj is read off the similar matrix T with T_{j,j+1} = a_{j+1}^2,
/// T_{j+1,j} = 1, whose entries are the exactly stored squares; repeated
/// products T v starting from e_j give every power at once. Only a window of
/// half-width kmax around j can contribute to a closed walk, so each product
/// touches at most 2 kmax + 1 entries.
pub fn finite_moments(
    table: &RecurrenceTable,
    scaling: &ScalingModel,
    n: usize,
    k_max: usize,
) -> Result<MomentVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    if table.n_max() < n + k_max {
        return Err(Error::Range {
            requested: n + k_max,
            available: table.n_max(),
        });
    }
    let per_j: Vec<Vec<f64>> = (0..n).map(|j| diagonal_powers(table, j, k_max)).collect();
    let values = (0..=k_max)
        .map(|k| {
            let trace = compensated_sum(per_j.iter().map(|d| d[k]));
            trace / (n as f64 * scaling.c_pow(n, k as u32))
        })
        .collect();
    Ok(MomentVector {
        kind: MomentKind::FiniteN(n),
        values,
        scaling: Some(*scaling),
    })
}

// (T^s)_jj for s = 0..=k_max.
fn diagonal_powers(table: &RecurrenceTable, j: usize, k_max: usize) -> Vec<f64> {
    let lo = j.saturating_sub(k_max);
    let hi = j + k_max;
    let width = hi - lo + 1;
    let a_sq = table.a_sq_slice();
    let b = table.b_slice();
    let mut v = vec![0.0; width];
    v[j - lo] = 1.0;
    let mut next = vec![0.0; width];
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(1.0);
    for _ in 0..k_max {
        for i in 0..width {
            let g = lo + i;
            let mut s = b[g] * v[i];
            if i + 1 < width {
                s += a_sq[g + 1] * v[i + 1];
            }
            if i > 0 {
                s += v[i - 1];
            }
            next[i] = s;
        }
        std::mem::swap(&mut v, &mut next);
        out.push(v[j - lo]);
    }
    out
}

/// M_k = (1/(1 + lambda k)) sum_j C(k, j) C(k - j, j) 4^{-j} b^{k - 2j}.
pub fn limit_moment(scaling: &ScalingModel, k: usize) -> f64 {
    let k32 = k as u32;
    let b = scaling.b_limit;
    let sum = compensated_sum((0..=k32 / 2).map(|j| {
        binomial(k32, j) * binomial(k32 - j, j) * 0.25f64.powi(j as i32) * b.powi((k32 - 2 * j) as i32)
    }));
    sum / (1.0 + scaling.lambda * k as f64)
}

/// The same moment as the constant term of (z/2 + b + 1/(2z))^k, expanded by
/// exact convolution of the coefficient sequence.
pub fn laurent_moment(scaling: &ScalingModel, k: usize) -> f64 {
    let b = scaling.b_limit;
    // coefficients of z^{-k}..z^{k}
    let mut coeffs = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; coeffs.len() + 2];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += 0.5 * c;
            next[i + 1] += b * c;
            next[i + 2] += 0.5 * c;
        }
        coeffs = next;
    }
    coeffs[k] / (1.0 + scaling.lambda * k as f64)
}

/// M_0, ..., M_kmax of the limit density.
pub fn limit_moments(scaling: &ScalingModel, k_max: usize) -> MomentVector {
    MomentVector {
        kind: MomentKind::Limit,
        values: (0..=k_max).map(|k| limit_moment(scaling, k)).collect(),
        scaling: Some(*scaling),
    }
}

/// Whether the Hankel matrix [m_{j+k}]_{j,k<=n} is positive definite, judged
/// by Cholesky pivots above 1e-12 times the largest entry.
pub fn hankel_positive(m: &MomentVector, n: usize) -> bool {
    if m.values.len() < 2 * n + 1 {
        return false;
    }
    let size = n + 1;
    let h: Vec<Vec<f64>> = (0..size)
        .map(|j| (0..size).map(|k| m.values[j + k]).collect())
        .collect();
    let max_entry = h.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !(max_entry > 0.0) || !max_entry.is_finite() {
        return false;
    }
    let tol = HANKEL_PIVOT_TOL * max_entry;
    let mut l = vec![vec![0.0; size]; size];
    for j in 0..size {
        let pivot = h[j][j] - compensated_sum((0..j).map(|p| l[j][p] * l[j][p]));
        if !(pivot > tol) {
            return false;
        }
        l[j][j] = pivot.sqrt();
        for i in j + 1..size {
            let s = h[i][j] - compensated_sum((0..j).map(|p| l[i][p] * l[j][p]));
            l[i][j] = s / l[j][j];
        }
    }
    true
}

/// det[1 / (1 + lambda (j + k))]_{j,k=0..n}.
///
/// For n <= 6 and lambda = p/q with q <= 64 the determinant is computed in
/// exact rational arithmetic; otherwise by Cholesky, the matrix being a
/// positive definite moment matrix.
pub fn lambda_det(lambda: f64, n: usize) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if n <= EXACT_DET_MAX_N {
        if let Some((p, q)) = small_rational(lambda) {
            return Ok(exact_lambda_det(p, q, n));
        }
    }
    Ok(float_lambda_det(lambda, n))
}

fn small_rational(x: f64) -> Option<(i64, i64)> {
    (1..=MAX_LAMBDA_DENOMINATOR).find_map(|q| {
        let p = (x * q as f64).round();
        ((p / q as f64 - x).abs() <= 4.0 * f64::EPSILON * x && p >= 1.0).then_some((p as i64, q))
    })
}

fn exact_lambda_det(p: i64, q: i64, n: usize) -> f64 {
    let size = n + 1;
    // 1 / (1 + (p/q) s) = q / (q + p s)
    let mut m: Vec<Vec<BigRational>> = (0..size)
        .map(|j| {
            (0..size)
                .map(|k| {
                    BigRational::new(BigInt::from(q), BigInt::from(q + p * (j + k) as i64))
                })
                .collect()
        })
        .collect();
    let mut det = BigRational::one();
    for col in 0..size {
        let Some(pivot) = (col..size).find(|&r| !m[r][col].is_zero()) else {
            return 0.0;
        };
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        let head = m[col][col].clone();
        det *= &head;
        for row in col + 1..size {
            let factor = &m[row][col] / &head;
            for k in col..size {
                let delta = &factor * &m[col][k];
                m[row][k] -= delta;
            }
        }
    }
    let sign = if det.is_negative() { -1.0 } else { 1.0 };
    sign * det.abs().to_f64().unwrap_or(f64::NAN)
}

fn float_lambda_det(lambda: f64, n: usize) -> f64 {
    let size = n + 1;
    let h: Vec<Vec<f64>> = (0..size)
        .map(|j| (0..size).map(|k| 1.0 / (1.0 + lambda * (j + k) as f64)).collect())
        .collect();
    let mut l = vec![vec![0.0; size]; size];
    let mut log_det = 0.0;
    for j in 0..size {
        let pivot = h[j][j] - compensated_sum((0..j).map(|p| l[j][p] * l[j][p]));
        if !(pivot > 0.0) {
            return 0.0;
        }
        log_det += pivot.ln();
        l[j][j] = pivot.sqrt();
        for i in j + 1..size {
            let s = h[i][j] - compensated_sum((0..j).map(|p| l[i][p] * l[j][p]));
            l[i][j] = s / l[j][j];
        }
    }
    log_det.exp()
}

/// sum_{k=1}^{K} m_{2k}^{-1/(2k)}.
pub fn carleman_partial_sum(m: &MomentVector, k_terms: usize) -> Result<f64> {
    if m.values.len() < 2 * k_terms + 1 {
        return Err(Error::Range {
            requested: 2 * k_terms,
            available: m.values.len().saturating_sub(1),
        });
    }
    let mut terms = Vec::with_capacity(k_terms);
    for k in 1..=k_terms {
        let v = m.values[2 * k];
        if !(v > 0.0) {
            return Err(Error::Domain {
                what: format!("even moment m_{} = {v} is not positive", 2 * k),
                x: v,
            });
        }
        terms.push(v.powf(-1.0 / (2 * k) as f64));
    }
    Ok(compensated_sum(terms))
}

/// One entry of a convergence report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    pub finite: f64,
    pub limit: f64,
    pub abs_error: f64,
}

/// |M_k^(N) - M_k| over a list of N and k = 0..kmax.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub rows: Vec<ConvergenceRow>,
    /// (k, N) pairs where the error at N exceeds the error at the previous,
    /// smaller N of the list.
    pub non_monotone: Vec<(usize, usize)>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,k,finite,limit,abs_error\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?}\n",
                r.n, r.k, r.finite, r.limit, r.abs_error
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// Largest error at a given N over all k.
    pub fn max_error(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.abs_error)
            .reduce(f64::max)
    }
}

/// Finite-N against limit moments for every N in `n_list` (rows in list
/// order, k ascending). The N are processed in parallel.
pub fn moment_convergence_report(
    table: &RecurrenceTable,
    scaling: &ScalingModel,
    n_list: &[usize],
    k_max: usize,
) -> Result<ConvergenceReport> {
    let limit = limit_moments(scaling, k_max);
    let finite = n_list
        .par_iter()
        .map(|&n| finite_moments(table, scaling, n, k_max))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(n_list.len() * (k_max + 1));
    for (&n, mv) in n_list.iter().zip(&finite) {
        for k in 0..=k_max {
            let (f, l) = (mv.values[k], limit.values[k]);
            rows.push(ConvergenceRow {
                n,
                k,
                finite: f,
                limit: l,
                abs_error: (f - l).abs(),
            });
        }
    }
    let mut order: Vec<usize> = (0..n_list.len()).collect();
    order.sort_by_key(|&i| n_list[i]);
    let mut non_monotone = Vec::new();
    for k in 0..=k_max {
        for w in order.windows(2) {
            let prev = rows[w[0] * (k_max + 1) + k].abs_error;
            let cur = rows[w[1] * (k_max + 1) + k].abs_error;
            if cur > prev + 4.0 * f64::EPSILON * limit.values[k].abs().max(1.0) {
                non_monotone.push((k, n_list[w[1]]));
            }
        }
    }
    Ok(ConvergenceReport { rows, non_monotone })
}
