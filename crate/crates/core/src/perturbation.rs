//! Christoffel modification of the weight, omega -> p^2 omega, and the
//! invariance of the scaled moments under it.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::{finite_moments, limit_moments};
use crate::quadrature::gauss_nodes_root_weights;
use crate::recurrence::{jacobi_matrix, recurrence_table, stieltjes_modified, RecurrenceTable};
use crate::scaling::ScalingModel;
use crate::special::compensated_sum;
use crate::weights::{Family, WeightSpec};

/// Allowance for rounding in the bound check, relative to max(1, |M|).
const ROUNDING_SLACK: f64 = 1e-12;

/// A fixed polynomial p(x) = c_0 + c_1 x + ... + c_l x^l.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationSpec {
    p_coeffs: Vec<f64>,
}

impl PerturbationSpec {
    /// Coefficients in ascending order; the last one must be non-zero.
    pub fn new(p_coeffs: Vec<f64>) -> Result<Self> {
        match p_coeffs.last() {
            None => Err(Error::InvalidParameter("polynomial needs at least one coefficient".into())),
            Some(&lead) if lead == 0.0 || !lead.is_finite() => Err(Error::InvalidParameter(format!(
                "leading coefficient must be non-zero and finite, got {lead}"
            ))),
            _ if p_coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidParameter("coefficients must be finite".into()))
            }
            _ => Ok(PerturbationSpec { p_coeffs }),
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.p_coeffs
    }

    /// The degree l.
    pub fn degree(&self) -> usize {
        self.p_coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.p_coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }
}

// The Gauss rule of omega with n_max + l + 2 nodes, exact to degree
// 2 (n_max + l) + 3: enough for every inner product of the Stieltjes
// procedure on p^2 omega up to degree n_max. Returned as nodes and square
// roots of the normalised weights, which do not underflow at the outer nodes
// of the unbounded families.
fn omega_rule(weight: &WeightSpec, p: &PerturbationSpec, n_max: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nodes = n_max + p.degree() + 2;
    let table = recurrence_table(weight, nodes)?;
    gauss_nodes_root_weights(&jacobi_matrix(&table, nodes)?)
}

fn is_even_weight(weight: &WeightSpec) -> bool {
    match weight.family() {
        Family::Hermite | Family::GeneralizedHermite { .. } => true,
        Family::Jacobi { alpha, beta } => alpha == beta,
        Family::Laguerre { .. } | Family::Custom => false,
    }
}

impl PerturbationSpec {
    /// Whether p is even or odd, so that p^2 is even.
    pub fn has_parity(&self) -> bool {
        let c = &self.p_coeffs;
        c.iter().skip(1).step_by(2).all(|&v| v == 0.0) || c.iter().step_by(2).all(|&v| v == 0.0)
    }
}

/// Recurrence coefficients for the weight p^2 omega, up to index n_max.
///
/// When both omega and p^2 are even the diagonal vanishes identically and
/// is set to 0 rather than to the rounding noise of the quadrature.
pub fn perturbed_recurrence(
    weight: &WeightSpec,
    p: &PerturbationSpec,
    n_max: usize,
) -> Result<RecurrenceTable> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let (nodes, roots) = omega_rule(weight, p, n_max)?;
    let table = stieltjes_modified(&nodes, &roots, |x| p.eval(x), n_max)?;
    if is_even_weight(weight) && p.has_parity() {
        RecurrenceTable::from_squares(table.a_sq_slice()[1..].to_vec(), vec![0.0; n_max + 1])
    } else {
        Ok(table)
    }
}

/// Gram matrix of the perturbed orthonormal polynomials j, k < n under the
/// Gauss rule of omega with the factor p^2; the identity up to rounding.
pub fn perturbed_gram(weight: &WeightSpec, p: &PerturbationSpec, n: usize) -> Result<Vec<Vec<f64>>> {
    let table = perturbed_recurrence(weight, p, n)?;
    let (nodes, roots) = omega_rule(weight, p, n)?;
    // v_j(x_i) = sqrt(w_i) p(x_i) phat_j(x_i), normalised
    let mut cur: Vec<f64> = nodes.iter().zip(&roots).map(|(&x, r)| r * p.eval(x)).collect();
    let norm = compensated_sum(cur.iter().map(|v| v * v)).sqrt();
    cur.iter_mut().for_each(|v| *v /= norm);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut prev = vec![0.0; nodes.len()];
    for j in 0..n {
        vectors.push(cur.clone());
        let next: Vec<f64> = nodes
            .iter()
            .zip(cur.iter().zip(&prev))
            .map(|(x, (v, u))| ((x - table.b(j)) * v - table.a(j) * u) / table.a(j + 1))
            .collect();
        prev = cur;
        cur = next;
    }
    Ok((0..n)
        .map(|j| {
            (0..n)
                .map(|k| compensated_sum(vectors[j].iter().zip(&vectors[k]).map(|(a, b)| a * b)))
                .collect()
        })
        .collect())
}

/// Mhat_k^(N): the scaled moment of the perturbed density, scaled with the
/// c_N of the original weight.
pub fn perturbed_moment(
    weight: &WeightSpec,
    p: &PerturbationSpec,
    scaling: &ScalingModel,
    n: usize,
    k: usize,
) -> Result<f64> {
    let table = perturbed_recurrence(weight, p, n + k)?;
    Ok(finite_moments(&table, scaling, n, k)?.values[k])
}

/// Theta_N = Mhat_k^(N) - M_k^(N) against its bound C l / N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaDiagnostic {
    pub theta: f64,
    /// C = C1 + C2 = 2 * 3^k D^k / c_N^k, D the largest |a_j|, |b_j| of the
    /// original weight for j <= N + l + k.
    pub constant: f64,
    pub bound: f64,
    pub bound_ok: bool,
}

fn theta_from_parts(
    original: &RecurrenceTable,
    m_hat: f64,
    m: f64,
    scaling: &ScalingModel,
    l: usize,
    n: usize,
    k: usize,
) -> Result<ThetaDiagnostic> {
    let top = n + l + k;
    if original.n_max() < top {
        return Err(Error::Range {
            requested: top,
            available: original.n_max(),
        });
    }
    let d = (0..=top).fold(0.0f64, |acc, j| acc.max(original.a(j)).max(original.b(j).abs()));
    let constant = 2.0 * 3f64.powi(k as i32) * d.powi(k as i32) / scaling.c_pow(n, k as u32);
    let bound = constant * l as f64 / n as f64;
    let theta = m_hat - m;
    let slack = ROUNDING_SLACK * m.abs().max(1.0);
    Ok(ThetaDiagnostic {
        theta,
        constant,
        bound,
        bound_ok: theta.abs() <= bound + slack,
    })
}

pub fn theta_diagnostic(
    weight: &WeightSpec,
    p: &PerturbationSpec,
    scaling: &ScalingModel,
    n: usize,
    k: usize,
) -> Result<ThetaDiagnostic> {
    let l = p.degree();
    let original = recurrence_table(weight, n + l + k)?;
    let hat = perturbed_recurrence(weight, p, n + k)?;
    let m_hat = finite_moments(&hat, scaling, n, k)?.values[k];
    let m = finite_moments(&original, scaling, n, k)?.values[k];
    theta_from_parts(&original, m_hat, m, scaling, l, n, k)
}

/// One row of a perturbation report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub k: usize,
    #[serde(rename = "M_hat")]
    pub m_hat: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub theta: f64,
    #[serde(rename = "M_limit")]
    pub m_limit: f64,
    /// |M_hat - M_limit|
    pub gap_hat: f64,
    /// |M - M_limit|
    pub gap: f64,
    pub constant: f64,
    pub bound_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub rows: Vec<PerturbationRow>,
    /// (k, N) where a gap to the limit grew from the previous, smaller N.
    pub non_monotone: Vec<(usize, usize)>,
}

impl PerturbationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,k,M_hat,M,theta,M_limit,gap_hat,gap\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:?},{:?},{:?},{:?},{:?},{:?}\n",
                r.n, r.k, r.m_hat, r.m, r.theta, r.m_limit, r.gap_hat, r.gap
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn all_bounds_ok(&self) -> bool {
        self.rows.iter().all(|r| r.bound_ok)
    }

    /// Largest |theta| over k at a given N.
    pub fn max_theta(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .map(|r| r.theta.abs())
            .reduce(f64::max)
    }
}

/// Perturbed and unperturbed moments, Theta_N and the limit for every N in
/// `n_list` and k <= kmax. The recurrences are built once for the largest N.
pub fn perturbation_convergence_report(
    weight: &WeightSpec,
    p: &PerturbationSpec,
    scaling: &ScalingModel,
    n_list: &[usize],
    k_max: usize,
) -> Result<PerturbationReport> {
    let Some(&n_top) = n_list.iter().max() else {
        return Ok(PerturbationReport {
            rows: Vec::new(),
            non_monotone: Vec::new(),
        });
    };
    let l = p.degree();
    let original = recurrence_table(weight, n_top + l + k_max)?;
    let hat = perturbed_recurrence(weight, p, n_top + k_max)?;
    let limit = limit_moments(scaling, k_max);
    let per_n = n_list
        .par_iter()
        .map(|&n| -> Result<Vec<PerturbationRow>> {
            let mh = finite_moments(&hat, scaling, n, k_max)?;
            let mo = finite_moments(&original, scaling, n, k_max)?;
            (0..=k_max)
                .map(|k| {
                    let d = theta_from_parts(&original, mh.values[k], mo.values[k], scaling, l, n, k)?;
                    Ok(PerturbationRow {
                        n,
                        k,
                        m_hat: mh.values[k],
                        m: mo.values[k],
                        theta: d.theta,
                        m_limit: limit.values[k],
                        gap_hat: (mh.values[k] - limit.values[k]).abs(),
                        gap: (mo.values[k] - limit.values[k]).abs(),
                        constant: d.constant,
                        bound_ok: d.bound_ok,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<PerturbationRow> = per_n.into_iter().flatten().collect();

    let mut order: Vec<usize> = (0..n_list.len()).collect();
    order.sort_by_key(|&i| n_list[i]);
    let mut non_monotone = Vec::new();
    for k in 0..=k_max {
        for w in order.windows(2) {
            let a = &rows[w[0] * (k_max + 1) + k];
            let b = &rows[w[1] * (k_max + 1) + k];
            let eps = 4.0 * f64::EPSILON * a.m_limit.abs().max(1.0);
            if b.gap_hat > a.gap_hat + eps || b.gap > a.gap + eps {
                non_monotone.push((k, b.n));
            }
        }
    }
    Ok(PerturbationReport { rows, non_monotone })
}
