//! Orthonormal functions phi_j = sqrt(omega / mu0) p_j, the Christoffel-Darboux
//! kernel, and the scaled one-point density.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::{adaptive_singular_integrate_rel, gauss_nodes_root_weights, SingularEnds};
use crate::recurrence::{jacobi_matrix, RecurrenceTable};
use crate::scaling::ScalingModel;
use crate::special::compensated_sum;
use crate::weights::WeightSpec;

const RESCALE_EXP: i32 = 500;
const DEFAULT_GRID_POINTS: usize = 512;
const GRID_MARGIN: f64 = 0.1;
const ZERO_EXCLUSION: f64 = 1e-3;
const CELL_TOL: f64 = 1e-10;

/// A weight together with its recurrence table.
#[derive(Clone)]
pub struct OrthonormalSystem {
    weight: WeightSpec,
    table: RecurrenceTable,
}

impl OrthonormalSystem {
    pub fn new(weight: WeightSpec, table: RecurrenceTable) -> Self {
        OrthonormalSystem { weight, table }
    }

    pub fn weight(&self) -> &WeightSpec {
        &self.weight
    }

    pub fn table(&self) -> &RecurrenceTable {
        &self.table
    }

    /// phi_0(x), ..., phi_{n-1}(x).
    ///
    /// The recurrence runs on phi directly. When phi_0 is outside the normal
    /// range, or the iterates leave it, values are carried as mantissa and
    /// log-scale and recombined at the end; entries below the underflow
    /// threshold come back as 0. Outside the support every phi_j is 0.
    pub fn phi(&self, x: f64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if n > self.table.n_max() {
            return Err(Error::Range {
                requested: n,
                available: self.table.n_max(),
            });
        }
        if !x.is_finite() {
            return Err(Error::Domain {
                what: "non-finite argument".into(),
                x,
            });
        }
        let log_w = self.weight.log_eval(x);
        if log_w.is_nan() {
            return Err(Error::Domain {
                what: "negative weight".into(),
                x,
            });
        }
        if log_w == f64::INFINITY {
            return Err(Error::Domain {
                what: "weight is unbounded".into(),
                x,
            });
        }
        let mut out = vec![0.0; n];
        if log_w == f64::NEG_INFINITY {
            return Ok(out);
        }
        let log_phi0 = 0.5 * (log_w - self.weight.mass().ln());
        let step = 2f64.powi(RESCALE_EXP);
        let log_step = f64::from(RESCALE_EXP) * std::f64::consts::LN_2;

        let (mut log_scale, mut cur) = if log_phi0.abs() < 600.0 {
            (0.0, log_phi0.exp())
        } else {
            (log_phi0, 1.0)
        };
        let mut prev = 0.0;
        out[0] = recombine(cur, log_scale, x)?;
        for j in 0..n - 1 {
            let next = ((x - self.table.b(j)) * cur - self.table.a(j) * prev) / self.table.a(j + 1);
            prev = cur;
            cur = next;
            if cur.abs() > step {
                cur /= step;
                prev /= step;
                log_scale += log_step;
            } else if cur.abs() < 1.0 / step && prev.abs() < 1.0 / step && cur != 0.0 {
                cur *= step;
                prev *= step;
                log_scale -= log_step;
            }
            out[j + 1] = recombine(cur, log_scale, x)?;
        }
        Ok(out)
    }

    /// K_N(x, y) = sum_{j<N} phi_j(x) phi_j(y).
    pub fn kernel(&self, x: f64, y: f64, n: usize) -> Result<f64> {
        let px = self.phi(x, n)?;
        if x == y {
            return Ok(compensated_sum(px.iter().map(|v| v * v)));
        }
        let py = self.phi(y, n)?;
        Ok(compensated_sum(px.iter().zip(&py).map(|(a, b)| a * b)))
    }

    /// R_1(x) = K_N(x, x).
    pub fn level_density(&self, x: f64, n: usize) -> Result<f64> {
        self.kernel(x, x, n)
    }

    /// sigma_N(x) = (c_N / N) K_N(c_N x, c_N x).
    pub fn sigma(&self, x: f64, n: usize, scaling: &ScalingModel) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        let c = scaling.c(n);
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!("c_N must be positive, got {c}")));
        }
        Ok(c / n as f64 * self.level_density(c * x, n)?)
    }

    /// det[K_N(x_j, x_k)]: the n-point correlation function.
    pub fn correlation(&self, points: &[f64], n: usize) -> Result<f64> {
        if points.len() > n {
            return Err(Error::InvalidParameter(format!(
                "{} points exceed N = {n}",
                points.len()
            )));
        }
        let phis = points
            .iter()
            .map(|&x| self.phi(x, n))
            .collect::<Result<Vec<_>>>()?;
        let m = points.len();
        let mut matrix = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v = compensated_sum(phis[i].iter().zip(&phis[j]).map(|(a, b)| a * b));
                matrix[i][j] = v;
                matrix[j][i] = v;
            }
        }
        Ok(lu_determinant(matrix))
    }

    /// Gram matrix G_jk = sum_i w_i p_j(x_i) p_k(x_i) / mu0, j, k < n, under
    /// the `order`-point Gauss rule of the weight. Equal to the identity when
    /// order >= n.
    pub fn gauss_gram(&self, n: usize, order: usize) -> Result<Vec<Vec<f64>>> {
        let vectors = self.gauss_vectors(n, order)?;
        let mut gram = vec![vec![0.0; n]; n];
        for j in 0..n {
            for k in j..n {
                let v = compensated_sum(vectors[j].iter().zip(&vectors[k]).map(|(a, b)| a * b));
                gram[j][k] = v;
                gram[k][j] = v;
            }
        }
        Ok(gram)
    }

    /// Integral of sigma_N under the `order`-point Gauss rule of the weight;
    /// the change of variables y = c_N x removes the scaling, leaving
    /// (1/N) sum_j integral phi_j^2.
    pub fn gauss_sigma_mass(&self, n: usize, order: usize) -> Result<f64> {
        let vectors = self.gauss_vectors(n, order)?;
        let total = compensated_sum(vectors.iter().flat_map(|v| v.iter().map(|x| x * x)));
        Ok(total / n as f64)
    }

    // v_j(x_i) = sqrt(w_i / mu0) p_j(x_i) at the nodes of the Gauss rule.
    fn gauss_vectors(&self, n: usize, order: usize) -> Result<Vec<Vec<f64>>> {
        if n == 0 || order < n {
            return Err(Error::InvalidParameter(format!(
                "Gauss order {order} must be at least N = {n} >= 1"
            )));
        }
        // square roots of the normalised weights do not underflow where the
        // weights of the unbounded families do
        let (nodes, mut cur) = gauss_nodes_root_weights(&jacobi_matrix(&self.table, order)?)?;
        let mut vectors = Vec::with_capacity(n);
        let mut prev = vec![0.0; nodes.len()];
        for j in 0..n {
            vectors.push(cur.clone());
            if j + 1 == n {
                break;
            }
            let next: Vec<f64> = nodes
                .iter()
                .zip(cur.iter().zip(&prev))
                .map(|(x, (v, u))| ((x - self.table.b(j)) * v - self.table.a(j) * u) / self.table.a(j + 1))
                .collect();
            prev = cur;
            cur = next;
        }
        Ok(vectors)
    }
}

fn recombine(mantissa: f64, log_scale: f64, x: f64) -> Result<f64> {
    if log_scale == 0.0 || mantissa == 0.0 {
        return Ok(mantissa);
    }
    let v = mantissa.signum() * (mantissa.abs().ln() + log_scale).exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain {
            what: "orthonormal function overflows after rescaling".into(),
            x,
        })
    }
}

fn lu_determinant(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
        }
    }
    det
}

/// sigma_N sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTable {
    #[serde(rename = "N")]
    pub n: usize,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    #[serde(skip)]
    pub scaling: ScalingModel,
    /// Pairs (i, integral of sigma_N over [x_{i-1}, x_i]) for the cells that
    /// straddle a point where the limit density is singular.
    #[serde(skip)]
    pub exact_cells: Vec<(usize, f64)>,
}

impl DensityTable {
    /// Trapezoid rule over the grid.
    ///
    /// Cells listed in `exact_cells` contribute their stored integral. The
    /// cell straddling 0 is otherwise special when the density of large N
    /// approaches a singularity there (lambda >= 1, or |b| = 1): each side is
    /// integrated as c |x|^p through its nearest sample, with p the exponent
    /// of the limit density at a hard edge (|b| >= 1) and fitted through the
    /// two nearest samples elsewhere.
    pub fn trapezoid_mass(&self) -> f64 {
        let g = &self.grid;
        let v = &self.values;
        let lambda = self.scaling.lambda;
        let b = self.scaling.b_limit.abs();
        let singular_at_zero = singular_at_zero(&self.scaling);
        let edge_exponent = if b == 1.0 {
            Some((1.0 / lambda - 1.0).min(-0.5))
        } else if b > 1.0 {
            Some(1.0 / lambda - 1.0)
        } else {
            None
        };
        let mut terms = Vec::with_capacity(g.len());
        for i in 1..g.len() {
            let (x0, x1) = (g[i - 1], g[i]);
            if let Some(&(_, mass)) = self.exact_cells.iter().find(|c| c.0 == i) {
                terms.push(mass);
            } else if singular_at_zero && x0 < 0.0 && x1 > 0.0 {
                terms.push(power_tail(g, v, i - 1, -1, edge_exponent) + power_tail(g, v, i, 1, edge_exponent));
            } else {
                terms.push(0.5 * (x1 - x0) * (v[i - 1] + v[i]));
            }
        }
        compensated_sum(terms)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,sigma\n");
        for (x, s) in self.grid.iter().zip(&self.values) {
            out.push_str(&format!("{x:?},{s:?}\n"));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("density table serializes")
    }
}

// Integral over [0, |x_i|] of c |x|^p through sample i. Without a given
// exponent p is fitted through samples i and i+dir, which lie on the same
// side of 0; a degenerate fit falls back to a rectangle.
fn power_tail(g: &[f64], v: &[f64], i: usize, dir: isize, exponent: Option<f64>) -> f64 {
    let x = g[i].abs();
    let rect = x * v[i];
    if let Some(p) = exponent {
        return if p > -1.0 { rect / (p + 1.0) } else { rect };
    }
    let j = i as isize + dir;
    if j < 0 || j as usize >= g.len() {
        return rect;
    }
    let (xo, vo) = (g[j as usize].abs(), v[j as usize]);
    if !(v[i] > 0.0 && vo > 0.0) || xo == x {
        return rect;
    }
    let p = (vo / v[i]).ln() / (xo / x).ln();
    if !(p > -1.0) || !p.is_finite() {
        return rect;
    }
    x * v[i] / (p + 1.0)
}

/// Uniform grid of `points` samples x_i = lo + i (hi - lo) / points over
/// [B1 - 0.1, B2 + 0.1], without points within 1e-3 of 0 when lambda >= 1.
pub fn density_grid(scaling: &ScalingModel, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidParameter(format!("grid needs at least 2 points, got {points}")));
    }
    let (b1, b2) = scaling.limit_support();
    let lo = b1 - GRID_MARGIN;
    let hi = b2 + GRID_MARGIN;
    let h = (hi - lo) / points as f64;
    Ok((0..points)
        .map(|i| lo + i as f64 * h)
        .filter(|x| scaling.lambda < 1.0 || x.abs() >= ZERO_EXCLUSION)
        .collect())
}

pub fn default_grid(scaling: &ScalingModel) -> Result<Vec<f64>> {
    density_grid(scaling, DEFAULT_GRID_POINTS)
}

/// sigma_N on `grid`, evaluated point by point in parallel.
pub fn density_table(
    system: &OrthonormalSystem,
    n: usize,
    scaling: &ScalingModel,
    grid: Vec<f64>,
) -> Result<DensityTable> {
    let values = grid
        .par_iter()
        .map(|&x| system.sigma(x, n, scaling))
        .collect::<Result<Vec<f64>>>()?;
    // sigma_N is smooth on each side of a singular point but may jump there,
    // or blow up like an inverse square root when the weight does
    let f = |x: f64| system.sigma(x, n, scaling).unwrap_or(f64::NAN);
    let mut exact_cells = Vec::new();
    for c in singular_points(scaling) {
        if let Some(i) = grid.windows(2).position(|w| w[0] < c && w[1] > c) {
            let left = adaptive_singular_integrate_rel(f, grid[i], c, SingularEnds::HI, CELL_TOL, CELL_TOL)?;
            let right = adaptive_singular_integrate_rel(f, c, grid[i + 1], SingularEnds::LO, CELL_TOL, CELL_TOL)?;
            exact_cells.push((i + 1, left + right));
        }
    }
    Ok(DensityTable {
        n,
        grid,
        values,
        scaling: *scaling,
        exact_cells,
    })
}

fn singular_at_zero(scaling: &ScalingModel) -> bool {
    scaling.lambda >= 1.0 || scaling.b_limit.abs() == 1.0
}

// The arcsine edges b +- 1 when lambda = 0, and 0 when the limit density
// blows up there.
fn singular_points(scaling: &ScalingModel) -> Vec<f64> {
    let mut points = Vec::new();
    if scaling.lambda == 0.0 {
        points.extend([scaling.b_limit - 1.0, scaling.b_limit + 1.0]);
    }
    if singular_at_zero(scaling) && !points.contains(&0.0) {
        points.push(0.0);
    }
    points
}
