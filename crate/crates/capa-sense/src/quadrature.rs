//! Gauss–Legendre quadrature and tensor-product 2D integration over
//! rectangular apertures.
//!
//! An order-`n` rule integrates polynomials up to degree `2n−1` exactly on
//! `[-1, 1]`. Aperture integrals map each axis through the affine change of
//! interval `x = c_x x' + b_x`, so one precomputed grid serves every
//! integrand on that aperture.
//!
//! Parallel evaluation must not perturb results between runs, so all
//! reductions here use a fixed-order pairwise sum (or fixed chunk boundaries
//! for matrix accumulation) regardless of thread scheduling.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::geometry::Aperture;
use crate::{Error, Result};

const NEWTON_TOLERANCE: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;

/// Chunk length for deterministic parallel accumulation.
pub(crate) const PAR_CHUNK: usize = 1024;

/// Nodes and weights of an order-`n` Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendreRule {
    pub order: usize,
    /// Roots of the Legendre polynomial `P_n`, strictly increasing.
    pub nodes: Vec<f64>,
    /// `w_i = 2 / ((1 - x_i²) P_n'(x_i)²)`.
    pub weights: Vec<f64>,
}

/// Evaluate `P_n(x)` and `P_n'(x)` via the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = p_next;
    }
    // P_n'(x) = n (x P_n - P_{n-1}) / (x² - 1)
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Build an order-`n` Gauss–Legendre rule.
///
/// Nodes come from Newton iteration on `P_n` seeded with Chebyshev angles;
/// only the positive half is solved and then mirrored, which makes the rule
/// exactly symmetric about zero.
pub fn legendre_rule(n: usize) -> Result<GaussLegendreRule> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "quadrature order must be at least 1".into(),
        ));
    }
    if n == 1 {
        return Ok(GaussLegendreRule {
            order: 1,
            nodes: vec![0.0],
            weights: vec![2.0],
        });
    }

    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n / 2;

    for i in 0..half {
        // i-th largest root; Chebyshev initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = legendre_with_derivative(n, x);
            let delta = p / dp;
            x -= delta;
            if delta.abs() < NEWTON_TOLERANCE {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::InvalidArgument(format!(
                "Legendre root iteration failed to converge for order {n}"
            )));
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        // Middle root is exactly zero by symmetry.
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[half] = 0.0;
        weights[half] = 2.0 / (dp * dp);
    }

    Ok(GaussLegendreRule {
        order: n,
        nodes,
        weights,
    })
}

/// One mapped quadrature sample: aperture coordinates and combined weight
/// `w_i w_j c_x c_y` (units m²).
#[derive(Debug, Clone, Copy)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

/// Quadrature samples mapped onto an aperture. Points are stored row-major
/// over `(ix, iy)` so evaluation order is reproducible.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    pub aperture: Aperture,
    /// Distinct mapped x coordinates (ascending).
    pub xs: Vec<f64>,
    /// Distinct mapped y coordinates (ascending).
    pub ys: Vec<f64>,
    pub points: Vec<GridPoint>,
}

impl QuadratureGrid {
    /// Tensor-product grid from per-axis rules.
    pub fn tensor(aperture: Aperture, rule_x: &GaussLegendreRule, rule_y: &GaussLegendreRule) -> Self {
        let cx = 0.5 * (aperture.w_max - aperture.w_min);
        let bx = 0.5 * (aperture.w_max + aperture.w_min);
        let cy = 0.5 * (aperture.h_max - aperture.h_min);
        let by = 0.5 * (aperture.h_max + aperture.h_min);

        let xs: Vec<f64> = rule_x.nodes.iter().map(|t| cx * t + bx).collect();
        let ys: Vec<f64> = rule_y.nodes.iter().map(|t| cy * t + by).collect();

        let mut points = Vec::with_capacity(xs.len() * ys.len());
        for (ix, &x) in xs.iter().enumerate() {
            for (iy, &y) in ys.iter().enumerate() {
                points.push(GridPoint {
                    x,
                    y,
                    weight: rule_x.weights[ix] * rule_y.weights[iy] * cx * cy,
                });
            }
        }
        Self {
            aperture,
            xs,
            ys,
            points,
        }
    }

    /// Gauss–Legendre grid with `nx × ny` points.
    pub fn gauss_legendre(aperture: Aperture, nx: usize, ny: usize) -> Result<Self> {
        let rule_x = legendre_rule(nx)?;
        let rule_y = legendre_rule(ny)?;
        Ok(Self::tensor(aperture, &rule_x, &rule_y))
    }

    /// Grid over explicit sample points, e.g. discrete array elements with
    /// per-element effective areas as weights. No weight-sum invariant is
    /// implied here: discrete arrays cover less than the aperture area.
    pub fn from_points(aperture: Aperture, xs: Vec<f64>, ys: Vec<f64>, points: Vec<GridPoint>) -> Self {
        Self {
            aperture,
            xs,
            ys,
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        pairwise_sum_f64(&self.points.iter().map(|p| p.weight).collect::<Vec<_>>())
    }
}

/// Fixed-order pairwise sum; deterministic and more accurate than a running
/// sum for long sequences.
pub(crate) fn pairwise_sum(values: &[Complex64]) -> Complex64 {
    if values.len() <= 8 {
        let mut acc = Complex64::new(0.0, 0.0);
        for v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub(crate) fn pairwise_sum_f64(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum_f64(&values[..mid]) + pairwise_sum_f64(&values[mid..])
}

/// Approximate `∫∫ f(x, y) dx dy` over the grid's aperture.
///
/// Evaluations run in parallel; the reduction order is fixed, so repeated
/// runs give bit-identical results. A non-finite integrand value aborts with
/// the offending point.
pub fn integrate_2d<F>(f: F, grid: &QuadratureGrid) -> Result<Complex64>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let values: Vec<Complex64> = grid
        .points
        .par_iter()
        .map(|pt| f(pt.x, pt.y) * pt.weight)
        .collect();
    if let Some(bad) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite {
            x: grid.points[bad].x,
            y: grid.points[bad].y,
        });
    }
    Ok(pairwise_sum(&values))
}

/// Matrix-valued overload of [`integrate_2d`]: accumulates the integrand
/// elementwise. Chunk boundaries are fixed, keeping the result deterministic.
pub fn integrate_2d_matrix<F>(
    f: F,
    grid: &QuadratureGrid,
    rows: usize,
    cols: usize,
) -> Result<DMatrix<Complex64>>
where
    F: Fn(f64, f64) -> DMatrix<Complex64> + Sync,
{
    let partials: Vec<Result<DMatrix<Complex64>>> = grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut acc = DMatrix::<Complex64>::zeros(rows, cols);
            for pt in chunk {
                let m = f(pt.x, pt.y);
                if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                    return Err(Error::NonFinite { x: pt.x, y: pt.y });
                }
                acc += m * Complex64::from(pt.weight);
            }
            Ok(acc)
        })
        .collect();

    let mut total = DMatrix::<Complex64>::zeros(rows, cols);
    for p in partials {
        total += p?;
    }
    Ok(total)
}
