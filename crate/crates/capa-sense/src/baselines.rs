//! Reference policies and architectures: random-phase probing, the
//! half-wavelength discrete array (SPDA), and beam-pattern diagnostics.
//!
//! The SPDA reference replaces aperture integrals with sums over
//! half-wavelength-spaced elements weighted by the effective element
//! aperture `λ²/(4π)`; the same subspace parameterization and optimizer then
//! run unchanged on the element grids, so both architectures are optimized
//! identically.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::CurrentFunction;
use crate::fisher::CrossMatrices;
use crate::geometry::{Aperture, Scenario};
use crate::optimizer::{random_feasible_weights, smgd, SmgdConfig, SmgdTrace};
use crate::quadrature::{GridPoint, QuadratureGrid};
use crate::{Error, Result};

/// Nearest entry index in an ascending coordinate list.
fn nearest_index(sorted: &[f64], v: f64) -> usize {
    match sorted.binary_search_by(|x| x.partial_cmp(&v).unwrap()) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 {
                0
            } else if i >= sorted.len() {
                sorted.len() - 1
            } else if (v - sorted[i - 1]).abs() <= (sorted[i] - v).abs() {
                i - 1
            } else {
                i
            }
        }
    }
}

/// Constant-modulus random-phase probing current
/// `J(p) = exp{j·Uniform(-π, π)} / √|S|`, with one phase draw per
/// quadrature cell of `tx_grid` (fixed by the seed, so evaluations at grid
/// points are reproducible). Unit measured power by construction.
pub fn random_policy_current(tx_grid: &QuadratureGrid, seed: u64) -> CurrentFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ny = tx_grid.ys.len().max(1);
    let phases: Vec<f64> = (0..tx_grid.xs.len() * ny)
        .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
        .collect();
    let xs = tx_grid.xs.clone();
    let ys = tx_grid.ys.clone();
    let amplitude = 1.0 / tx_grid.aperture.area().sqrt();
    CurrentFunction::new("random-phase", move |x, y| {
        let ix = nearest_index(&xs, x);
        let iy = nearest_index(&ys, y);
        Complex64::from_polar(amplitude, phases[ix * ny + iy])
    })
}

/// Half-wavelength-sampled discrete array over an aperture.
#[derive(Debug, Clone)]
pub struct SpdaArray {
    pub element_positions: Vec<Vector3<f64>>,
    /// Effective aperture area of each element.
    pub element_area: f64,
    pub nx: usize,
    pub ny: usize,
    pub aperture: Aperture,
    spacing: f64,
}

impl SpdaArray {
    /// Standard sampling: `λ/2` spacing, `λ²/(4π)` effective element area,
    /// elements centered in their cells (min-corner plus quarter-wavelength
    /// offset).
    pub fn sample(aperture: Aperture, wavelength: f64) -> Result<Self> {
        let spacing = wavelength / 2.0;
        let area = wavelength * wavelength / (4.0 * std::f64::consts::PI);
        Self::with_spacing(aperture, spacing, area)
    }

    /// General uniform sampling used by discretization-consistency checks.
    pub fn with_spacing(aperture: Aperture, spacing: f64, element_area: f64) -> Result<Self> {
        if spacing <= 0.0 || element_area <= 0.0 {
            return Err(Error::InvalidArgument(
                "element spacing and area must be positive".into(),
            ));
        }
        let nx = (aperture.width() / spacing * (1.0 + 1e-12)).floor() as usize;
        let ny = (aperture.height() / spacing * (1.0 + 1e-12)).floor() as usize;
        if nx == 0 || ny == 0 {
            return Err(Error::Geometry(format!(
                "aperture {}x{} m too small for spacing {spacing} m",
                aperture.width(),
                aperture.height()
            )));
        }
        let mut element_positions = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            let x = aperture.w_min + spacing * (ix as f64 + 0.5);
            for iy in 0..ny {
                let y = aperture.h_min + spacing * (iy as f64 + 0.5);
                element_positions.push(Vector3::new(x, y, 0.0));
            }
        }
        Ok(Self {
            element_positions,
            element_area,
            nx,
            ny,
            aperture,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.element_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.element_positions.is_empty()
    }

    /// Element set as a sampling grid: discrete sums over elements weighted
    /// by the effective element area stand in for the aperture integrals.
    pub fn grid(&self) -> QuadratureGrid {
        let xs: Vec<f64> = (0..self.nx)
            .map(|ix| self.aperture.w_min + self.spacing * (ix as f64 + 0.5))
            .collect();
        let ys: Vec<f64> = (0..self.ny)
            .map(|iy| self.aperture.h_min + self.spacing * (iy as f64 + 0.5))
            .collect();
        let points = self
            .element_positions
            .iter()
            .map(|p| GridPoint {
                x: p.x,
                y: p.y,
                weight: self.element_area,
            })
            .collect();
        QuadratureGrid::from_points(self.aperture, xs, ys, points)
    }
}

/// CRB-optimized probing on explicit transmit/receive sampling grids; the
/// shared path for both architectures.
pub fn optimized_crb_on_grids(
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
    config: &SmgdConfig,
    seed: u64,
) -> Result<(f64, DVector<Complex64>, SmgdTrace)> {
    let cross = CrossMatrices::assemble(scenario, tx_grid, rx_grid)?;
    let w0 = random_feasible_weights(
        scenario.n_targets(),
        &cross.b0,
        scenario.power_budget_a2,
        seed,
    )?;
    let (w, trace) = smgd(scenario, &cross, config, &w0)?;
    Ok((trace.best_objective(), w, trace))
}

/// Result of the discrete-array reference evaluation.
#[derive(Debug, Clone)]
pub struct SpdaCrb {
    pub crb_trace: f64,
    pub tx_elements: usize,
    pub rx_elements: usize,
    pub weights: DVector<Complex64>,
}

/// Optimized `Tr{CRB}` for the half-wavelength discrete-array counterpart of
/// a scenario: both apertures are λ/2-sampled and the same subspace
/// optimization runs on the element sums.
pub fn spda_crb(scenario: &Scenario, config: &SmgdConfig, seed: u64) -> Result<SpdaCrb> {
    let lambda = scenario.constants.wavelength_m;
    let tx = SpdaArray::sample(scenario.tx, lambda)?;
    let rx = SpdaArray::sample(scenario.rx, lambda)?;
    let (crb, weights, _) =
        optimized_crb_on_grids(scenario, &tx.grid(), &rx.grid(), config, seed)?;
    Ok(SpdaCrb {
        crb_trace: crb,
        tx_elements: tx.len(),
        rx_elements: rx.len(),
        weights,
    })
}

/// Transmit beam pattern of a subspace-weighted current over evaluation
/// points in the `XOZ` plane: `B(r) = |∫ e^{-j k₀ ‖r-p‖} J(p) dp|²` with the
/// path loss removed from the kernel, normalized to unit peak.
pub fn beam_pattern(
    weights: &DVector<Complex64>,
    plane_points: &[(f64, f64)],
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
) -> Result<Vec<f64>> {
    let k0 = scenario.constants.wavenumber_k0;
    let current = CurrentFunction::subspace(
        scenario.target_positions(),
        k0,
        weights.iter().copied().collect(),
    );
    let raw: Vec<Result<f64>> = plane_points
        .par_iter()
        .map(|&(x, z)| {
            let r = Vector3::new(x, 0.0, z);
            let v = crate::quadrature::integrate_2d(
                |px, py| {
                    let p = Vector3::new(px, py, 0.0);
                    Complex64::from_polar(1.0, -k0 * (r - p).norm()) * current.evaluate(px, py)
                },
                tx_grid,
            )?;
            Ok(v.norm_sqr())
        })
        .collect();
    let raw = raw.into_iter().collect::<Result<Vec<_>>>()?;
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(*v));
    if peak <= 0.0 {
        return Err(Error::InvalidArgument(
            "beam pattern is identically zero; weights must be nonzero".into(),
        ));
    }
    Ok(raw.into_iter().map(|v| v / peak).collect())
}
