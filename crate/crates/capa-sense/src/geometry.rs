//! Physical constants, aperture regions, target descriptions, and scenario
//! assembly.
//!
//! The base station carries two planar apertures on the `z = 0` plane: a
//! transmit aperture that radiates the probing current and a receive aperture
//! that observes the scattered field. Targets sit in front of the plane
//! (`z > 0`) and are characterized by a position and a complex reflection
//! coefficient.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::quadrature::QuadratureGrid;
use crate::{Error, Result};

/// Speed of light in vacuum, m/s. Fixed project-wide; permeability and
/// permittivity never appear individually — only through `k0` and `eta0`.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Free-space wave impedance, ohms.
pub const ETA_0: f64 = 376.73;

/// Kernel evaluations closer than this are treated as singular.
pub const MIN_DISTANCE: f64 = 1e-9;

/// Targets closer to each other than this are rejected as coincident.
pub const MIN_TARGET_SEPARATION: f64 = 1e-6;

/// Carrier-derived constants shared by every field computation.
///
/// `coupling_c0` is the round-trip coupling scale `η₀²k₀²/(16π²√N)`; it
/// depends on the target count because the scattering model splits the
/// power budget across targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub frequency_hz: f64,
    pub wavelength_m: f64,
    /// `2π/λ`, rad/m.
    pub wavenumber_k0: f64,
    pub impedance_eta0: f64,
    pub coupling_c0: f64,
    /// Target count the coupling scale was built for.
    pub n_targets: usize,
}

impl PhysicalConstants {
    pub fn new(frequency_hz: f64, impedance_eta0: f64, n_targets: usize) -> Result<Self> {
        if frequency_hz <= 0.0 || !frequency_hz.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "frequency must be positive, got {frequency_hz}"
            )));
        }
        if impedance_eta0 <= 0.0 || !impedance_eta0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "wave impedance must be positive, got {impedance_eta0}"
            )));
        }
        if n_targets == 0 {
            return Err(Error::InvalidArgument(
                "at least one target is required".into(),
            ));
        }
        let wavelength_m = SPEED_OF_LIGHT / frequency_hz;
        let wavenumber_k0 = 2.0 * std::f64::consts::PI / wavelength_m;
        let coupling_c0 = impedance_eta0 * impedance_eta0 * wavenumber_k0 * wavenumber_k0
            / (16.0 * std::f64::consts::PI.powi(2) * (n_targets as f64).sqrt());
        Ok(Self {
            frequency_hz,
            wavelength_m,
            wavenumber_k0,
            impedance_eta0,
            coupling_c0,
            n_targets,
        })
    }

    /// Rebuild from a wavelength instead of a frequency.
    pub fn from_wavelength(
        wavelength_m: f64,
        impedance_eta0: f64,
        n_targets: usize,
    ) -> Result<Self> {
        if wavelength_m <= 0.0 || !wavelength_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "wavelength must be positive, got {wavelength_m}"
            )));
        }
        Self::new(SPEED_OF_LIGHT / wavelength_m, impedance_eta0, n_targets)
    }
}

/// Rectangular region on the `z = 0` plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aperture {
    pub w_min: f64,
    pub w_max: f64,
    pub h_min: f64,
    pub h_max: f64,
}

impl Aperture {
    pub fn new(w_min: f64, w_max: f64, h_min: f64, h_max: f64) -> Result<Self> {
        let vals = [w_min, w_max, h_min, h_max];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Geometry("aperture bounds must be finite".into()));
        }
        if w_min >= w_max || h_min >= h_max {
            return Err(Error::Geometry(format!(
                "degenerate aperture: x in [{w_min}, {w_max}], y in [{h_min}, {h_max}]"
            )));
        }
        Ok(Self {
            w_min,
            w_max,
            h_min,
            h_max,
        })
    }

    pub fn width(&self) -> f64 {
        self.w_max - self.w_min
    }

    pub fn height(&self) -> f64 {
        self.h_max - self.h_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(
            0.5 * (self.w_min + self.w_max),
            0.5 * (self.h_min + self.h_max),
            0.0,
        )
    }
}

/// A point scatterer: position and complex reflection coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub position: Vector3<f64>,
    pub reflection: Complex64,
}

impl Target {
    pub fn new(position: Vector3<f64>, reflection: Complex64) -> Result<Self> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("target position must be finite".into()));
        }
        if position.z <= 0.0 {
            return Err(Error::Geometry(format!(
                "target must sit in front of the array plane (z > 0), got z = {}",
                position.z
            )));
        }
        if !reflection.re.is_finite() || !reflection.im.is_finite() {
            return Err(Error::Geometry("reflection coefficient must be finite".into()));
        }
        Ok(Self {
            position,
            reflection,
        })
    }
}

/// Full physical configuration of one sensing task.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub constants: PhysicalConstants,
    pub tx: Aperture,
    pub rx: Aperture,
    pub targets: Vec<Target>,
    /// Transmit power budget `P`, stored in A².
    pub power_budget_a2: f64,
    /// Noise power spectral level `σ²`.
    pub noise_power: f64,
    pub quad_points_x: usize,
    pub quad_points_y: usize,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        frequency_hz: f64,
        impedance_eta0: f64,
        tx: Aperture,
        rx: Aperture,
        targets: Vec<Target>,
        power_budget_a2: f64,
        noise_power: f64,
        quad_points_x: usize,
        quad_points_y: usize,
    ) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Geometry("at least one target is required".into()));
        }
        for (i, a) in targets.iter().enumerate() {
            for (j, b) in targets.iter().enumerate().skip(i + 1) {
                if (a.position - b.position).norm() < MIN_TARGET_SEPARATION {
                    return Err(Error::Geometry(format!(
                        "targets {i} and {j} coincide; separations below \
                         {MIN_TARGET_SEPARATION} m are unidentifiable"
                    )));
                }
            }
        }
        if power_budget_a2 <= 0.0 || !power_budget_a2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power budget must be positive, got {power_budget_a2}"
            )));
        }
        if noise_power <= 0.0 || !noise_power.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise power must be positive, got {noise_power}"
            )));
        }
        if quad_points_x < 2 || quad_points_y < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 quadrature points per axis, got {quad_points_x}x{quad_points_y}"
            )));
        }
        let constants = PhysicalConstants::new(frequency_hz, impedance_eta0, targets.len())?;
        Ok(Self {
            constants,
            tx,
            rx,
            targets,
            power_budget_a2,
            noise_power,
            quad_points_x,
            quad_points_y,
        })
    }

    pub fn n_targets(&self) -> usize {
        self.targets.len()
    }

    pub fn target_positions(&self) -> Vec<Vector3<f64>> {
        self.targets.iter().map(|t| t.position).collect()
    }

    /// Copy with a different target set; the coupling scale is rebuilt for
    /// the new target count.
    pub fn with_targets(&self, targets: Vec<Target>) -> Result<Self> {
        Self::new(
            self.constants.frequency_hz,
            self.constants.impedance_eta0,
            self.tx,
            self.rx,
            targets,
            self.power_budget_a2,
            self.noise_power,
            self.quad_points_x,
            self.quad_points_y,
        )
    }

    pub fn with_frequency(&self, frequency_hz: f64) -> Result<Self> {
        Self::new(
            frequency_hz,
            self.constants.impedance_eta0,
            self.tx,
            self.rx,
            self.targets.clone(),
            self.power_budget_a2,
            self.noise_power,
            self.quad_points_x,
            self.quad_points_y,
        )
    }

    pub fn with_power(&self, power_budget_a2: f64) -> Result<Self> {
        Self::new(
            self.constants.frequency_hz,
            self.constants.impedance_eta0,
            self.tx,
            self.rx,
            self.targets.clone(),
            power_budget_a2,
            self.noise_power,
            self.quad_points_x,
            self.quad_points_y,
        )
    }

    pub fn with_gl_points(&self, n: usize) -> Result<Self> {
        Self::new(
            self.constants.frequency_hz,
            self.constants.impedance_eta0,
            self.tx,
            self.rx,
            self.targets.clone(),
            self.power_budget_a2,
            self.noise_power,
            n,
            n,
        )
    }

    pub fn with_apertures(&self, tx: Aperture, rx: Aperture) -> Result<Self> {
        Self::new(
            self.constants.frequency_hz,
            self.constants.impedance_eta0,
            tx,
            rx,
            self.targets.clone(),
            self.power_budget_a2,
            self.noise_power,
            self.quad_points_x,
            self.quad_points_y,
        )
    }

    pub fn tx_grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::gauss_legendre(self.tx, self.quad_points_x, self.quad_points_y)
    }

    pub fn rx_grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::gauss_legendre(self.rx, self.quad_points_x, self.quad_points_y)
    }

    pub fn grids(&self) -> Result<(QuadratureGrid, QuadratureGrid)> {
        Ok((self.tx_grid()?, self.rx_grid()?))
    }
}

/// The default two-target desk configuration used throughout the experiments:
/// 28 GHz carrier, two 1 m² apertures side by side, 100 mA² budget.
pub fn scenario_from_table1() -> Scenario {
    let tx = Aperture::new(-1.0, 0.0, -0.5, 0.5).expect("static aperture");
    let rx = Aperture::new(0.0, 1.0, -0.5, 0.5).expect("static aperture");
    let alpha = Complex64::new(10.0, 10.0);
    let targets = vec![
        Target::new(Vector3::new(-5.0, 0.0, 5.0), alpha).expect("static target"),
        Target::new(Vector3::new(5.0, 0.0, 5.0), alpha).expect("static target"),
    ];
    Scenario::new(
        28.0e9, ETA_0, tx, rx, targets, 1.0e-4, // 100 mA² in A²
        5.6e-3, 300, 300,
    )
    .expect("static scenario")
}

/// Per-target radiating-near-field diagnostic.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibilityReport {
    pub target_index: usize,
    /// Range to the coordinate origin (array center), m.
    pub range_m: f64,
    /// Fraunhofer bound `2D²/λ` with `D` the larger aperture diagonal, m.
    pub fraunhofer_bound_m: f64,
    /// Target lies inside the radiating near field (`range ≤ bound`).
    pub in_near_field: bool,
    /// Target is within a few wavelengths, where reactive field terms the
    /// model drops become noticeable.
    pub possibly_reactive: bool,
}

/// Check every target against the radiating-near-field region. Violations
/// are diagnostics only: the bound formulas stay well defined outside it.
pub fn admissibility_check(scenario: &Scenario) -> Vec<AdmissibilityReport> {
    let d = scenario.tx.diagonal().max(scenario.rx.diagonal());
    let lambda = scenario.constants.wavelength_m;
    let bound = 2.0 * d * d / lambda;
    scenario
        .targets
        .iter()
        .enumerate()
        .map(|(target_index, t)| {
            let range_m = t.position.norm();
            AdmissibilityReport {
                target_index,
                range_m,
                fraunhofer_bound_m: bound,
                in_near_field: range_m <= bound,
                possibly_reactive: range_m < 10.0 * lambda,
            }
        })
        .collect()
}
