//! Scalar Green's-function responses, their position gradients, the
//! round-trip channel, field synthesis, and measurement-noise sampling.
//!
//! Both the transmit response `a_t` and the receive response `a_r` are
//! outgoing spherical waves `j η₀ k₀ e^{-j k₀ d} / (4π d)`; the printed
//! incoming-wave variant of the receive response differs only by a global
//! phase convention, which leaves every quadratic quantity (Fisher
//! information, CRB, likelihood spectra) unchanged. The round-trip channel
//! composes transmit response → reflection → receive response per target,
//! scaled by the coupling constant `c₀/√N`.

use nalgebra::Vector3;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::geometry::{PhysicalConstants, Scenario, Target, MIN_DISTANCE};
use crate::quadrature::{integrate_2d, pairwise_sum_f64, QuadratureGrid, PAR_CHUNK};
use crate::{Error, Result};

/// Common response prefactor `j η₀ k₀ / (4π)`.
pub(crate) fn kernel_prefactor(constants: &PhysicalConstants) -> Complex64 {
    Complex64::i() * constants.impedance_eta0 * constants.wavenumber_k0
        / (4.0 * std::f64::consts::PI)
}

/// Outgoing-wave kernel `e^{-j k₀ d} / d` without the response prefactor.
#[inline]
pub(crate) fn bare_kernel(k0: f64, d: f64) -> Complex64 {
    Complex64::from_polar(1.0 / d, -k0 * d)
}

/// Scale relating full-response products to the round-trip channel. The two
/// response prefactors square to `-(η₀k₀/4π)²` while the coupling contributes
/// `c₀/√N = (η₀k₀/4π)²/N`, so per-target fields factor as
/// `(-1/N) · α_n · a_r · ∫ a_t J dp`.
#[inline]
pub(crate) fn reflection_scale(n_targets: usize) -> Complex64 {
    Complex64::new(-1.0 / n_targets as f64, 0.0)
}

fn checked_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    let d = (a - b).norm();
    if d < MIN_DISTANCE {
        return Err(Error::Singularity { distance: d });
    }
    Ok(d)
}

/// Transmit response at observation point `target_pos` for a source at `p`:
/// `j η₀ k₀ e^{-j k₀ ‖n-p‖} / (4π ‖n-p‖)`.
pub fn a_t(
    target_pos: &Vector3<f64>,
    p: &Vector3<f64>,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    let d = checked_distance(target_pos, p)?;
    Ok(kernel_prefactor(constants) * bare_kernel(constants.wavenumber_k0, d))
}

/// Receive response at `q` for a scatterer at `target_pos`; same magnitude
/// law and outgoing-wave phase as [`a_t`].
pub fn a_r(
    q: &Vector3<f64>,
    target_pos: &Vector3<f64>,
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    let d = checked_distance(q, target_pos)?;
    Ok(kernel_prefactor(constants) * bare_kernel(constants.wavenumber_k0, d))
}

/// Gradient of [`a_t`] with respect to the target position. With
/// `u = target_pos - p` and `r = ‖u‖`:
/// `∇ a_t = -(j η₀ k₀ / 4π) (1 + j k₀ r) e^{-j k₀ r} u / r³`.
pub fn grad_a_t(
    target_pos: &Vector3<f64>,
    p: &Vector3<f64>,
    constants: &PhysicalConstants,
) -> Result<Vector3<Complex64>> {
    let u = target_pos - p;
    let r = u.norm();
    if r < MIN_DISTANCE {
        return Err(Error::Singularity { distance: r });
    }
    let k0 = constants.wavenumber_k0;
    let s = -kernel_prefactor(constants)
        * Complex64::new(1.0, k0 * r)
        * Complex64::from_polar(1.0 / (r * r * r), -k0 * r);
    Ok(Vector3::new(s * u.x, s * u.y, s * u.z))
}

/// Gradient of [`a_r`] with respect to the target position. With
/// `v = q - target_pos` and `ρ = ‖v‖`:
/// `∇ a_r = +(j η₀ k₀ / 4π) (1 + j k₀ ρ) e^{-j k₀ ρ} v / ρ³`.
pub fn grad_a_r(
    q: &Vector3<f64>,
    target_pos: &Vector3<f64>,
    constants: &PhysicalConstants,
) -> Result<Vector3<Complex64>> {
    let v = q - target_pos;
    let rho = v.norm();
    if rho < MIN_DISTANCE {
        return Err(Error::Singularity { distance: rho });
    }
    let k0 = constants.wavenumber_k0;
    let s = kernel_prefactor(constants)
        * Complex64::new(1.0, k0 * rho)
        * Complex64::from_polar(1.0 / (rho * rho * rho), -k0 * rho);
    Ok(Vector3::new(s * v.x, s * v.y, s * v.z))
}

/// Round-trip channel between a transmit point `p` and a receive point `q`:
/// `h(q, p) = (c₀/√N) Σₙ αₙ e^{-j k₀ ‖q-rₙ‖}/‖q-rₙ‖ · e^{-j k₀ ‖rₙ-p‖}/‖rₙ-p‖`.
pub fn round_trip_h(
    q: &Vector3<f64>,
    p: &Vector3<f64>,
    targets: &[Target],
    constants: &PhysicalConstants,
) -> Result<Complex64> {
    let k0 = constants.wavenumber_k0;
    let mut sum = Complex64::new(0.0, 0.0);
    for t in targets {
        let d_rx = checked_distance(q, &t.position)?;
        let d_tx = checked_distance(&t.position, p)?;
        sum += t.reflection * bare_kernel(k0, d_rx) * bare_kernel(k0, d_tx);
    }
    Ok(sum * (constants.coupling_c0 / (targets.len() as f64).sqrt()))
}

/// A scalar source current over the transmit aperture, evaluated at aperture
/// coordinates `(x, y)` on the `z = 0` plane.
pub struct CurrentFunction {
    eval: Box<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
    pub description: String,
}

impl std::fmt::Debug for CurrentFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CurrentFunction")
            .field("description", &self.description)
            .finish()
    }
}

impl CurrentFunction {
    pub fn new<F>(description: impl Into<String>, eval: F) -> Self
    where
        F: Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            eval: Box::new(eval),
            description: description.into(),
        }
    }

    #[inline]
    pub fn evaluate(&self, x: f64, y: f64) -> Complex64 {
        (self.eval)(x, y)
    }

    /// Weighted combination of phase-conjugate transmit responses:
    /// `J(p) = Σₙ wₙ e^{+j k₀ ‖rₙ - p‖}`.
    pub fn subspace(positions: Vec<Vector3<f64>>, k0: f64, weights: Vec<Complex64>) -> Self {
        assert_eq!(positions.len(), weights.len());
        Self::new("subspace(w)", move |x, y| {
            let p = Vector3::new(x, y, 0.0);
            positions
                .iter()
                .zip(&weights)
                .map(|(r, w)| w * Complex64::from_polar(1.0, k0 * (r - p).norm()))
                .sum()
        })
    }

    /// Same current scaled by a complex factor.
    pub fn scaled(self, factor: Complex64) -> Self {
        let description = self.description.clone();
        Self {
            eval: Box::new(move |x, y| (self.eval)(x, y) * factor),
            description,
        }
    }

    /// Quadrature-measured power `∫ |J(p)|² dp`.
    pub fn measured_power(&self, grid: &QuadratureGrid) -> Result<f64> {
        let val = integrate_2d(
            |x, y| Complex64::new(self.evaluate(x, y).norm_sqr(), 0.0),
            grid,
        )?;
        Ok(val.re)
    }
}

/// Field or observation samples over a receive grid, one value per grid point
/// in grid order.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    pub values: Vec<Complex64>,
}

impl FieldSamples {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Per-target transmit-side integrals of a probing current:
/// `i1ₙ = ∫ a_t(kₙ) J dp` and `i2ₙ = ∫ ∇a_t(kₙ) J dp`.
#[derive(Debug, Clone)]
pub struct TransmitIntegrals {
    pub i1: Vec<Complex64>,
    pub i2: Vec<Vector3<Complex64>>,
}

/// Evaluate all transmit-side integrals of `current` in one pass over the
/// transmit grid (deterministic chunked accumulation).
pub fn transmit_integrals(
    current: &CurrentFunction,
    targets: &[Target],
    constants: &PhysicalConstants,
    tx_grid: &QuadratureGrid,
) -> Result<TransmitIntegrals> {
    let n = targets.len();
    let k0 = constants.wavenumber_k0;
    let pref = kernel_prefactor(constants);
    let zero3 = Vector3::new(
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
    );

    type Acc = (Vec<Complex64>, Vec<Vector3<Complex64>>);
    let partials: Vec<Result<Acc>> = tx_grid
        .points
        .par_chunks(PAR_CHUNK)
        .map(|chunk| {
            let mut i1 = vec![Complex64::new(0.0, 0.0); n];
            let mut i2 = vec![zero3; n];
            for pt in chunk {
                let j_val = current.evaluate(pt.x, pt.y);
                if !j_val.re.is_finite() || !j_val.im.is_finite() {
                    return Err(Error::NonFinite { x: pt.x, y: pt.y });
                }
                let jw = j_val * pt.weight;
                let p = Vector3::new(pt.x, pt.y, 0.0);
                for (ti, t) in targets.iter().enumerate() {
                    let u = t.position - p;
                    let r = u.norm();
                    if r < MIN_DISTANCE {
                        return Err(Error::Singularity { distance: r });
                    }
                    i1[ti] += pref * bare_kernel(k0, r) * jw;
                    let s = -pref
                        * Complex64::new(1.0, k0 * r)
                        * Complex64::from_polar(1.0 / (r * r * r), -k0 * r)
                        * jw;
                    i2[ti].x += s * u.x;
                    i2[ti].y += s * u.y;
                    i2[ti].z += s * u.z;
                }
            }
            Ok((i1, i2))
        })
        .collect();

    let mut i1 = vec![Complex64::new(0.0, 0.0); n];
    let mut i2 = vec![zero3; n];
    for p in partials {
        let (p1, p2) = p?;
        for k in 0..n {
            i1[k] += p1[k];
            i2[k] += p2[k];
        }
    }
    Ok(TransmitIntegrals { i1, i2 })
}

/// Excited field at a single receive point by direct 2D integration of the
/// round-trip channel against the current: `E(q) = ∫ h(q, p) J(p) dp`.
pub fn field_e(
    current: &CurrentFunction,
    q: &Vector3<f64>,
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
) -> Result<Complex64> {
    let k0 = scenario.constants.wavenumber_k0;
    let scale = scenario.constants.coupling_c0 / (scenario.n_targets() as f64).sqrt();
    let targets = &scenario.targets;
    integrate_2d(
        |x, y| {
            let p = Vector3::new(x, y, 0.0);
            let mut sum = Complex64::new(0.0, 0.0);
            for t in targets {
                let d_rx = (q - t.position).norm();
                let d_tx = (t.position - p).norm();
                if d_rx < MIN_DISTANCE || d_tx < MIN_DISTANCE {
                    return Complex64::new(f64::NAN, f64::NAN);
                }
                sum += t.reflection * bare_kernel(k0, d_rx) * bare_kernel(k0, d_tx);
            }
            sum * scale * current.evaluate(x, y)
        },
        tx_grid,
    )
}

/// Same field through the per-target factorization
/// `E(q) = (-1/N) Σₙ αₙ a_r(q, rₙ) i1ₙ`; algebraically identical to
/// [`field_e`] on shared quadrature samples.
pub fn field_e_factored(
    ti: &TransmitIntegrals,
    q: &Vector3<f64>,
    scenario: &Scenario,
) -> Result<Complex64> {
    let s = reflection_scale(scenario.n_targets());
    let mut sum = Complex64::new(0.0, 0.0);
    for (t, i1) in scenario.targets.iter().zip(&ti.i1) {
        sum += t.reflection * a_r(q, &t.position, &scenario.constants)? * i1;
    }
    Ok(sum * s)
}

/// Noiseless field samples over the whole receive grid (batched factored
/// evaluation, parallel over receive points in grid order).
pub fn field_samples(
    current: &CurrentFunction,
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
) -> Result<FieldSamples> {
    let ti = transmit_integrals(current, &scenario.targets, &scenario.constants, tx_grid)?;
    let values: Vec<Result<Complex64>> = rx_grid
        .points
        .par_iter()
        .map(|pt| field_e_factored(&ti, &Vector3::new(pt.x, pt.y, 0.0), scenario))
        .collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FieldSamples { values })
}

/// Spatially white measurement noise over the receive grid.
///
/// Each sample is independent circularly-symmetric complex Gaussian with
/// variance `σ²/ΔAᵢ`, where `ΔAᵢ` is the point's quadrature weight, so that
/// discretized inner products `Σ ΔAᵢ n(qᵢ) m*(qᵢ)` reproduce the continuous
/// white-noise correlation.
pub fn sample_noise(rx_grid: &QuadratureGrid, noise_power: f64, seed: u64) -> FieldSamples {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = StandardNormal;
    let values = rx_grid
        .points
        .iter()
        .map(|pt| {
            let std = (noise_power / (2.0 * pt.weight)).sqrt();
            let re: f64 = normal.sample(&mut rng);
            let im: f64 = normal.sample(&mut rng);
            Complex64::new(std * re, std * im)
        })
        .collect();
    FieldSamples { values }
}

/// Discretized received energy `∫ |s(q)|² dq` of a set of samples.
pub fn samples_energy(samples: &FieldSamples, grid: &QuadratureGrid) -> f64 {
    let terms: Vec<f64> = samples
        .values
        .iter()
        .zip(&grid.points)
        .map(|(v, pt)| v.norm_sqr() * pt.weight)
        .collect();
    pairwise_sum_f64(&terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{scenario_from_table1, Aperture};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn constants() -> PhysicalConstants {
        scenario_from_table1().constants
    }

    #[test]
    fn transmit_response_magnitude_law() {
        // |a_t| = η₀ k₀ / (4π d); at d = 5 m this is ≈ 3518 for 28 GHz.
        let c = constants();
        let target = Vector3::new(3.0, 0.0, 4.0); // 5 m from origin
        let p = Vector3::zeros();
        let v = a_t(&target, &p, &c).unwrap();
        let expected =
            c.impedance_eta0 * c.wavenumber_k0 / (4.0 * std::f64::consts::PI * 5.0);
        assert_relative_eq!(v.norm(), expected, max_relative = 1e-12);
        assert!((v.norm() - 3518.0).abs() < 1.0);
    }

    #[test]
    fn transmit_response_phase_at_one_wavelength() {
        // At d = λ the propagation phase wraps to 2π, leaving the +π/2 of j.
        let c = constants();
        let target = Vector3::new(0.0, 0.0, c.wavelength_m);
        let v = a_t(&target, &Vector3::zeros(), &c).unwrap();
        assert_relative_eq!(v.arg(), std::f64::consts::FRAC_PI_2, max_relative = 1e-9);
    }

    #[test]
    fn responses_depend_only_on_distance() {
        let c = constants();
        let a = Vector3::new(0.3, -0.2, 2.0);
        let b = Vector3::new(-0.4, 0.1, 5.0);
        assert_eq!(a_t(&a, &b, &c).unwrap(), a_t(&b, &a, &c).unwrap());
        let d = (a - b).norm();
        assert_relative_eq!(
            a_r(&a, &b, &c).unwrap().norm(),
            a_t(&a, &b, &c).unwrap().norm(),
            max_relative = 1e-15
        );
        let same_d = Vector3::new(0.0, 0.0, d);
        assert_relative_eq!(
            a_t(&same_d, &Vector3::zeros(), &c).unwrap().norm(),
            a_t(&a, &b, &c).unwrap().norm(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn round_trip_phase_at_equal_legs() {
        // a_r·a_t over equal legs r carries phase π − 2 k₀ r (two j factors,
        // two propagation phases).
        let c = constants();
        let r = 3.7;
        let target = Vector3::new(0.0, 0.0, r);
        let p = Vector3::zeros();
        let q = Vector3::zeros();
        let prod = a_r(&q, &target, &c).unwrap() * a_t(&target, &p, &c).unwrap();
        let expected = std::f64::consts::PI - 2.0 * c.wavenumber_k0 * r;
        let wrapped = (prod.arg() - expected).rem_euclid(2.0 * std::f64::consts::PI);
        let dist = wrapped.min(2.0 * std::f64::consts::PI - wrapped);
        assert!(dist < 1e-8, "phase mismatch: {dist}");
    }

    #[test]
    fn coincident_points_are_singular() {
        let c = constants();
        let p = Vector3::new(0.1, 0.2, 0.3);
        assert!(matches!(
            a_t(&p, &p, &c),
            Err(Error::Singularity { .. })
        ));
        assert!(grad_a_r(&p, &p, &c).is_err());
    }

    /// Central-difference oracle for response gradients.
    fn fd_gradient<F>(f: F, x: &Vector3<f64>, step: f64) -> Vector3<Complex64>
    where
        F: Fn(&Vector3<f64>) -> Complex64,
    {
        let mut g = Vector3::new(
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
        );
        for i in 0..3 {
            let mut hi = *x;
            let mut lo = *x;
            hi[i] += step;
            lo[i] -= step;
            g[i] = (f(&hi) - f(&lo)) / (2.0 * step);
        }
        g
    }

    #[test]
    fn gradients_match_central_differences() {
        let c = constants();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let p = Vector3::new(
                rng.random_range(-1.0..0.0),
                rng.random_range(-0.5..0.5),
                0.0,
            );
            let q = Vector3::new(
                rng.random_range(0.0..1.0),
                rng.random_range(-0.5..0.5),
                0.0,
            );
            let target = Vector3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(1.0..9.0),
            );

            let analytic = grad_a_t(&target, &p, &c).unwrap();
            let numeric = fd_gradient(|r| a_t(r, &p, &c).unwrap(), &target, 1e-6);
            for i in 0..3 {
                assert!(
                    (analytic[i] - numeric[i]).norm() <= 1e-5 * analytic[i].norm().max(1e-9),
                    "grad_a_t component {i}: {} vs {}",
                    analytic[i],
                    numeric[i]
                );
            }

            let analytic = grad_a_r(&q, &target, &c).unwrap();
            let numeric = fd_gradient(|r| a_r(&q, r, &c).unwrap(), &target, 1e-6);
            for i in 0..3 {
                assert!(
                    (analytic[i] - numeric[i]).norm() <= 1e-5 * analytic[i].norm().max(1e-9),
                    "grad_a_r component {i}: {} vs {}",
                    analytic[i],
                    numeric[i]
                );
            }
        }
    }

    #[test]
    fn gradient_vanishes_along_shared_coordinate() {
        let c = constants();
        let p = Vector3::new(-0.3, 0.25, 0.0);
        let target = Vector3::new(2.0, 0.25, 4.0); // same y as p
        let g = grad_a_t(&target, &p, &c).unwrap();
        assert_eq!(g.y, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn far_zone_gradient_magnitude() {
        // For k₀ r ≫ 1 the phase derivative dominates: ‖∇a_t‖ ≈ k₀ |a_t|.
        let c = constants();
        let target = Vector3::new(0.0, 0.0, 5.0);
        let p = Vector3::zeros();
        let g = grad_a_t(&target, &p, &c).unwrap();
        let norm = (g.x.norm_sqr() + g.y.norm_sqr() + g.z.norm_sqr()).sqrt();
        let a = a_t(&target, &p, &c).unwrap().norm();
        assert_relative_eq!(norm, c.wavenumber_k0 * a, max_relative = 1e-4);
    }

    #[test]
    fn round_trip_single_target_collapses() {
        let s = scenario_from_table1();
        let one = s.with_targets(vec![s.targets[0]]).unwrap();
        let c = one.constants;
        let q = Vector3::new(0.5, 0.1, 0.0);
        let p = Vector3::new(-0.5, -0.1, 0.0);
        let h = round_trip_h(&q, &p, &one.targets, &c).unwrap();
        let t = &one.targets[0];
        let expected = c.coupling_c0
            * t.reflection
            * bare_kernel(c.wavenumber_k0, (q - t.position).norm())
            * bare_kernel(c.wavenumber_k0, (t.position - p).norm());
        assert_relative_eq!(h.re, expected.re, max_relative = 1e-14);
        assert_relative_eq!(h.im, expected.im, max_relative = 1e-14);
    }

    #[test]
    fn round_trip_symmetric_targets_add_coherently() {
        // Mirror geometry: both per-target products share magnitude and
        // phase, so the sum is exactly twice one term.
        let s = scenario_from_table1();
        let c = s.constants;
        let p = Vector3::new(-0.25, 0.0, 0.0);
        let q = Vector3::new(0.25, 0.0, 0.0);
        let h = round_trip_h(&q, &p, &s.targets, &c).unwrap();
        let t0 = &s.targets[0];
        let term = c.coupling_c0 / 2.0_f64.sqrt()
            * t0.reflection
            * bare_kernel(c.wavenumber_k0, (q - t0.position).norm())
            * bare_kernel(c.wavenumber_k0, (t0.position - p).norm());
        let twice = term * 2.0;
        assert_relative_eq!(h.re, twice.re, max_relative = 1e-12);
        assert_relative_eq!(h.im, twice.im, max_relative = 1e-12);
    }

    #[test]
    fn round_trip_linear_in_reflection() {
        let s = scenario_from_table1();
        let doubled: Vec<Target> = s
            .targets
            .iter()
            .map(|t| Target::new(t.position, t.reflection * 2.0).unwrap())
            .collect();
        let q = Vector3::new(0.7, 0.2, 0.0);
        let p = Vector3::new(-0.7, -0.2, 0.0);
        let h1 = round_trip_h(&q, &p, &s.targets, &s.constants).unwrap();
        let h2 = round_trip_h(&q, &p, &doubled, &s.constants).unwrap();
        assert_relative_eq!(h2.re, 2.0 * h1.re, max_relative = 1e-14);
        assert_relative_eq!(h2.im, 2.0 * h1.im, max_relative = 1e-14);
    }

    fn small_grid(ap: Aperture) -> QuadratureGrid {
        QuadratureGrid::gauss_legendre(ap, 30, 30).unwrap()
    }

    #[test]
    fn zero_current_zero_field() {
        let s = scenario_from_table1();
        let grid = small_grid(s.tx);
        let zero = CurrentFunction::new("zero", |_, _| Complex64::new(0.0, 0.0));
        let e = field_e(&zero, &Vector3::new(0.5, 0.0, 0.0), &s, &grid).unwrap();
        assert_eq!(e, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn field_is_linear_in_current() {
        let s = scenario_from_table1();
        let grid = small_grid(s.tx);
        let q = Vector3::new(0.4, -0.1, 0.0);
        let j1 = CurrentFunction::new("j1", |x, y| Complex64::new(x + 0.2, y));
        let j2 = CurrentFunction::new("j2", |x, y| (Complex64::i() * (x - y)).exp());
        let j12 = CurrentFunction::new("j1+j2", |x, y| {
            Complex64::new(x + 0.2, y) + (Complex64::i() * (x - y)).exp()
        });
        let e1 = field_e(&j1, &q, &s, &grid).unwrap();
        let e2 = field_e(&j2, &q, &s, &grid).unwrap();
        let e12 = field_e(&j12, &q, &s, &grid).unwrap();
        assert!((e12 - (e1 + e2)).norm() <= 1e-10 * (e1 + e2).norm());
    }

    #[test]
    fn factored_field_matches_direct_integration() {
        let s = scenario_from_table1();
        let grid = small_grid(s.tx);
        let positions = s.target_positions();
        let w = vec![
            Complex64::new(0.013, -0.007),
            Complex64::new(-0.004, 0.009),
        ];
        let current = CurrentFunction::subspace(positions, s.constants.wavenumber_k0, w);
        let ti = transmit_integrals(&current, &s.targets, &s.constants, &grid).unwrap();
        for q in [
            Vector3::new(0.1, 0.0, 0.0),
            Vector3::new(0.9, 0.45, 0.0),
            Vector3::new(0.5, -0.3, 0.0),
        ] {
            let direct = field_e(&current, &q, &s, &grid).unwrap();
            let factored = field_e_factored(&ti, &q, &s).unwrap();
            assert!(
                (direct - factored).norm() <= 1e-8 * direct.norm(),
                "direct {direct} vs factored {factored}"
            );
        }
    }

    #[test]
    fn batched_samples_match_pointwise_field() {
        let s = scenario_from_table1();
        let tx = small_grid(s.tx);
        let rx = QuadratureGrid::gauss_legendre(s.rx, 6, 6).unwrap();
        let current = CurrentFunction::subspace(
            s.target_positions(),
            s.constants.wavenumber_k0,
            vec![Complex64::new(0.01, 0.0), Complex64::new(0.0, 0.01)],
        );
        let samples = field_samples(&current, &s, &tx, &rx).unwrap();
        assert_eq!(samples.len(), rx.len());
        let q = &rx.points[17];
        let direct = field_e(&current, &Vector3::new(q.x, q.y, 0.0), &s, &tx).unwrap();
        assert!((samples.values[17] - direct).norm() <= 1e-8 * direct.norm());
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let s = scenario_from_table1();
        let rx = QuadratureGrid::gauss_legendre(s.rx, 8, 8).unwrap();
        let a = sample_noise(&rx, s.noise_power, 42);
        let b = sample_noise(&rx, s.noise_power, 42);
        assert_eq!(a.values, b.values);
        let c = sample_noise(&rx, s.noise_power, 43);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn noise_mean_within_clt_bound() {
        let s = scenario_from_table1();
        let rx = QuadratureGrid::gauss_legendre(s.rx, 3, 3).unwrap();
        let draws = 100_000;
        let mut mean = vec![Complex64::new(0.0, 0.0); rx.len()];
        for seed in 0..draws {
            let n = sample_noise(&rx, s.noise_power, seed);
            for (m, v) in mean.iter_mut().zip(&n.values) {
                *m += v;
            }
        }
        for (i, m) in mean.iter().enumerate() {
            let m = m / draws as f64;
            let per_point_std = (s.noise_power / rx.points[i].weight).sqrt();
            let bound = 5.0 * per_point_std / (draws as f64).sqrt();
            assert!(
                m.norm() < bound,
                "point {i}: |mean| {} exceeds CLT bound {bound}",
                m.norm()
            );
        }
    }

    #[test]
    fn noise_energy_matches_discretization() {
        // E{Σ ΔAᵢ |nᵢ|²} = σ² · (number of grid points).
        let s = scenario_from_table1();
        let rx = QuadratureGrid::gauss_legendre(s.rx, 6, 6).unwrap();
        let draws = 200;
        let mut acc = 0.0;
        for seed in 0..draws {
            let n = sample_noise(&rx, s.noise_power, 1_000 + seed);
            acc += samples_energy(&n, &rx);
        }
        let measured = acc / draws as f64;
        let expected = s.noise_power * rx.len() as f64;
        assert!(
            (measured - expected).abs() < 0.05 * expected,
            "measured {measured}, expected {expected}"
        );
    }

    #[test]
    fn subspace_current_power_is_quadratic_form() {
        // ∫|bᵀw|² dp should match wᴴ B₀ w computed directly.
        let s = scenario_from_table1();
        let grid = small_grid(s.tx);
        let w = [Complex64::new(0.02, -0.01), Complex64::new(-0.015, 0.03)];
        let current = CurrentFunction::subspace(
            s.target_positions(),
            s.constants.wavenumber_k0,
            w.to_vec(),
        );
        let power = current.measured_power(&grid).unwrap();

        let k0 = s.constants.wavenumber_k0;
        let positions = s.target_positions();
        let quad = integrate_2d(
            |x, y| {
                let p = Vector3::new(x, y, 0.0);
                let j: Complex64 = positions
                    .iter()
                    .zip(&w)
                    .map(|(r, wi)| wi * Complex64::from_polar(1.0, k0 * (r - p).norm()))
                    .sum();
                Complex64::new(j.norm_sqr(), 0.0)
            },
            &grid,
        )
        .unwrap();
        assert_relative_eq!(power, quad.re, max_relative = 1e-12);
    }
}
