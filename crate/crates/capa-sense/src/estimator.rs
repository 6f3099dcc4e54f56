//! Maximum-likelihood positioning from received field samples.
//!
//! For hypothesized target positions the unit-reflection field templates
//! `Ẽₙ(q)` are matched against the observation `y(q)`. Concentrating the
//! likelihood over the (linear) reflection coefficients leaves the spectrum
//! `ℒ'(r̃) = mᴴ P⁻¹ m` with `m = ∫ Ẽ* y dq` and the template Gram matrix
//! `P = ∫ Ẽ* Ẽᵀ dq`; its peaks locate the targets, and `α⋆ = P⁻¹ m`
//! recovers the reflections.

use nalgebra::{Cholesky, DMatrix, DVector, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::channel::{
    a_r, bare_kernel, field_samples, kernel_prefactor, reflection_scale, sample_noise,
    CurrentFunction, FieldSamples,
};
use crate::geometry::{Scenario, MIN_DISTANCE};
use crate::quadrature::{integrate_2d, QuadratureGrid};
use crate::{Error, Result};

/// Everything the estimator needs: the physical configuration, the probing
/// current that produced the echo, and the received samples.
#[derive(Debug)]
pub struct MleWorkspace<'a> {
    pub scenario: &'a Scenario,
    pub tx_grid: &'a QuadratureGrid,
    pub rx_grid: &'a QuadratureGrid,
    pub current: &'a CurrentFunction,
    pub received: FieldSamples,
}

impl<'a> MleWorkspace<'a> {
    pub fn new(
        scenario: &'a Scenario,
        tx_grid: &'a QuadratureGrid,
        rx_grid: &'a QuadratureGrid,
        current: &'a CurrentFunction,
        received: FieldSamples,
    ) -> Result<Self> {
        if received.len() != rx_grid.len() {
            return Err(Error::InvalidArgument(format!(
                "received samples ({}) must match the receive grid ({})",
                received.len(),
                rx_grid.len()
            )));
        }
        Ok(Self {
            scenario,
            tx_grid,
            rx_grid,
            current,
            received,
        })
    }

    /// Noiseless synthetic observation for the workspace's own scenario.
    pub fn synthesize_noiseless(
        scenario: &'a Scenario,
        tx_grid: &'a QuadratureGrid,
        rx_grid: &'a QuadratureGrid,
        current: &'a CurrentFunction,
    ) -> Result<Self> {
        let received = field_samples(current, scenario, tx_grid, rx_grid)?;
        Self::new(scenario, tx_grid, rx_grid, current, received)
    }

    /// Noisy synthetic observation with seeded measurement noise.
    pub fn synthesize_noisy(
        scenario: &'a Scenario,
        tx_grid: &'a QuadratureGrid,
        rx_grid: &'a QuadratureGrid,
        current: &'a CurrentFunction,
        seed: u64,
    ) -> Result<Self> {
        let mut received = field_samples(current, scenario, tx_grid, rx_grid)?;
        let noise = sample_noise(rx_grid, scenario.noise_power, seed);
        for (v, n) in received.values.iter_mut().zip(&noise.values) {
            *v += n;
        }
        Self::new(scenario, tx_grid, rx_grid, current, received)
    }
}

/// One point of a likelihood spectrum sweep.
#[derive(Debug, Clone, Copy)]
pub struct SpectrumPoint {
    pub candidate_position: Vector3<f64>,
    pub value: f64,
}

/// Sweep coordinate for 1D spectra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    X,
    Z,
}

impl SweepAxis {
    fn index(self) -> usize {
        match self {
            SweepAxis::X => 0,
            SweepAxis::Z => 2,
        }
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepAxis::X => write!(f, "x"),
            SweepAxis::Z => write!(f, "z"),
        }
    }
}

/// Transmit-side integral `∫ a_t(r̃, p) J(p) dp` for one candidate position.
fn template_transmit_integral(
    candidate: &Vector3<f64>,
    ws: &MleWorkspace<'_>,
) -> Result<Complex64> {
    let k0 = ws.scenario.constants.wavenumber_k0;
    let pref = kernel_prefactor(&ws.scenario.constants);
    integrate_2d(
        |x, y| {
            let p = Vector3::new(x, y, 0.0);
            let r = (candidate - p).norm();
            if r < MIN_DISTANCE {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            pref * bare_kernel(k0, r) * ws.current.evaluate(x, y)
        },
        ws.tx_grid,
    )
}

/// Unit-reflection field templates `Ẽₙ(q)` over the receive grid, one vector
/// per candidate. Templates depend only on geometry and the probing current.
pub fn candidate_field(
    candidates: &[Vector3<f64>],
    ws: &MleWorkspace<'_>,
) -> Result<Vec<Vec<Complex64>>> {
    let s = reflection_scale(ws.scenario.n_targets());
    candidates
        .iter()
        .map(|cand| {
            let it = template_transmit_integral(cand, ws)?;
            ws.rx_grid
                .points
                .iter()
                .map(|pt| {
                    let q = Vector3::new(pt.x, pt.y, 0.0);
                    Ok(s * a_r(&q, cand, &ws.scenario.constants)? * it)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

/// Match vector and template Gram matrix of a candidate set:
/// `m_k = ∫ Ẽ_k* y dq`, `P_{k,l} = ∫ Ẽ_k* Ẽ_l dq`.
fn match_and_gram(
    templates: &[Vec<Complex64>],
    ws: &MleWorkspace<'_>,
) -> (DVector<Complex64>, DMatrix<Complex64>) {
    let k = templates.len();
    let mut m = DVector::<Complex64>::zeros(k);
    let mut p = DMatrix::<Complex64>::zeros(k, k);
    for (qi, pt) in ws.rx_grid.points.iter().enumerate() {
        let y = ws.received.values[qi];
        for a in 0..k {
            let ta = templates[a][qi].conj() * pt.weight;
            m[a] += ta * y;
            for b in 0..k {
                p[(a, b)] += ta * templates[b][qi];
            }
        }
    }
    (m, p)
}

fn gram_cholesky(p: &DMatrix<Complex64>) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = Cholesky::new(p.clone()).ok_or_else(|| {
        Error::SingularMatrix(
            "template Gram matrix is singular; candidates may be coincident".into(),
        )
    })?;
    // Near-coincident candidates survive the factorization with a collapsed
    // pivot; reject those too.
    let l = chol.l();
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)].norm()).collect();
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 1e-7 * max {
        return Err(Error::SingularMatrix(
            "template Gram matrix is near-singular; candidates may be coincident".into(),
        ));
    }
    Ok(chol)
}

/// Concentrated likelihood `ℒ'(candidates) = Re{mᴴ P⁻¹ m} ≥ 0`.
pub fn mle_value(candidates: &[Vector3<f64>], ws: &MleWorkspace<'_>) -> Result<f64> {
    let templates = candidate_field(candidates, ws)?;
    let (m, p) = match_and_gram(&templates, ws);
    let alpha = gram_cholesky(&p)?.solve(&m);
    Ok(m.dotc(&alpha).re)
}

/// Least-squares reflection coefficients `α⋆ = P⁻¹ m` for the hypothesized
/// positions.
pub fn estimate_alpha(
    candidates: &[Vector3<f64>],
    ws: &MleWorkspace<'_>,
) -> Result<DVector<Complex64>> {
    let templates = candidate_field(candidates, ws)?;
    let (m, p) = match_and_gram(&templates, ws);
    Ok(gram_cholesky(&p)?.solve(&m))
}

/// 1D spectrum sweep: the chosen coordinate of `base_position` runs over
/// `[start, stop]` in steps of `step`; each sweep point is scored as its own
/// single-candidate hypothesis.
pub fn spectrum_sweep(
    axis: SweepAxis,
    start: f64,
    stop: f64,
    step: f64,
    base_position: Vector3<f64>,
    ws: &MleWorkspace<'_>,
) -> Result<Vec<SpectrumPoint>> {
    if step <= 0.0 || stop < start {
        return Err(Error::InvalidArgument(format!(
            "invalid sweep range [{start}, {stop}] step {step}"
        )));
    }
    let count = ((stop - start) / step + 1.0 + 1e-9).floor() as usize;
    let coords: Vec<f64> = (0..count).map(|i| start + i as f64 * step).collect();
    let points: Vec<Result<SpectrumPoint>> = coords
        .par_iter()
        .map(|&c| {
            let mut pos = base_position;
            pos[axis.index()] = c;
            let value = mle_value(&[pos], ws)?;
            Ok(SpectrumPoint {
                candidate_position: pos,
                value,
            })
        })
        .collect();
    points.into_iter().collect()
}

/// Index of the first maximum in scan order.
fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalized mean-square positioning error as a function of grid-search
/// step size, averaged over the `x` and `z` search axes and noise trials.
///
/// The search window spans `±window_halfwidth` around the true coordinate;
/// the grid is anchored at the window edge, so the truth lies on-grid only
/// when the window is an integer number of steps.
#[allow(clippy::too_many_arguments)]
pub fn nmse_vs_step(
    step_sizes: &[f64],
    scenario: &Scenario,
    tx_grid: &QuadratureGrid,
    rx_grid: &QuadratureGrid,
    current: &CurrentFunction,
    trials: usize,
    window_halfwidth: f64,
    noiseless: bool,
    seed: u64,
) -> Result<Vec<(f64, f64)>> {
    if scenario.n_targets() != 1 {
        return Err(Error::InvalidArgument(
            "step-size error curves are defined for the single-target search".into(),
        ));
    }
    if step_sizes.iter().any(|s| *s <= 0.0) {
        return Err(Error::InvalidArgument("step sizes must be positive".into()));
    }
    let truth = scenario.targets[0].position;
    let norm_sq = truth.norm_squared();
    let trials = trials.max(1);

    let noiseless_ws =
        MleWorkspace::synthesize_noiseless(scenario, tx_grid, rx_grid, current)?;

    let mut out = Vec::with_capacity(step_sizes.len());
    for (si, &step) in step_sizes.iter().enumerate() {
        let mut axis_nmse = [0.0f64; 2];
        for (ai, axis) in [SweepAxis::X, SweepAxis::Z].into_iter().enumerate() {
            let idx = axis.index();
            let start = truth[idx] - window_halfwidth;
            let count = ((2.0 * window_halfwidth) / step + 1.0 + 1e-9).floor() as usize;
            let candidates: Vec<Vector3<f64>> = (0..count)
                .map(|i| {
                    let mut pos = truth;
                    pos[idx] = start + i as f64 * step;
                    pos
                })
                .collect();
            let templates = candidate_field(&candidates, &noiseless_ws)?;
            let template_power: Vec<f64> = templates
                .iter()
                .map(|t| {
                    t.iter()
                        .zip(&rx_grid.points)
                        .map(|(v, pt)| v.norm_sqr() * pt.weight)
                        .sum()
                })
                .collect();

            let mut mse = 0.0;
            for trial in 0..trials {
                let y: Vec<Complex64> = if noiseless {
                    noiseless_ws.received.values.clone()
                } else {
                    let noise = sample_noise(
                        rx_grid,
                        scenario.noise_power,
                        seed ^ ((si as u64) << 40) ^ ((ai as u64) << 32) ^ trial as u64,
                    );
                    noiseless_ws
                        .received
                        .values
                        .iter()
                        .zip(&noise.values)
                        .map(|(e, n)| e + n)
                        .collect()
                };
                // Single-candidate spectrum |m|²/ρ per grid node.
                let scores: Vec<f64> = templates
                    .iter()
                    .zip(&template_power)
                    .map(|(t, rho)| {
                        let m: Complex64 = t
                            .iter()
                            .zip(&y)
                            .zip(&rx_grid.points)
                            .map(|((tv, yv), pt)| tv.conj() * yv * pt.weight)
                            .sum();
                        m.norm_sqr() / rho
                    })
                    .collect();
                let best = argmax(&scores);
                let err = candidates[best][idx] - truth[idx];
                mse += err * err;
                if noiseless {
                    // All trials identical without noise.
                    mse *= trials as f64;
                    break;
                }
            }
            axis_nmse[ai] = mse / (trials as f64 * norm_sq);
        }
        out.push((step, 0.5 * (axis_nmse[0] + axis_nmse[1])));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::scenario_from_table1;
    use approx::assert_relative_eq;

    /// Single-target scenario (second reference target) at a coarse grid.
    fn st_scenario(n: usize) -> Scenario {
        let s = scenario_from_table1();
        s.with_targets(vec![s.targets[1]])
            .unwrap()
            .with_gl_points(n)
            .unwrap()
    }

    fn probe(scenario: &Scenario, scale: f64) -> CurrentFunction {
        CurrentFunction::subspace(
            scenario.target_positions(),
            scenario.constants.wavenumber_k0,
            vec![Complex64::new(scale, 0.0); scenario.n_targets()],
        )
    }

    #[test]
    fn template_at_truth_recovers_field_over_alpha() {
        let s = st_scenario(24);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let templates = candidate_field(&[s.targets[0].position], &ws).unwrap();
        let alpha = s.targets[0].reflection;
        for (t, e) in templates[0].iter().zip(&ws.received.values) {
            assert!((t * alpha - e).norm() <= 1e-10 * e.norm());
        }
    }

    #[test]
    fn templates_are_independent_of_reflection() {
        let s1 = st_scenario(20);
        let mut bumped = s1.targets.clone();
        bumped[0].reflection = Complex64::new(-3.0, 7.0);
        let s2 = s1.with_targets(bumped).unwrap();
        let (tx, rx) = s1.grids().unwrap();
        let current = probe(&s1, 0.01);
        let ws1 = MleWorkspace::synthesize_noiseless(&s1, &tx, &rx, &current).unwrap();
        let ws2 = MleWorkspace::synthesize_noiseless(&s2, &tx, &rx, &current).unwrap();
        let cand = Vector3::new(4.0, 0.0, 6.0);
        let t1 = candidate_field(&[cand], &ws1).unwrap();
        let t2 = candidate_field(&[cand], &ws2).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn template_power_is_positive() {
        let s = st_scenario(20);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        for cand in [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(-3.0, 1.0, 7.0),
            Vector3::new(5.0, 0.0, 5.0),
        ] {
            let t = candidate_field(&[cand], &ws).unwrap();
            let rho: f64 = t[0]
                .iter()
                .zip(&rx.points)
                .map(|(v, pt)| v.norm_sqr() * pt.weight)
                .sum();
            assert!(rho > 0.0);
        }
    }

    #[test]
    fn noiseless_value_at_truth_is_matched_energy() {
        let s = st_scenario(24);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let truth = s.targets[0].position;
        let templates = candidate_field(&[truth], &ws).unwrap();
        let rho: f64 = templates[0]
            .iter()
            .zip(&rx.points)
            .map(|(v, pt)| v.norm_sqr() * pt.weight)
            .sum();
        let value = mle_value(&[truth], &ws).unwrap();
        let expected = s.targets[0].reflection.norm_sqr() * rho;
        assert_relative_eq!(value, expected, max_relative = 1e-8);
    }

    #[test]
    fn value_nonnegative_on_pure_noise() {
        let s = st_scenario(16);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        for seed in 0..5 {
            let noise = sample_noise(&rx, s.noise_power, seed);
            let ws = MleWorkspace::new(&s, &tx, &rx, &current, noise).unwrap();
            let v = mle_value(&[Vector3::new(1.0, 0.0, 4.0)], &ws).unwrap();
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn value_invariant_to_global_phase_of_observation() {
        let s = st_scenario(16);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let base = MleWorkspace::synthesize_noisy(&s, &tx, &rx, &current, 3).unwrap();
        let rot = Complex64::from_polar(1.0, 1.234);
        let rotated = FieldSamples {
            values: base.received.values.iter().map(|v| v * rot).collect(),
        };
        let ws2 = MleWorkspace::new(&s, &tx, &rx, &current, rotated).unwrap();
        let cand = [Vector3::new(4.5, 0.0, 5.5)];
        let v1 = mle_value(&cand, &base).unwrap();
        let v2 = mle_value(&cand, &ws2).unwrap();
        assert_relative_eq!(v1, v2, max_relative = 1e-12);
    }

    #[test]
    fn value_invariant_to_common_template_rescaling() {
        // Scaling the probing current scales every template by the same
        // constant; m and P rescale consistently and ℒ' is unchanged.
        let s = st_scenario(16);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let scaled = probe(&s, 0.01).scaled(Complex64::new(-2.0, 5.0));
        let ws1 = MleWorkspace::synthesize_noisy(&s, &tx, &rx, &current, 7).unwrap();
        let ws2 = MleWorkspace::new(&s, &tx, &rx, &scaled, ws1.received.clone()).unwrap();
        let cand = [Vector3::new(5.2, 0.0, 4.8)];
        assert_relative_eq!(
            mle_value(&cand, &ws1).unwrap(),
            mle_value(&cand, &ws2).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn alpha_recovery_single_target() {
        let s = st_scenario(24);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let alpha = estimate_alpha(&[s.targets[0].position], &ws).unwrap();
        let truth = s.targets[0].reflection;
        assert!((alpha[0] - truth).norm() <= 1e-8 * truth.norm());

        // Linearity: scaling the observation scales the estimate.
        let scaled = FieldSamples {
            values: ws.received.values.iter().map(|v| v * 3.0).collect(),
        };
        let ws3 = MleWorkspace::new(&s, &tx, &rx, &current, scaled).unwrap();
        let alpha3 = estimate_alpha(&[s.targets[0].position], &ws3).unwrap();
        assert!((alpha3[0] - truth * 3.0).norm() <= 1e-8 * truth.norm());
    }

    #[test]
    fn alpha_recovery_two_targets() {
        let s = scenario_from_table1().with_gl_points(24).unwrap();
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let positions: Vec<Vector3<f64>> = s.target_positions();
        let alpha = estimate_alpha(&positions, &ws).unwrap();
        for (est, t) in alpha.iter().zip(&s.targets) {
            assert!(
                (est - t.reflection).norm() <= 1e-6 * t.reflection.norm(),
                "estimated {est}, true {}",
                t.reflection
            );
        }
    }

    #[test]
    fn coincident_candidates_make_gram_singular() {
        let s = st_scenario(12);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let c = Vector3::new(4.0, 0.0, 5.0);
        assert!(matches!(
            mle_value(&[c, c], &ws),
            Err(Error::SingularMatrix(_))
        ));
    }

    #[test]
    fn noiseless_sweep_peaks_at_truth() {
        let s = st_scenario(24);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current).unwrap();
        let truth = s.targets[0].position;
        let step = 0.05;
        for axis in [SweepAxis::X, SweepAxis::Z] {
            let c0 = truth[axis.index()];
            let points =
                spectrum_sweep(axis, c0 - 1.0, c0 + 1.0, step, truth, &ws).unwrap();
            let values: Vec<f64> = points.iter().map(|p| p.value).collect();
            let best = argmax(&values);
            let peak_coord = points[best].candidate_position[axis.index()];
            assert!(
                (peak_coord - c0).abs() <= step + 1e-12,
                "axis {axis}: peak at {peak_coord}, truth {c0}"
            );
            // Matched-filter optimality: truth is on this grid (window is an
            // integer number of steps), so the peak value is the maximum.
            let at_truth = mle_value(&[truth], &ws).unwrap();
            assert!(values[best] <= at_truth * (1.0 + 1e-9));
        }
    }

    #[test]
    fn nmse_zero_for_aligned_noiseless_search() {
        let s = st_scenario(20);
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        // window/step = 4 keeps the truth on-grid.
        let out = nmse_vs_step(&[0.125], &s, &tx, &rx, &current, 1, 0.5, true, 0).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].1, 0.0);
    }

    #[test]
    fn larger_aperture_sharpens_the_main_lobe() {
        // Half-power width of the noiseless x-axis spectrum shrinks as the
        // apertures grow from 0.1 m² to 1.0 m².
        let widths: Vec<f64> = [0.1f64, 1.0]
            .iter()
            .map(|&area| {
                let side = area.sqrt();
                let tx =
                    crate::geometry::Aperture::new(-side, 0.0, -side / 2.0, side / 2.0).unwrap();
                let rx =
                    crate::geometry::Aperture::new(0.0, side, -side / 2.0, side / 2.0).unwrap();
                let s = st_scenario(80).with_apertures(tx, rx).unwrap();
                let (txg, rxg) = s.grids().unwrap();
                let current = probe(&s, 0.01);
                let ws = MleWorkspace::synthesize_noiseless(&s, &txg, &rxg, &current).unwrap();
                let truth = s.targets[0].position;
                let step = 0.01;
                let points =
                    spectrum_sweep(SweepAxis::X, truth.x - 0.5, truth.x + 0.5, step, truth, &ws)
                        .unwrap();
                let values: Vec<f64> = points.iter().map(|p| p.value).collect();
                let peak_idx = argmax(&values);
                let half = values[peak_idx] / 2.0;
                let mut lo = peak_idx;
                while lo > 0 && values[lo] > half {
                    lo -= 1;
                }
                let mut hi = peak_idx;
                while hi + 1 < values.len() && values[hi] > half {
                    hi += 1;
                }
                (hi - lo) as f64 * step
            })
            .collect();
        assert!(
            widths[1] < widths[0],
            "1 m² width {} should be below 0.1 m² width {}",
            widths[1],
            widths[0]
        );
    }

    #[test]
    fn optimized_probe_beats_random_on_peak_to_sidelobe() {
        // For a single target every feasible subspace weight yields the
        // focused probing beam, which suppresses spectrum sidelobes relative
        // to the random-phase policy at the same power.
        let s = st_scenario(80);
        let (tx, rx) = s.grids().unwrap();
        let focused = probe(&s, s.power_budget_a2.sqrt());
        let random = crate::baselines::random_policy_current(&tx, 11)
            .scaled(Complex64::from(s.power_budget_a2.sqrt()));
        let truth = s.targets[0].position;
        let step = 0.02;
        let psr = |current: &CurrentFunction| -> f64 {
            let ws = MleWorkspace::synthesize_noiseless(&s, &tx, &rx, current).unwrap();
            let points =
                spectrum_sweep(SweepAxis::X, truth.x - 1.0, truth.x + 1.0, step, truth, &ws)
                    .unwrap();
            let peak = points.iter().map(|p| p.value).fold(0.0f64, f64::max);
            let sidelobe = points
                .iter()
                .filter(|p| (p.candidate_position.x - truth.x).abs() > 0.15)
                .map(|p| p.value)
                .fold(0.0f64, f64::max);
            peak / sidelobe
        };
        let psr_focused = psr(&focused);
        let psr_random = psr(&random);
        assert!(
            psr_focused > psr_random,
            "focused PSR {psr_focused} should exceed random PSR {psr_random}"
        );
    }

    #[test]
    fn nmse_decays_with_step_then_floors_on_noise() {
        // SNR lowered until the noise floor sits above the quantization bias
        // at the finest step, exposing both regimes of the error curve.
        let s = {
            let base = scenario_from_table1();
            let one = base.with_targets(vec![base.targets[1]]).unwrap();
            Scenario::new(
                one.constants.frequency_hz,
                one.constants.impedance_eta0,
                one.tx,
                one.rx,
                one.targets.clone(),
                one.power_budget_a2,
                7.0e10, // noise raised so the floor is visible at desk scale
                40,
                40,
            )
            .unwrap()
        };
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        let out = nmse_vs_step(
            &[0.2, 0.01, 0.0025],
            &s,
            &tx,
            &rx,
            &current,
            40,
            0.5,
            false,
            17,
        )
        .unwrap();
        let coarse = out[0].1;
        let fine = out[1].1;
        let finest = out[2].1;
        assert!(coarse > fine, "coarse {coarse} should exceed fine {fine}");
        // Floor: the finest-step error stays above ten times the worst
        // possible quantization bias, so it is noise-limited, not grid-limited.
        let truth_norm_sq = s.targets[0].position.norm_squared();
        let max_quant = (0.0025f64 / 2.0).powi(2) / truth_norm_sq;
        assert!(
            finest > 10.0 * max_quant,
            "finest NMSE {finest} should sit on the noise floor (quant bound {max_quant})"
        );
    }

    #[test]
    fn nmse_requires_single_target() {
        let s = scenario_from_table1().with_gl_points(12).unwrap();
        let (tx, rx) = s.grids().unwrap();
        let current = probe(&s, 0.01);
        assert!(nmse_vs_step(&[0.1], &s, &tx, &rx, &current, 1, 0.5, true, 0).is_err());
    }
}
