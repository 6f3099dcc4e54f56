//! Experiment runners: deterministic, seedable sweeps that emit CSV.
//!
//! Every runner produces a [`CsvDoc`] whose first line is a comment carrying
//! a hash of the inputs, so reruns with the same configuration and seed are
//! byte-identical and mismatched artifacts are easy to spot.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::baselines::{optimized_crb_on_grids, random_policy_current, spda_crb, beam_pattern};
use crate::channel::CurrentFunction;
use crate::estimator::{nmse_vs_step, spectrum_sweep, MleWorkspace, SweepAxis};
use crate::fisher::{crb_trace, crb_trace_for_current, CrossMatrices};
use crate::geometry::{Scenario, Target};
use crate::optimizer::{random_feasible_weights, smgd, SmgdConfig};
use crate::{Error, Result};

/// Probing-current policy for experiments that compare design strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbePolicy {
    /// CRB-optimized subspace current.
    Optimized,
    /// Constant-modulus random-phase current at the same power budget.
    RandomPhase,
}

impl std::fmt::Display for ProbePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProbePolicy::Optimized => write!(f, "optimized"),
            ProbePolicy::RandomPhase => write!(f, "random"),
        }
    }
}

/// 64-bit FNV-1a, used for the config-hash comment line.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Canonical fingerprint of the inputs that determine an experiment.
fn config_hash(scenario: &Scenario, seed: u64, extra: &str) -> u64 {
    let s = format!(
        "f={:?};eta0={:?};tx={:?},{:?},{:?},{:?};rx={:?},{:?},{:?},{:?};targets={:?};P={:?};noise={:?};gl={}x{};seed={seed};{extra}",
        scenario.constants.frequency_hz,
        scenario.constants.impedance_eta0,
        scenario.tx.w_min,
        scenario.tx.w_max,
        scenario.tx.h_min,
        scenario.tx.h_max,
        scenario.rx.w_min,
        scenario.rx.w_max,
        scenario.rx.h_min,
        scenario.rx.h_max,
        scenario
            .targets
            .iter()
            .map(|t| (t.position.x, t.position.y, t.position.z, t.reflection.re, t.reflection.im))
            .collect::<Vec<_>>(),
        scenario.power_budget_a2,
        scenario.noise_power,
        scenario.quad_points_x,
        scenario.quad_points_y,
    );
    fnv1a64(s.as_bytes())
}

/// A rendered CSV artifact: hash comment, header row, data rows.
#[derive(Debug, Clone)]
pub struct CsvDoc {
    pub config_hash: u64,
    pub header: String,
    pub rows: Vec<String>,
}

impl CsvDoc {
    fn new(config_hash: u64, header: &str) -> Self {
        Self {
            config_hash,
            header: header.to_string(),
            rows: Vec::new(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# config_hash={:016x}\n", self.config_hash));
        out.push_str(&self.header);
        out.push('\n');
        for row in &self.rows {
            out.push_str(row);
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: &std::path::Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Random complex weight vector (not power-normalized) for integration
/// convergence studies.
fn unnormalized_random_weights(n: usize, seed: u64) -> DVector<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    })
}

/// Convergence of the aperture integrals with the per-axis point count:
/// CRB value and transmit power for one fixed random `w`, per grid order.
pub fn run_gl_convergence(scenario: &Scenario, seed: u64, n_values: &[usize]) -> Result<CsvDoc> {
    let hash = config_hash(scenario, seed, &format!("gl-convergence;n={n_values:?}"));
    let mut doc = CsvDoc::new(hash, "n_points,crb_integral_value,power_integral_value");
    let w = unnormalized_random_weights(scenario.n_targets(), seed);
    for &n in n_values {
        let s = scenario.with_gl_points(n)?;
        let (tx, rx) = s.grids()?;
        let cross = CrossMatrices::assemble(&s, &tx, &rx)?;
        let crb = crb_trace(&w, &cross, s.noise_power)?.value;
        let power = w.dotc(&(&cross.b0 * &w)).re;
        doc.rows.push(format!("{n},{},{}", fmt(crb), fmt(power)));
    }
    Ok(doc)
}

/// Output of a single optimization run: iteration trace and final weights.
#[derive(Debug)]
pub struct OptimizeOutput {
    pub trace_csv: CsvDoc,
    pub weights_csv: CsvDoc,
    pub best_objective: f64,
    pub cross: CrossMatrices,
    pub weights: DVector<Complex64>,
}

/// One SMGD run on the scenario as configured.
pub fn run_optimize(scenario: &Scenario, seed: u64, config: &SmgdConfig) -> Result<OptimizeOutput> {
    let hash = config_hash(
        scenario,
        seed,
        &format!("optimize;rule={}", config.direction_rule),
    );
    let (tx, rx) = scenario.grids()?;
    let cross = CrossMatrices::assemble(scenario, &tx, &rx)?;
    let w0 = random_feasible_weights(
        scenario.n_targets(),
        &cross.b0,
        scenario.power_budget_a2,
        seed,
    )?;
    let (w, trace) = smgd(scenario, &cross, config, &w0)?;

    let mut trace_csv = CsvDoc::new(hash, "iter,objective,grad_norm,step");
    for r in &trace.records {
        trace_csv.rows.push(format!(
            "{},{},{},{}",
            r.iteration,
            fmt(r.objective),
            fmt(r.grad_norm),
            fmt(r.step)
        ));
    }
    let mut weights_csv = CsvDoc::new(hash, "re,im");
    for v in w.iter() {
        weights_csv.rows.push(format!("{},{}", fmt(v.re), fmt(v.im)));
    }
    Ok(OptimizeOutput {
        trace_csv,
        weights_csv,
        best_objective: trace.best_objective(),
        cross,
        weights: w,
    })
}

/// Scenario with the single target `idx` kept (for single-target studies).
pub fn single_target_scenario(scenario: &Scenario, idx: usize) -> Result<Scenario> {
    let t = scenario
        .targets
        .get(idx)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("no target with index {idx}")))?;
    scenario.with_targets(vec![t])
}

/// Probing current for a policy, at the scenario's power budget. For the
/// optimized policy the returned weights parameterize the subspace current.
pub fn policy_current(
    scenario: &Scenario,
    policy: ProbePolicy,
    config: &SmgdConfig,
    seed: u64,
) -> Result<CurrentFunction> {
    let (tx, rx) = scenario.grids()?;
    match policy {
        ProbePolicy::Optimized => {
            let (_, w, _) = optimized_crb_on_grids(scenario, &tx, &rx, config, seed)?;
            Ok(CurrentFunction::subspace(
                scenario.target_positions(),
                scenario.constants.wavenumber_k0,
                w.iter().copied().collect(),
            ))
        }
        ProbePolicy::RandomPhase => Ok(random_policy_current(&tx, seed)
            .scaled(Complex64::from(scenario.power_budget_a2.sqrt()))),
    }
}

/// CRB landscape over the XOZ plane for a single target placed at each grid
/// node; emits `log10` of the optimized (or fixed-current) trace.
pub fn run_crb_map(
    scenario: &Scenario,
    seed: u64,
    xs: &[f64],
    zs: &[f64],
    policy: ProbePolicy,
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let base = single_target_scenario(scenario, 0)?;
    let hash = config_hash(
        &base,
        seed,
        &format!("crb-map;policy={policy};xs={xs:?};zs={zs:?}"),
    );
    let mut doc = CsvDoc::new(hash, "x_m,z_m,log10_crb");
    let (tx, rx) = base.grids()?;
    let alpha = base.targets[0].reflection;
    let fixed_current = match policy {
        ProbePolicy::RandomPhase => Some(
            random_policy_current(&tx, seed)
                .scaled(Complex64::from(base.power_budget_a2.sqrt())),
        ),
        ProbePolicy::Optimized => None,
    };
    for &x in xs {
        for &z in zs {
            let s = base.with_targets(vec![Target::new(Vector3::new(x, 0.0, z), alpha)?])?;
            let value = match &fixed_current {
                Some(current) => crb_trace_for_current(current, &s, &tx, &rx)?.value,
                None => optimized_crb_on_grids(&s, &tx, &rx, config, seed)?.0,
            };
            doc.rows
                .push(format!("{},{},{}", fmt(x), fmt(z), fmt(value.log10())));
        }
    }
    Ok(doc)
}

/// Likelihood spectra along the x and z axes around the true position of a
/// chosen target.
#[allow(clippy::too_many_arguments)]
pub fn run_mle_spectrum(
    scenario: &Scenario,
    target_idx: usize,
    seed: u64,
    policy: ProbePolicy,
    window_halfwidth: f64,
    step: f64,
    noiseless: bool,
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let s = single_target_scenario(scenario, target_idx)?;
    let hash = config_hash(
        &s,
        seed,
        &format!("mle-spectrum;policy={policy};w={window_halfwidth};step={step};noiseless={noiseless}"),
    );
    let mut doc = CsvDoc::new(hash, "axis,coordinate_m,spectrum_value");
    let (tx, rx) = s.grids()?;
    let current = policy_current(&s, policy, config, seed)?;
    let ws = if noiseless {
        MleWorkspace::synthesize_noiseless(&s, &tx, &rx, &current)?
    } else {
        MleWorkspace::synthesize_noisy(&s, &tx, &rx, &current, seed)?
    };
    let truth = s.targets[0].position;
    for axis in [SweepAxis::X, SweepAxis::Z] {
        let c0 = truth[if axis == SweepAxis::X { 0 } else { 2 }];
        let points = spectrum_sweep(
            axis,
            c0 - window_halfwidth,
            c0 + window_halfwidth,
            step,
            truth,
            &ws,
        )?;
        for p in points {
            let coord = p.candidate_position[if axis == SweepAxis::X { 0 } else { 2 }];
            doc.rows
                .push(format!("{axis},{},{}", fmt(coord), fmt(p.value)));
        }
    }
    Ok(doc)
}

/// Positioning error versus grid-search step size.
#[allow(clippy::too_many_arguments)]
pub fn run_nmse_step(
    scenario: &Scenario,
    target_idx: usize,
    seed: u64,
    policy: ProbePolicy,
    steps: &[f64],
    trials: usize,
    window_halfwidth: f64,
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let s = single_target_scenario(scenario, target_idx)?;
    let hash = config_hash(
        &s,
        seed,
        &format!("nmse-step;policy={policy};steps={steps:?};trials={trials};w={window_halfwidth}"),
    );
    let mut doc = CsvDoc::new(hash, "step_m,nmse");
    let (tx, rx) = s.grids()?;
    let current = policy_current(&s, policy, config, seed)?;
    let table = nmse_vs_step(
        steps,
        &s,
        &tx,
        &rx,
        &current,
        trials,
        window_halfwidth,
        false,
        seed,
    )?;
    for (step, nmse) in table {
        doc.rows.push(format!("{},{}", fmt(step), fmt(nmse)));
    }
    Ok(doc)
}

/// Optimized CRB versus transmit power budget.
pub fn run_sweep_power(
    scenario: &Scenario,
    seed: u64,
    powers_a2: &[f64],
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let hash = config_hash(scenario, seed, &format!("sweep-power;powers={powers_a2:?}"));
    let mut doc = CsvDoc::new(hash, "power_A2,crb_trace");
    let (tx, rx) = scenario.grids()?;
    // Cross-integral matrices are power-independent; reuse them.
    let cross = CrossMatrices::assemble(scenario, &tx, &rx)?;
    for &p in powers_a2 {
        let s = scenario.with_power(p)?;
        let w0 = random_feasible_weights(s.n_targets(), &cross.b0, p, seed)?;
        let (_, trace) = smgd(&s, &cross, config, &w0)?;
        doc.rows
            .push(format!("{},{}", fmt(p), fmt(trace.best_objective())));
    }
    Ok(doc)
}

/// Optimized CRB versus carrier frequency.
pub fn run_sweep_frequency(
    scenario: &Scenario,
    seed: u64,
    freqs_ghz: &[f64],
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let hash = config_hash(scenario, seed, &format!("sweep-frequency;f={freqs_ghz:?}"));
    let mut doc = CsvDoc::new(hash, "frequency_ghz,crb_trace");
    for &f in freqs_ghz {
        let s = scenario.with_frequency(f * 1.0e9)?;
        let (tx, rx) = s.grids()?;
        let (crb, _, _) = optimized_crb_on_grids(&s, &tx, &rx, config, seed)?;
        doc.rows.push(format!("{},{}", fmt(f), fmt(crb)));
    }
    Ok(doc)
}

/// Continuous versus half-wavelength-discrete aperture at the same geometry;
/// returns the CSV and the SPDA/CAPA trace ratio.
pub fn run_compare_spda(
    scenario: &Scenario,
    seed: u64,
    config: &SmgdConfig,
) -> Result<(CsvDoc, f64)> {
    let hash = config_hash(scenario, seed, "compare-spda");
    let mut doc = CsvDoc::new(hash, "architecture,crb_trace,tx_elements,rx_elements");
    let (tx, rx) = scenario.grids()?;
    let (capa, _, _) = optimized_crb_on_grids(scenario, &tx, &rx, config, seed)?;
    let spda = spda_crb(scenario, config, seed)?;
    doc.rows.push(format!(
        "capa,{},{},{}",
        fmt(capa),
        tx.len(),
        rx.len()
    ));
    doc.rows.push(format!(
        "spda,{},{},{}",
        fmt(spda.crb_trace),
        spda.tx_elements,
        spda.rx_elements
    ));
    Ok((doc, spda.crb_trace / capa))
}

/// Robustness to initial-position error: optimize for a perturbed target,
/// evaluate the achieved CRB at the true one.
pub fn run_robustness(
    scenario: &Scenario,
    target_idx: usize,
    seed: u64,
    offsets: &[f64],
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let truth_scenario = single_target_scenario(scenario, target_idx)?;
    let hash = config_hash(
        &truth_scenario,
        seed,
        &format!("robustness;offsets={offsets:?}"),
    );
    let mut doc = CsvDoc::new(hash, "axis,offset_m,crb_at_truth");
    let (tx, rx) = truth_scenario.grids()?;
    let truth = truth_scenario.targets[0];
    for (axis_name, axis_idx) in [("x", 0usize), ("y", 1usize), ("z", 2usize)] {
        for &offset in offsets {
            let mut pos = truth.position;
            pos[axis_idx] += offset;
            let perturbed =
                truth_scenario.with_targets(vec![Target::new(pos, truth.reflection)?])?;
            let (_, w, _) = optimized_crb_on_grids(&perturbed, &tx, &rx, config, seed)?;
            let current = CurrentFunction::subspace(
                perturbed.target_positions(),
                perturbed.constants.wavenumber_k0,
                w.iter().copied().collect(),
            );
            let at_truth = crb_trace_for_current(&current, &truth_scenario, &tx, &rx)?.value;
            doc.rows
                .push(format!("{axis_name},{},{}", fmt(offset), fmt(at_truth)));
        }
    }
    Ok(doc)
}

/// Normalized transmit beam pattern of the optimized current over an XOZ
/// evaluation grid.
pub fn run_beam_pattern(
    scenario: &Scenario,
    seed: u64,
    xs: &[f64],
    zs: &[f64],
    config: &SmgdConfig,
) -> Result<CsvDoc> {
    let hash = config_hash(scenario, seed, &format!("beam-pattern;xs={xs:?};zs={zs:?}"));
    let mut doc = CsvDoc::new(hash, "x_m,z_m,value_normalized");
    let (tx, rx) = scenario.grids()?;
    let (_, w, _) = optimized_crb_on_grids(scenario, &tx, &rx, config, seed)?;
    let mut plane = Vec::with_capacity(xs.len() * zs.len());
    for &x in xs {
        for &z in zs {
            plane.push((x, z));
        }
    }
    let values = beam_pattern(&w, &plane, scenario, &tx)?;
    for ((x, z), v) in plane.into_iter().zip(values) {
        doc.rows.push(format!("{},{},{}", fmt(x), fmt(z), fmt(v)));
    }
    Ok(doc)
}

/// Evenly spaced values including both endpoints.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![start];
    }
    let step = (stop - start) / (count - 1) as f64;
    (0..count).map(|i| start + step * i as f64).collect()
}
