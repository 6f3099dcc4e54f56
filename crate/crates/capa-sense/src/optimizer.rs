//! Subspace manifold gradient descent (SMGD): Riemannian conjugate gradient
//! on the power ellipsoid `M = {w : wᴴ B₀ w = P}` with Armijo backtracking.
//!
//! The manifold is a real hypersurface of `ℂᴺ`; its tangent space at `w` is
//! `{η : Re{wᴴ B₀ η} = 0}` with normal direction `B₀ w`. Gradients and
//! transported directions are orthogonal projections onto that plane, the
//! retraction rescales back to the constraint surface, and search directions
//! follow Fletcher–Reeves, Polak–Ribière (non-negative), or plain steepest
//! descent.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fisher::{crb_trace, euclidean_grad_f, CrossMatrices};
use crate::geometry::Scenario;
use crate::{Error, Result};

/// Conjugate-direction update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectionRule {
    FletcherReeves,
    PolakRibiere,
    Plain,
}

impl std::fmt::Display for DirectionRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DirectionRule::FletcherReeves => write!(f, "fr"),
            DirectionRule::PolakRibiere => write!(f, "pr"),
            DirectionRule::Plain => write!(f, "plain"),
        }
    }
}

/// Tuning knobs for [`smgd`]; the defaults mirror the reference settings
/// (`c = 1e-4`, `τ = 0.5`, fallback step `1e-6`).
#[derive(Debug, Clone)]
pub struct SmgdConfig {
    pub armijo_c: f64,
    pub armijo_tau: f64,
    pub armijo_max_iter: usize,
    pub fallback_step: f64,
    pub initial_step: f64,
    /// Stop when consecutive search directions differ by less than this,
    /// relative to the initial direction norm (the objective spans many
    /// orders of magnitude across scenarios, so absolute thresholds would
    /// be meaningless).
    pub tolerance_delta: f64,
    /// Secondary stop on the Riemannian gradient norm, relative to the
    /// initial gradient norm.
    pub grad_tolerance: f64,
    pub max_iter: usize,
    pub direction_rule: DirectionRule,
}

impl Default for SmgdConfig {
    fn default() -> Self {
        Self {
            armijo_c: 1e-4,
            armijo_tau: 0.5,
            armijo_max_iter: 30,
            fallback_step: 1e-6,
            initial_step: 1.0,
            tolerance_delta: 1e-6,
            grad_tolerance: 1e-8,
            max_iter: 200,
            direction_rule: DirectionRule::FletcherReeves,
        }
    }
}

impl SmgdConfig {
    pub fn with_rule(rule: DirectionRule) -> Self {
        Self {
            direction_rule: rule,
            ..Self::default()
        }
    }
}

/// One optimizer step as recorded in the trace.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// False when the Armijo search exhausted its budget and the fallback
    /// step was taken (the objective may then increase).
    pub armijo_accepted: bool,
}

/// Per-iteration history of one SMGD run.
#[derive(Debug, Clone, Default)]
pub struct SmgdTrace {
    pub records: Vec<IterationRecord>,
}

impl SmgdTrace {
    pub fn initial_objective(&self) -> f64 {
        self.records.first().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map(|r| r.objective).unwrap_or(f64::NAN)
    }

    pub fn best_objective(&self) -> f64 {
        self.records
            .iter()
            .fold(f64::INFINITY, |m, r| m.min(r.objective))
    }

    /// The objective never increased across accepted Armijo steps.
    pub fn monotone_over_accepted_steps(&self) -> bool {
        self.records.windows(2).all(|pair| {
            !pair[1].armijo_accepted || pair[1].objective <= pair[0].objective
        })
    }
}

/// Orthogonal projection onto the tangent plane at `w`:
/// `v - (Re{wᴴB₀v} / ‖B₀w‖²) B₀w`, which zeroes `Re{wᴴB₀·}` exactly and
/// leaves already-tangent vectors untouched.
pub fn project_tangent(
    w: &DVector<Complex64>,
    v: &DVector<Complex64>,
    b0: &DMatrix<Complex64>,
) -> DVector<Complex64> {
    let b0w = b0 * w;
    let denom = b0w.norm_squared();
    if denom == 0.0 {
        return v.clone();
    }
    let coeff = w.dotc(&(b0 * v)).re / denom;
    v - b0w * Complex64::from(coeff)
}

/// Riemannian gradient: tangent projection of the Euclidean gradient.
pub fn riemannian_grad(
    w: &DVector<Complex64>,
    euclidean_grad: &DVector<Complex64>,
    b0: &DMatrix<Complex64>,
) -> DVector<Complex64> {
    project_tangent(w, euclidean_grad, b0)
}

/// Retraction: rescale `w + step·d` back onto `{wᴴB₀w = P}`.
pub fn retract(
    w: &DVector<Complex64>,
    d: &DVector<Complex64>,
    step: f64,
    b0: &DMatrix<Complex64>,
    power: f64,
) -> Result<DVector<Complex64>> {
    let v = w + d * Complex64::from(step);
    let norm_sq = v.dotc(&(b0 * &v)).re;
    if norm_sq <= 0.0 || !norm_sq.is_finite() {
        return Err(Error::InvalidArgument(
            "retraction target has no positive power; step collapsed the iterate".into(),
        ));
    }
    Ok(v * Complex64::from((power / norm_sq).sqrt()))
}

/// Transport a direction into the tangent space at `w_new` (orthogonal
/// projection, the standard choice for embedded ellipsoids).
pub fn transport(
    w_new: &DVector<Complex64>,
    d_old: &DVector<Complex64>,
    b0: &DMatrix<Complex64>,
) -> DVector<Complex64> {
    project_tangent(w_new, d_old, b0)
}

/// Conjugate search direction from the new/old gradients and the transported
/// previous direction. Any non-descent result resets to steepest descent.
pub fn search_direction(
    eta_new: &DVector<Complex64>,
    eta_old: &DVector<Complex64>,
    d_old_transported: &DVector<Complex64>,
    rule: DirectionRule,
) -> DVector<Complex64> {
    let denom = eta_old.norm_squared();
    let mut beta = match rule {
        DirectionRule::Plain => 0.0,
        DirectionRule::FletcherReeves => eta_new.norm_squared() / denom,
        DirectionRule::PolakRibiere => {
            let diff = eta_new - eta_old;
            (eta_new.dotc(&diff).re / denom).max(0.0)
        }
    };
    if !beta.is_finite() {
        beta = 0.0;
    }
    let mut d = -eta_new + d_old_transported * Complex64::from(beta);
    if d.dotc(eta_new).re >= 0.0 {
        d = -eta_new;
    }
    d
}

/// Result of one Armijo backtracking search.
#[derive(Debug, Clone, Copy)]
pub struct ArmijoOutcome {
    pub step: f64,
    pub accepted: bool,
    /// Objective at the retracted candidate for the returned step.
    pub objective: f64,
    pub evaluations: usize,
}

/// Backtracking line search: accept the largest `υ = υ₀ τᵏ` with
/// `F(retr(w + υd)) ≤ F(w) + c υ Re{ηᴴd}`; fall back to the configured tiny
/// step when the budget is exhausted.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search<F>(
    objective: &F,
    w: &DVector<Complex64>,
    f_w: f64,
    eta: &DVector<Complex64>,
    d: &DVector<Complex64>,
    b0: &DMatrix<Complex64>,
    power: f64,
    config: &SmgdConfig,
    initial_step: f64,
) -> Result<ArmijoOutcome>
where
    F: Fn(&DVector<Complex64>) -> Result<f64>,
{
    let slope = eta.dotc(d).re;
    let mut step = initial_step;
    let mut evaluations = 0;
    for _ in 0..=config.armijo_max_iter {
        let candidate = retract(w, d, step, b0, power)?;
        let f_cand = objective(&candidate)?;
        evaluations += 1;
        if f_cand <= f_w + config.armijo_c * step * slope {
            return Ok(ArmijoOutcome {
                step,
                accepted: true,
                objective: f_cand,
                evaluations,
            });
        }
        step *= config.armijo_tau;
    }
    let fallback = retract(w, d, config.fallback_step, b0, power)?;
    let objective = objective(&fallback)?;
    Ok(ArmijoOutcome {
        step: config.fallback_step,
        accepted: false,
        objective,
        evaluations: evaluations + 1,
    })
}

/// Random feasible starting point: standard complex normal entries retracted
/// onto the power ellipsoid.
pub fn random_feasible_weights(
    n: usize,
    b0: &DMatrix<Complex64>,
    power: f64,
    seed: u64,
) -> Result<DVector<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = DVector::from_fn(n, |_, _| {
        Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
    });
    retract(&raw, &DVector::zeros(n), 0.0, b0, power)
}

/// Minimize `F(w) = Tr{CRB}` over the power ellipsoid.
///
/// Runs the conjugate-gradient loop (gradient → Armijo → retraction →
/// transport → direction update) until consecutive directions stabilize, the
/// gradient vanishes, or the iteration budget runs out. Returns the
/// best-seen iterate with the full trace.
pub fn smgd(
    scenario: &Scenario,
    cross: &CrossMatrices,
    config: &SmgdConfig,
    w0: &DVector<Complex64>,
) -> Result<(DVector<Complex64>, SmgdTrace)> {
    let b0 = &cross.b0;
    let power = scenario.power_budget_a2;
    let noise = scenario.noise_power;
    let objective = |w: &DVector<Complex64>| crb_trace(w, cross, noise).map(|c| c.value);

    // Feasible start even if w0 is off the ellipsoid.
    let mut w = retract(w0, &DVector::zeros(w0.len()), 0.0, b0, power)?;
    let mut f_curr = objective(&w)?;
    let mut eta = riemannian_grad(&w, &euclidean_grad_f(&w, cross, noise)?, b0);
    let mut d = -eta.clone();

    let mut trace = SmgdTrace::default();
    trace.records.push(IterationRecord {
        iteration: 0,
        objective: f_curr,
        grad_norm: eta.norm(),
        step: 0.0,
        armijo_accepted: true,
    });
    let mut best_w = w.clone();
    let mut best_f = f_curr;
    let mut warm_step = config.initial_step;
    let eta0_norm = eta.norm();
    let d0_norm = d.norm();

    for k in 0..config.max_iter {
        if eta.norm() <= config.grad_tolerance * eta0_norm {
            break;
        }
        if eta.dotc(&d).re >= 0.0 {
            d = -eta.clone();
        }
        let outcome = armijo_search(
            &objective, &w, f_curr, &eta, &d, b0, power, config, warm_step,
        )?;
        let w_new = retract(&w, &d, outcome.step, b0, power)?;
        let f_new = outcome.objective;
        let eta_new = riemannian_grad(&w_new, &euclidean_grad_f(&w_new, cross, noise)?, b0);
        let d_transported = transport(&w_new, &d, b0);
        let d_new = search_direction(&eta_new, &eta, &d_transported, config.direction_rule);
        let direction_shift = (&d_new - &d).norm();

        trace.records.push(IterationRecord {
            iteration: k + 1,
            objective: f_new,
            grad_norm: eta_new.norm(),
            step: outcome.step,
            armijo_accepted: outcome.accepted,
        });
        if f_new < best_f {
            best_f = f_new;
            best_w = w_new.clone();
        }
        if outcome.accepted {
            // Warm-start the next search at twice the accepted step; the
            // natural step scale is |w|/‖d‖, which the doubling reaches in a
            // few dozen iterations from any initial guess.
            warm_step = 2.0 * outcome.step;
        }
        w = w_new;
        eta = eta_new;
        d = d_new;
        f_curr = f_new;

        if direction_shift < config.tolerance_delta * d0_norm {
            break;
        }
    }

    Ok((best_w, trace))
}
