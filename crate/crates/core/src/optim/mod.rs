//! The four mapping-design procedures and the OPTA bound.
//!
//! - [`greedy_descent`]: alternating decoder updates and encoder gradient
//!   steps with backtracking, from a given initial table.
//! - [`ncr`]: noisy-channel relaxation, a homotopy over a decreasing lambda
//!   schedule with warm starts.
//! - [`anneal`]: deterministic annealing over randomized piecewise-affine
//!   encoders.
//! - [`linear_baseline`] and [`opta`]: the closed-form reference points.
//!
//! [`lambda_search`] tunes the power multiplier so an optimizer meets a
//! transmit power target.

mod annealing;

pub use annealing::{
    anneal, duplicate_and_perturb, split_check, AnnealConfig, AnnealOutcome, DaState,
};

use serde::{Deserialize, Serialize};

use crate::codec::{DecoderTable, TabulatedEncoder};
use crate::cost::{bayes_decoder, evaluate_tabulated_costs, functional_gradient, CostReport};
use crate::error::{Error, Result};
use crate::gauss::{default_grids, GridSet, SourceChannelModel};

/// Configuration of the greedy descent loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Power multiplier lambda in J = D + lambda P.
    pub lambda: f64,
    /// Initial step size mu for each gradient step.
    pub step_size: f64,
    /// Maximum number of outer iterations.
    pub max_iters: usize,
    /// Relative cost-decrease threshold that ends the loop.
    pub conv_tol: f64,
    /// Step shrink factor during backtracking.
    pub backtrack_factor: f64,
}

impl GreedyConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::invalid("step_size", "must be positive"));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(Error::invalid("backtrack_factor", "must lie in (0, 1)"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be at least 1"));
        }
        if !(self.conv_tol >= 0.0) {
            return Err(Error::invalid("conv_tol", "must be non-negative"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be non-negative"));
        }
        Ok(())
    }
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            step_size: 1.0,
            max_iters: 200,
            conv_tol: 1e-6,
            backtrack_factor: 0.5,
        }
    }
}

/// Maximum number of step halvings before a gradient step is abandoned.
const MAX_BACKTRACK_HALVINGS: usize = 40;

/// One record of an optimization trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub outer_step: usize,
    pub temperature: f64,
    pub effective_k: usize,
    pub report: CostReport,
    /// Free-energy values across the inner loop of this outer step
    /// (annealing only; empty for the other methods).
    pub inner_free_energies: Vec<f64>,
}

/// Ordered per-step records of an optimizer run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizationTrace {
    pub fn push(&mut self, record: TraceRecord) {
        if let Some(last) = self.records.last() {
            debug_assert!(
                record.temperature <= last.temperature,
                "trace temperatures must be non-increasing"
            );
        }
        self.records.push(record);
    }
}

/// Result of a greedy descent run.
#[derive(Debug, Clone)]
pub struct GreedyOutcome {
    pub encoder: TabulatedEncoder,
    pub decoder: DecoderTable,
    pub report: CostReport,
    pub iterations: usize,
    /// True when the loop ended by cost-decrease tolerance or exhausted
    /// backtracking rather than by the iteration cap.
    pub converged: bool,
    /// Lagrangian after the initial decoder update and after each accepted
    /// iteration; non-increasing.
    pub cost_trace: Vec<f64>,
}

/// Alternating decoder update / encoder gradient step with backtracking.
///
/// Each iteration takes a gradient step on the encoder table, halving the
/// step until the Lagrangian decreases under the fixed decoder, then
/// refreshes the Bayes decoder. The returned Lagrangian never exceeds the
/// initial one.
pub fn greedy_descent(
    init: &TabulatedEncoder,
    cfg: &GreedyConfig,
    model: &SourceChannelModel,
    grids: &GridSet,
) -> Result<GreedyOutcome> {
    cfg.validate()?;
    let mut enc = init.clone();
    let mut dec = bayes_decoder((&enc).into(), model, grids)?;
    let mut report = evaluate_tabulated_costs(&enc, &dec, model, grids, cfg.lambda)?;
    let mut cost_trace = vec![report.lagrangian];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iters {
        let grad = functional_gradient(&enc, &dec, model, grids, cfg.lambda)?;
        let mut mu = cfg.step_size;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACK_HALVINGS {
            let mut trial = enc.clone();
            for (g, d) in trial.g_values_mut().iter_mut().zip(&grad) {
                *g -= mu * d;
            }
            let trial_report = evaluate_tabulated_costs(&trial, &dec, model, grids, cfg.lambda)?;
            if trial_report.lagrangian < report.lagrangian {
                accepted = Some((trial, trial_report));
                break;
            }
            mu *= cfg.backtrack_factor;
        }
        let Some((trial, trial_report)) = accepted else {
            // No descent direction left at this resolution.
            converged = true;
            break;
        };
        iterations += 1;
        enc = trial;
        let new_dec = bayes_decoder((&enc).into(), model, grids)?;
        let new_report = evaluate_tabulated_costs(&enc, &new_dec, model, grids, cfg.lambda)?;
        if new_report.lagrangian <= trial_report.lagrangian {
            dec = new_dec;
            report = new_report;
        } else {
            // Quadrature noise: keep the previous decoder.
            report = trial_report;
            converged = true;
        }
        let prev = *cost_trace.last().expect("trace non-empty");
        cost_trace.push(report.lagrangian);
        if prev - report.lagrangian < cfg.conv_tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
        }
        if converged {
            break;
        }
    }

    Ok(GreedyOutcome {
        encoder: enc,
        decoder: dec,
        report,
        iterations,
        converged,
        cost_trace,
    })
}

/// Noisy-channel relaxation: greedy descent along a strictly decreasing
/// lambda schedule, warm-starting each stage from the previous solution.
pub fn ncr(
    lambda_schedule: &[f64],
    cfg_template: &GreedyConfig,
    init: &TabulatedEncoder,
    model: &SourceChannelModel,
    grids: &GridSet,
) -> Result<(TabulatedEncoder, DecoderTable, OptimizationTrace)> {
    if lambda_schedule.is_empty() {
        return Err(Error::invalid("lambda_schedule", "must be non-empty"));
    }
    if lambda_schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid(
            "lambda_schedule",
            "must be strictly decreasing",
        ));
    }
    let mut enc = init.clone();
    let mut trace = OptimizationTrace::default();
    let mut last = None;
    for (stage, &lambda) in lambda_schedule.iter().enumerate() {
        let cfg = GreedyConfig {
            lambda,
            ..*cfg_template
        };
        let out = greedy_descent(&enc, &cfg, model, grids)?;
        enc = out.encoder.clone();
        trace.push(TraceRecord {
            outer_step: stage,
            temperature: 0.0,
            effective_k: 1,
            report: out.report,
            inner_free_energies: Vec::new(),
        });
        last = Some(out);
    }
    let out = last.expect("at least one stage");
    Ok((out.encoder, out.decoder, trace))
}

/// Distortion of the best linear encoder/decoder pair at transmit power P.
pub fn linear_distortion(model: &SourceChannelModel, power: f64) -> f64 {
    let a2 = 1.0 - model.rho * model.rho;
    model.sigma_x2 * a2 / (1.0 + (power / model.sigma_n2) * a2)
}

/// Stationary power multiplier of the linear family at power P:
/// lambda = -dD_lin/dP.
pub fn linear_lambda_for_power(model: &SourceChannelModel, power: f64) -> f64 {
    let a = model.sigma_x2 * (1.0 - model.rho * model.rho);
    let b = (1.0 - model.rho * model.rho) / model.sigma_n2;
    let denom = 1.0 + b * power;
    a * b / (denom * denom)
}

/// Power at which the linear family is stationary for the given lambda;
/// zero when lambda is too large for any positive-power solution.
pub fn linear_power_for_lambda(model: &SourceChannelModel, lambda: f64) -> f64 {
    let a = model.sigma_x2 * (1.0 - model.rho * model.rho);
    let b = (1.0 - model.rho * model.rho) / model.sigma_n2;
    if !(lambda > 0.0) || b == 0.0 {
        return 0.0;
    }
    ((a * b / lambda).sqrt() - 1.0).max(0.0) / b
}

/// Linear MMSE coefficients for estimating X from (Y, Z) with Y = a X + N,
/// by 2x2 covariance inversion; returns (beta_y, beta_z, mmse).
pub fn linear_mmse_coefficients(model: &SourceChannelModel, slope: f64) -> (f64, f64, f64) {
    let sx2 = model.sigma_x2;
    let sxz = model.rho * model.sigma_x() * model.sigma_z();
    let c_xy = slope * sx2;
    let c_xz = sxz;
    let s_yy = slope * slope * sx2 + model.sigma_n2;
    let s_yz = slope * sxz;
    let s_zz = model.sigma_z2;
    let det = s_yy * s_zz - s_yz * s_yz;
    let beta_y = (c_xy * s_zz - c_xz * s_yz) / det;
    let beta_z = (c_xz * s_yy - c_xy * s_yz) / det;
    let mmse = sx2 - (beta_y * c_xy + beta_z * c_xz);
    (beta_y, beta_z, mmse)
}

/// The linear mapping: encoder g(x) = sqrt(P / sigma_x^2) x and the matching
/// linear MMSE decoder, tabulated on the given grids.
pub fn linear_baseline_on(
    model: &SourceChannelModel,
    power: f64,
    grids: &GridSet,
) -> Result<(TabulatedEncoder, DecoderTable, f64)> {
    model.validate()?;
    if !(power > 0.0) {
        return Err(Error::invalid("power", "must be positive"));
    }
    let a = (power / model.sigma_x2).sqrt();
    let encoder = TabulatedEncoder::from_fn(grids.x_grid.clone(), |x| a * x)?;
    let (beta_y, beta_z, _) = linear_mmse_coefficients(model, a);
    let decoder = DecoderTable::from_fn(grids.y_grid.clone(), grids.z_grid.clone(), |y, z| {
        beta_y * y + beta_z * z
    })?;
    Ok((encoder, decoder, linear_distortion(model, power)))
}

/// [`linear_baseline_on`] with default grids sized to the encoder range.
pub fn linear_baseline(
    model: &SourceChannelModel,
    power: f64,
) -> Result<(TabulatedEncoder, DecoderTable, f64)> {
    if !(power > 0.0) {
        return Err(Error::invalid("power", "must be positive"));
    }
    let amplitude = 5.0 * power.sqrt();
    let grids = default_grids(model, amplitude)?;
    linear_baseline_on(model, power, &grids)
}

/// Distortion lower bound for any scheme at transmit power P:
/// D = (1 - rho^2) sigma_x^2 / (1 + P / sigma_n^2).
pub fn opta(model: &SourceChannelModel, power: f64) -> Result<f64> {
    model.validate()?;
    if !(power >= 0.0) || !power.is_finite() {
        return Err(Error::invalid("power", "must be non-negative"));
    }
    let a2 = 1.0 - model.rho * model.rho;
    Ok(model.sigma_x2 * a2 / (1.0 + power / model.sigma_n2))
}

/// One optimizer evaluation at a candidate lambda: the achieved transmit
/// power and whatever the procedure produced.
#[derive(Debug, Clone)]
pub struct PowerEval<T> {
    pub power: f64,
    pub value: T,
}

/// Relative power tolerance at which the search stops.
pub const LAMBDA_SEARCH_POWER_TOL: f64 = 0.02;

/// Maximum number of search iterations after the bracket endpoints.
pub const LAMBDA_SEARCH_MAX_ITERS: usize = 20;

/// Find the lambda at which `eval` meets the power target, assuming the
/// achieved power decreases in lambda over the bracket.
///
/// The bracket endpoints are evaluated first (low end first, returning
/// immediately on a hit); interior candidates come from log-space
/// interpolation of the bracket, which converges much faster than arithmetic
/// midpoints when each evaluation is a full optimizer run. If the tolerance
/// is not met within the iteration cap, the best evaluation on the feasible
/// side (power <= target) is returned.
pub fn lambda_search<T>(
    target_power: f64,
    bracket: (f64, f64),
    mut eval: impl FnMut(f64) -> Result<PowerEval<T>>,
) -> Result<(f64, T)> {
    if !(target_power > 0.0) {
        return Err(Error::invalid("target_power", "must be positive"));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::invalid("bracket", "need 0 < lambda_lo < lambda_hi"));
    }
    let within = |p: f64| (p - target_power).abs() / target_power < LAMBDA_SEARCH_POWER_TOL;

    let at_lo = eval(lo)?;
    if within(at_lo.power) {
        return Ok((lo, at_lo.value));
    }
    let at_hi = eval(hi)?;
    if within(at_hi.power) {
        return Ok((hi, at_hi.value));
    }
    let (mut p_lo, mut p_hi) = (at_lo.power, at_hi.power);
    if !(p_lo > target_power && p_hi < target_power) {
        return Err(Error::Bracket {
            target: target_power,
            power_lo: p_lo,
            power_hi: p_hi,
        });
    }
    // Best feasible (power <= target) candidate seen so far.
    let mut feasible = Some((hi, at_hi.value));

    for _ in 0..LAMBDA_SEARCH_MAX_ITERS {
        // Log-space regula falsi, kept strictly inside the bracket.
        let t = (p_lo.ln() - target_power.ln()) / (p_lo.ln() - p_hi.ln());
        let t = t.clamp(0.15, 0.85);
        let mid = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        let at_mid = eval(mid)?;
        if within(at_mid.power) {
            return Ok((mid, at_mid.value));
        }
        if at_mid.power > target_power {
            lo = mid;
            p_lo = at_mid.power;
        } else {
            hi = mid;
            p_hi = at_mid.power;
            feasible = Some((mid, at_mid.value));
        }
    }
    let (lambda, value) = feasible.expect("feasible side retained");
    Ok((lambda, value))
}
