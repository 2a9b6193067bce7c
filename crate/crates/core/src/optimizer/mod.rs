//! Joint power and surface optimization for the V2V underlay link.
//!
//! The problem is
//!
//! ```text
//! maximize  log2(1 + SINR(p_v, Φ))
//! s.t.      0 ≤ p_v ≤ p_max,  p_v·|q_d + q_rᴴΦh_t|² ≤ i_max,  Φ feasible
//! ```
//!
//! For a fixed surface the SE is increasing in `p_v`, so the best power is
//! `min(p_max, i_max / L(Φ))`. [`alternating_optimize`] starts from the
//! closed-form alignment and alternates that power update with Riemannian
//! gradient ascent over the surface until the SE stalls.

mod align;
mod ascent;
mod gradient;
mod oracle;

pub use align::closed_form_align;
pub use ascent::projected_gradient_ascent;
pub use gradient::{riemannian_gradient_norm, tangent_project, wirtinger_gradient, Objective};
pub use oracle::{brute_force_oracle, OracleResult};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::ScenarioChannels;
use crate::linalg::CMatrix;
use crate::metrics::{cellular_interference, check_dims, couplings, LinkBudget, MetricsError};
use crate::scattering::{project_feasible, random_feasible, Mode, RisConfig, ScatteringError, ScatteringMatrix};
use gradient::power_for_leakage;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimizeError {
    #[error("optimization supports reflective and transmissive surfaces only, not {0}")]
    UnsupportedMode(Mode),
    #[error("channel {0} is identically zero")]
    ZeroChannel(&'static str),
    #[error("channel vectors have length {channel} but the surface has {surface} elements")]
    Dimension { channel: usize, surface: usize },
    #[error("invalid optimizer settings: {0}")]
    InvalidSettings(String),
    #[error("invalid link budget: {0}")]
    InvalidBudget(String),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error(transparent)]
    Scattering(#[from] ScatteringError),
}

impl From<MetricsError> for OptimizeError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Dimension { channel, surface } => OptimizeError::Dimension { channel, surface },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub max_outer_iters: usize,
    /// Gradient steps per surface update.
    pub inner_grad_iters: usize,
    /// Initial Frobenius step length.
    pub step_init: f64,
    pub backtrack_factor: f64,
    /// Outer loop stops once an iteration gains less than this (bits/s/Hz).
    pub tol_delta_se: f64,
    /// Surface update stops once the tangent gradient norm falls below this.
    pub grad_tol: f64,
    pub max_backtracks: usize,
    /// Extra runs from random feasible starts; the best result is kept.
    pub restarts: usize,
    /// Further random starts tried only when the interference cap is active
    /// at the best solution so far.
    pub capped_restarts: usize,
    /// Seed of the random restarts.
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            max_outer_iters: 200,
            inner_grad_iters: 50,
            step_init: 0.1,
            backtrack_factor: 0.5,
            tol_delta_se: 1e-6,
            grad_tol: 1e-9,
            max_backtracks: 40,
            restarts: 0,
            capped_restarts: 8,
            seed: 0,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |what: &str| Err(OptimizeError::InvalidSettings(what.to_string()));
        if self.max_outer_iters == 0 || self.inner_grad_iters == 0 || self.max_backtracks == 0 {
            return bad("iteration counts must be positive");
        }
        if !(self.step_init > 0.0 && self.step_init.is_finite()) {
            return bad("step_init must be positive");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.tol_delta_se > 0.0 && self.tol_delta_se.is_finite()) {
            return bad("tol_delta_se must be positive");
        }
        if !(self.grad_tol >= 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub p_v_opt: f64,
    /// `None` when no surface is deployed.
    pub matrix_opt: Option<ScatteringMatrix>,
    pub se: f64,
    /// SE after initialization and after every outer iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

pub(crate) fn check_single_block(cfg: &RisConfig) -> Result<(), OptimizeError> {
    match cfg.mode() {
        Mode::Reflective | Mode::Transmissive => Ok(()),
        m => Err(OptimizeError::UnsupportedMode(m)),
    }
}

fn check_budget(b: &LinkBudget, p_max: f64) -> Result<(), OptimizeError> {
    if !b.is_valid() {
        return Err(OptimizeError::InvalidBudget("powers must be finite and nonnegative, noise positive".into()));
    }
    if !(p_max > 0.0 && p_max.is_finite()) {
        return Err(OptimizeError::InvalidBudget(format!("p_max must be positive, got {p_max}")));
    }
    Ok(())
}

/// Largest V2V power meeting both `p_max` and the interference cap for
/// the given surface (`None`: direct links only).
pub fn optimal_power(
    ch: &ScenarioChannels,
    m: Option<&ScatteringMatrix>,
    b: &LinkBudget,
    p_max: f64,
) -> Result<f64, OptimizeError> {
    check_budget(b, p_max)?;
    let l = cellular_interference(ch, m, 1.0)?;
    Ok(power_for_leakage(l, b.i_max, p_max))
}

/// Baseline without a surface: only the power is optimized.
pub fn power_only(ch: &ScenarioChannels, b: &LinkBudget, p_max: f64) -> Result<OptimizeResult, OptimizeError> {
    let obj = Objective::CappedPower { p_max };
    let p_v_opt = optimal_power(ch, None, b, p_max)?;
    let se = obj.value(ch, None, b)?;
    Ok(OptimizeResult { p_v_opt, matrix_opt: None, se, trace: vec![se], converged: true, iterations: 0 })
}

/// Alternating optimization from the closed-form alignment.
pub fn alternating_optimize(
    ch: &ScenarioChannels,
    config: &RisConfig,
    b: &LinkBudget,
    p_max: f64,
    settings: &OptimizerSettings,
) -> Result<OptimizeResult, OptimizeError> {
    alternating_optimize_from(ch, config, b, p_max, settings, &[])
}

/// Like [`alternating_optimize`], but also considers `warm_starts` (for
/// example the solution for a sparser architecture, which embeds into the
/// feasible set of `config`). The loop starts from whichever candidate has
/// the highest SE, so the result is never worse than any of them.
pub fn alternating_optimize_from(
    ch: &ScenarioChannels,
    config: &RisConfig,
    b: &LinkBudget,
    p_max: f64,
    settings: &OptimizerSettings,
    warm_starts: &[ScatteringMatrix],
) -> Result<OptimizeResult, OptimizeError> {
    check_single_block(config)?;
    check_budget(b, p_max)?;
    settings.validate()?;
    if ch.n() != config.n_elements() {
        return Err(OptimizeError::Dimension { channel: ch.n(), surface: config.n_elements() });
    }
    let obj = Objective::CappedPower { p_max };

    let mut start = match closed_form_align(ch, config) {
        Ok(m) => m,
        Err(OptimizeError::ZeroChannel(_)) => project_feasible(&[CMatrix::identity(ch.n(), ch.n())], config)?,
        Err(e) => return Err(e),
    };
    let mut start_se = obj.value(ch, Some(&start), b)?;
    for w in warm_starts {
        let w = w.embed(config.architecture())?;
        if w.config() != config {
            return Err(OptimizeError::Scattering(ScatteringError::PatternMismatch { target: config.architecture() }));
        }
        let se = obj.value(ch, Some(&w), b)?;
        if se > start_se {
            start = w;
            start_se = se;
        }
    }

    let mut best = run_loop(ch, start, b, p_max, &obj, settings)?;
    for r in 0..settings.restarts {
        let m0 = random_feasible(config, settings.seed.wrapping_add(r as u64 + 1))?;
        let candidate = run_loop(ch, m0, b, p_max, &obj, settings)?;
        if candidate.se > best.se {
            best = candidate;
        }
    }
    if cap_active(ch, &best, b, p_max)? {
        for r in 0..settings.capped_restarts {
            let m0 = random_feasible(config, settings.seed.wrapping_add((settings.restarts + r) as u64 + 1))?;
            let candidate = run_loop(ch, m0, b, p_max, &obj, settings)?;
            if candidate.se > best.se {
                best = candidate;
            }
        }
    }
    Ok(best)
}

/// True when `i_max / L` is at or below `p_max` up to a relative `1e-6`.
fn cap_active(ch: &ScenarioChannels, r: &OptimizeResult, b: &LinkBudget, p_max: f64) -> Result<bool, OptimizeError> {
    let leakage = cellular_interference(ch, r.matrix_opt.as_ref(), 1.0)?;
    Ok(leakage * p_max * (1.0 + 1e-6) >= b.i_max)
}

fn run_loop(
    ch: &ScenarioChannels,
    start: ScatteringMatrix,
    b: &LinkBudget,
    p_max: f64,
    obj: &Objective,
    settings: &OptimizerSettings,
) -> Result<OptimizeResult, OptimizeError> {
    check_dims(ch, Some(&start))?;
    let mut m = start;
    let mut se = obj.value_at(&couplings(ch, Some(m.primary_block())), b);
    let mut trace = vec![se];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < settings.max_outer_iters {
        iterations += 1;
        // the objective re-optimizes the power for every candidate surface,
        // so this step already includes the closed-form power update
        let step = ascent::ascend(ch, &m, b, obj, settings)?;
        let delta = step.value - se;
        m = step.matrix;
        se = step.value;
        trace.push(se);
        if delta < settings.tol_delta_se {
            converged = true;
            break;
        }
    }
    let p_v_opt = optimal_power(ch, Some(&m), b, p_max)?;
    Ok(OptimizeResult { p_v_opt, matrix_opt: Some(m), se, trace, converged, iterations })
}

#[cfg(test)]
mod tests;
