//! Maximum-likelihood estimation of the metric parameter.
//!
//! The log-likelihood is maximized over the interior of the simplex by
//! exponentiated-gradient ascent, `λ_i ← λ_i exp(η g_i) / Σ_j λ_j exp(η g_j)`,
//! with a backtracking line search on `η`. Step sizes are measured in log
//! space: `η = s / max_i |g_i − λ·g|`, so no coordinate changes by more than a
//! factor `e^s`. A step is accepted when it gains at least a fraction
//! [`ARMIJO`] of the first-order prediction `η Var_λ(g)`, so the trace never
//! decreases. `s` starts at the configured initial step, grows by
//! `1/backtracking` after an accepted step and shrinks while backtracking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{half_degree, loglikelihood, loglikelihood_gradient};
use crate::simplex::{invert_param, MetricParam, SimplexPoint};

/// Halvings tried before a step is declared impossible.
const MAX_BACKTRACKS: usize = 80;

/// Sufficient-increase constant of the line search.
pub const ARMIJO: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Initial bound on the per-step log-change of any coordinate.
    pub initial_step: f64,
    pub backtracking: f64,
    pub rel_tolerance: f64,
    pub max_iterations: usize,
    /// Recorded with the fit. The ascent itself starts at the uniform
    /// parameter and is deterministic.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { initial_step: 1.0, backtracking: 0.5, rel_tolerance: 1e-6, max_iterations: 500, seed: 0 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.initial_step > 0.0) || !self.initial_step.is_finite() {
            return Err(Error::Config(format!("initial step {} must be positive", self.initial_step)));
        }
        if !(self.backtracking > 0.0 && self.backtracking < 1.0) {
            return Err(Error::Config(format!("backtracking factor {} must lie in (0, 1)", self.backtracking)));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(Error::Config(format!("tolerance {} must be positive", self.rel_tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Maximum-likelihood estimate `θ̂`.
    pub theta_hat: MetricParam,
    /// `θ̂^{-1}`, the parameter of the learned metric.
    pub lambda_metric: MetricParam,
    /// Log-likelihood at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn final_loglikelihood(&self) -> f64 {
        *self.trace.last().expect("trace holds at least the starting value")
    }
}

fn validate_data(data: &[SimplexPoint]) -> Result<usize> {
    let first = data.first().ok_or(Error::Empty("training data"))?;
    let len = first.len();
    for (i, x) in data.iter().enumerate() {
        Error::check_dims(len, x.len())?;
        if !x.is_interior() {
            return Err(Error::domain(format!("training point {i} is not interior")));
        }
    }
    half_degree(len - 1)?;
    Ok(len)
}

/// One multiplicative step, `None` if the result leaves the open simplex.
fn exponentiated_step(param: &MetricParam, grad: &[f64], step: f64) -> Option<MetricParam> {
    let logs: Vec<f64> = param.coords().iter().zip(grad).map(|(l, g)| l.ln() + step * g).collect();
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    MetricParam::from_weights(logs.iter().map(|l| (l - max).exp()).collect()).ok()
}

/// Fits `θ̂` by exponentiated-gradient ascent from the uniform parameter.
pub fn estimate_theta(data: &[SimplexPoint], cfg: &OptimizerConfig) -> Result<FitResult> {
    cfg.validate()?;
    let len = validate_data(data)?;
    let mut theta = MetricParam::uniform(len);
    let mut ll = loglikelihood(&theta, data)?;
    let mut trace = vec![ll];
    // largest log-change of any coordinate in one step
    let mut log_step = cfg.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        let grad = loglikelihood_gradient(&theta, data)?;
        let mean: f64 = theta.coords().iter().zip(&grad).map(|(l, g)| l * g).sum();
        let spread = grad.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max);
        if spread == 0.0 {
            converged = true;
            break;
        }
        // d/dη ℓ at η = 0 for the multiplicative update
        let slope: f64 = theta.coords().iter().zip(&grad).map(|(l, g)| l * (g - mean) * (g - mean)).sum();
        let mut accepted = None;
        let mut trial = log_step;
        for _ in 0..MAX_BACKTRACKS {
            let eta = trial / spread;
            if let Some(candidate) = exponentiated_step(&theta, &grad, eta) {
                if let Ok(value) = loglikelihood(&candidate, data) {
                    if value >= ll && value - ll >= ARMIJO * eta * slope {
                        accepted = Some((candidate, value));
                        break;
                    }
                }
            }
            trial *= cfg.backtracking;
        }
        let Some((candidate, value)) = accepted else {
            // no ascent direction left at floating-point resolution
            converged = true;
            break;
        };
        let gain = value - ll;
        theta = candidate;
        ll = value;
        trace.push(ll);
        iterations += 1;
        log_step = trial / cfg.backtracking;
        if gain <= cfg.rel_tolerance * ll.abs() {
            converged = true;
            break;
        }
    }

    let lambda_metric = invert_param(&theta);
    Ok(FitResult { theta_hat: theta, lambda_metric, trace, iterations, converged })
}

/// The metric parameter `θ̂^{-1}`: coordinates that carry much of the data
/// volume (large `θ̂_i`) are de-emphasized.
pub fn learned_metric_param(fit: &FitResult) -> MetricParam {
    invert_param(&fit.theta_hat)
}
