//! The inverse-volume model on the simplex,
//! `p(x; λ) = (x·λ)^{(n+1)/2} Π_i √x_i / Z(λ)`.
//!
//! Only odd `n` (an even number of coordinates) is supported: the density's
//! exponent `k = (n+1)/2` is then an integer and `Z` expands into a finite sum.

pub mod convolution;
pub mod partition;

use statrs::function::gamma::ln_gamma;

pub use convolution::{convolve, convolve_truncated, ConvolutionMode, Convolver, FFT_THRESHOLD};
pub use partition::{
    coefficient_series, half_degree, log_partition, log_partition_bruteforce, log_partition_gradient,
    log_partition_gradient_of_weights, log_partition_of_weights, log_partition_with_mode,
    CoefficientSeries, ConvolutionTable, LogPartition, ScaledRow, BRUTEFORCE_LIMIT,
};

use crate::error::{Error, Result};
use crate::simplex::{MetricParam, SimplexPoint};

/// Constants dropped from `Z̃`: `ln k! − ln Γ(k + 3(n+1)/2)`.
///
/// The first comes from the multinomial expansion of `(x·λ)^k`, the second
/// from the Dirichlet integral `∫ Π x_j^{a_j+1/2} dx`.
pub fn log_normalizer_offset(n: usize, k: usize) -> f64 {
    ln_gamma(k as f64 + 1.0) - ln_gamma(k as f64 + 1.5 * (n + 1) as f64)
}

/// `ln Z(λ)`, the exact normalizer with respect to Lebesgue measure on the
/// first `n` coordinates.
pub fn log_normalizer(param: &MetricParam) -> Result<f64> {
    let z = log_partition(param)?;
    Ok(z.value + log_normalizer_offset(z.n, z.k))
}

fn check_point(param: &MetricParam, x: &SimplexPoint) -> Result<f64> {
    Error::check_dims(param.len(), x.len())?;
    if !x.is_interior() {
        return Err(Error::domain("density requires an interior point"));
    }
    Ok(x.dot(param))
}

/// `k ln(x·λ) + ½ Σ ln x_i − ln Z(λ)`.
pub fn log_density(param: &MetricParam, x: &SimplexPoint) -> Result<f64> {
    let s = check_point(param, x)?;
    let log_z = log_normalizer(param)?;
    let k = half_degree(param.dim())? as f64;
    let half_log_x: f64 = 0.5 * x.coords().iter().map(|v| v.ln()).sum::<f64>();
    Ok(k * s.ln() + half_log_x - log_z)
}

/// Log-likelihood up to terms that do not depend on `λ`:
/// `k Σ_j ln(x_j·λ) − N ln Z̃(λ)`.
pub fn loglikelihood(param: &MetricParam, data: &[SimplexPoint]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let k = half_degree(param.dim())? as f64;
    let mut data_term = 0.0;
    for x in data {
        data_term += check_point(param, x)?.ln();
    }
    let log_z = log_partition(param)?.value;
    Ok(k * data_term - data.len() as f64 * log_z)
}

/// Gradient of [`loglikelihood`] with respect to `λ` (in ambient
/// coordinates): `k Σ_j x_j / (x_j·λ) − N ∇ ln Z̃(λ)`.
pub fn loglikelihood_gradient(param: &MetricParam, data: &[SimplexPoint]) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let k = half_degree(param.dim())? as f64;
    let mut grad = vec![0.0; param.len()];
    for x in data {
        let s = check_point(param, x)?;
        for (g, xi) in grad.iter_mut().zip(x.coords()) {
            *g += xi / s;
        }
    }
    let dz = log_partition_gradient(param)?;
    let n_docs = data.len() as f64;
    for (g, d) in grad.iter_mut().zip(dz) {
        *g = k * *g - n_docs * d;
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("loglikelihood gradient".into()));
    }
    Ok(grad)
}
