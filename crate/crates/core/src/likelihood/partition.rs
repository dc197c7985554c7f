//! The partition function of the inverse-volume model.
//!
//! Up to constants, `Z̃(λ) = Σ_{a_1+…+a_{n+1}=k} Π_j c_{a_j} λ_j^{a_j}` with
//! `c_m = Γ(m+3/2)/Γ(m+1)` and `k = (n+1)/2`. It is the degree-`k`
//! coefficient of `Π_j f_j(z)` where `f_j(z) = Σ_m c_m (λ_j z)^m`, so the table
//! `B_{i,·}` of partial products is filled by one truncated convolution per
//! coordinate.
//!
//! Two devices keep every row representable in `f64` for thousands of
//! coordinates:
//!
//! * each row is stored scaled to max 1 together with the log of its scale;
//! * the weights are tilted, `μ = t λ`, with `t` chosen so that the tilted
//!   product has its mass centred on degree `k`. Homogeneity gives
//!   `Z̃(λ) = t^{-k} Z̃(μ)`, and the entries that matter then sit near the top
//!   of their row instead of hundreds of orders of magnitude below it.

use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use super::convolution::{ConvolutionMode, Convolver};
use crate::error::{Error, Result};
use crate::simplex::MetricParam;

/// Largest number of weak compositions the brute-force oracle will enumerate.
pub const BRUTEFORCE_LIMIT: u128 = 1_000_000;

/// `c_m = Γ(m + 3/2) / Γ(m + 1)` for `m = 0..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries {
    k: usize,
    log_values: Vec<f64>,
    log_offset: f64,
    scaled: Vec<f64>,
}

impl CoefficientSeries {
    pub fn new(k: usize) -> Self {
        let log_values: Vec<f64> = (0..=k)
            .map(|m| ln_gamma(m as f64 + 1.5) - ln_gamma(m as f64 + 1.0))
            .collect();
        let log_offset = log_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scaled = log_values.iter().map(|l| (l - log_offset).exp()).collect();
        Self { k, log_values, log_offset, scaled }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_value(&self, m: usize) -> f64 {
        self.log_values[m]
    }

    pub fn value(&self, m: usize) -> f64 {
        self.log_values[m].exp()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_values
    }

    /// Values divided by `exp(log_offset)`.
    pub fn scaled(&self) -> &[f64] {
        &self.scaled
    }

    pub fn log_offset(&self) -> f64 {
        self.log_offset
    }
}

pub fn coefficient_series(k: usize) -> CoefficientSeries {
    CoefficientSeries::new(k)
}

/// A nonnegative sequence stored as `values · exp(log_scale)` with max 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRow {
    pub values: Vec<f64>,
    pub log_scale: f64,
}

impl ScaledRow {
    fn from_logs(logs: &[f64]) -> Self {
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Self { values: logs.iter().map(|l| (l - max).exp()).collect(), log_scale: max }
    }

    /// The unit impulse `δ_0` padded to `len`.
    fn delta(len: usize) -> Self {
        let mut values = vec![0.0; len];
        values[0] = 1.0;
        Self { values, log_scale: 0.0 }
    }

    fn renormalized(mut values: Vec<f64>, log_scale: f64) -> Result<Self> {
        let mut max = 0.0f64;
        for v in values.iter_mut() {
            // FFT roundoff can leave tiny negatives where the exact value is ~0
            if *v < 0.0 {
                *v = 0.0;
            }
            max = max.max(*v);
        }
        if !(max > 0.0) || !max.is_finite() {
            return Err(Error::NonFinite("convolution row vanished or overflowed".into()));
        }
        values.iter_mut().for_each(|v| *v /= max);
        Ok(Self { values, log_scale: log_scale + max.ln() })
    }

    fn convolved(&self, other: &ScaledRow, conv: &Convolver) -> Result<Self> {
        Self::renormalized(conv.convolve(&self.values, &other.values), self.log_scale + other.log_scale)
    }

    /// Natural log of entry `j`; `-inf` if it underflowed.
    pub fn ln_entry(&self, j: usize) -> f64 {
        self.values[j].ln() + self.log_scale
    }
}

/// Rows `B_{i,·}` of the dynamic program, in tilted variables.
///
/// `rows[i]` (0-based) is the truncated product of the series of coordinates
/// `i..=n`, so `rows[i] = a_i * rows[i+1]` and `Z̃ = B_{0,k}`.
#[derive(Debug, Clone)]
pub struct ConvolutionTable {
    k: usize,
    tilt: f64,
    rows: Vec<ScaledRow>,
}

impl ConvolutionTable {
    pub fn build(weights: &[f64], mode: ConvolutionMode) -> Result<Self> {
        let k = half_degree_of_len(weights.len())?;
        validate_weights(weights)?;
        let series = CoefficientSeries::new(k);
        let tilt = tilt_factor(weights, k);
        let conv = Convolver::new(k + 1, k + 1, mode);
        let mut rows = Vec::with_capacity(weights.len());
        let last = weights.len() - 1;
        rows.push(coordinate_row(&series, tilt * weights[last]));
        for i in (0..last).rev() {
            let next = coordinate_row(&series, tilt * weights[i]).convolved(rows.last().unwrap(), &conv)?;
            rows.push(next);
        }
        rows.reverse();
        Ok(Self { k, tilt, rows })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The factor `t` in `μ = t λ`.
    pub fn tilt(&self) -> f64 {
        self.tilt
    }

    pub fn rows(&self) -> &[ScaledRow] {
        &self.rows
    }

    /// `ln B_{i,j}` in the original (untilted) variables.
    pub fn ln_entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].ln_entry(j) - j as f64 * self.tilt.ln()
    }

    /// `ln Z̃ = ln B_{0,k}`.
    pub fn log_partition(&self) -> f64 {
        self.ln_entry(0, self.k)
    }
}

/// Natural log of the unnormalized partition sum `Z̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogPartition {
    pub value: f64,
    pub n: usize,
    pub k: usize,
}

/// `k = (n+1)/2`; errors when `n + 1` is odd.
pub fn half_degree(n: usize) -> Result<usize> {
    if (n + 1) % 2 == 0 {
        Ok((n + 1) / 2)
    } else {
        Err(Error::UnsupportedDimension(n))
    }
}

fn half_degree_of_len(len: usize) -> Result<usize> {
    if len < 2 {
        return Err(Error::InvalidSimplex("need at least 2 coordinates".into()));
    }
    half_degree(len - 1)
}

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().all(|w| w.is_finite() && *w > 0.0) {
        Ok(())
    } else {
        Err(Error::domain("partition weights must be finite and strictly positive"))
    }
}

/// Solves `Σ_i (3/2) u_i / (1 − u_i) = k` for `t`, with `u_i = t·w_i`.
///
/// `f_i(u) ∝ (1 − u)^{-3/2}`, so the left side is the mean degree of the
/// untruncated tilted product.
fn tilt_factor(weights: &[f64], k: usize) -> f64 {
    let w_max = weights.iter().cloned().fold(0.0, f64::max);
    let target = k as f64;
    let mean_degree = |t: f64| -> f64 {
        weights
            .iter()
            .map(|w| {
                let u = t * w;
                1.5 * u / (1.0 - u)
            })
            .sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0 / w_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_degree(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.max(f64::MIN_POSITIVE)
}

/// `m ↦ c_m μ^m` for `m = 0..=k`, scaled.
fn coordinate_row(series: &CoefficientSeries, mu: f64) -> ScaledRow {
    let ln_mu = mu.ln();
    let logs: Vec<f64> = series
        .log_values()
        .iter()
        .enumerate()
        .map(|(m, lc)| lc + m as f64 * ln_mu)
        .collect();
    ScaledRow::from_logs(&logs)
}

/// `ln Z̃(λ)` by the FFT-accelerated dynamic program.
pub fn log_partition(param: &MetricParam) -> Result<LogPartition> {
    log_partition_with_mode(param, ConvolutionMode::Auto)
}

pub fn log_partition_with_mode(param: &MetricParam, mode: ConvolutionMode) -> Result<LogPartition> {
    let n = param.dim();
    let k = half_degree(n)?;
    let value = log_partition_of_weights(param.coords(), mode)?;
    Ok(LogPartition { value, n, k })
}

/// `ln Z̃(w)` for an arbitrary strictly positive weight vector (not
/// necessarily summing to 1). Streams the table without storing it.
pub fn log_partition_of_weights(weights: &[f64], mode: ConvolutionMode) -> Result<f64> {
    let k = half_degree_of_len(weights.len())?;
    validate_weights(weights)?;
    let series = CoefficientSeries::new(k);
    let tilt = tilt_factor(weights, k);
    let conv = Convolver::new(k + 1, k + 1, mode);
    let last = weights.len() - 1;
    let mut row = coordinate_row(&series, tilt * weights[last]);
    for &w in weights[..last].iter().rev() {
        row = coordinate_row(&series, tilt * w).convolved(&row, &conv)?;
    }
    let value = row.ln_entry(k) - k as f64 * tilt.ln();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite("log partition".into()))
    }
}

fn binomial_saturating(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Test oracle: `ln Z̃` by enumerating every weak composition of `k` into
/// `n + 1` parts, accumulated with compensated summation.
pub fn log_partition_bruteforce(param: &MetricParam) -> Result<LogPartition> {
    let n = param.dim();
    let k = half_degree(n)?;
    let terms = binomial_saturating((k + n) as u128, n as u128);
    if terms > BRUTEFORCE_LIMIT {
        return Err(Error::EnumerationTooLarge(terms));
    }
    let series = CoefficientSeries::new(k);
    let ln_lam: Vec<f64> = param.coords().iter().map(|l| l.ln()).collect();
    let mut logs = Vec::with_capacity(terms as usize);
    let mut parts = vec![0usize; n + 1];
    enumerate_compositions(&mut parts, 0, k, &mut |a| {
        let l: f64 = a
            .iter()
            .zip(&ln_lam)
            .map(|(&m, ll)| series.log_value(m) + m as f64 * ll)
            .sum();
        logs.push(l);
    });
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for l in &logs {
        let v = (l - max).exp();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    Ok(LogPartition { value: max + (sum + comp).ln(), n, k })
}

fn enumerate_compositions(parts: &mut [usize], pos: usize, remaining: usize, visit: &mut impl FnMut(&[usize])) {
    if pos == parts.len() - 1 {
        parts[pos] = remaining;
        visit(parts);
        return;
    }
    for m in 0..=remaining {
        parts[pos] = m;
        enumerate_compositions(parts, pos + 1, remaining - m, visit);
    }
}

/// `∂ ln Z̃ / ∂λ_i` for every coordinate.
pub fn log_partition_gradient(param: &MetricParam) -> Result<Vec<f64>> {
    log_partition_gradient_of_weights(param.coords(), ConvolutionMode::Auto)
}

/// Gradient through leave-one-out products.
///
/// With prefix products `P_i = a_0 * … * a_{i−1}` and suffix products
/// `S_i = B_{i+1}`, the terms of `Z̃` split as `Σ_m a_i[m] Q_i[k−m]` where
/// `Q_i = P_i * S_i`. Differentiating `λ_i^m` gives
/// `∂ ln Z̃ / ∂λ_i = E_i[m] / λ_i`, the expected exponent of coordinate `i`
/// under the term weights, divided by `λ_i`. `O(n)` convolutions of length
/// `k + 1` in total.
pub fn log_partition_gradient_of_weights(weights: &[f64], mode: ConvolutionMode) -> Result<Vec<f64>> {
    let table = ConvolutionTable::build(weights, mode)?;
    let k = table.k;
    let series = CoefficientSeries::new(k);
    let conv = Convolver::new(k + 1, k + 1, mode);
    let len = weights.len();
    let coord_rows: Vec<ScaledRow> = weights
        .par_iter()
        .map(|w| coordinate_row(&series, table.tilt * w))
        .collect();

    let mut prefixes = Vec::with_capacity(len);
    prefixes.push(ScaledRow::delta(k + 1));
    for row in &coord_rows[..len - 1] {
        let next = prefixes.last().unwrap().convolved(row, &conv)?;
        prefixes.push(next);
    }

    let delta = ScaledRow::delta(k + 1);
    (0..len)
        .into_par_iter()
        .map(|i| {
            let suffix = if i + 1 < len { &table.rows[i + 1] } else { &delta };
            let q = conv.convolve(&prefixes[i].values, &suffix.values);
            let a = &coord_rows[i].values;
            let (mut num, mut den) = (0.0, 0.0);
            for m in 0..=k {
                let term = a[m] * q[k - m].max(0.0);
                den += term;
                num += m as f64 * term;
            }
            if !(den > 0.0) {
                return Err(Error::NonFinite(format!("gradient coordinate {i}")));
            }
            Ok(num / den / weights[i])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_param(rng: &mut ChaCha8Rng, len: usize) -> MetricParam {
        MetricParam::from_weights((0..len).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn coefficient_examples() {
        let c = coefficient_series(4);
        assert!((c.value(0) - PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((c.value(1) - 3.0 * PI.sqrt() / 4.0).abs() < 1e-14);
        for m in 0..4 {
            let ratio = c.value(m + 1) / c.value(m);
            assert!(rel(ratio, (m as f64 + 1.5) / (m as f64 + 1.0)) < 1e-13);
        }
        assert!(c.scaled().iter().all(|v| *v > 0.0 && *v <= 1.0));
        assert_eq!(c.scaled()[4], 1.0);
    }

    #[test]
    fn n1_partition_is_constant() {
        let expected = (3.0 * PI / 8.0).ln();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let lam = random_param(&mut rng, 2);
            let z = log_partition(&lam).unwrap();
            assert_eq!((z.n, z.k), (1, 1));
            assert!((z.value - expected).abs() < 1e-13);
            let b = log_partition_bruteforce(&lam).unwrap();
            assert!((b.value - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn even_n_is_rejected() {
        let lam = MetricParam::uniform(3);
        assert_eq!(log_partition(&lam), Err(Error::UnsupportedDimension(2)));
        assert_eq!(log_partition_bruteforce(&lam), Err(Error::UnsupportedDimension(2)));
        assert!(log_partition_gradient(&lam).is_err());
    }

    #[test]
    fn bruteforce_term_count_and_guard() {
        assert_eq!(binomial_saturating(5, 3), 10);
        let mut count = 0;
        let mut parts = vec![0; 4];
        enumerate_compositions(&mut parts, 0, 2, &mut |a| {
            assert_eq!(a.iter().sum::<usize>(), 2);
            count += 1;
        });
        assert_eq!(count, 10);
        let big = MetricParam::uniform(40);
        assert!(matches!(log_partition_bruteforce(&big), Err(Error::EnumerationTooLarge(_))));
    }

    #[test]
    fn permutation_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lam = random_param(&mut rng, 4);
        let perm = [2, 0, 3, 1];
        let a = log_partition(&lam).unwrap().value;
        let b = log_partition(&lam.permuted(&perm).unwrap()).unwrap().value;
        assert!(rel(a, b) < 1e-13);
        let ga = log_partition_gradient(&lam).unwrap();
        let gb = log_partition_gradient(&lam.permuted(&perm).unwrap()).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            assert!(rel(gb[i], ga[p]) < 1e-12);
        }
    }

    #[test]
    fn table_rows_satisfy_recurrence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lam = random_param(&mut rng, 6);
        let table = ConvolutionTable::build(lam.coords(), ConvolutionMode::Direct).unwrap();
        let series = CoefficientSeries::new(3);
        for i in 0..5 {
            for j in 0..=3 {
                let direct: f64 = (0..=j)
                    .map(|m| {
                        (series.log_value(m) + m as f64 * lam.coords()[i].ln()
                            + table.ln_entry(i + 1, j - m))
                        .exp()
                    })
                    .sum();
                assert!(rel(table.ln_entry(i, j).exp(), direct) < 1e-12, "i {i} j {j}");
            }
        }
        assert!((table.log_partition() - log_partition(&lam).unwrap().value).abs() < 1e-12);
    }

    #[test]
    fn fft_and_direct_tables_agree_at_large_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for len in [128usize, 256, 512] {
            let lam = random_param(&mut rng, len);
            let d = log_partition_with_mode(&lam, ConvolutionMode::Direct).unwrap().value;
            let f = log_partition_with_mode(&lam, ConvolutionMode::Fft).unwrap().value;
            assert!(rel(f, d) < 1e-10, "len {len}: {f} vs {d}");
        }
    }

    #[test]
    fn gradient_satisfies_euler_identity() {
        // Z̃ is homogeneous of degree k, so Σ λ_i ∂ ln Z̃/∂λ_i = k
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for len in [2usize, 4, 10, 100, 300] {
            let lam = random_param(&mut rng, len);
            let g = log_partition_gradient(&lam).unwrap();
            let euler: f64 = g.iter().zip(lam.coords()).map(|(a, b)| a * b).sum();
            assert!(rel(euler, (len / 2) as f64) < 1e-10, "len {len}: {euler}");
        }
    }

    #[test]
    fn n1_gradient_has_no_tangent_component() {
        let lam = MetricParam::new(vec![0.3, 0.7]).unwrap();
        let g = log_partition_gradient(&lam).unwrap();
        // Z̃(w) = c0 c1 (w1 + w2) so both partials equal 1 / (w1 + w2)
        assert!((g[0] - 1.0).abs() < 1e-13 && (g[1] - 1.0).abs() < 1e-13);
        assert!((g[0] - g[1]).abs() < 1e-13);
    }

    #[test]
    fn tiny_coordinates_stay_finite() {
        let mut w = vec![1.0; 64];
        w[3] = 1e-12;
        w[10] = 1e-12;
        let lam = MetricParam::from_weights(w).unwrap();
        let z = log_partition(&lam).unwrap();
        assert!(z.value.is_finite());
        let g = log_partition_gradient(&lam).unwrap();
        assert!(g.iter().all(|v| v.is_finite() && *v > 0.0));
    }
}
