//! Geometry of the multinomial simplex `P_n` under the pull-back metrics
//! `F_λ^* J` of the Fisher information.
//!
//! Conventions: a point of `P_n` has `n + 1` coordinates. Distances are arc
//! lengths on the unit sphere (no factor 2), and Gram matrices pull back the
//! unit-sphere metric, so `det G` carries the constant `4^{-n}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ x_i = 1` accepted by the simplex constructors.
pub const SUM_TOLERANCE: f64 = 1e-9;

fn validate_coords(coords: &[f64], strict: bool) -> Result<f64> {
    if coords.len() < 2 {
        return Err(Error::InvalidSimplex(format!(
            "need at least 2 coordinates, got {}",
            coords.len()
        )));
    }
    for (i, &c) in coords.iter().enumerate() {
        if !c.is_finite() {
            return Err(Error::InvalidSimplex(format!("coordinate {i} is not finite")));
        }
        if c < 0.0 || (strict && c <= 0.0) {
            return Err(Error::InvalidSimplex(format!(
                "coordinate {i} = {c} is not {}",
                if strict { "strictly positive" } else { "nonnegative" }
            )));
        }
    }
    let sum: f64 = coords.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidSimplex(format!("coordinates sum to {sum}, not 1")));
    }
    Ok(sum)
}

fn normalized(mut coords: Vec<f64>, sum: f64) -> Vec<f64> {
    if sum != 1.0 {
        coords.iter_mut().for_each(|c| *c /= sum);
    }
    coords
}

fn normalize_weights(weights: Vec<f64>, strict: bool) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0 || (strict && *w <= 0.0)) {
        return Err(Error::InvalidSimplex(
            "weights must be finite and positive".to_string(),
        ));
    }
    let sum: f64 = weights.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::InvalidSimplex(format!("weights have total mass {sum}")));
    }
    Ok(weights.into_iter().map(|w| w / sum).collect())
}

/// A point of the closed simplex `P_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    /// Validates `coords` and renormalizes them if the sum is off by less than
    /// [`SUM_TOLERANCE`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let sum = validate_coords(&coords, false)?;
        Ok(Self { coords: normalized(coords, sum) })
    }

    /// Normalizes a nonnegative vector with positive total mass.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidSimplex("need at least 2 coordinates".into()));
        }
        Ok(Self { coords: normalize_weights(weights, false)? })
    }

    /// The barycenter `(1/(n+1), …, 1/(n+1))` of `P_n` with `len = n + 1`.
    pub fn barycenter(len: usize) -> Self {
        assert!(len >= 2, "simplex needs at least 2 coordinates");
        Self { coords: vec![1.0 / len as f64; len] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Manifold dimension `n` (one less than the number of coordinates).
    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn is_interior(&self) -> bool {
        self.coords.iter().all(|&c| c > 0.0)
    }

    pub fn dot(&self, param: &MetricParam) -> f64 {
        dot(&self.coords, &param.coords)
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl TryFrom<Vec<f64>> for SimplexPoint {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<SimplexPoint> for Vec<f64> {
    fn from(p: SimplexPoint) -> Self {
        p.coords
    }
}

/// An interior point of `P_n` used as the parameter of `F_λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MetricParam {
    coords: Vec<f64>,
}

impl MetricParam {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        let sum = validate_coords(&coords, true)?;
        Ok(Self { coords: normalized(coords, sum) })
    }

    /// Normalizes a strictly positive vector.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::InvalidSimplex("need at least 2 coordinates".into()));
        }
        let coords = normalize_weights(weights, true)?;
        // normalization can underflow very small weights
        if coords.iter().any(|&c| c <= 0.0) {
            return Err(Error::InvalidSimplex("normalized weight underflowed to 0".into()));
        }
        Ok(Self { coords })
    }

    /// The group identity.
    pub fn uniform(len: usize) -> Self {
        assert!(len >= 2, "simplex needs at least 2 coordinates");
        Self { coords: vec![1.0 / len as f64; len] }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.coords.len() - 1
    }

    /// Reorders coordinates so that `out[i] = self[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        Error::check_dims(self.len(), perm.len())?;
        Self::new(perm.iter().map(|&p| self.coords[p]).collect())
    }

    pub fn as_point(&self) -> SimplexPoint {
        SimplexPoint { coords: self.coords.clone() }
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

impl TryFrom<Vec<f64>> for MetricParam {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Self::new(coords)
    }
}

impl From<MetricParam> for Vec<f64> {
    fn from(p: MetricParam) -> Self {
        p.coords
    }
}

/// A point of the positive orthant of the unit sphere `S_n^+`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    coords: Vec<f64>,
}

impl SpherePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::domain("sphere coordinates must be finite and nonnegative"));
        }
        let norm2: f64 = coords.iter().map(|c| c * c).sum();
        if (norm2 - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::domain(format!("squared norm {norm2} is not 1")));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Great-circle distance to `other`.
    pub fn arc_distance(&self, other: &SpherePoint) -> Result<f64> {
        Error::check_dims(self.coords.len(), other.coords.len())?;
        Ok(chord_angle(self.coords.iter().copied(), other.coords.iter().copied()))
    }
}

/// The `n × (n+1)` matrix whose rows are the push-forwards of the tangent
/// basis `e_i − e_{n+1}` under the sphere map.
#[derive(Debug, Clone)]
pub struct TangentJacobian {
    pub entries: DMatrix<f64>,
    pub base: SimplexPoint,
    pub param: MetricParam,
}

/// Gram matrix of the pull-back metric in the basis given by [`basis_matrix`].
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
}

impl GramMatrix {
    /// `log det G` through a Cholesky factorization.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self
            .entries
            .clone()
            .cholesky()
            .ok_or_else(|| Error::domain("Gram matrix is not positive definite"))?;
        Ok(2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
    }

    pub fn determinant(&self) -> f64 {
        self.entries.determinant()
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Angle between unit vectors from their chord, `2 asin(‖a − b‖ / 2)`.
///
/// Equal to `acos(a·b)` but exact at zero and well conditioned for nearby
/// points, where `acos` loses half the digits.
fn chord_angle(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> f64 {
    let chord2: f64 = a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    2.0 * (0.5 * chord2.sqrt()).min(1.0).asin()
}

fn positive_dot(x: &SimplexPoint, param: &MetricParam) -> Result<f64> {
    Error::check_dims(param.len(), x.len())?;
    let s = x.dot(param);
    if s > 0.0 {
        Ok(s)
    } else {
        Err(Error::domain("x · λ = 0"))
    }
}

fn require_interior(x: &SimplexPoint) -> Result<()> {
    if x.is_interior() {
        Ok(())
    } else {
        Err(Error::domain("operation requires an interior simplex point"))
    }
}

/// Geodesic distance under the Fisher information metric, `acos Σ √(x_i y_i)`,
/// evaluated as the arc between `√x` and `√y` on the unit sphere.
pub fn fisher_distance(x: &SimplexPoint, y: &SimplexPoint) -> Result<f64> {
    Error::check_dims(x.len(), y.len())?;
    Ok(chord_angle(x.coords.iter().map(|v| v.sqrt()), y.coords.iter().map(|v| v.sqrt())))
}

/// `F_λ(x)_i = x_i λ_i / (x · λ)`.
pub fn apply_transform(param: &MetricParam, x: &SimplexPoint) -> Result<SimplexPoint> {
    let s = positive_dot(x, param)?;
    let coords = x.coords.iter().zip(&param.coords).map(|(a, l)| a * l / s).collect();
    Ok(SimplexPoint { coords })
}

/// Parameter of the inverse transformation: `η_i ∝ 1/λ_i`.
pub fn invert_param(param: &MetricParam) -> MetricParam {
    let inv: Vec<f64> = param.coords.iter().map(|l| 1.0 / l).collect();
    let total: f64 = inv.iter().sum();
    MetricParam { coords: inv.into_iter().map(|v| v / total).collect() }
}

/// Parameter `ν` with `F_ν = F_λ ∘ F_μ`, i.e. `ν_i ∝ λ_i μ_i`.
pub fn compose_params(outer: &MetricParam, inner: &MetricParam) -> Result<MetricParam> {
    Error::check_dims(outer.len(), inner.len())?;
    let prod: Vec<f64> = outer.coords.iter().zip(&inner.coords).map(|(a, b)| a * b).collect();
    MetricParam::from_weights(prod)
}

/// `F̂_λ(x)_i = √(x_i λ_i / (x · λ))`, the flattening map onto `S_n^+`.
pub fn sphere_map(param: &MetricParam, x: &SimplexPoint) -> Result<SpherePoint> {
    let s = positive_dot(x, param)?;
    let coords = x
        .coords
        .iter()
        .zip(&param.coords)
        .map(|(a, l)| (a * l / s).sqrt())
        .collect();
    Ok(SpherePoint { coords })
}

/// Closed-form geodesic distance under `F_λ^* J`.
///
/// Evaluated as the Fisher distance between the transformed points, which
/// makes the isometry identity hold to the last bit.
pub fn geodesic_distance(param: &MetricParam, x: &SimplexPoint, y: &SimplexPoint) -> Result<f64> {
    Error::check_dims(x.len(), y.len())?;
    let fx = apply_transform(param, x)?;
    let fy = apply_transform(param, y)?;
    fisher_distance(&fx, &fy)
}

/// The tangent basis `U` of `T_x P_n`: row `i` is `e_i − e_{n+1}`.
pub fn basis_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n + 1, |i, j| {
        if j == i {
            1.0
        } else if j == n {
            -1.0
        } else {
            0.0
        }
    })
}

/// `J = U (I − λ xᵀ / (x·λ)) Λ` with `Λ_jj = √(λ_j / x_j) / (2 √(x·λ))`.
pub fn pushforward_jacobian(param: &MetricParam, x: &SimplexPoint) -> Result<TangentJacobian> {
    let s = positive_dot(x, param)?;
    require_interior(x)?;
    let n = x.dim();
    let lam = &param.coords;
    let xs = &x.coords;
    let half_inv_sqrt_s = 0.5 / s.sqrt();
    let scale: Vec<f64> = xs
        .iter()
        .zip(lam)
        .map(|(xj, lj)| (lj / xj).sqrt() * half_inv_sqrt_s)
        .collect();
    let entries = DMatrix::from_fn(n, n + 1, |i, j| {
        let delta = if j == i { 1.0 } else { 0.0 } - if j == n { 1.0 } else { 0.0 };
        (delta - (lam[i] - lam[n]) * xs[j] / s) * scale[j]
    });
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("push-forward Jacobian".into()));
    }
    Ok(TangentJacobian { entries, base: x.clone(), param: param.clone() })
}

/// `G = J Jᵀ`.
pub fn gram_matrix(param: &MetricParam, x: &SimplexPoint) -> Result<GramMatrix> {
    let jac = pushforward_jacobian(param, x)?;
    let g = &jac.entries * jac.entries.transpose();
    // exact symmetry
    let entries = (&g + g.transpose()) * 0.5;
    Ok(GramMatrix { entries })
}

/// `½ log det G = ½ [−n log 4 + Σ log(λ_i / x_i) − (n+1) log(x·λ)]`.
pub fn log_volume_element(param: &MetricParam, x: &SimplexPoint) -> Result<f64> {
    let s = positive_dot(x, param)?;
    require_interior(x)?;
    let n = x.dim() as f64;
    let ratio_sum: f64 = x.coords.iter().zip(&param.coords).map(|(a, l)| (l / a).ln()).sum();
    Ok(0.5 * (-n * 4f64.ln() + ratio_sum - (n + 1.0) * s.ln()))
}
