//! Compact Riemannian manifolds as node/weight/evaluator bundles.
//!
//! Two families are supported. Round spheres `S^m` live in `R^{m+1}` and use
//! the ambient projection formalism: points are unit vectors, tangent
//! vectors are ambient vectors orthogonal to the point, and every chart is
//! the normal-coordinate chart `u ↦ exp_p(Σ u_i e_i)` so that the working
//! frame is orthonormal and chart Christoffels vanish at the centre. Tori
//! `T^m = R^m / Z^m` use periodic chart coordinates and one of the catalog
//! metrics; their connection and curvature come from finite differences of
//! the metric.

mod curvature;
mod embedding;
pub mod quadrature;

pub use curvature::{Christoffel, CurvatureData};
pub use embedding::EmbeddingData;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fd::Scheme;

/// A point of a backend: ambient unit vector (sphere) or chart coordinates (torus).
pub type Point = DVector<f64>;

/// Largest sphere dimension accepted by [`ManifoldBackend::build_sphere`].
pub const MAX_SPHERE_DIM: usize = 16;
/// Largest torus dimension accepted by [`ManifoldBackend::build_torus`].
pub const MAX_TORUS_DIM: usize = 4;
/// Seed used when a high-dimensional sphere is built without an explicit one.
pub const DEFAULT_MC_SEED: u64 = 0x5eed_a1fa;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Sphere,
    Torus,
}

/// Catalog metrics on the torus. Each is diagonal and depends on `x¹` only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum TorusMetric {
    Flat,
    /// `g₁₁ = 1 + ε sin(2πx¹)`, other entries `δ_ij`. Intrinsically flat.
    Warp1 { eps: f64 },
    /// `g₂₂ = 1 + ε sin(2πx¹)`, other entries `δ_ij`. A warped product with
    /// non-zero curvature; needs `m ≥ 2`.
    Warp2 { eps: f64 },
}

impl TorusMetric {
    pub fn from_id(id: &str, params: &[f64]) -> Result<Self> {
        let eps = || {
            params.first().copied().ok_or_else(|| {
                Error::InvalidParameter(format!("metric `{id}` needs one parameter ε"))
            })
        };
        match id {
            "flat" => Ok(TorusMetric::Flat),
            "warp1" => Ok(TorusMetric::Warp1 { eps: eps()? }),
            "warp2" => Ok(TorusMetric::Warp2 { eps: eps()? }),
            other => Err(Error::UnknownCatalogEntry(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            TorusMetric::Flat => "flat",
            TorusMetric::Warp1 { .. } => "warp1",
            TorusMetric::Warp2 { .. } => "warp2",
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match *self {
            TorusMetric::Flat => vec![],
            TorusMetric::Warp1 { eps } | TorusMetric::Warp2 { eps } => vec![eps],
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, TorusMetric::Warp2 { .. })
    }

    fn validate(&self, m: usize) -> Result<()> {
        match *self {
            TorusMetric::Flat => Ok(()),
            TorusMetric::Warp1 { eps } | TorusMetric::Warp2 { eps } => {
                if !eps.is_finite() || eps.abs() >= 1.0 {
                    return Err(Error::InvalidParameter(format!(
                        "metric {} with ε = {eps} is not positive definite (need |ε| < 1)",
                        self.id()
                    )));
                }
                if matches!(self, TorusMetric::Warp2 { .. }) && m < 2 {
                    return Err(Error::InvalidParameter("warp2 needs m ≥ 2".into()));
                }
                Ok(())
            }
        }
    }

    /// Metric matrix at chart point `x`.
    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let m = x.len();
        let mut g = DMatrix::identity(m, m);
        match *self {
            TorusMetric::Flat => {}
            TorusMetric::Warp1 { eps } => g[(0, 0)] = 1.0 + eps * (2.0 * PI * x[0]).sin(),
            TorusMetric::Warp2 { eps } => g[(1, 1)] = 1.0 + eps * (2.0 * PI * x[0]).sin(),
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Product Gauss–Legendre × uniform azimuth rule (spheres, m ≤ 3).
    Product { resolution: usize },
    /// Seeded Monte Carlo with equal weights (spheres, m ≥ 4).
    MonteCarlo { samples: usize, seed: u64 },
    /// Periodic grid with `n_per_axis` nodes per axis (tori).
    Grid { n_per_axis: usize },
}

/// Orthonormal (sphere) or coordinate (torus) frame at a point.
#[derive(Debug, Clone)]
pub struct Frame {
    /// Frame vectors in the backend's point representation.
    pub vectors: Vec<DVector<f64>>,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl Frame {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// Components of a tangent vector expressed in this frame.
    pub fn components(&self, kind: ManifoldKind, v: &DVector<f64>) -> DVector<f64> {
        match kind {
            ManifoldKind::Sphere => DVector::from_iterator(
                self.vectors.len(),
                self.vectors.iter().map(|e| e.dot(v)),
            ),
            ManifoldKind::Torus => v.clone(),
        }
    }
}

/// A compact manifold realized by quadrature nodes, weights and evaluators.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct ManifoldBackend {
    kind: ManifoldKind,
    dim: usize,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    metric: TorusMetric,
    quadrature: QuadratureRule,
}

impl ManifoldBackend {
    /// Round unit sphere `S^m`. Product Gauss rules for `m ≤ 3`, seeded Monte
    /// Carlo with `resolution³` samples above.
    pub fn build_sphere(m: usize, resolution: usize) -> Result<Self> {
        if m >= 4 {
            return Self::build_sphere_monte_carlo(m, resolution.pow(3), DEFAULT_MC_SEED);
        }
        if m == 0 {
            return Err(Error::UnsupportedDimension {
                what: "sphere",
                dim: m,
                supported: "1..=16",
            });
        }
        if resolution < 2 {
            return Err(Error::InvalidParameter("sphere resolution must be ≥ 2".into()));
        }
        let (nodes, weights) = quadrature::sphere_product_rule(m, resolution);
        Ok(Self {
            kind: ManifoldKind::Sphere,
            dim: m,
            nodes,
            weights,
            metric: TorusMetric::Flat,
            quadrature: QuadratureRule::Product { resolution },
        })
    }

    pub fn build_sphere_monte_carlo(m: usize, samples: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > MAX_SPHERE_DIM {
            return Err(Error::UnsupportedDimension {
                what: "sphere",
                dim: m,
                supported: "1..=16",
            });
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("Monte Carlo needs at least one sample".into()));
        }
        let (nodes, weights) = quadrature::sphere_monte_carlo(m, samples, seed);
        Ok(Self {
            kind: ManifoldKind::Sphere,
            dim: m,
            nodes,
            weights,
            metric: TorusMetric::Flat,
            quadrature: QuadratureRule::MonteCarlo { samples, seed },
        })
    }

    /// Torus `T^m` on a periodic grid of `n_per_axis^m` nodes at `i / n`.
    pub fn build_torus(m: usize, n_per_axis: usize, metric: TorusMetric) -> Result<Self> {
        if m == 0 || m > MAX_TORUS_DIM {
            return Err(Error::UnsupportedDimension {
                what: "torus",
                dim: m,
                supported: "1..=4",
            });
        }
        if n_per_axis < 5 {
            return Err(Error::InvalidParameter(
                "torus grids need at least 5 nodes per axis".into(),
            ));
        }
        metric.validate(m)?;
        let total = n_per_axis.pow(m as u32);
        let cell = 1.0 / total as f64;
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let x = DVector::from_fn(m, |_, _| {
                let i = rem % n_per_axis;
                rem /= n_per_axis;
                i as f64 / n_per_axis as f64
            });
            weights.push(metric.matrix(x.as_slice()).determinant().sqrt() * cell);
            nodes.push(x);
        }
        Ok(Self {
            kind: ManifoldKind::Torus,
            dim: m,
            nodes,
            weights,
            metric,
            quadrature: QuadratureRule::Grid { n_per_axis },
        })
    }

    /// Catalog-keyed torus constructor.
    pub fn build_torus_by_id(
        m: usize,
        n_per_axis: usize,
        metric_id: &str,
        params: &[f64],
    ) -> Result<Self> {
        Self::build_torus(m, n_per_axis, TorusMetric::from_id(metric_id, params)?)
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sphere(&self) -> bool {
        self.kind == ManifoldKind::Sphere
    }

    pub fn is_torus(&self) -> bool {
        self.kind == ManifoldKind::Torus
    }

    /// Length of the vectors representing points and tangent vectors.
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere => self.dim + 1,
            ManifoldKind::Torus => self.dim,
        }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn torus_metric(&self) -> TorusMetric {
        self.metric
    }

    /// Catalog key of the metric (`round` for spheres).
    pub fn metric_id(&self) -> &'static str {
        match self.kind {
            ManifoldKind::Sphere => "round",
            ManifoldKind::Torus => self.metric.id(),
        }
    }

    pub fn params(&self) -> Vec<f64> {
        self.metric.params()
    }

    pub fn quadrature(&self) -> &QuadratureRule {
        &self.quadrature
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self.quadrature, QuadratureRule::MonteCarlo { .. })
    }

    /// Nodes per axis of a torus grid.
    pub fn grid_size(&self) -> Option<usize> {
        match self.quadrature {
            QuadratureRule::Grid { n_per_axis } => Some(n_per_axis),
            _ => None,
        }
    }

    /// Whether the metric is flat (spheres never are).
    pub fn is_flat(&self) -> bool {
        self.is_torus() && self.metric.is_flat()
    }

    /// Einstein constant `λ` with `Ric = λ g`, when the metric is Einstein.
    pub fn einstein_constant(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::Sphere => Some(self.dim as f64 - 1.0),
            ManifoldKind::Torus if self.metric.is_flat() => Some(0.0),
            ManifoldKind::Torus => None,
        }
    }

    // ----- frames, charts and metric -------------------------------------------------

    /// Working frame at an arbitrary point.
    pub fn frame_at(&self, p: &Point) -> Frame {
        match self.kind {
            ManifoldKind::Sphere => {
                let vectors = sphere_tangent_frame(p);
                let m = self.dim;
                Frame {
                    vectors,
                    metric: DMatrix::identity(m, m),
                    inverse: DMatrix::identity(m, m),
                }
            }
            ManifoldKind::Torus => {
                let m = self.dim;
                let g = self.metric.matrix(p.as_slice());
                let inv = g.clone().try_inverse().expect("catalog metrics are invertible");
                Frame {
                    vectors: (0..m).map(|i| unit(m, i)).collect(),
                    metric: g,
                    inverse: inv,
                }
            }
        }
    }

    /// Chart map centred at `p`: normal coordinates for spheres, translation for tori.
    pub fn chart_point(&self, p: &Point, frame: &Frame, u: &[f64]) -> Point {
        match self.kind {
            ManifoldKind::Sphere => {
                let mut w = DVector::zeros(p.len());
                for (ui, e) in u.iter().zip(&frame.vectors) {
                    w.axpy(*ui, e, 1.0);
                }
                sphere_exp(p, &w)
            }
            ManifoldKind::Torus => {
                let mut q = p.clone();
                for (i, ui) in u.iter().enumerate() {
                    q[i] += ui;
                }
                q
            }
        }
    }

    /// Point reached from `p` by moving `t` along chart axis `axis`.
    pub fn chart_offset(&self, p: &Point, frame: &Frame, axis: usize, t: f64) -> Point {
        let mut u = vec![0.0; self.dim];
        u[axis] = t;
        self.chart_point(p, frame, &u)
    }

    pub fn metric_at(&self, node: usize) -> DMatrix<f64> {
        self.frame_at(&self.nodes[node]).metric
    }

    pub fn inverse_metric_at(&self, node: usize) -> DMatrix<f64> {
        self.frame_at(&self.nodes[node]).inverse
    }

    /// `√det g` in the working frame (1 for spheres).
    pub fn volume_density_at(&self, node: usize) -> f64 {
        self.metric_at(node).determinant().sqrt()
    }

    /// Riemannian inner product of two tangent vectors at `p`.
    pub fn inner(&self, p: &Point, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => a.dot(b),
            ManifoldKind::Torus => {
                if self.metric == TorusMetric::Flat {
                    a.dot(b)
                } else {
                    (self.metric.matrix(p.as_slice()) * b).dot(a)
                }
            }
        }
    }

    pub fn norm_sq(&self, p: &Point, a: &DVector<f64>) -> f64 {
        self.inner(p, a, a)
    }

    /// Tangential part of an ambient vector (identity on tori).
    pub fn tangentialize(&self, p: &Point, w: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => w - p * p.dot(w),
            ManifoldKind::Torus => w.clone(),
        }
    }

    /// Metric projection back onto the manifold (normalization / lifted identity).
    pub fn retract(&self, w: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => {
                let n = w.norm();
                w / n
            }
            ManifoldKind::Torus => w.clone(),
        }
    }

    /// Connection correction `Γ(p)(a, b)` added to coordinate derivatives of
    /// sections; zero for spheres, whose connection acts through projection.
    pub fn connection(&self, p: &Point, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => DVector::zeros(p.len()),
            ManifoldKind::Torus => {
                if self.metric == TorusMetric::Flat {
                    return DVector::zeros(self.dim);
                }
                let gamma = self.christoffel_at_point(p);
                gamma.contract(a, b)
            }
        }
    }

    /// Christoffel symbols of the working chart at `p`: zero at the centre of
    /// sphere normal coordinates, finite differences of the metric on tori.
    pub fn chart_christoffel(&self, p: &Point) -> Christoffel {
        match self.kind {
            ManifoldKind::Sphere => Christoffel::zeros(self.dim),
            ManifoldKind::Torus => self.christoffel_at_point(p),
        }
    }

    /// Lift of a torus node value: wraps a chart difference into (-½, ½].
    pub fn wrap_difference(&self, d: &DVector<f64>) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => d.clone(),
            ManifoldKind::Torus => d.map(|x| x - x.round()),
        }
    }

    // ----- torus grid helpers --------------------------------------------------------

    /// Neighbour of grid node `idx` shifted by `s` cells along `axis`.
    pub fn grid_shift(&self, idx: usize, axis: usize, s: i64) -> usize {
        let n = self.grid_size().expect("grid backend") as i64;
        let stride = (n as usize).pow(axis as u32);
        let coord = ((idx / stride) % n as usize) as i64;
        let shifted = (coord + s).rem_euclid(n) as usize;
        idx - coord as usize * stride + shifted * stride
    }

    /// Grid node closest to chart point `p`, if `p` sits on the grid.
    pub fn grid_lookup(&self, p: &Point) -> Option<usize> {
        let n = self.grid_size()?;
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..self.dim {
            let scaled = p[a] * n as f64;
            let r = scaled.round();
            if (scaled - r).abs() > 1e-6 {
                return None;
            }
            let i = (r as i64).rem_euclid(n as i64) as usize;
            idx += i * stride;
            stride *= n;
        }
        Some(idx)
    }

    // ----- integration ---------------------------------------------------------------

    /// Weighted sum of node values, in node order with compensated summation.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.nodes.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, backend has {} nodes",
                values.len(),
                self.nodes.len()
            )));
        }
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (i, (v, w)) in values.iter().zip(&self.weights).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { node: i });
            }
            let term = v * w;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
        }
        Ok(sum + comp)
    }

    /// Integrate a function of (node index, point).
    pub fn integrate_fn<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(usize, &Point) -> f64,
    {
        let values: Vec<f64> = self.nodes.iter().enumerate().map(|(i, p)| f(i, p)).collect();
        self.integrate(&values)
    }

    /// Integral together with the Monte Carlo standard error (zero for
    /// deterministic rules).
    pub fn integrate_with_error(&self, values: &[f64]) -> Result<(f64, f64)> {
        let value = self.integrate(values)?;
        let err = match self.quadrature {
            QuadratureRule::MonteCarlo { samples, .. } if samples > 1 => {
                let vol: f64 = self.weights.iter().sum();
                let n = samples as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                vol * (var / n).sqrt()
            }
            _ => 0.0,
        };
        Ok((value, err))
    }

    /// Sum of the quadrature weights.
    pub fn total_weight(&self) -> f64 {
        self.integrate(&vec![1.0; self.nodes.len()]).unwrap_or(f64::NAN)
    }

    /// Exact volume where a closed form exists (round spheres, flat tori).
    pub fn exact_volume(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::Sphere => Some(quadrature::sphere_volume(self.dim)),
            ManifoldKind::Torus if self.metric == TorusMetric::Flat => Some(1.0),
            ManifoldKind::Torus => None,
        }
    }

    /// Finite-difference scheme used for probing closed-form functions on this backend.
    pub fn analytic_scheme(&self) -> Scheme {
        Scheme::analytic()
    }
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// Orthonormal tangent frame of the unit sphere at `x`, read off the columns
/// of the Householder reflection that sends the dominant axis to `x`.
pub fn sphere_tangent_frame(x: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = x.len();
    let k = x.iamax();
    let s = if x[k] >= 0.0 { 1.0 } else { -1.0 };
    let mut u = x.clone();
    u[k] += s;
    let uu = u.dot(&u);
    (0..n)
        .filter(|&j| j != k)
        .map(|j| {
            let mut col = unit(n, j);
            col.axpy(-2.0 * u[j] / uu, &u, 1.0);
            col
        })
        .collect()
}

/// Exponential map of the unit sphere at `p` applied to tangent vector `w`.
pub fn sphere_exp(p: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let t = w.norm();
    if t < 1e-300 {
        return p.clone();
    }
    p * t.cos() + w * (t.sin() / t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_weight_sums() {
        let s1 = ManifoldBackend::build_sphere(1, 64).unwrap();
        assert!((s1.total_weight() - 2.0 * PI).abs() < 1e-12);
        let s2 = ManifoldBackend::build_sphere(2, 48).unwrap();
        assert!((s2.total_weight() - 4.0 * PI).abs() < 1e-10);
        let s3 = ManifoldBackend::build_sphere(3, 32).unwrap();
        assert!((s3.total_weight() - 2.0 * PI * PI).abs() < 1e-8);
        for p in s3.nodes().iter().step_by(97) {
            assert!((p.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn oversized_sphere_is_rejected() {
        let err = ManifoldBackend::build_sphere(17, 4).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDimension { dim: 17, .. }));
    }

    #[test]
    fn high_dimensional_sphere_uses_monte_carlo() {
        let s = ManifoldBackend::build_sphere(5, 6).unwrap();
        assert!(s.is_monte_carlo());
        assert_eq!(s.len(), 216);
        assert!((s.total_weight() - quadrature::sphere_volume(5)).abs() < 1e-10);
    }

    #[test]
    fn torus_weight_sums() {
        let t = ManifoldBackend::build_torus(2, 32, TorusMetric::Flat).unwrap();
        assert!((t.total_weight() - 1.0).abs() < 1e-14);
        let t3 = ManifoldBackend::build_torus(3, 16, TorusMetric::Flat).unwrap();
        assert!((t3.total_weight() - 1.0).abs() < 1e-14);
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        let m = 0.5 * (a + b);
        let simpson = |a: f64, b: f64| (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
        let whole = simpson(a, b);
        let split = simpson(a, m) + simpson(m, b);
        if (split - whole).abs() < 15.0 * tol {
            split + (split - whole) / 15.0
        } else {
            adaptive_simpson(f, a, m, 0.5 * tol) + adaptive_simpson(f, m, b, 0.5 * tol)
        }
    }

    #[test]
    fn warped_torus_volume_matches_one_dimensional_oracle() {
        let t = ManifoldBackend::build_torus_by_id(2, 32, "warp1", &[0.1]).unwrap();
        let f = |x: f64| (1.0 + 0.1 * (2.0 * PI * x).sin()).sqrt();
        let oracle = adaptive_simpson(&f, 0.0, 1.0, 1e-14);
        assert!((oracle - 0.999_373_53).abs() < 1e-8);
        assert!((t.total_weight() - oracle).abs() < 1e-12);
    }

    #[test]
    fn moments_and_symmetric_integrals() {
        let s = ManifoldBackend::build_sphere(2, 24).unwrap();
        let z2 = s.integrate_fn(|_, p| p[2] * p[2]).unwrap();
        assert!((z2 - 4.0 * PI / 3.0).abs() < 1e-10);
        let t = ManifoldBackend::build_torus(2, 32, TorusMetric::Flat).unwrap();
        let v = t.integrate_fn(|_, p| (2.0 * PI * p[0]).sin()).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn warp_metrics_validate_eps() {
        assert!(ManifoldBackend::build_torus_by_id(2, 8, "warp1", &[-1.0]).is_err());
        assert!(ManifoldBackend::build_torus_by_id(2, 8, "warp1", &[1.5]).is_err());
        assert!(matches!(
            ManifoldBackend::build_torus_by_id(2, 8, "bumpy", &[]),
            Err(Error::UnknownCatalogEntry(_))
        ));
    }

    #[test]
    fn metric_evaluations() {
        let t = ManifoldBackend::build_torus(2, 32, TorusMetric::Warp1 { eps: 0.1 }).unwrap();
        let node = t.grid_lookup(&DVector::from_vec(vec![0.25, 0.0])).unwrap();
        let g = t.metric_at(node);
        assert!((g[(0, 0)] - 1.1).abs() < 1e-14);
        assert!((g[(1, 1)] - 1.0).abs() < 1e-14);
        let s = ManifoldBackend::build_sphere(2, 6).unwrap();
        assert_eq!(s.metric_at(3), DMatrix::identity(2, 2));
    }

    #[test]
    fn sphere_frames_are_orthonormal_and_tangent() {
        let s = ManifoldBackend::build_sphere(3, 4).unwrap();
        for p in s.nodes().iter().take(40) {
            let f = s.frame_at(p);
            for (i, a) in f.vectors.iter().enumerate() {
                assert!(a.dot(p).abs() < 1e-14);
                for (j, b) in f.vectors.iter().enumerate() {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((a.dot(b) - e).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn grid_shift_wraps_periodically() {
        let t = ManifoldBackend::build_torus(2, 8, TorusMetric::Flat).unwrap();
        let idx = t.grid_lookup(&DVector::from_vec(vec![0.0, 7.0 / 8.0])).unwrap();
        let up = t.grid_shift(idx, 1, 1);
        assert_eq!(t.node(up), &DVector::from_vec(vec![0.0, 0.0]));
        let left = t.grid_shift(idx, 0, -1);
        assert_eq!(t.node(left), &DVector::from_vec(vec![7.0 / 8.0, 7.0 / 8.0]));
    }

    #[test]
    fn integrate_rejects_nan() {
        let t = ManifoldBackend::build_torus(1, 8, TorusMetric::Flat).unwrap();
        let mut v = vec![1.0; 8];
        v[3] = f64::NAN;
        assert!(matches!(t.integrate(&v), Err(Error::NonFinite { node: 3 })));
    }
}
