//! Laplace–Beltrami spectra, the rough Laplacian and the Helmholtz split.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{Polynomial, Section};
use crate::geometry::{ManifoldBackend, Point};
use crate::linalg::{conjugate_gradient, generalized_symmetric_eigen};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Analytic,
    Discrete,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// Distinct eigenvalues in ascending order with multiplicities.
    pub eigenvalues: Vec<(f64, usize)>,
    pub method: SpectrumMethod,
    /// Quadrature resolution (sphere) or nodes per axis (torus).
    pub resolution: usize,
    /// Trial-space degree of a discrete solve.
    pub degree: Option<u32>,
}

impl SpectrumReport {
    /// Smallest positive eigenvalue.
    pub fn mu1(&self) -> Option<f64> {
        let scale = self.eigenvalues.last().map(|e| e.0.abs()).unwrap_or(1.0).max(1.0);
        self.eigenvalues
            .iter()
            .map(|e| e.0)
            .find(|&v| v > 1e-8 * scale)
    }
}

/// Scalar trial functions.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarBasis {
    /// Restriction of an ambient monomial to a sphere.
    Monomial(Vec<u32>),
    /// `cos(2π k·x)` / `sin(2π k·x)` on a torus.
    Fourier { k: Vec<i64>, sine: bool },
}

impl ScalarBasis {
    pub fn value(&self, p: &Point) -> f64 {
        match self {
            ScalarBasis::Monomial(e) => Polynomial::monomial(e.clone()).eval(p),
            ScalarBasis::Fourier { k, sine } => {
                let t = 2.0 * PI * phase(k, p);
                if *sine {
                    t.sin()
                } else {
                    t.cos()
                }
            }
        }
    }

    /// Riemannian gradient in the backend's point representation.
    pub fn gradient(&self, backend: &ManifoldBackend, p: &Point) -> DVector<f64> {
        match self {
            ScalarBasis::Monomial(e) => {
                backend.tangentialize(p, &Polynomial::monomial(e.clone()).gradient(p))
            }
            ScalarBasis::Fourier { k, sine } => {
                let t = 2.0 * PI * phase(k, p);
                let d = if *sine { t.cos() } else { -t.sin() };
                let df = DVector::from_fn(k.len(), |a, _| 2.0 * PI * k[a] as f64 * d);
                if backend.torus_metric() == crate::geometry::TorusMetric::Flat {
                    df
                } else {
                    backend.frame_at(p).inverse * df
                }
            }
        }
    }
}

fn phase(k: &[i64], p: &Point) -> f64 {
    k.iter().enumerate().map(|(a, &ka)| ka as f64 * p[a]).sum()
}

/// Monomials of degree `1..=degree` in the ambient coordinates of a sphere.
pub fn sphere_monomial_basis(backend: &ManifoldBackend, degree: u32) -> Vec<ScalarBasis> {
    (1..=degree)
        .flat_map(|d| Polynomial::monomials_of_degree(backend.ambient_dim(), d))
        .map(ScalarBasis::Monomial)
        .collect()
}

/// Real Fourier modes with `0 < |k|_∞ ≤ degree`, one representative per `±k`.
pub fn torus_fourier_basis(backend: &ManifoldBackend, degree: u32) -> Vec<ScalarBasis> {
    let m = backend.dim();
    let d = degree as i64;
    let side = (2 * d + 1) as usize;
    let mut out = Vec::new();
    for idx in 0..side.pow(m as u32) {
        let mut rem = idx;
        let k: Vec<i64> = (0..m)
            .map(|_| {
                let c = (rem % side) as i64 - d;
                rem /= side;
                c
            })
            .collect();
        // keep k with the first non-zero entry positive
        match k.iter().find(|&&c| c != 0) {
            Some(&c) if c > 0 => {
                out.push(ScalarBasis::Fourier { k: k.clone(), sine: false });
                out.push(ScalarBasis::Fourier { k, sine: true });
            }
            _ => {}
        }
    }
    out
}

/// Per-node samples of values and gradients of a scalar basis.
fn sample_basis(
    backend: &ManifoldBackend,
    basis: &[ScalarBasis],
) -> Vec<(Vec<f64>, Vec<DVector<f64>>)> {
    basis
        .par_iter()
        .map(|b| {
            backend
                .nodes()
                .iter()
                .map(|p| (b.value(p), b.gradient(backend, p)))
                .unzip()
        })
        .collect()
}

fn stiffness_and_mass(
    backend: &ManifoldBackend,
    samples: &[(Vec<f64>, Vec<DVector<f64>>)],
    with_constant: bool,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = backend.weights();
    let nodes = backend.nodes();
    let off = usize::from(with_constant);
    let n = samples.len() + off;
    let mut k = DMatrix::zeros(n, n);
    let mut mass = DMatrix::zeros(n, n);
    let value = |a: usize, node: usize| if a < off { 1.0 } else { samples[a - off].0[node] };
    for a in 0..n {
        for b in a..n {
            let mut kab = 0.0;
            let mut mab = 0.0;
            for (node, p) in nodes.iter().enumerate() {
                mab += w[node] * value(a, node) * value(b, node);
                if a >= off && b >= off {
                    kab += w[node] * backend.inner(p, &samples[a - off].1[node], &samples[b - off].1[node]);
                }
            }
            k[(a, b)] = kab;
            k[(b, a)] = kab;
            mass[(a, b)] = mab;
            mass[(b, a)] = mab;
        }
    }
    (k, mass)
}

fn group(values: &[f64], count: usize) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some((last, mult)) if (v - *last).abs() <= 1e-6 * (1.0 + last.abs()) => *mult += 1,
            _ => {
                if out.len() == count {
                    break;
                }
                out.push((v, 1));
            }
        }
    }
    out
}

/// Rayleigh–Ritz spectrum of the Laplace–Beltrami operator on a scalar basis
/// (constants are always included).
pub fn ritz_function_spectrum(
    backend: &ManifoldBackend,
    basis: &[ScalarBasis],
    count: usize,
) -> Result<Vec<(f64, usize)>> {
    let samples = sample_basis(backend, basis);
    let (k, mass) = stiffness_and_mass(backend, &samples, true);
    let eig = generalized_symmetric_eigen(&k, &mass, tolerances::BASIS_PRUNE)?;
    let vals: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    Ok(group(&vals, count))
}

/// Default trial degree for tori.
fn default_torus_degree(backend: &ManifoldBackend) -> u32 {
    let by_dim = match backend.dim() {
        1 => 8,
        2 => 4,
        3 => 2,
        _ => 1,
    };
    let n = backend.grid_size().unwrap_or(8) as u32;
    by_dim.min((n.saturating_sub(1)) / 2).max(1)
}

/// First `count` distinct eigenvalues of the Laplacian on functions.
pub fn function_spectrum(backend: &ManifoldBackend, count: usize) -> Result<SpectrumReport> {
    if backend.is_sphere() {
        let m = backend.dim();
        let eigenvalues = (0..count)
            .map(|k| (sphere_eigenvalue(m, k), sphere_multiplicity(m, k)))
            .collect();
        let resolution = match *backend.quadrature() {
            crate::geometry::QuadratureRule::Product { resolution } => resolution,
            crate::geometry::QuadratureRule::MonteCarlo { samples, .. } => samples,
            crate::geometry::QuadratureRule::Grid { n_per_axis } => n_per_axis,
        };
        return Ok(SpectrumReport {
            eigenvalues,
            method: SpectrumMethod::Analytic,
            resolution,
            degree: None,
        });
    }
    function_spectrum_with_degree(backend, count, default_torus_degree(backend))
}

/// Discrete spectrum from a trial space of the given degree (Fourier modes on
/// tori, restricted monomials on spheres).
pub fn function_spectrum_with_degree(
    backend: &ManifoldBackend,
    count: usize,
    degree: u32,
) -> Result<SpectrumReport> {
    let basis = if backend.is_sphere() {
        sphere_monomial_basis(backend, degree)
    } else {
        torus_fourier_basis(backend, degree)
    };
    let eigenvalues = ritz_function_spectrum(backend, &basis, count)?;
    let resolution = match *backend.quadrature() {
        crate::geometry::QuadratureRule::Product { resolution } => resolution,
        crate::geometry::QuadratureRule::MonteCarlo { samples, .. } => samples,
        crate::geometry::QuadratureRule::Grid { n_per_axis } => n_per_axis,
    };
    Ok(SpectrumReport {
        eigenvalues,
        method: SpectrumMethod::Discrete,
        resolution,
        degree: Some(degree),
    })
}

pub fn mu1(backend: &ManifoldBackend) -> Result<f64> {
    function_spectrum(backend, 3)?
        .mu1()
        .ok_or_else(|| Error::Numeric("no positive eigenvalue found".into()))
}

/// `k(k+m−1)`.
pub fn sphere_eigenvalue(m: usize, k: usize) -> f64 {
    (k * (k + m - 1)) as f64
}

/// Dimension of degree-`k` spherical harmonics on `S^m`:
/// `C(m+k, m) − C(m+k−2, m)`.
pub fn sphere_multiplicity(m: usize, k: usize) -> usize {
    let c = |n: usize, r: usize| -> usize {
        if r > n {
            return 0;
        }
        let mut acc: u128 = 1;
        for i in 0..r {
            acc = acc * (n - i) as u128 / (i + 1) as u128;
        }
        acc as usize
    };
    let lower = if m + k >= 2 { c(m + k - 2, m) } else { 0 };
    c(m + k, m) - lower
}

fn require_field_on_manifold(field: &Section) -> Result<()> {
    if field.base().is_identity() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "expected a vector field on M (a section over the identity)".into(),
        ))
    }
}

/// Rough Laplacian `Δ̄v = −Tr_g ∇²v` at a point.
pub fn rough_laplacian_at(field: &Section, p: &Point) -> Result<DVector<f64>> {
    require_field_on_manifold(field)?;
    let backend = field.base().source();
    let scheme = field.scheme();
    let frame = backend.frame_at(p);
    let m = backend.dim();
    if backend.is_sphere() {
        // along the geodesic γ with γ' = e: ∇²v(e, e) = P v'' + e ⟨e, v⟩
        let v = field.value_at(p);
        let mut acc = DVector::zeros(p.len());
        for e in &frame.vectors {
            let second = scheme.d2(|t| field.value_at(&crate::geometry::sphere_exp(p, &(e * t))));
            acc += backend.tangentialize(p, &second) + e * e.dot(&v);
        }
        return Ok(-acc);
    }
    // torus: coordinate frame with Christoffel corrections
    let nabla_j = |q: &Point, j: usize| -> DVector<f64> {
        let fq = backend.frame_at(q);
        let dv = scheme.d1(|t| field.value_at(&backend.chart_offset(q, &fq, j, t)));
        let v = field.value_at(q);
        dv + backend.connection(q, &fq.vectors[j], &v)
    };
    let gamma = backend.chart_christoffel(p);
    let w: Vec<DVector<f64>> = (0..m).map(|j| nabla_j(p, j)).collect();
    let mut acc = DVector::zeros(m);
    for i in 0..m {
        for j in 0..m {
            let gij = frame.inverse[(i, j)];
            if gij == 0.0 {
                continue;
            }
            let dwj = scheme.d1(|t| nabla_j(&backend.chart_offset(p, &frame, i, t), j));
            let mut second = dwj + backend.connection(p, &frame.vectors[i], &w[j]);
            for k in 0..m {
                second.axpy(-gamma.get(k, i, j), &w[k], 1.0);
            }
            acc.axpy(gij, &second, 1.0);
        }
    }
    Ok(-acc)
}

pub fn rough_laplacian(field: &Section, node: usize) -> Result<DVector<f64>> {
    rough_laplacian_at(field, field.base().source().node(node))
}

/// `v = X + grad κ` with `div X = 0`, node by node.
#[derive(Debug, Clone)]
pub struct HelmholtzSplit {
    pub divergence_free: Vec<DVector<f64>>,
    pub gradient: Vec<DVector<f64>>,
    /// Coefficients of `κ` in the trial basis.
    pub potential: Vec<f64>,
    pub basis: Vec<ScalarBasis>,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl HelmholtzSplit {
    /// `|∫ g(X, grad κ)| / ‖v‖²`.
    pub fn orthogonality(&self, backend: &ManifoldBackend) -> Result<f64> {
        let nodes = backend.nodes();
        let cross: Vec<f64> = (0..nodes.len())
            .map(|n| backend.inner(&nodes[n], &self.divergence_free[n], &self.gradient[n]))
            .collect();
        let total: Vec<f64> = (0..nodes.len())
            .map(|n| {
                let v = &self.divergence_free[n] + &self.gradient[n];
                backend.norm_sq(&nodes[n], &v)
            })
            .collect();
        let norm = backend.integrate(&total)?;
        Ok(backend.integrate(&cross)?.abs() / norm.max(f64::MIN_POSITIVE))
    }
}

/// Default trial degree for the potential.
pub const HELMHOLTZ_DEGREE: u32 = 4;

/// Projects `v` onto gradients of the trial space (weak form of
/// `Δκ = −div v`), solved by conjugate gradients.
pub fn helmholtz_split(field: &Section, degree: u32) -> Result<HelmholtzSplit> {
    require_field_on_manifold(field)?;
    let backend = field.base().source();
    let basis = if backend.is_sphere() {
        sphere_monomial_basis(backend, degree)
    } else {
        torus_fourier_basis(backend, degree)
    };
    let samples = sample_basis(backend, &basis);
    let (a, _) = stiffness_and_mass(backend, &samples, false);
    let v = field.sample();
    let nodes = backend.nodes();
    let w = backend.weights();
    let b = DVector::from_fn(basis.len(), |k, _| {
        (0..nodes.len())
            .map(|n| w[n] * backend.inner(&nodes[n], &samples[k].1[n], &v[n]))
            .sum()
    });
    let sol = conjugate_gradient(&a, &b, tolerances::CG, 20 * basis.len().max(10))?;
    let gradient: Vec<DVector<f64>> = (0..nodes.len())
        .map(|n| {
            let mut g = DVector::zeros(v[n].len());
            for (k, s) in samples.iter().enumerate() {
                g.axpy(sol.x[k], &s.1[n], 1.0);
            }
            g
        })
        .collect();
    let divergence_free = v.iter().zip(&gradient).map(|(v, g)| v - g).collect();
    Ok(HelmholtzSplit {
        divergence_free,
        gradient,
        potential: sol.x.iter().copied().collect(),
        basis,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::MapField;
    use crate::geometry::TorusMetric;
    use std::sync::Arc;

    #[test]
    fn analytic_sphere_spectra() {
        let s2 = ManifoldBackend::build_sphere(2, 4).unwrap();
        let r = function_spectrum(&s2, 3).unwrap();
        assert_eq!(r.eigenvalues, vec![(0.0, 1), (2.0, 3), (6.0, 5)]);
        assert_eq!(mu1(&s2).unwrap(), 2.0);
        let s3 = ManifoldBackend::build_sphere(3, 4).unwrap();
        assert_eq!(mu1(&s3).unwrap(), 3.0);
        assert_eq!(sphere_multiplicity(3, 2), 9);
    }

    #[test]
    fn discrete_s2_matches_analytic() {
        let s2 = ManifoldBackend::build_sphere(2, 12).unwrap();
        let r = function_spectrum_with_degree(&s2, 3, 3).unwrap();
        for ((v, mult), k) in r.eigenvalues.iter().zip(0..) {
            assert!((v - sphere_eigenvalue(2, k)).abs() < 1e-3);
            assert_eq!(*mult, sphere_multiplicity(2, k));
        }
    }

    #[test]
    fn flat_torus_mu1() {
        let t = ManifoldBackend::build_torus(2, 16, TorusMetric::Flat).unwrap();
        let r = function_spectrum(&t, 3).unwrap();
        assert!((r.mu1().unwrap() - 4.0 * PI * PI).abs() < 1e-6);
        assert_eq!(r.eigenvalues[1].1, 4);
    }

    #[test]
    fn gradient_eigenfield_rough_laplacian() {
        let s = Arc::new(ManifoldBackend::build_sphere(3, 4).unwrap());
        let id = Arc::new(MapField::identity(s.clone()));
        let v = Section::gradient(id.clone(), Polynomial::linear(&[0.2, 0.0, -1.0, 0.5])).unwrap();
        let k = Section::killing_rotation(id.clone(), 0, 2).unwrap();
        for node in [0, 7, 30] {
            let lv = rough_laplacian(&v, node).unwrap();
            assert!((lv - v.value(node)).norm() < 1e-6);
            let lk = rough_laplacian(&k, node).unwrap();
            assert!((lk - k.value(node) * 2.0).norm() < 1e-6);
        }
    }

    #[test]
    fn helmholtz_recovers_summands() {
        let s = Arc::new(ManifoldBackend::build_sphere(2, 12).unwrap());
        let id = Arc::new(MapField::identity(s.clone()));
        let rot = Section::killing_rotation(id.clone(), 0, 1).unwrap();
        let gz = Section::gradient(id.clone(), Polynomial::linear(&[0.0, 0.0, 1.0])).unwrap();
        let sum = Section::combine(&[(1.0, &rot), (1.0, &gz)]).unwrap();
        let split = helmholtz_split(&sum, HELMHOLTZ_DEGREE).unwrap();
        for n in 0..s.len() {
            assert!((&split.divergence_free[n] - rot.value(n)).norm() < 1e-6);
            assert!((&split.gradient[n] - gz.value(n)).norm() < 1e-6);
        }
        assert!(split.orthogonality(&s).unwrap() < 1e-8);
    }
}
