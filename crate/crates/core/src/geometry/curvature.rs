use nalgebra::{DMatrix, DVector};

use super::{ManifoldBackend, ManifoldKind, Point, TorusMetric};
use crate::error::{Error, Result};
use crate::fd::Scheme;

/// Christoffel symbols `Γ^k_ij`, stored `[k][i][j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.dim + i) * self.dim + j]
    }

    fn set(&mut self, k: usize, i: usize, j: usize, v: f64) {
        self.data[(k * self.dim + i) * self.dim + j] = v;
    }

    /// `Γ(a, b)^k = Γ^k_ij a^i b^j`.
    pub fn contract(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let m = self.dim;
        DVector::from_fn(m, |k, _| {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.get(k, i, j) * a[i] * b[j];
                }
            }
            s
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

/// Connection and curvature at a node, in the backend's working frame.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub christoffel: Christoffel,
    /// `R^l_ijk` stored `[l][i][j][k]`, with `R(e_i, e_j) e_k = R^l_ijk e_l`.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
}

impl CurvatureData {
    pub fn riemann_component(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let m = self.christoffel.dim();
        self.riemann[((l * m + i) * m + j) * m + k]
    }
}

impl ManifoldBackend {
    /// Christoffel symbols at an arbitrary chart point of a torus, from
    /// sixth-order central differences of the catalog metric.
    pub(crate) fn christoffel_at_point(&self, p: &Point) -> Christoffel {
        let m = self.dim;
        let mut gamma = Christoffel::zeros(m);
        if self.metric == TorusMetric::Flat {
            return gamma;
        }
        let scheme = Scheme::analytic();
        let g = self.metric.matrix(p.as_slice());
        let ginv = g.clone().try_inverse().expect("catalog metrics are invertible");
        // dg[l] = ∂_l g
        let dg: Vec<DMatrix<f64>> = (0..m)
            .map(|l| {
                let flat = scheme.d1(|t| {
                    let mut q = p.clone();
                    q[l] += t;
                    let gm = self.metric.matrix(q.as_slice());
                    DVector::from_column_slice(gm.as_slice())
                });
                DMatrix::from_column_slice(m, m, flat.as_slice())
            })
            .collect();
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for l in 0..m {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma.set(k, i, j, 0.5 * s);
                }
            }
        }
        gamma
    }

    /// `Γ^k_ij` at a torus node. Spheres use the projection formalism and
    /// have no chart Christoffels to report.
    pub fn christoffel_at(&self, node: usize) -> Result<Christoffel> {
        match self.kind {
            ManifoldKind::Sphere => Err(Error::Unsupported(
                "christoffel_at on a sphere; covariant derivatives there use ambient projection"
                    .into(),
            )),
            ManifoldKind::Torus => Ok(self.christoffel_at_point(&self.nodes[node])),
        }
    }

    /// Riemann tensor at an arbitrary point, in the working frame.
    pub(crate) fn riemann_at_point(&self, p: &Point) -> Vec<f64> {
        let m = self.dim;
        let mut r = vec![0.0; m * m * m * m];
        let idx = |l: usize, i: usize, j: usize, k: usize| ((l * m + i) * m + j) * m + k;
        match self.kind {
            ManifoldKind::Sphere => {
                for l in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
                                r[idx(l, i, j, k)] = d(j, k) * d(i, l) - d(i, k) * d(j, l);
                            }
                        }
                    }
                }
            }
            ManifoldKind::Torus => {
                if self.metric == TorusMetric::Flat {
                    return r;
                }
                let scheme = Scheme::analytic();
                let gamma = self.christoffel_at_point(p);
                // dgamma[a] = ∂_a Γ, flattened
                let dgamma: Vec<Vec<f64>> = (0..m)
                    .map(|a| {
                        scheme
                            .d1(|t| {
                                let mut q = p.clone();
                                q[a] += t;
                                DVector::from_vec(self.christoffel_at_point(&q).data)
                            })
                            .as_slice()
                            .to_vec()
                    })
                    .collect();
                let dg = |a: usize, k: usize, i: usize, j: usize| dgamma[a][(k * m + i) * m + j];
                for l in 0..m {
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                let mut v = dg(i, l, j, k) - dg(j, l, i, k);
                                for q in 0..m {
                                    v += gamma.get(l, i, q) * gamma.get(q, j, k)
                                        - gamma.get(l, j, q) * gamma.get(q, i, k);
                                }
                                r[idx(l, i, j, k)] = v;
                            }
                        }
                    }
                }
            }
        }
        r
    }

    fn ricci_from_riemann(&self, r: &[f64]) -> DMatrix<f64> {
        let m = self.dim;
        let ric = DMatrix::from_fn(m, m, |j, k| {
            (0..m).map(|i| r[((i * m + i) * m + j) * m + k]).sum()
        });
        (&ric + ric.transpose()) * 0.5
    }

    /// Full connection and curvature data at a node.
    pub fn curvature_data_at(&self, node: usize) -> CurvatureData {
        let p = &self.nodes[node];
        let riemann = self.riemann_at_point(p);
        CurvatureData {
            christoffel: self.chart_christoffel(p),
            ricci: self.ricci_from_riemann(&riemann),
            riemann,
        }
    }

    /// Ricci tensor at a node in the working frame.
    pub fn ricci_at(&self, node: usize) -> DMatrix<f64> {
        self.ricci_at_point(&self.nodes[node])
    }

    pub(crate) fn ricci_at_point(&self, p: &Point) -> DMatrix<f64> {
        match self.kind {
            ManifoldKind::Sphere => DMatrix::identity(self.dim, self.dim) * (self.dim as f64 - 1.0),
            ManifoldKind::Torus => self.ricci_from_riemann(&self.riemann_at_point(p)),
        }
    }

    /// `Ric(v, v)` for a tangent vector in the point representation.
    pub fn ricci_quadratic(&self, p: &Point, v: &DVector<f64>) -> f64 {
        match self.kind {
            ManifoldKind::Sphere => (self.dim as f64 - 1.0) * self.tangentialize(p, v).norm_squared(),
            ManifoldKind::Torus => {
                if self.metric.is_flat() {
                    return 0.0;
                }
                let ric = self.ricci_at_point(p);
                (&ric * v).dot(v)
            }
        }
    }

    /// `R(X, Y) Z` at an arbitrary point, vectors in the point representation.
    pub fn riemann_apply_at_point(
        &self,
        p: &Point,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        match self.kind {
            ManifoldKind::Sphere => x * y.dot(z) - y * x.dot(z),
            ManifoldKind::Torus => {
                let m = self.dim;
                if self.metric.is_flat() {
                    return DVector::zeros(m);
                }
                let r = self.riemann_at_point(p);
                DVector::from_fn(m, |l, _| {
                    let mut s = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            for k in 0..m {
                                s += r[((l * m + i) * m + j) * m + k] * x[i] * y[j] * z[k];
                            }
                        }
                    }
                    s
                })
            }
        }
    }

    /// `R(X, Y) Z` at a node.
    pub fn riemann_apply(
        &self,
        node: usize,
        x: &DVector<f64>,
        y: &DVector<f64>,
        z: &DVector<f64>,
    ) -> DVector<f64> {
        self.riemann_apply_at_point(&self.nodes[node], x, y, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn warp1() -> ManifoldBackend {
        ManifoldBackend::build_torus(2, 32, TorusMetric::Warp1 { eps: 0.1 }).unwrap()
    }

    #[test]
    fn flat_torus_has_no_connection_or_curvature() {
        let t = ManifoldBackend::build_torus(3, 6, TorusMetric::Flat).unwrap();
        for node in [0, 17, 100] {
            assert_eq!(t.christoffel_at(node).unwrap().max_abs(), 0.0);
            assert_eq!(t.ricci_at(node).norm(), 0.0);
        }
    }

    #[test]
    fn warp1_christoffel_matches_symbolic_derivative() {
        let t = warp1();
        // Γ¹₁₁ = ∂₁g₁₁ / (2 g₁₁) = 0.2π cos(2πx) / (2(1 + 0.1 sin 2πx))
        let at0 = t.grid_lookup(&DVector::from_vec(vec![0.0, 0.0])).unwrap();
        let g0 = t.christoffel_at(at0).unwrap();
        assert!((g0.get(0, 0, 0) - 0.1 * PI).abs() < 1e-6);
        let at_quarter = t.grid_lookup(&DVector::from_vec(vec![0.25, 0.5])).unwrap();
        let gq = t.christoffel_at(at_quarter).unwrap();
        assert!(gq.get(0, 0, 0).abs() < 1e-8);
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gq.get(k, i, j) - gq.get(k, j, i)).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn warp1_is_intrinsically_flat() {
        let t = warp1();
        for node in [0, 5, 77, 300] {
            assert!(t.ricci_at(node).norm() < 1e-6);
        }
    }

    #[test]
    fn warp2_gaussian_curvature_matches_closed_form() {
        // g = dx² + f(x) dy², K = -(√f)'' / √f, Ric = K g
        let eps = 0.3;
        let t = ManifoldBackend::build_torus(2, 16, TorusMetric::Warp2 { eps }).unwrap();
        for node in [0, 3, 9, 40, 121] {
            let x = t.node(node)[0];
            let w = 2.0 * PI;
            let f = 1.0 + eps * (w * x).sin();
            let f1 = eps * w * (w * x).cos();
            let f2 = -eps * w * w * (w * x).sin();
            let sqrt_f2 = f2 / (2.0 * f.sqrt()) - f1 * f1 / (4.0 * f.powf(1.5));
            let k = -sqrt_f2 / f.sqrt();
            let ric = t.ricci_at(node);
            let g = t.metric_at(node);
            assert!((&ric - &g * k).norm() < 1e-6, "node {node}");
        }
    }

    #[test]
    fn sphere_curvature_closed_form() {
        let s = ManifoldBackend::build_sphere(2, 6).unwrap();
        let p = s.node(5).clone();
        let f = s.frame_at(&p);
        let (x, y) = (&f.vectors[0], &f.vectors[1]);
        let r = s.riemann_apply(5, x, y, y);
        assert!((r - x).norm() < 1e-14);
        let s3 = ManifoldBackend::build_sphere(3, 4).unwrap();
        let u = &s3.frame_at(s3.node(0)).vectors[1];
        assert!((s3.ricci_quadratic(s3.node(0), u) - 2.0).abs() < 1e-14);
        let cd = s3.curvature_data_at(0);
        // antisymmetry in the first two slots
        for l in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let a = cd.riemann_component(l, i, j, k);
                        let b = cd.riemann_component(l, j, i, k);
                        assert!((a + b).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn christoffel_unsupported_on_spheres() {
        let s = ManifoldBackend::build_sphere(2, 4).unwrap();
        assert!(matches!(s.christoffel_at(0), Err(Error::Unsupported(_))));
    }
}
