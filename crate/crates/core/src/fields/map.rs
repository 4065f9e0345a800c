use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd::Scheme;
use crate::geometry::{Christoffel, Frame, ManifoldBackend, Point};
use crate::tolerances;

use super::section::Section;

/// The catalog of maps.
#[derive(Debug, Clone)]
pub enum MapKind {
    Identity,
    Constant { point: Point },
    /// `S^m → S^{m+1}`, `x ↦ (x, 0)`.
    EquatorInclusion,
    /// `T^m → T^n`, `x ↦ A x` for an integer `n × m` matrix.
    TorusLinear { matrix: DMatrix<f64> },
    /// `T^m → T^m`, `x ↦ x + a sin(2πk x¹) e₁`.
    TorusWiggle { amplitude: f64, frequency: i64 },
    /// `T^m → S^n`, `x ↦ (cos 2πk x¹, sin 2πk x¹, 0, …)`, a closed geodesic
    /// traversed at constant speed.
    CircleLoop { winding: i64 },
    /// `Π(ψ + t v)` for an analytic base `ψ`.
    Perturbed {
        base: Arc<MapField>,
        direction: Arc<Section>,
        t: f64,
    },
    /// Node values on a torus grid.
    Discrete { values: Arc<Vec<Point>> },
}

/// A map `ψ: M → N` between two backends.
#[derive(Debug, Clone)]
pub struct MapField {
    source: Arc<ManifoldBackend>,
    target: Arc<ManifoldBackend>,
    kind: MapKind,
}

/// First-order data of a map at a source point.
#[derive(Debug, Clone)]
pub struct Jet {
    pub point: Point,
    pub frame: Frame,
    /// `ψ(p)`.
    pub value: Point,
    /// `dψ(E_i)`, tangent to the target at `ψ(p)`.
    pub d: Vec<DVector<f64>>,
}

/// Second-order data: chart second derivatives `∂_i ∂_j ψ` (ambient for
/// sphere targets) and the source chart Christoffels.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub jet: Jet,
    pub hessian: Vec<Vec<DVector<f64>>>,
    pub christoffel: Christoffel,
}

impl Jet {
    /// `|dψ|² = g^{ij} h(dψ(E_i), dψ(E_j))`.
    pub fn hs_norm_sq(&self, target: &ManifoldBackend) -> f64 {
        let m = self.d.len();
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let gij = self.frame.inverse[(i, j)];
                if gij != 0.0 {
                    s += gij * target.inner(&self.value, &self.d[i], &self.d[j]);
                }
            }
        }
        s
    }

    /// `dψ(Y)` for a source tangent vector with frame components `y`.
    pub fn push(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.value.len());
        for (yi, di) in y.iter().zip(&self.d) {
            out.axpy(*yi, di, 1.0);
        }
        out
    }

    /// Differential as a matrix with columns `dψ(E_i)`.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.d)
    }
}

impl MapField {
    pub fn identity(backend: Arc<ManifoldBackend>) -> Self {
        Self {
            source: backend.clone(),
            target: backend,
            kind: MapKind::Identity,
        }
    }

    pub fn constant(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
        point: Point,
    ) -> Result<Self> {
        if point.len() != target.ambient_dim() {
            return Err(Error::InvalidParameter(format!(
                "constant point has {} entries, target needs {}",
                point.len(),
                target.ambient_dim()
            )));
        }
        let point = if target.is_sphere() {
            let n = point.norm();
            if n < 1e-12 {
                return Err(Error::InvalidParameter("constant point is zero".into()));
            }
            point / n
        } else {
            point
        };
        Ok(Self {
            source,
            target,
            kind: MapKind::Constant { point },
        })
    }

    pub fn equator_inclusion(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
    ) -> Result<Self> {
        if !(source.is_sphere() && target.is_sphere() && target.dim() == source.dim() + 1) {
            return Err(Error::InvalidParameter(
                "equator inclusion needs spheres S^m → S^{m+1}".into(),
            ));
        }
        Ok(Self {
            source,
            target,
            kind: MapKind::EquatorInclusion,
        })
    }

    pub fn torus_linear(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
        matrix: DMatrix<f64>,
    ) -> Result<Self> {
        if !(source.is_torus() && target.is_torus()) {
            return Err(Error::InvalidParameter("torus_linear needs torus source and target".into()));
        }
        if matrix.nrows() != target.dim() || matrix.ncols() != source.dim() {
            return Err(Error::InvalidParameter(format!(
                "torus_linear matrix must be {}×{}",
                target.dim(),
                source.dim()
            )));
        }
        if matrix.iter().any(|a| a.fract() != 0.0) {
            return Err(Error::InvalidParameter(
                "torus_linear matrix must have integer entries".into(),
            ));
        }
        Ok(Self {
            source,
            target,
            kind: MapKind::TorusLinear { matrix },
        })
    }

    pub fn torus_wiggle(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
        amplitude: f64,
        frequency: i64,
    ) -> Result<Self> {
        if !(source.is_torus() && target.is_torus() && source.dim() == target.dim()) {
            return Err(Error::InvalidParameter(
                "torus_wiggle needs tori of equal dimension".into(),
            ));
        }
        if !amplitude.is_finite() {
            return Err(Error::InvalidParameter("amplitude must be finite".into()));
        }
        Ok(Self {
            source,
            target,
            kind: MapKind::TorusWiggle {
                amplitude,
                frequency,
            },
        })
    }

    pub fn circle_loop(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
        winding: i64,
    ) -> Result<Self> {
        if !(source.is_torus() && target.is_sphere()) {
            return Err(Error::InvalidParameter(
                "circle_loop needs a torus source and a sphere target".into(),
            ));
        }
        Ok(Self {
            source,
            target,
            kind: MapKind::CircleLoop { winding },
        })
    }

    /// Catalog constructor keyed by name.
    pub fn from_catalog(
        id: &str,
        params: &[f64],
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
    ) -> Result<Self> {
        let need = |n: usize| {
            if params.len() < n {
                Err(Error::InvalidParameter(format!("map `{id}` needs {n} parameters")))
            } else {
                Ok(())
            }
        };
        match id {
            "identity" => {
                if !Arc::ptr_eq(&source, &target) && !same_backend(&source, &target) {
                    return Err(Error::InvalidParameter(
                        "identity needs source and target to be the same manifold".into(),
                    ));
                }
                Ok(Self::identity(source))
            }
            "constant" => {
                let point = if params.is_empty() {
                    let mut p = DVector::zeros(target.ambient_dim());
                    if target.is_sphere() {
                        p[target.ambient_dim() - 1] = 1.0;
                    }
                    p
                } else {
                    DVector::from_column_slice(params)
                };
                Self::constant(source, target, point)
            }
            "equator_inclusion" => Self::equator_inclusion(source, target),
            "torus_linear" => {
                let (n, m) = (target.dim(), source.dim());
                need(n * m)?;
                Self::torus_linear(source, target, DMatrix::from_row_slice(n, m, &params[..n * m]))
            }
            "torus_wiggle" => {
                need(1)?;
                let k = params.get(1).copied().unwrap_or(1.0);
                Self::torus_wiggle(source, target, params[0], integer(k, "frequency")?)
            }
            "circle_loop" => {
                let k = params.first().copied().unwrap_or(1.0);
                Self::circle_loop(source, target, integer(k, "winding")?)
            }
            other => Err(Error::UnknownCatalogEntry(other.to_string())),
        }
    }

    /// Map given by node values on a torus source.
    pub fn discrete(
        source: Arc<ManifoldBackend>,
        target: Arc<ManifoldBackend>,
        values: Vec<Point>,
    ) -> Result<Self> {
        if !source.is_torus() {
            return Err(Error::Unsupported(
                "discrete maps need a torus source".into(),
            ));
        }
        if values.len() != source.len() {
            return Err(Error::InvalidParameter(format!(
                "discrete map has {} values, source has {} nodes",
                values.len(),
                source.len()
            )));
        }
        let mut out = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            if v.len() != target.ambient_dim() {
                return Err(Error::InvalidParameter(format!(
                    "value at node {i} has length {}, target needs {}",
                    v.len(),
                    target.ambient_dim()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite { node: i });
            }
            out.push(if target.is_sphere() {
                let n = v.norm();
                if n < 1e-12 {
                    return Err(Error::InvalidParameter(format!("zero value at node {i}")));
                }
                v / n
            } else {
                v.map(|x| x.rem_euclid(1.0))
            });
        }
        Ok(Self {
            source,
            target,
            kind: MapKind::Discrete {
                values: Arc::new(out),
            },
        })
    }

    /// Node sampling of this map as a discrete map (torus sources only).
    pub fn discretize(&self) -> Result<Self> {
        Self::discrete(self.source.clone(), self.target.clone(), self.values())
    }

    /// `Π(ψ + t v)`. Discrete bases give a discrete result.
    pub fn perturbed(self: &Arc<Self>, direction: &Section, t: f64) -> Result<Self> {
        if !Arc::ptr_eq(direction.base(), self) {
            return Err(Error::MismatchedBase);
        }
        if self.is_discrete() || matches!(direction.scheme(), Scheme::Grid { .. }) {
            let vals = self.values();
            let dir = direction.sample();
            let moved = vals
                .iter()
                .zip(&dir)
                .map(|(p, v)| self.target.retract(&(p + v * t)))
                .collect();
            return Self::discrete(self.source.clone(), self.target.clone(), moved);
        }
        Ok(Self {
            source: self.source.clone(),
            target: self.target.clone(),
            kind: MapKind::Perturbed {
                base: self.clone(),
                direction: Arc::new(direction.clone()),
                t,
            },
        })
    }

    pub fn source(&self) -> &Arc<ManifoldBackend> {
        &self.source
    }

    pub fn target(&self) -> &Arc<ManifoldBackend> {
        &self.target
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn kind_id(&self) -> &'static str {
        match self.kind {
            MapKind::Identity => "identity",
            MapKind::Constant { .. } => "constant",
            MapKind::EquatorInclusion => "equator_inclusion",
            MapKind::TorusLinear { .. } => "torus_linear",
            MapKind::TorusWiggle { .. } => "torus_wiggle",
            MapKind::CircleLoop { .. } => "circle_loop",
            MapKind::Perturbed { .. } => "perturbed",
            MapKind::Discrete { .. } => "discrete",
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, MapKind::Discrete { .. })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, MapKind::Identity)
    }

    /// Stored node values of a discrete map.
    pub fn discrete_values(&self) -> Option<&[Point]> {
        match &self.kind {
            MapKind::Discrete { values } => Some(values),
            _ => None,
        }
    }

    /// Finite-difference scheme matching how this map can be probed.
    pub fn scheme(&self) -> Scheme {
        if self.is_discrete() {
            Scheme::Grid {
                h: 1.0 / self.source.grid_size().expect("discrete maps live on grids") as f64,
            }
        } else {
            Scheme::analytic()
        }
    }

    /// `ψ(p)`. Torus targets report lifted (unwrapped) coordinates for
    /// analytic maps.
    pub fn value_at(&self, p: &Point) -> Point {
        match &self.kind {
            MapKind::Identity => p.clone(),
            MapKind::Constant { point } => point.clone(),
            MapKind::EquatorInclusion => p.clone().insert_row(p.len(), 0.0),
            MapKind::TorusLinear { matrix } => matrix * p,
            MapKind::TorusWiggle {
                amplitude,
                frequency,
            } => {
                let mut q = p.clone();
                q[0] += amplitude * (2.0 * PI * *frequency as f64 * p[0]).sin();
                q
            }
            MapKind::CircleLoop { winding } => {
                let th = 2.0 * PI * *winding as f64 * p[0];
                let mut q = DVector::zeros(self.target.ambient_dim());
                q[0] = th.cos();
                q[1] = th.sin();
                q
            }
            MapKind::Perturbed { base, direction, t } => {
                let y = base.value_at(p);
                self.target.retract(&(y + direction.value_at(p) * *t))
            }
            MapKind::Discrete { values } => {
                let idx = self
                    .source
                    .grid_lookup(p)
                    .expect("discrete maps are evaluated on grid nodes only");
                values[idx].clone()
            }
        }
    }

    pub fn value(&self, node: usize) -> Point {
        self.value_at(self.source.node(node))
    }

    pub fn values(&self) -> Vec<Point> {
        match &self.kind {
            MapKind::Discrete { values } => values.as_ref().clone(),
            _ => self.source.nodes().iter().map(|p| self.value_at(p)).collect(),
        }
    }

    /// Whether the catalog extension `F` has closed-form derivatives.
    fn closed_form(&self) -> bool {
        !matches!(
            self.kind,
            MapKind::Perturbed { .. } | MapKind::Discrete { .. }
        )
    }

    fn dfw(&self, p: &Point, w: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            MapKind::Identity => w.clone(),
            MapKind::Constant { point } => DVector::zeros(point.len()),
            MapKind::EquatorInclusion => w.clone().insert_row(w.len(), 0.0),
            MapKind::TorusLinear { matrix } => matrix * w,
            MapKind::TorusWiggle {
                amplitude,
                frequency,
            } => {
                let k = 2.0 * PI * *frequency as f64;
                let mut out = w.clone();
                out[0] += amplitude * k * (k * p[0]).cos() * w[0];
                out
            }
            MapKind::CircleLoop { winding } => {
                let k = 2.0 * PI * *winding as f64;
                let th = k * p[0];
                let mut out = DVector::zeros(self.target.ambient_dim());
                out[0] = -k * th.sin() * w[0];
                out[1] = k * th.cos() * w[0];
                out
            }
            _ => unreachable!("no closed form"),
        }
    }

    fn d2fw(&self, p: &Point, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let n = self.target.ambient_dim();
        match &self.kind {
            MapKind::TorusWiggle {
                amplitude,
                frequency,
            } => {
                let k = 2.0 * PI * *frequency as f64;
                let mut out = DVector::zeros(n);
                out[0] = -amplitude * k * k * (k * p[0]).sin() * a[0] * b[0];
                out
            }
            MapKind::CircleLoop { winding } => {
                let k = 2.0 * PI * *winding as f64;
                let th = k * p[0];
                let mut out = DVector::zeros(n);
                out[0] = -k * k * th.cos() * a[0] * b[0];
                out[1] = -k * k * th.sin() * a[0] * b[0];
                out
            }
            _ => DVector::zeros(n),
        }
    }

    /// Value lifted next to `centre` so finite differences see no jumps.
    fn lifted(&self, q: &Point, centre: &Point) -> Point {
        let v = self.value_at(q);
        if self.target.is_torus() {
            centre + self.target.wrap_difference(&(v - centre))
        } else {
            v
        }
    }

    pub fn jet_at(&self, p: &Point) -> Jet {
        let frame = self.source.frame_at(p);
        let value = self.value_at(p);
        let m = self.source.dim();
        let d = if self.closed_form() {
            frame.vectors.iter().map(|e| self.dfw(p, e)).collect()
        } else {
            let scheme = self.scheme();
            (0..m)
                .map(|i| {
                    let raw = scheme.d1(|t| self.lifted(&self.source.chart_offset(p, &frame, i, t), &value));
                    self.target.tangentialize(&value, &raw)
                })
                .collect()
        };
        Jet {
            point: p.clone(),
            frame,
            value,
            d,
        }
    }

    pub fn jet(&self, node: usize) -> Jet {
        self.jet_at(self.source.node(node))
    }

    pub fn jet2_at(&self, p: &Point) -> Jet2 {
        let jet = self.jet_at(p);
        let m = self.source.dim();
        let christoffel = self.source.chart_christoffel(p);
        let mut hessian = vec![vec![DVector::zeros(jet.value.len()); m]; m];
        if self.closed_form() {
            let normal_term = if self.source.is_sphere() {
                Some(self.dfw(p, p))
            } else {
                None
            };
            for i in 0..m {
                for j in i..m {
                    let mut h = self.d2fw(p, &jet.frame.vectors[i], &jet.frame.vectors[j]);
                    if i == j {
                        if let Some(nt) = &normal_term {
                            h -= nt;
                        }
                    }
                    hessian[i][j] = h.clone();
                    hessian[j][i] = h;
                }
            }
        } else {
            let scheme = self.scheme();
            let frame = &jet.frame;
            let centre = &jet.value;
            for i in 0..m {
                hessian[i][i] = scheme.d2(|t| self.lifted(&self.source.chart_offset(p, frame, i, t), centre));
                for j in (i + 1)..m {
                    let h = scheme.d_mixed(|s, t| {
                        let mut u = vec![0.0; m];
                        u[i] = s;
                        u[j] = t;
                        self.lifted(&self.source.chart_point(p, frame, &u), centre)
                    });
                    hessian[i][j] = h.clone();
                    hessian[j][i] = h;
                }
            }
        }
        Jet2 {
            jet,
            hessian,
            christoffel,
        }
    }

    pub fn jet2(&self, node: usize) -> Jet2 {
        self.jet2_at(self.source.node(node))
    }

    /// Matrix of `dψ` at a node; columns are images of the working frame.
    pub fn differential_at(&self, node: usize) -> DMatrix<f64> {
        self.jet(node).matrix()
    }

    pub fn hs_norm_sq(&self, node: usize) -> f64 {
        self.jet(node).hs_norm_sq(&self.target)
    }

    pub fn hs_norm_sq_at(&self, p: &Point) -> f64 {
        self.jet_at(p).hs_norm_sq(&self.target)
    }

    /// Smallest singular value of `dψ` measured in orthonormal frames of
    /// source and target.
    pub fn sigma_min(&self, node: usize) -> f64 {
        let jet = self.jet(node);
        orthonormal_differential(&jet, &self.source, &self.target)
            .map(|a| crate::linalg::smallest_singular_value(&a))
            .unwrap_or(0.0)
    }

    /// Largest tangency residual `|⟨dψ(E_i), ψ(x)⟩|` over nodes (sphere targets).
    pub fn tangency_residual(&self) -> f64 {
        if !self.target.is_sphere() {
            return 0.0;
        }
        (0..self.source.len())
            .map(|n| {
                let jet = self.jet(n);
                jet.d
                    .iter()
                    .map(|d| d.dot(&jet.value).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Whether the sphere-target node values are unit vectors.
    pub fn values_on_target(&self) -> bool {
        if !self.target.is_sphere() {
            return true;
        }
        self.values()
            .iter()
            .all(|v| (v.norm() - 1.0).abs() <= tolerances::ALGEBRAIC)
    }
}

fn integer(x: f64, what: &str) -> Result<i64> {
    if x.fract() != 0.0 || !x.is_finite() {
        return Err(Error::InvalidParameter(format!("{what} must be an integer, got {x}")));
    }
    Ok(x as i64)
}

fn same_backend(a: &ManifoldBackend, b: &ManifoldBackend) -> bool {
    a.kind() == b.kind()
        && a.dim() == b.dim()
        && a.torus_metric() == b.torus_metric()
        && a.quadrature() == b.quadrature()
}

/// `dψ` written in orthonormal bases: `h^{1/2} J g^{-1/2}` (tori) or the
/// frame components (spheres).
fn orthonormal_differential(
    jet: &Jet,
    source: &ManifoldBackend,
    target: &ManifoldBackend,
) -> Option<DMatrix<f64>> {
    let j = jet.matrix();
    let left = if target.is_sphere() {
        DMatrix::identity(j.nrows(), j.nrows())
    } else {
        let h = target.frame_at(&jet.value).metric;
        h.cholesky()?.l().transpose()
    };
    let right = if source.is_sphere() {
        DMatrix::identity(j.ncols(), j.ncols())
    } else {
        jet.frame.metric.clone().cholesky()?.l().transpose().try_inverse()?
    };
    Some(left * j * right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusMetric;

    fn sphere(m: usize, res: usize) -> Arc<ManifoldBackend> {
        Arc::new(ManifoldBackend::build_sphere(m, res).unwrap())
    }

    fn torus(m: usize, n: usize) -> Arc<ManifoldBackend> {
        Arc::new(ManifoldBackend::build_torus(m, n, TorusMetric::Flat).unwrap())
    }

    #[test]
    fn identity_hs_norm_is_dimension() {
        for m in 1..=3 {
            let s = sphere(m, 6);
            let id = MapField::identity(s.clone());
            for n in (0..s.len()).step_by(7) {
                assert!((id.hs_norm_sq(n) - m as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_and_linear_norms() {
        let s = sphere(2, 6);
        let c = MapField::from_catalog("constant", &[], s.clone(), s.clone()).unwrap();
        assert_eq!(c.hs_norm_sq(3), 0.0);
        let t = torus(2, 16);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        let lin = MapField::torus_linear(t.clone(), t.clone(), a).unwrap();
        assert!((lin.hs_norm_sq(5) - 5.0).abs() < 1e-12);
        let disc = lin.discretize().unwrap();
        assert!((disc.hs_norm_sq(5) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn non_integer_linear_map_is_rejected() {
        let t = torus(1, 8);
        let a = DMatrix::from_row_slice(1, 1, &[1.5]);
        assert!(MapField::torus_linear(t.clone(), t, a).is_err());
    }

    #[test]
    fn discrete_wiggle_differential_matches_closed_form() {
        let t = torus(1, 64);
        let w = MapField::torus_wiggle(t.clone(), t.clone(), 0.1, 1).unwrap();
        let d = w.discretize().unwrap();
        for n in [0, 13, 40] {
            let a = w.jet(n).d[0][0];
            let b = d.jet(n).d[0][0];
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn equator_differential_is_tangent() {
        let s1 = sphere(1, 16);
        let s2 = sphere(2, 6);
        let eq = MapField::equator_inclusion(s1, s2).unwrap();
        assert!(eq.tangency_residual() < 1e-12);
        assert!(eq.values_on_target());
    }

    #[test]
    fn sphere_hessian_matches_finite_differences() {
        let s = sphere(2, 6);
        let id = Arc::new(MapField::identity(s.clone()));
        let v = Section::conformal(id.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let p = s.node(10).clone();
        let closed = id.jet2_at(&p);
        let fd = id.perturbed(&v, 0.0).unwrap().jet2_at(&p);
        for i in 0..2 {
            for j in 0..2 {
                assert!((&closed.hessian[i][j] - &fd.hessian[i][j]).norm() < 1e-6);
            }
        }
    }
}
