use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fd::Scheme;
use crate::geometry::Point;

use super::map::{Jet, MapField};
use super::poly::Polynomial;

/// Scalar coefficient functions on the source.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceScalar {
    One,
    /// Monomial in the ambient coordinates of a sphere source.
    Monomial(Vec<u32>),
    /// `cos(2π k·x)` or `sin(2π k·x)` on a torus source.
    Fourier { k: Vec<i64>, sine: bool },
}

impl SourceScalar {
    pub fn eval(&self, p: &Point) -> f64 {
        match self {
            SourceScalar::One => 1.0,
            SourceScalar::Monomial(e) => e
                .iter()
                .enumerate()
                .map(|(a, &k)| p[a].powi(k as i32))
                .product(),
            SourceScalar::Fourier { k, sine } => {
                let phase: f64 = k.iter().enumerate().map(|(a, &ka)| ka as f64 * p[a]).sum();
                let t = 2.0 * PI * phase;
                if *sine {
                    t.sin()
                } else {
                    t.cos()
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum SectionKind {
    /// `P_{ψ(x)}(B ψ(x) + c)`; covers rotations, conformal fields and
    /// projected ambient frames on sphere targets.
    AmbientLinear {
        matrix: Option<DMatrix<f64>>,
        offset: DVector<f64>,
    },
    /// Tangential gradient of an ambient polynomial, evaluated at `ψ(x)`.
    TargetGradient(Polynomial),
    /// `f(x) · P_{ψ(x)} c`.
    Scaled {
        scalar: SourceScalar,
        direction: DVector<f64>,
    },
    /// Node values (torus sources).
    Discrete(Arc<Vec<DVector<f64>>>),
    Sum(Vec<(f64, SectionKind)>),
}

/// A section of `ψ⁻¹TN` over a base map. Vector fields on `M` are sections
/// over the identity of `M`.
#[derive(Debug, Clone)]
pub struct Section {
    base: Arc<MapField>,
    kind: SectionKind,
    label: String,
}

impl Section {
    fn new(base: Arc<MapField>, kind: SectionKind, label: String) -> Result<Self> {
        let n = base.target().ambient_dim();
        check_kind(&kind, &base, n)?;
        Ok(Self { base, kind, label })
    }

    pub fn zero(base: Arc<MapField>) -> Self {
        let n = base.target().ambient_dim();
        Self {
            base,
            kind: SectionKind::Scaled {
                scalar: SourceScalar::One,
                direction: DVector::zeros(n),
            },
            label: "zero".into(),
        }
    }

    /// Constant ambient vector projected to the target at every point.
    pub fn constant(base: Arc<MapField>, c: DVector<f64>) -> Result<Self> {
        Self::scaled(base, SourceScalar::One, c)
    }

    pub fn scaled(base: Arc<MapField>, scalar: SourceScalar, direction: DVector<f64>) -> Result<Self> {
        let label = format!("{:?}*{:?}", scalar, direction.as_slice());
        Self::new(base, SectionKind::Scaled { scalar, direction }, label)
    }

    /// `f · e_a` with `f` a Fourier mode on a torus source.
    pub fn fourier(base: Arc<MapField>, k: Vec<i64>, sine: bool, axis: usize) -> Result<Self> {
        let n = base.target().ambient_dim();
        if axis >= n {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        let mut c = DVector::zeros(n);
        c[axis] = 1.0;
        let label = format!("{}({:?})e{}", if sine { "sin" } else { "cos" }, k, axis + 1);
        Self::new(
            base,
            SectionKind::Scaled {
                scalar: SourceScalar::Fourier { k, sine },
                direction: c,
            },
            label,
        )
    }

    /// Rotation field `x ↦ (E_ij − E_ji) x` on a sphere target.
    pub fn killing_rotation(base: Arc<MapField>, i: usize, j: usize) -> Result<Self> {
        let n = base.target().ambient_dim();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidParameter(format!("bad rotation plane ({i}, {j})")));
        }
        let mut b = DMatrix::zeros(n, n);
        b[(i, j)] = 1.0;
        b[(j, i)] = -1.0;
        Self::new(
            base,
            SectionKind::AmbientLinear {
                matrix: Some(b),
                offset: DVector::zeros(n),
            },
            format!("rot{}{}", i + 1, j + 1),
        )
    }

    /// General linear field `P(Bψ + c)`.
    pub fn ambient_linear(
        base: Arc<MapField>,
        matrix: Option<DMatrix<f64>>,
        offset: DVector<f64>,
    ) -> Result<Self> {
        Self::new(
            base,
            SectionKind::AmbientLinear { matrix, offset },
            "linear".into(),
        )
    }

    /// Conformal field `a − ⟨a, x⟩x`, i.e. the projection of the constant `a`.
    pub fn conformal(base: Arc<MapField>, a: DVector<f64>) -> Result<Self> {
        let label = format!("conf{:?}", a.as_slice());
        Self::new(
            base,
            SectionKind::AmbientLinear {
                matrix: None,
                offset: a,
            },
            label,
        )
    }

    /// `ω_A^⊤`, tangential part of the ambient coordinate vector `e_A`.
    pub fn frame_projection(base: Arc<MapField>, axis: usize) -> Result<Self> {
        let n = base.target().ambient_dim();
        if axis >= n {
            return Err(Error::InvalidParameter(format!("axis {axis} out of range")));
        }
        let mut a = DVector::zeros(n);
        a[axis] = 1.0;
        let mut s = Self::conformal(base, a)?;
        s.label = format!("omega{}", axis + 1);
        Ok(s)
    }

    /// Tangential gradient of a polynomial on a sphere target.
    pub fn gradient(base: Arc<MapField>, poly: Polynomial) -> Result<Self> {
        let label = format!("grad{:?}", poly.terms);
        Self::new(base, SectionKind::TargetGradient(poly), label)
    }

    pub fn discrete(base: Arc<MapField>, values: Vec<DVector<f64>>) -> Result<Self> {
        if !base.source().is_torus() {
            return Err(Error::Unsupported("discrete sections need a torus source".into()));
        }
        if values.len() != base.source().len() {
            return Err(Error::InvalidParameter(format!(
                "section has {} values, source has {} nodes",
                values.len(),
                base.source().len()
            )));
        }
        Self::new(base, SectionKind::Discrete(Arc::new(values)), "discrete".into())
    }

    /// `Σ c_k s_k` over sections sharing one base map.
    pub fn combine(terms: &[(f64, &Section)]) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty combination".into()))?;
        let base = first.1.base.clone();
        for (_, s) in terms {
            if !Arc::ptr_eq(&s.base, &base) {
                return Err(Error::MismatchedBase);
            }
        }
        let kinds = terms.iter().map(|(c, s)| (*c, s.kind.clone())).collect();
        let label = terms
            .iter()
            .map(|(c, s)| format!("{c}*{}", s.label))
            .collect::<Vec<_>>()
            .join("+");
        Ok(Self {
            base,
            kind: SectionKind::Sum(kinds),
            label,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            base: self.base.clone(),
            kind: SectionKind::Sum(vec![(c, self.kind.clone())]),
            label: format!("{c}*{}", self.label),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn base(&self) -> &Arc<MapField> {
        &self.base
    }

    pub fn kind(&self) -> &SectionKind {
        &self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn same_base(&self, other: &Section) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
    }

    /// Difference scheme for probing this section: grid steps as soon as
    /// the base map or any part of the section is stored at nodes.
    pub fn scheme(&self) -> Scheme {
        if !self.base.is_discrete() && has_discrete(&self.kind) {
            let n = self.base.source().grid_size().expect("discrete sections live on grids");
            return Scheme::Grid { h: 1.0 / n as f64 };
        }
        self.base.scheme()
    }

    /// Section value at a source point, tangent to the target at `ψ(p)`.
    pub fn value_at(&self, p: &Point) -> DVector<f64> {
        let y = self.base.value_at(p);
        self.value_with(p, &y)
    }

    /// Section value when `ψ(p) = y` is already known.
    pub fn value_with(&self, p: &Point, y: &Point) -> DVector<f64> {
        let raw = raw_value(&self.kind, &self.base, p, y);
        self.base.target().tangentialize(y, &raw)
    }

    pub fn value(&self, node: usize) -> DVector<f64> {
        self.value_at(self.base.source().node(node))
    }

    /// Values at every source node.
    pub fn sample(&self) -> Vec<DVector<f64>> {
        let src = self.base.source();
        let vals = self.base.values();
        src.nodes()
            .iter()
            .zip(&vals)
            .map(|(p, y)| self.value_with(p, y))
            .collect()
    }

    /// Node sampling as a discrete section (torus sources).
    pub fn to_discrete(&self) -> Result<Self> {
        Self::discrete(self.base.clone(), self.sample()).map(|s| s.with_label(self.label.clone()))
    }

    /// Pullback covariant derivatives `∇_{E_i} v` along every frame direction.
    pub fn covariant_derivatives(&self, jet: &Jet) -> Vec<DVector<f64>> {
        let src = self.base.source();
        let tgt = self.base.target();
        let scheme = self.scheme();
        let p = &jet.point;
        let v = self.value_with(p, &jet.value);
        (0..src.dim())
            .map(|i| {
                let dv = scheme.d1(|t| self.value_at(&src.chart_offset(p, &jet.frame, i, t)));
                tgt.tangentialize(&jet.value, &(dv + tgt.connection(&jet.value, &jet.d[i], &v)))
            })
            .collect()
    }

    /// `∇_{E_i} v` at a node.
    pub fn pullback_covariant_derivative(&self, node: usize, direction: usize) -> DVector<f64> {
        let jet = self.base.jet(node);
        self.covariant_derivatives(&jet).swap_remove(direction)
    }

    /// Largest `|⟨v, ψ(x)⟩|` over nodes (sphere targets).
    pub fn tangency_residual(&self) -> f64 {
        if !self.base.target().is_sphere() {
            return 0.0;
        }
        let vals = self.base.values();
        self.sample()
            .iter()
            .zip(&vals)
            .map(|(v, y)| v.dot(y).abs())
            .fold(0.0, f64::max)
    }
}

fn has_discrete(kind: &SectionKind) -> bool {
    match kind {
        SectionKind::Discrete(_) => true,
        SectionKind::Sum(terms) => terms.iter().any(|(_, k)| has_discrete(k)),
        _ => false,
    }
}

fn check_kind(kind: &SectionKind, base: &MapField, n: usize) -> Result<()> {
    let sphere_target = base.target().is_sphere();
    match kind {
        SectionKind::AmbientLinear { matrix, offset } => {
            if offset.len() != n || matrix.as_ref().is_some_and(|b| b.nrows() != n || b.ncols() != n) {
                return Err(Error::InvalidParameter(format!(
                    "linear section data must act on {n}-vectors"
                )));
            }
            if matrix.is_some() && !sphere_target {
                return Err(Error::Unsupported(
                    "linear sections with a matrix need a sphere target".into(),
                ));
            }
        }
        SectionKind::TargetGradient(poly) => {
            if !sphere_target {
                return Err(Error::Unsupported("gradient sections need a sphere target".into()));
            }
            if poly.terms.iter().any(|(_, e)| e.len() != n) {
                return Err(Error::InvalidParameter(format!("polynomial must have {n} variables")));
            }
        }
        SectionKind::Scaled { scalar, direction } => {
            if direction.len() != n {
                return Err(Error::InvalidParameter(format!("direction must have length {n}")));
            }
            let src = base.source();
            match scalar {
                SourceScalar::One => {}
                SourceScalar::Monomial(e) => {
                    if !src.is_sphere() || e.len() != src.ambient_dim() {
                        return Err(Error::InvalidParameter(
                            "monomial coefficients need a sphere source of matching dimension".into(),
                        ));
                    }
                }
                SourceScalar::Fourier { k, .. } => {
                    if !src.is_torus() || k.len() != src.dim() {
                        return Err(Error::InvalidParameter(
                            "Fourier coefficients need a torus source of matching dimension".into(),
                        ));
                    }
                }
            }
        }
        SectionKind::Discrete(values) => {
            if let Some((i, _)) = values.iter().enumerate().find(|(_, v)| v.len() != n) {
                return Err(Error::InvalidParameter(format!("value at node {i} has wrong length")));
            }
        }
        SectionKind::Sum(terms) => {
            for (_, k) in terms {
                check_kind(k, base, n)?;
            }
        }
    }
    Ok(())
}

fn raw_value(kind: &SectionKind, base: &MapField, p: &Point, y: &Point) -> DVector<f64> {
    match kind {
        SectionKind::AmbientLinear { matrix, offset } => match matrix {
            Some(b) => b * y + offset,
            None => offset.clone(),
        },
        SectionKind::TargetGradient(poly) => poly.gradient(y),
        SectionKind::Scaled { scalar, direction } => direction * scalar.eval(p),
        SectionKind::Discrete(values) => {
            let idx = base
                .source()
                .grid_lookup(p)
                .expect("discrete sections are evaluated on grid nodes only");
            values[idx].clone()
        }
        SectionKind::Sum(terms) => {
            let mut out = DVector::zeros(y.len());
            for (c, k) in terms {
                out.axpy(*c, &raw_value(k, base, p, y), 1.0);
            }
            out
        }
    }
}
