//! Second variation of the α-energy: index form, Ritz spectra and verdicts.

mod criteria;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::check_alpha;
use crate::error::{Error, Result};
use crate::fields::{Jet, MapField, Polynomial, Section, SourceScalar};
use crate::geometry::ManifoldBackend;
use crate::linalg::generalized_symmetric_eigen;
use crate::tolerances;

pub use criteria::{
    conformal_instability_coefficient, einstein_gradient_audit, einstein_threshold_claimed,
    identity_field_stats, identity_index_closed, identity_spectral_index, index_coefficients,
    k3_margin, rtgh_check, sphere_identity_verdict, totally_geodesic_check, trace_criterion,
    yano_check, EinsteinAudit, EinsteinClaim, FieldStats, RtghCheck, TotallyGeodesicCheck,
    TraceCriterion,
};

/// Per-node data of a section entering the index form.
struct SectionSample {
    value: DVector<f64>,
    /// `⟨∇v, dψ⟩ = g^{ij} h(∇_i v, dψ(E_i))`
    contraction: f64,
    /// `g^{ij} R^N(v, dψ E_i) dψ E_j`
    curvature: DVector<f64>,
    nabla: Vec<DVector<f64>>,
}

struct NodeData {
    jet: Jet,
    weight: f64,
    a1: f64,
    a2: f64,
}

fn node_data(map: &MapField, alpha: f64) -> Vec<NodeData> {
    let src = map.source();
    let tgt = map.target();
    let w = src.weights();
    (0..src.len())
        .into_par_iter()
        .map(|node| {
            let jet = map.jet(node);
            let (a1, a2) = index_coefficients(alpha, jet.hs_norm_sq(tgt));
            NodeData { jet, weight: w[node], a1, a2 }
        })
        .collect()
}

fn sample_section(map: &MapField, data: &[NodeData], v: &Section) -> Vec<SectionSample> {
    let tgt = map.target();
    data.par_iter()
        .map(|nd| {
            let jet = &nd.jet;
            let y = &jet.value;
            let value = v.value_with(&jet.point, y);
            let nabla = v.covariant_derivatives(jet);
            let m = nabla.len();
            let ginv = &jet.frame.inverse;
            let mut contraction = 0.0;
            let mut curvature = DVector::zeros(y.len());
            for i in 0..m {
                for j in 0..m {
                    let gij = ginv[(i, j)];
                    if gij == 0.0 {
                        continue;
                    }
                    contraction += gij * tgt.inner(y, &nabla[i], &jet.d[j]);
                    curvature.axpy(
                        gij,
                        &tgt.riemann_apply_at_point(y, &value, &jet.d[i], &jet.d[j]),
                        1.0,
                    );
                }
            }
            SectionSample { value, contraction, curvature, nabla }
        })
        .collect()
}

fn pair(map: &MapField, data: &[NodeData], v: &[SectionSample], w: &[SectionSample]) -> f64 {
    let tgt = map.target();
    let mut total = 0.0;
    for ((nd, a), b) in data.iter().zip(v).zip(w) {
        let y = &nd.jet.value;
        let ginv = &nd.jet.frame.inverse;
        let m = a.nabla.len();
        let mut grad = 0.0;
        for i in 0..m {
            for j in 0..m {
                let gij = ginv[(i, j)];
                if gij != 0.0 {
                    grad += gij * tgt.inner(y, &a.nabla[i], &b.nabla[j]);
                }
            }
        }
        let integrand = nd.a1 * a.contraction * b.contraction
            - nd.a2 * tgt.inner(y, &a.curvature, &b.value)
            + nd.a2 * grad;
        total += nd.weight * integrand;
    }
    total
}

fn mass_pair(map: &MapField, data: &[NodeData], v: &[SectionSample], w: &[SectionSample]) -> f64 {
    let tgt = map.target();
    data.iter()
        .zip(v)
        .zip(w)
        .map(|((nd, a), b)| nd.weight * tgt.inner(&nd.jet.value, &a.value, &b.value))
        .sum()
}

fn check_base(map: &MapField, v: &Section) -> Result<()> {
    if std::ptr::eq(Arc::as_ptr(v.base()), map) {
        Ok(())
    } else {
        Err(Error::MismatchedBase)
    }
}

/// `I_α(v, w)` by quadrature.
pub fn index_form(map: &MapField, alpha: f64, v: &Section, w: &Section) -> Result<f64> {
    check_alpha(alpha)?;
    check_base(map, v)?;
    check_base(map, w)?;
    let data = node_data(map, alpha);
    let sv = sample_section(map, &data, v);
    if std::ptr::eq(v, w) {
        return Ok(pair(map, &data, &sv, &sv));
    }
    let sw = sample_section(map, &data, w);
    Ok(0.5 * (pair(map, &data, &sv, &sw) + pair(map, &data, &sw, &sv)))
}

/// `∫ h(v, v)`.
pub fn section_mass(v: &Section) -> Result<f64> {
    let map = v.base();
    let tgt = map.target();
    let vals = v.sample();
    let ys = map.values();
    let dens: Vec<f64> = vals.iter().zip(&ys).map(|(v, y)| tgt.norm_sq(y, v)).collect();
    map.source().integrate(&dens)
}

/// Families of trial sections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BasisFamily {
    /// Gradients of ambient monomials of degree `1..=degree` (sphere targets);
    /// these span the gradients of spherical harmonics up to that degree.
    HarmonicGradients { degree: u32 },
    /// All rotations `E_ij − E_ji` (sphere targets).
    KillingRotations,
    /// `ω_A^⊤` for every ambient axis (sphere targets).
    AmbientFrames,
    /// `cos/sin(2π k·x) e_a` with `|k|_∞ ≤ degree` (torus sources).
    Fourier { degree: u32 },
    /// Ambient monomials of degree `0..=degree` times `e_a` (sphere sources).
    Monomial { degree: u32 },
}

impl BasisFamily {
    pub fn degree(&self) -> u32 {
        match *self {
            BasisFamily::HarmonicGradients { degree }
            | BasisFamily::Fourier { degree }
            | BasisFamily::Monomial { degree } => degree,
            BasisFamily::KillingRotations | BasisFamily::AmbientFrames => 1,
        }
    }

    pub fn build(&self, map: &Arc<MapField>) -> Result<Vec<Section>> {
        let src = map.source();
        let tgt = map.target();
        let n = tgt.ambient_dim();
        let need_sphere_target = || {
            if tgt.is_sphere() {
                Ok(())
            } else {
                Err(Error::Unsupported(format!("{self:?} needs a sphere target")))
            }
        };
        let mut out = Vec::new();
        match *self {
            BasisFamily::HarmonicGradients { degree } => {
                need_sphere_target()?;
                for d in 1..=degree {
                    for e in Polynomial::monomials_of_degree(n, d) {
                        let label = format!("grad x^{e:?}");
                        out.push(
                            Section::gradient(map.clone(), Polynomial::monomial(e))?.with_label(label),
                        );
                    }
                }
            }
            BasisFamily::KillingRotations => {
                need_sphere_target()?;
                for i in 0..n {
                    for j in i + 1..n {
                        out.push(Section::killing_rotation(map.clone(), i, j)?);
                    }
                }
            }
            BasisFamily::AmbientFrames => {
                need_sphere_target()?;
                for a in 0..n {
                    out.push(Section::frame_projection(map.clone(), a)?);
                }
            }
            BasisFamily::Fourier { degree } => {
                if !src.is_torus() {
                    return Err(Error::Unsupported("Fourier bases need a torus source".into()));
                }
                for k in fourier_modes(src.dim(), degree) {
                    let sines: &[bool] = if k.iter().all(|&c| c == 0) { &[false] } else { &[false, true] };
                    for &sine in sines {
                        for a in 0..n {
                            let label = format!("{}{k:?}e{}", if sine { "sin" } else { "cos" }, a + 1);
                            out.push(Section::fourier(map.clone(), k.clone(), sine, a)?.with_label(label));
                        }
                    }
                }
            }
            BasisFamily::Monomial { degree } => {
                if !src.is_sphere() {
                    return Err(Error::Unsupported("monomial bases need a sphere source".into()));
                }
                for d in 0..=degree {
                    for e in Polynomial::monomials_of_degree(src.ambient_dim(), d) {
                        for a in 0..n {
                            let mut c = DVector::zeros(n);
                            c[a] = 1.0;
                            let label = format!("x^{e:?}e{}", a + 1);
                            out.push(
                                Section::scaled(map.clone(), SourceScalar::Monomial(e.clone()), c)?
                                    .with_label(label),
                            );
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Representatives of `±k` with `|k|_∞ ≤ degree`, zero included once.
fn fourier_modes(m: usize, degree: u32) -> Vec<Vec<i64>> {
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
        match k.iter().find(|&&c| c != 0) {
            None => out.push(k),
            Some(&c) if c > 0 => out.push(k),
            _ => {}
        }
    }
    out
}

/// Gram and mass matrices of `I_α` on a trial basis.
#[derive(Debug, Clone)]
pub struct IndexFormAssembly {
    pub basis: Vec<Section>,
    pub gram: DMatrix<f64>,
    pub mass: DMatrix<f64>,
    pub alpha: f64,
    pub map: Arc<MapField>,
    /// Largest degree among the requested families.
    pub degree: u32,
    /// Relative asymmetry of the raw Gram matrix before symmetrization.
    pub asymmetry: f64,
}

pub fn assemble(map: &Arc<MapField>, alpha: f64, families: &[BasisFamily]) -> Result<IndexFormAssembly> {
    let mut basis = Vec::new();
    for s in families {
        basis.extend(s.build(map)?);
    }
    let degree = families.iter().map(BasisFamily::degree).max().unwrap_or(0);
    assemble_sections(map, alpha, basis, degree)
}

/// Assembly on an explicit list of sections.
pub fn assemble_sections(
    map: &Arc<MapField>,
    alpha: f64,
    basis: Vec<Section>,
    degree: u32,
) -> Result<IndexFormAssembly> {
    check_alpha(alpha)?;
    if basis.is_empty() {
        return Err(Error::InvalidParameter("empty basis".into()));
    }
    for v in &basis {
        check_base(map, v)?;
    }
    let data = node_data(map, alpha);
    let samples: Vec<Vec<SectionSample>> =
        basis.iter().map(|v| sample_section(map, &data, v)).collect();
    let n = basis.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let entries: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let g = pair(map, &data, &samples[i], &samples[j]);
            let m = if i <= j { mass_pair(map, &data, &samples[i], &samples[j]) } else { 0.0 };
            (g, m)
        })
        .collect();
    let mut gram = DMatrix::zeros(n, n);
    let mut mass = DMatrix::zeros(n, n);
    for (&(i, j), &(g, m)) in pairs.iter().zip(&entries) {
        gram[(i, j)] = g;
        if i <= j {
            mass[(i, j)] = m;
            mass[(j, i)] = m;
        }
    }
    let scale = gram.amax().max(f64::MIN_POSITIVE);
    let asymmetry = (&gram - gram.transpose()).amax() / scale;
    let gram = (&gram + gram.transpose()) * 0.5;
    Ok(IndexFormAssembly {
        basis,
        gram,
        mass,
        alpha,
        map: map.clone(),
        degree,
        asymmetry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedUnstable,
    StableOnBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictMethod {
    Ritz,
    SymmetryAdapted,
}

/// Negative direction backing a `certified_unstable` verdict.
#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `I_α(v, v)` recomputed directly on the combined section.
    pub index_value: f64,
    /// `∫ h(v, v)`.
    pub mass: f64,
    #[serde(skip)]
    pub section: Option<Section>,
}

/// Closed-form predictions for identity maps of round spheres.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Criteria {
    pub k3_margin: Option<f64>,
    pub conformal_coefficient: Option<f64>,
    pub trace_hypothesis: Option<bool>,
    /// Verdict of the stated Einstein threshold (`true` = stable).
    pub einstein_claims_stable: Option<bool>,
}

impl Criteria {
    /// Criteria for `id: S^m → S^m`; empty otherwise.
    pub fn for_map(map: &MapField, alpha: f64) -> Self {
        let src = map.source();
        if !(map.is_identity() && src.is_sphere()) {
            return Self::default();
        }
        Self::for_sphere_identity(src.dim(), alpha)
    }

    pub fn for_sphere_identity(m: usize, alpha: f64) -> Self {
        let mf = m as f64;
        let lambda = mf - 1.0;
        Self {
            k3_margin: Some(k3_margin(m, alpha).0),
            conformal_coefficient: Some(conformal_instability_coefficient(m, alpha).0),
            trace_hypothesis: Some(2.0 * (alpha - 1.0) + 1.0 < lambda),
            einstein_claims_stable: Some(einstein_threshold_claimed(lambda, mf, m, alpha).stable),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictRecord {
    pub alpha: f64,
    pub theta_min: f64,
    pub verdict: Verdict,
    pub method: VerdictMethod,
    pub degree: u32,
    pub basis_size: usize,
    pub pruned: usize,
    pub witness: Option<Witness>,
    pub criteria: Criteria,
    /// Stated Einstein threshold says stable while another criterion or
    /// the computed verdict says unstable.
    pub conflict: bool,
}

impl VerdictRecord {
    pub(crate) fn finish(mut self) -> Self {
        let unstable_elsewhere = self.verdict == Verdict::CertifiedUnstable
            || self.criteria.conformal_coefficient.is_some_and(|c| c < 0.0);
        self.conflict = self.criteria.einstein_claims_stable == Some(true) && unstable_elsewhere;
        self
    }
}

/// Smallest Ritz value of an assembly with a verified witness when negative.
pub fn smallest_ritz(assembly: &IndexFormAssembly) -> Result<VerdictRecord> {
    let eig = generalized_symmetric_eigen(&assembly.gram, &assembly.mass, tolerances::BASIS_PRUNE)?;
    let theta_min = *eig
        .values
        .first()
        .ok_or_else(|| Error::Numeric("basis pruned to nothing".into()))?;
    let mut witness = None;
    let mut verdict = Verdict::StableOnBasis;
    if theta_min < -tolerances::RITZ_NEGATIVE {
        let coefficients: Vec<f64> = eig.vectors.column(0).iter().copied().collect();
        let terms: Vec<(f64, &Section)> = coefficients
            .iter()
            .zip(&assembly.basis)
            .filter(|(c, _)| c.abs() > 0.0)
            .map(|(c, s)| (*c, s))
            .collect();
        let section = Section::combine(&terms)?.with_label("ritz witness");
        let index_value = index_form(&assembly.map, assembly.alpha, &section, &section)?;
        let mass = section_mass(&section)?;
        if index_value < 0.0 {
            verdict = Verdict::CertifiedUnstable;
        }
        witness = Some(Witness {
            labels: assembly.basis.iter().map(|s| s.label().to_string()).collect(),
            coefficients,
            index_value,
            mass,
            section: Some(section),
        });
    }
    Ok(VerdictRecord {
        alpha: assembly.alpha,
        theta_min,
        verdict,
        method: VerdictMethod::Ritz,
        degree: assembly.degree,
        basis_size: assembly.basis.len(),
        pruned: eig.pruned,
        witness,
        criteria: Criteria::for_map(&assembly.map, assembly.alpha),
        conflict: false,
    }
    .finish())
}

/// Default trial families for a map.
pub fn default_basis(map: &MapField, degree: u32) -> Vec<BasisFamily> {
    let src = map.source();
    let tgt = map.target();
    if tgt.is_sphere() && map.is_identity() {
        vec![BasisFamily::HarmonicGradients { degree }, BasisFamily::KillingRotations]
    } else if src.is_torus() {
        vec![BasisFamily::Fourier { degree }]
    } else {
        vec![BasisFamily::Monomial { degree }]
    }
}

/// Stability verdict for a map: quadrature Ritz, or the symmetry-adapted path
/// for identities of spheres above dimension three.
pub fn stability_verdict(map: &Arc<MapField>, alpha: f64, degree: u32) -> Result<VerdictRecord> {
    let src: &ManifoldBackend = map.source();
    if map.is_identity() && src.is_sphere() && src.dim() > 3 {
        return sphere_identity_verdict(src.dim(), alpha, degree);
    }
    let a = assemble(map, alpha, &default_basis(map, degree))?;
    smallest_ritz(&a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TorusMetric;
    use std::f64::consts::PI;

    fn sphere_id(m: usize, res: usize) -> Arc<MapField> {
        Arc::new(MapField::identity(Arc::new(ManifoldBackend::build_sphere(m, res).unwrap())))
    }

    #[test]
    fn conformal_field_on_s2() {
        let id = sphere_id(2, 10);
        let v = Section::conformal(id.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let i = index_form(&id, 2.0, &v, &v).unwrap();
        // C·(2αm+2−m−m²)·∫(div W)² with ∫(div W)² = 16π/3
        assert!((i - 8.0 * 16.0 * PI / 3.0).abs() < 1e-4 * i);
        assert!((i - 134.041_286).abs() < 1e-4);
    }

    #[test]
    fn killing_is_neutral() {
        let id = sphere_id(2, 8);
        let r = Section::killing_rotation(id.clone(), 0, 1).unwrap();
        for alpha in [1.5, 2.0, 3.0] {
            assert!(index_form(&id, alpha, &r, &r).unwrap().abs() < 1e-6);
        }
    }

    #[test]
    fn flat_torus_constant_field_is_neutral() {
        let t = Arc::new(ManifoldBackend::build_torus(2, 8, TorusMetric::Flat).unwrap());
        let id = Arc::new(MapField::identity(t));
        let c = Section::constant(id.clone(), DVector::from_vec(vec![0.3, -1.0])).unwrap();
        assert!(index_form(&id, 2.0, &c, &c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mismatched_base_rejected() {
        let a = sphere_id(2, 4);
        let b = sphere_id(2, 4);
        let v = Section::killing_rotation(b, 0, 1).unwrap();
        assert!(matches!(index_form(&a, 2.0, &v, &v), Err(Error::MismatchedBase)));
    }

    #[test]
    fn s2_identity_is_stable_on_basis() {
        let id = sphere_id(2, 10);
        let a = assemble(&id, 2.0, &default_basis(&id, 3)).unwrap();
        assert!(a.asymmetry < 1e-10);
        let r = smallest_ritz(&a).unwrap();
        assert!(r.theta_min >= -1e-6, "{}", r.theta_min);
        assert_eq!(r.verdict, Verdict::StableOnBasis);
        assert!(r.pruned > 0);
    }

    #[test]
    fn flat_torus_identity_is_psd() {
        let t = Arc::new(ManifoldBackend::build_torus(2, 12, TorusMetric::Flat).unwrap());
        let id = Arc::new(MapField::identity(t));
        let a = assemble(&id, 2.0, &[BasisFamily::Fourier { degree: 3 }]).unwrap();
        let r = smallest_ritz(&a).unwrap();
        assert!(r.theta_min >= -1e-8);
    }

    #[test]
    fn circle_loop_has_a_certified_witness() {
        let t = Arc::new(ManifoldBackend::build_torus(1, 32, TorusMetric::Flat).unwrap());
        let s = Arc::new(ManifoldBackend::build_sphere(2, 4).unwrap());
        let map = Arc::new(MapField::circle_loop(t, s, 1).unwrap());
        let a = assemble(&map, 2.0, &[BasisFamily::Fourier { degree: 1 }]).unwrap();
        let r = smallest_ritz(&a).unwrap();
        assert_eq!(r.verdict, Verdict::CertifiedUnstable);
        let w = r.witness.unwrap();
        assert!(w.index_value < 0.0);
        assert!((w.index_value / w.mass - r.theta_min).abs() < 1e-8 * r.theta_min.abs());
    }
}
