use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use serde::Serialize;

use crate::energy::check_alpha;
use crate::error::{Error, Result};
use crate::fields::{
    classify_field, divergence_and_lie_norm, MapField, Polynomial, Section, SourceScalar,
};
use crate::geometry::{quadrature::sphere_volume, ManifoldBackend, DEFAULT_MC_SEED};
use crate::spectral::{mu1, rough_laplacian, sphere_eigenvalue, sphere_multiplicity};
use crate::tolerances;

use super::{
    assemble_sections, index_form, section_mass, Criteria, Verdict, VerdictMethod, VerdictRecord,
    Witness,
};

/// `(A₁, A₂) = (4α(α−1)(1+|dψ|²)^{α−2}, 2α(1+|dψ|²)^{α−1})`.
pub fn index_coefficients(alpha: f64, hs: f64) -> (f64, f64) {
    let base = 1.0 + hs;
    (
        4.0 * alpha * (alpha - 1.0) * base.powf(alpha - 2.0),
        2.0 * alpha * base.powf(alpha - 1.0),
    )
}

/// `I_{α,id}(grad f, grad f)` for a degree-`k` spherical harmonic with `∫f² = 1`:
/// `[A₁μ_k + A₂(μ_k − 2(m−1))]·μ_k`.
pub fn identity_spectral_index(m: usize, alpha: f64, k: usize) -> f64 {
    let (a1, a2) = index_coefficients(alpha, m as f64);
    let mu = sphere_eigenvalue(m, k);
    (a1 * mu + a2 * (mu - 2.0 * (m as f64 - 1.0))) * mu
}

/// Quadrature statistics of a vector field on `M`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FieldStats {
    /// `∫(div v)²`
    pub div_sq: f64,
    /// `∫½|L_v g|²`
    pub half_lie_sq: f64,
    /// `∫g(Δ̄v − Ric v, v)`
    pub j2_pairing: f64,
    /// `∫|v|²`
    pub mass: f64,
}

pub fn identity_field_stats(field: &Section) -> Result<FieldStats> {
    let dl = divergence_and_lie_norm(field)?;
    let backend = field.base().source();
    let nodes = backend.nodes();
    let mut j2 = Vec::with_capacity(nodes.len());
    let mut mass = Vec::with_capacity(nodes.len());
    for (n, p) in nodes.iter().enumerate() {
        let v = field.value(n);
        let lap = rough_laplacian(field, n)?;
        j2.push(backend.inner(p, &lap, &v) - backend.ricci_quadratic(p, &v));
        mass.push(backend.norm_sq(p, &v));
    }
    let div: Vec<f64> = dl.iter().map(|d| d.0 * d.0).collect();
    let lie: Vec<f64> = dl.iter().map(|d| d.1).collect();
    Ok(FieldStats {
        div_sq: backend.integrate(&div)?,
        half_lie_sq: backend.integrate(&lie)?,
        j2_pairing: backend.integrate(&j2)?,
        mass: backend.integrate(&mass)?,
    })
}

/// `A₁∫(div v)² + A₂∫g(J₂v, v)` with the identity's coefficients.
pub fn identity_index_closed(m: usize, alpha: f64, stats: &FieldStats) -> f64 {
    let (a1, a2) = index_coefficients(alpha, m as f64);
    a1 * stats.div_sq + a2 * stats.j2_pairing
}

/// `(∫g(J₂v, v), ∫½|L_v g|² − (div v)²)`.
pub fn yano_check(field: &Section) -> Result<(f64, f64)> {
    let s = identity_field_stats(field)?;
    Ok((s.j2_pairing, s.half_lie_sq - s.div_sq))
}

/// `(2αm+2−m−m², C = 2α(1+m)^{α−2}/m)`.
pub fn conformal_instability_coefficient(m: usize, alpha: f64) -> (f64, f64) {
    let mf = m as f64;
    (
        2.0 * alpha * mf + 2.0 - mf - mf * mf,
        2.0 * alpha * (1.0 + mf).powf(alpha - 2.0) / mf,
    )
}

/// `(2α+m−m², H = 2α(1+m)^{α−1}(2α+m−m²)/m)`.
pub fn k3_margin(m: usize, alpha: f64) -> (f64, f64) {
    let mf = m as f64;
    let margin = 2.0 * alpha + mf - mf * mf;
    (margin, 2.0 * alpha * (1.0 + mf).powf(alpha - 1.0) * margin / mf)
}

#[derive(Debug, Clone, Serialize)]
pub struct RtghCheck {
    /// Assembled `I_{α,id}(v, v)`.
    pub index: f64,
    pub killing: bool,
    pub killing_residual: f64,
    /// `2α(1+m)^{α−2}[(2α−m−3)∫div² + ∫½|L|²]` in the stated form.
    pub stated: f64,
    /// `2α(1+m)^{α−2}[(2α−m−3)∫div² + (1+m)∫½|L|²]`.
    pub expansion: f64,
    /// At `2α = m+3`: `I ≥ −tol` and `I ≤ tol ⇔ killing`.
    pub equality_audit: Option<bool>,
}

pub fn rtgh_check(alpha: f64, field: &Section) -> Result<RtghCheck> {
    check_alpha(alpha)?;
    let id = field.base();
    let m = id.source().dim();
    let mf = m as f64;
    let index = index_form(id, alpha, field, field)?;
    let class = classify_field(field)?;
    let stats = identity_field_stats(field)?;
    let pre = 2.0 * alpha * (1.0 + mf).powf(alpha - 2.0);
    let div_coeff = 2.0 * alpha - mf - 3.0;
    let stated = pre * (div_coeff * stats.div_sq + stats.half_lie_sq);
    let expansion = pre * (div_coeff * stats.div_sq + (1.0 + mf) * stats.half_lie_sq);
    let killing = class.killing_residual <= tolerances::KILLING;
    let equality_audit = ((2.0 * alpha - mf - 3.0).abs() < 1e-12).then(|| {
        let tol = tolerances::ALPHA_HARMONIC * (1.0 + stats.mass);
        index >= -tol && ((index <= tol) == killing)
    });
    Ok(RtghCheck {
        index,
        killing,
        killing_residual: class.killing_residual,
        stated,
        expansion,
        equality_audit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMethod {
    Quadrature,
    SymmetryAdapted,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceCriterion {
    /// `Σ_A I_α(ω_A^⊤, ω_A^⊤)`.
    pub trace: f64,
    /// `2(α−1)f + θ(v) < Ric(v, v)` for unit target vectors.
    pub hypothesis: bool,
    pub f: f64,
    pub theta: f64,
    pub ricci: f64,
    pub method: TraceMethod,
    /// `2αm(1+m)^{α−2}(2αm+2−m−m²)·Vol(S^m)` for identities.
    pub closed_form: Option<f64>,
}

/// Closed-form trace for `id: S^m → S^m`.
pub fn identity_trace_closed(m: usize, alpha: f64) -> f64 {
    let mf = m as f64;
    let (coeff, _) = conformal_instability_coefficient(m, alpha);
    2.0 * alpha * mf * (1.0 + mf).powf(alpha - 2.0) * coeff * sphere_volume(m)
}

pub fn trace_criterion(map: &Arc<MapField>, alpha: f64) -> Result<TraceCriterion> {
    check_alpha(alpha)?;
    let tgt = map.target();
    if !tgt.is_sphere() {
        return Err(Error::Unsupported("trace criterion needs an embedded sphere target".into()));
    }
    let y = map.value(0);
    let v = tgt.frame_at(&y).vectors[0].clone();
    // umbilic: |B(u, u)|² is the same for every unit u
    let f = tgt.second_fundamental_form(&y, &v, &v).norm_squared();
    let theta: f64 = tgt
        .frame_at(&y)
        .vectors
        .iter()
        .map(|e| tgt.second_fundamental_form(&y, &v, e).norm_squared())
        .sum();
    let ricci = tgt.ricci_quadratic(&y, &v);
    let hypothesis = 2.0 * (alpha - 1.0) * f + theta < ricci;
    let src = map.source();
    let closed_form = (map.is_identity() && src.is_sphere())
        .then(|| identity_trace_closed(src.dim(), alpha));
    if map.is_identity() && src.dim() > 3 {
        return Ok(TraceCriterion {
            trace: closed_form.unwrap_or_default(),
            hypothesis,
            f,
            theta,
            ricci,
            method: TraceMethod::SymmetryAdapted,
            closed_form,
        });
    }
    let basis = (0..tgt.ambient_dim())
        .map(|a| Section::frame_projection(map.clone(), a))
        .collect::<Result<Vec<_>>>()?;
    let a = assemble_sections(map, alpha, basis, 1)?;
    Ok(TraceCriterion {
        trace: a.gram.trace(),
        hypothesis,
        f,
        theta,
        ricci,
        method: TraceMethod::Quadrature,
        closed_form,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TotallyGeodesicCheck {
    pub m: usize,
    pub alpha: f64,
    pub assembled: f64,
    /// `−2α m^{α−1}(m−1)·Vol(S^{m−1})`.
    pub closed_form: f64,
    pub relative_gap: f64,
    pub certified_unstable: bool,
}

/// Equator `S^{m−1} ⊂ S^m` against its unit normal.
pub fn totally_geodesic_check(alpha: f64, m: usize, resolution: usize) -> Result<TotallyGeodesicCheck> {
    check_alpha(alpha)?;
    if m < 2 {
        return Err(Error::InvalidParameter("equator check needs m ≥ 2".into()));
    }
    let src = Arc::new(ManifoldBackend::build_sphere(m - 1, resolution)?);
    let tgt = Arc::new(ManifoldBackend::build_sphere(m, resolution.min(4))?);
    let map = Arc::new(MapField::equator_inclusion(src, tgt)?);
    let mut e = DVector::zeros(m + 1);
    e[m] = 1.0;
    let v = Section::constant(map.clone(), e)?;
    let assembled = index_form(&map, alpha, &v, &v)?;
    let mf = m as f64;
    let closed_form = -2.0 * alpha * mf.powf(alpha - 1.0) * (mf - 1.0) * sphere_volume(m - 1);
    Ok(TotallyGeodesicCheck {
        m,
        alpha,
        assembled,
        closed_form,
        relative_gap: (assembled - closed_form).abs() / closed_form.abs(),
        certified_unstable: assembled < 0.0,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EinsteinClaim {
    pub lambda: f64,
    pub mu1: f64,
    /// `μ₁(m+2α−1)/(m+1)`
    pub threshold: f64,
    /// `λ ≤ threshold`
    pub stable: bool,
}

pub fn einstein_threshold_claimed(lambda: f64, mu1: f64, m: usize, alpha: f64) -> EinsteinClaim {
    let mf = m as f64;
    let threshold = mu1 * (mf + 2.0 * alpha - 1.0) / (mf + 1.0);
    EinsteinClaim {
        lambda,
        mu1,
        threshold,
        stable: lambda <= threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EinsteinAudit {
    pub m: usize,
    pub alpha: f64,
    pub k: usize,
    pub lambda: f64,
    pub mu: f64,
    /// `2α(1+m)^{α−2}[μ(m+2α−1) − λ(1+m)]·μ` per unit `∫f²`.
    pub stated_value: f64,
    /// `2α(1+m)^{α−2}[μ(m+2α−1) − 2λ(1+m)]·μ` per unit `∫f²`.
    pub true_value: f64,
    /// Quadrature `I_{α,id}(grad f, grad f) / ∫f²`.
    pub assembled: f64,
    pub discrepancy_factor: f64,
    pub claim: EinsteinClaim,
    pub conformal_coefficient: Option<f64>,
    pub conflict: bool,
}

/// Gradient-eigenfunction audit of the Einstein threshold on an Einstein
/// backend (round spheres, flat tori).
pub fn einstein_gradient_audit(
    backend: &Arc<ManifoldBackend>,
    alpha: f64,
    k: usize,
) -> Result<EinsteinAudit> {
    check_alpha(alpha)?;
    if k == 0 {
        return Err(Error::InvalidParameter("harmonic degree must be ≥ 1".into()));
    }
    let lambda = backend
        .einstein_constant()
        .ok_or_else(|| Error::Precondition("metric is not Einstein".into()))?;
    let m = backend.dim();
    let mf = m as f64;
    let id = Arc::new(MapField::identity(backend.clone()));
    let (mu, field, f_sq) = if backend.is_sphere() {
        let f = Polynomial::zonal_harmonic(m + 1, k as u32);
        let f_sq = backend.integrate_fn(|_, p| f.eval(p).powi(2))?;
        (sphere_eigenvalue(m, k), Section::gradient(id.clone(), f)?, f_sq)
    } else {
        let kf = k as f64;
        let mut kv = vec![0; m];
        kv[0] = k as i64;
        let mut e1 = DVector::zeros(m);
        e1[0] = -2.0 * PI * kf;
        let f_sq = backend.integrate_fn(|_, p| (2.0 * PI * kf * p[0]).cos().powi(2))?;
        let v = Section::scaled(id.clone(), SourceScalar::Fourier { k: kv, sine: true }, e1)?;
        (4.0 * PI * PI * kf * kf, v, f_sq)
    };
    let assembled = index_form(&id, alpha, &field, &field)? / f_sq;
    let pre = 2.0 * alpha * (1.0 + mf).powf(alpha - 2.0);
    let stated_value = pre * (mu * (mf + 2.0 * alpha - 1.0) - lambda * (1.0 + mf)) * mu;
    let true_value = pre * (mu * (mf + 2.0 * alpha - 1.0) - 2.0 * lambda * (1.0 + mf)) * mu;
    let claim = einstein_threshold_claimed(lambda, mu1(backend)?, m, alpha);
    let conformal_coefficient =
        backend.is_sphere().then(|| conformal_instability_coefficient(m, alpha).0);
    let conflict =
        claim.stable && (assembled < 0.0 || conformal_coefficient.is_some_and(|c| c < 0.0));
    Ok(EinsteinAudit {
        m,
        alpha,
        k,
        lambda,
        mu,
        stated_value,
        true_value,
        assembled,
        discrepancy_factor: true_value / stated_value,
        claim,
        conformal_coefficient,
        conflict,
    })
}

/// Monte Carlo samples used to re-verify symmetry-adapted witnesses.
pub const WITNESS_SAMPLES: usize = 2000;

/// Verdict for `id: S^m → S^m` from the closed-form spectrum: Killing fields
/// give 0 and degree-`k` gradient fields give `A₁μ_k + A₂(μ_k − 2(m−1))` per
/// unit `∫|v|²`. A negative value is re-verified by quadrature.
pub fn sphere_identity_verdict(m: usize, alpha: f64, degree: u32) -> Result<VerdictRecord> {
    check_alpha(alpha)?;
    if m < 2 {
        return Err(Error::InvalidParameter("sphere identity verdict needs m ≥ 2".into()));
    }
    let (a1, a2) = index_coefficients(alpha, m as f64);
    let mut theta_min = 0.0;
    let mut best = None;
    for k in 1..=degree.max(1) as usize {
        let mu = sphere_eigenvalue(m, k);
        let theta = a1 * mu + a2 * (mu - 2.0 * (m as f64 - 1.0));
        if theta < theta_min {
            theta_min = theta;
            best = Some(k);
        }
    }
    let basis_size = (1..=degree.max(1) as usize)
        .map(|k| sphere_multiplicity(m, k))
        .sum::<usize>()
        + m * (m + 1) / 2;
    let mut verdict = Verdict::StableOnBasis;
    let mut witness = None;
    if let (Some(k), true) = (best, theta_min < -tolerances::RITZ_NEGATIVE) {
        let backend = Arc::new(ManifoldBackend::build_sphere_monte_carlo(
            m,
            WITNESS_SAMPLES,
            DEFAULT_MC_SEED,
        )?);
        let id = Arc::new(MapField::identity(backend));
        let v = Section::gradient(id.clone(), Polynomial::zonal_harmonic(m + 1, k as u32))?
            .with_label(format!("grad zonal harmonic k={k}"));
        let index_value = index_form(&id, alpha, &v, &v)?;
        let mass = section_mass(&v)?;
        if index_value < 0.0 {
            verdict = Verdict::CertifiedUnstable;
        }
        witness = Some(Witness {
            labels: vec![v.label().to_string()],
            coefficients: vec![1.0],
            index_value,
            mass,
            section: Some(v),
        });
    }
    Ok(VerdictRecord {
        alpha,
        theta_min,
        verdict,
        method: VerdictMethod::SymmetryAdapted,
        degree,
        basis_size,
        pruned: 0,
        witness,
        criteria: Criteria::for_sphere_identity(m, alpha),
        conflict: false,
    }
    .finish())
}
