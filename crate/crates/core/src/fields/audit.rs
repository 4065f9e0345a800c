use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{alpha_tension_field, check_alpha, field_norms};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::tolerances;

use super::calculus::divergence_at;
use super::map::MapField;
use super::section::Section;
use super::vector_field::classify_field;

/// Pointwise check of `div ω = λ∘ψ |dψ|² (1+|dψ|²)^α` for
/// `ω(Y) = h(X∘ψ, (1+|dψ|²)^α dψ(Y))`, plus `∫ div ω`.
#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceAudit {
    pub alpha: f64,
    /// `div ω` by direct differentiation.
    pub div_omega: Vec<f64>,
    /// Closed-form right-hand side.
    pub closed_form: Vec<f64>,
    /// `max |div ω − closed form|`.
    pub residual: f64,
    /// `∫ div ω dV`.
    pub integral: f64,
}

/// `ω^♯` at a source point.
fn omega_sharp(map: &MapField, field: &Section, alpha: f64, p: &Point) -> nalgebra::DVector<f64> {
    let jet = map.jet_at(p);
    let tgt = map.target();
    let x = field.value_at(&jet.value);
    let factor = (1.0 + jet.hs_norm_sq(tgt)).powf(alpha);
    let m = jet.d.len();
    let low = nalgebra::DVector::from_fn(m, |j, _| tgt.inner(&jet.value, &x, &jet.d[j]));
    let up = &jet.frame.inverse * low * factor;
    let src = map.source();
    if src.is_sphere() {
        let mut out = nalgebra::DVector::zeros(p.len());
        for (i, e) in jet.frame.vectors.iter().enumerate() {
            out.axpy(up[i], e, 1.0);
        }
        out
    } else {
        up
    }
}

/// Audit of the non-existence identity for an α-harmonic map `ψ: M → N` and
/// a conformal field `X` on `N` (a section over the identity of `N`).
pub fn nonexistence_audit(map: &MapField, field: &Section, alpha: f64) -> Result<NonexistenceAudit> {
    check_alpha(alpha)?;
    if !field.base().is_identity() || !same_manifold(field.base().source(), map.target()) {
        return Err(Error::InvalidParameter(
            "the conformal field must be a vector field on the target".into(),
        ));
    }
    let tau = alpha_tension_field(map, alpha)?;
    let (_, sup) = field_norms(map, &tau)?;
    if sup > tolerances::ALPHA_HARMONIC {
        return Err(Error::Precondition(format!(
            "map is not α-harmonic: sup |τ_α| = {sup:e}"
        )));
    }
    let class = classify_field(field)?;
    if !class.is_conformal() {
        return Err(Error::Precondition(format!(
            "field is not conformal (residual {:e})",
            class.conformal_residual
        )));
    }
    let src = map.source();
    let tgt = map.target();
    let n = tgt.dim() as f64;
    let rows: Vec<(f64, f64)> = src
        .nodes()
        .par_iter()
        .map(|p| {
            let div = divergence_at(src, p, map.scheme(), |q| omega_sharp(map, field, alpha, q));
            let jet = map.jet_at(p);
            let hs = jet.hs_norm_sq(tgt);
            let lambda = divergence_at(tgt, &jet.value, field.scheme(), |z| field.value_at(z)) / n;
            (div, lambda * hs * (1.0 + hs).powf(alpha))
        })
        .collect();
    let (div_omega, closed_form): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let residual = div_omega
        .iter()
        .zip(&closed_form)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let integral = src.integrate(&div_omega)?;
    Ok(NonexistenceAudit {
        alpha,
        div_omega,
        closed_form,
        residual,
        integral,
    })
}

fn same_manifold(a: &crate::geometry::ManifoldBackend, b: &crate::geometry::ManifoldBackend) -> bool {
    a.kind() == b.kind() && a.dim() == b.dim() && a.torus_metric() == b.torus_metric()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldBackend;
    use nalgebra::DVector;
    use std::sync::Arc;

    #[test]
    fn identity_on_s2_with_concircular_field() {
        let s = Arc::new(ManifoldBackend::build_sphere(2, 12).unwrap());
        let id = Arc::new(MapField::identity(s.clone()));
        let x = Section::conformal(id.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let a = nonexistence_audit(&id, &x, 2.0).unwrap();
        for (n, p) in s.nodes().iter().enumerate() {
            assert!((a.div_omega[n] + 18.0 * p[2]).abs() < 1e-6);
        }
        assert!(a.residual < 1e-6);
        assert!(a.integral.abs() < 1e-8);
    }

    #[test]
    fn constant_map_gives_zero() {
        let s = Arc::new(ManifoldBackend::build_sphere(2, 8).unwrap());
        let c = MapField::from_catalog("constant", &[], s.clone(), s.clone()).unwrap();
        let id = Arc::new(MapField::identity(s));
        let x = Section::conformal(id, DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        let a = nonexistence_audit(&c, &x, 1.5).unwrap();
        assert!(a.residual < 1e-12 && a.integral.abs() < 1e-12);
    }

    #[test]
    fn non_harmonic_map_is_rejected() {
        let t = Arc::new(ManifoldBackend::build_torus(1, 16, crate::geometry::TorusMetric::Flat).unwrap());
        let w = MapField::torus_wiggle(t.clone(), t.clone(), 0.1, 1).unwrap();
        let id = Arc::new(MapField::identity(t));
        let x = Section::constant(id, DVector::from_vec(vec![1.0])).unwrap();
        assert!(matches!(nonexistence_audit(&w, &x, 2.0), Err(Error::Precondition(_))));
    }
}
