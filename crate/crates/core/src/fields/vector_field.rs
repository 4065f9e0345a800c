use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Frame;
use crate::tolerances;

use super::map::Jet;
use super::section::Section;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldClass {
    Killing,
    Conformal,
    Generic,
}

/// Outcome of [`classify_field`].
#[derive(Debug, Clone, Serialize)]
pub struct FieldClassification {
    pub class: FieldClass,
    /// `λ = div X / m` at every node.
    pub potential: Vec<f64>,
    /// `max |L_X g|_g`.
    pub killing_residual: f64,
    /// `max |L_X g − 2λ g|_g`.
    pub conformal_residual: f64,
}

impl FieldClassification {
    /// Killing fields count as conformal with zero potential.
    pub fn is_conformal(&self) -> bool {
        self.class != FieldClass::Generic
    }
}

fn require_vector_field(field: &Section) -> Result<()> {
    if field.base().is_identity() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(
            "vector fields on M are sections over the identity of M".into(),
        ))
    }
}

/// `g(∇_{E_i} X, E_j)` in the working frame.
pub(crate) fn nabla_matrix(frame: &Frame, sphere: bool, nabla: &[DVector<f64>]) -> DMatrix<f64> {
    let m = nabla.len();
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m {
        let low = if sphere {
            DVector::from_iterator(m, frame.vectors.iter().map(|e| e.dot(&nabla[i])))
        } else {
            &frame.metric * &nabla[i]
        };
        for j in 0..m {
            a[(i, j)] = low[j];
        }
    }
    a
}

/// `|T|_g² = tr(g⁻¹ T g⁻¹ T)` for a symmetric 2-tensor.
pub(crate) fn tensor_norm_sq(frame: &Frame, t: &DMatrix<f64>) -> f64 {
    let a = &frame.inverse * t;
    (&a * &a).trace()
}

fn lie_from(jet: &Jet, sphere: bool, nabla: &[DVector<f64>]) -> DMatrix<f64> {
    let a = nabla_matrix(&jet.frame, sphere, nabla);
    &a + a.transpose()
}

/// `(L_X g)(E_i, E_j) = g(∇_i X, E_j) + g(E_i, ∇_j X)`.
pub fn lie_derivative(field: &Section, node: usize) -> Result<DMatrix<f64>> {
    require_vector_field(field)?;
    let jet = field.base().jet(node);
    let nabla = field.covariant_derivatives(&jet);
    Ok(lie_from(&jet, field.base().source().is_sphere(), &nabla))
}

/// `div X = Tr ∇X`.
pub fn divergence(field: &Section, node: usize) -> Result<f64> {
    require_vector_field(field)?;
    let jet = field.base().jet(node);
    let nabla = field.covariant_derivatives(&jet);
    let a = nabla_matrix(&jet.frame, field.base().source().is_sphere(), &nabla);
    Ok((&jet.frame.inverse * a).trace())
}

/// Per-node `(div X, ½|L_X g|²)`.
pub fn divergence_and_lie_norm(field: &Section) -> Result<Vec<(f64, f64)>> {
    require_vector_field(field)?;
    let base = field.base();
    let sphere = base.source().is_sphere();
    Ok((0..base.source().len())
        .map(|node| {
            let jet = base.jet(node);
            let nabla = field.covariant_derivatives(&jet);
            let a = nabla_matrix(&jet.frame, sphere, &nabla);
            let div = (&jet.frame.inverse * &a).trace();
            let l = &a + a.transpose();
            (div, 0.5 * tensor_norm_sq(&jet.frame, &l))
        })
        .collect())
}

/// Killing / conformal / generic classification with residuals.
pub fn classify_field(field: &Section) -> Result<FieldClassification> {
    require_vector_field(field)?;
    let base = field.base();
    let src = base.source();
    let sphere = src.is_sphere();
    let m = src.dim() as f64;
    let mut potential = Vec::with_capacity(src.len());
    let mut killing: f64 = 0.0;
    let mut conformal: f64 = 0.0;
    for node in 0..src.len() {
        let jet = base.jet(node);
        let nabla = field.covariant_derivatives(&jet);
        let l = lie_from(&jet, sphere, &nabla);
        let div = 0.5 * (&jet.frame.inverse * &l).trace();
        let lambda = div / m;
        potential.push(lambda);
        killing = killing.max(tensor_norm_sq(&jet.frame, &l).sqrt());
        let trace_free = &l - &jet.frame.metric * (2.0 * lambda);
        conformal = conformal.max(tensor_norm_sq(&jet.frame, &trace_free).sqrt());
    }
    let class = if killing <= tolerances::KILLING {
        FieldClass::Killing
    } else if conformal <= tolerances::KILLING {
        FieldClass::Conformal
    } else {
        FieldClass::Generic
    };
    Ok(FieldClassification {
        class,
        potential,
        killing_residual: killing,
        conformal_residual: conformal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{MapField, Polynomial};
    use crate::geometry::{ManifoldBackend, TorusMetric};
    use std::sync::Arc;

    fn sphere_id(m: usize) -> Arc<MapField> {
        Arc::new(MapField::identity(Arc::new(ManifoldBackend::build_sphere(m, 6).unwrap())))
    }

    #[test]
    fn rotation_is_killing() {
        for m in [2, 3] {
            let r = Section::killing_rotation(sphere_id(m), 0, m).unwrap();
            let c = classify_field(&r).unwrap();
            assert_eq!(c.class, FieldClass::Killing);
            assert!(divergence(&r, 3).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn concircular_field_is_conformal() {
        let id = sphere_id(2);
        let w = Section::conformal(id.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let c = classify_field(&w).unwrap();
        assert_eq!(c.class, FieldClass::Conformal);
        let src = id.source();
        for n in (0..src.len()).step_by(5) {
            assert!((c.potential[n] + src.node(n)[2]).abs() < 1e-8);
            let div = divergence(&w, n).unwrap();
            assert!((div + 2.0 * src.node(n)[2]).abs() < 1e-8);
        }
    }

    #[test]
    fn gradient_of_quadratic_is_generic() {
        let w = Section::gradient(sphere_id(2), Polynomial::zonal_harmonic(3, 2)).unwrap();
        assert_eq!(classify_field(&w).unwrap().class, FieldClass::Generic);
    }

    #[test]
    fn torus_fields() {
        let t = Arc::new(ManifoldBackend::build_torus(2, 12, TorusMetric::Flat).unwrap());
        let id = Arc::new(MapField::identity(t));
        let c = Section::constant(id.clone(), DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_eq!(classify_field(&c).unwrap().class, FieldClass::Killing);
        let l = lie_derivative(&c, 7).unwrap();
        assert!(l.norm() < 1e-12);
        let f = Section::fourier(id, vec![1, 0], true, 0).unwrap();
        assert_eq!(classify_field(&f).unwrap().class, FieldClass::Generic);
    }
}
