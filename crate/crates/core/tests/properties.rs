use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;

use alpha_harmonic::energy::alpha_energy;
use alpha_harmonic::fields::{MapField, Polynomial, Section, SourceScalar};
use alpha_harmonic::geometry::{ManifoldBackend, TorusMetric};
use alpha_harmonic::lab::Checkpoint;
use alpha_harmonic::stability::{conformal_instability_coefficient, index_form};

fn s2() -> Arc<ManifoldBackend> {
    Arc::new(ManifoldBackend::build_sphere(2, 8).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_maps_have_energy_vol(alpha in 1.0f64..4.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let b = s2();
        let c = MapField::constant(b.clone(), b, DVector::from_vec(vec![x, y, 1.5])).unwrap();
        let e = alpha_energy(&c, alpha).unwrap().value;
        prop_assert!((e - 4.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn index_form_is_symmetric_and_bilinear(
        a in 1.0f64..3.0,
        u in prop::array::uniform3(-1.0f64..1.0),
        w in prop::array::uniform3(-1.0f64..1.0),
        s in -2.0f64..2.0,
    ) {
        let id = Arc::new(MapField::identity(s2()));
        let v1 = Section::gradient(id.clone(), Polynomial::linear(&u)).unwrap();
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| w[(i + j) % 3] * (1.0 + i as f64 - j as f64));
        let v2 = Section::ambient_linear(id.clone(), Some(m), DVector::from_vec(w.to_vec())).unwrap();
        let i12 = index_form(&id, a, &v1, &v2).unwrap();
        let i21 = index_form(&id, a, &v2, &v1).unwrap();
        prop_assert!((i12 - i21).abs() <= 1e-8 * (1.0 + i12.abs()));
        let scaled = v1.scale(s);
        let lhs = index_form(&id, a, &scaled, &v2).unwrap();
        prop_assert!((lhs - s * i12).abs() <= 1e-8 * (1.0 + lhs.abs()));
    }

    #[test]
    fn flat_torus_index_is_nonnegative(a in 1.0f64..3.5, k in 0i64..3, l in 0i64..3, sine in any::<bool>(), axis in 0usize..2) {
        let t = Arc::new(ManifoldBackend::build_torus(2, 10, TorusMetric::Flat).unwrap());
        let id = Arc::new(MapField::identity(t));
        let mut dir = DVector::zeros(2);
        dir[axis] = 1.0;
        let v = Section::scaled(id.clone(), SourceScalar::Fourier { k: vec![k, l], sine }, dir).unwrap();
        prop_assert!(index_form(&id, a, &v, &v).unwrap() >= -1e-10);
    }

    #[test]
    fn conformal_coefficient_is_integer_for_half_integer_alpha(m in 2usize..=16, two_a in 2i64..=12) {
        let (coeff, c) = conformal_instability_coefficient(m, two_a as f64 / 2.0);
        let mi = m as i64;
        prop_assert_eq!(coeff, (two_a * mi + 2 - mi - mi * mi) as f64);
        prop_assert!(c > 0.0);
    }

    #[test]
    fn checkpoints_round_trip(
        alpha in 1.0f64..10.0,
        iteration in any::<u64>(),
        values in prop::collection::vec(prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 3), 0..20),
    ) {
        let n = values.len() as u32;
        let c = Checkpoint { alpha, iteration, source_dim: 1, n_per_axis: n, values };
        prop_assert_eq!(Checkpoint::from_bytes(&c.to_bytes()).unwrap(), c);
    }
}
