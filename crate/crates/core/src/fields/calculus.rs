//! Gradients and divergences of pointwise-defined objects on a backend.

use nalgebra::DVector;

use crate::fd::Scheme;
use crate::geometry::{ManifoldBackend, Point};

/// `grad f` at `p`, in the backend's point representation.
pub fn gradient_at<F>(backend: &ManifoldBackend, p: &Point, scheme: Scheme, f: F) -> DVector<f64>
where
    F: Fn(&Point) -> f64,
{
    let frame = backend.frame_at(p);
    let m = backend.dim();
    let df = DVector::from_fn(m, |i, _| {
        scheme.d1_scalar(|t| f(&backend.chart_offset(p, &frame, i, t)))
    });
    if backend.is_sphere() {
        let mut out = DVector::zeros(p.len());
        for (i, e) in frame.vectors.iter().enumerate() {
            out.axpy(df[i], e, 1.0);
        }
        out
    } else {
        &frame.inverse * df
    }
}

/// `div X = Tr ∇X` at `p` for a vector field given pointwise.
pub fn divergence_at<F>(backend: &ManifoldBackend, p: &Point, scheme: Scheme, x: F) -> f64
where
    F: Fn(&Point) -> DVector<f64>,
{
    let frame = backend.frame_at(p);
    let m = backend.dim();
    if backend.is_sphere() {
        // normal coordinates: Christoffels vanish at the centre
        (0..m)
            .map(|i| {
                let d = scheme.d1(|t| x(&backend.chart_offset(p, &frame, i, t)));
                d.dot(&frame.vectors[i])
            })
            .sum()
    } else {
        let x0 = x(p);
        let gamma = backend.chart_christoffel(p);
        (0..m)
            .map(|i| {
                let d = scheme.d1(|t| x(&backend.chart_offset(p, &frame, i, t)));
                let corr: f64 = (0..m).map(|k| gamma.get(i, i, k) * x0[k]).sum();
                d[i] + corr
            })
            .sum()
    }
}
