//! α-energy, tension fields, the conformal deformation and the first variation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fd::{first_derivative_richardson, Scheme};
use crate::fields::{Jet, MapField, Section};
use crate::geometry::{Point, TorusMetric};
use crate::tolerances;

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 {
        Ok(())
    } else {
        Err(Error::AlphaOutOfRange(alpha))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergyReport {
    pub value: f64,
    /// `(1 + |dψ|²)^α` at every node.
    pub density: Vec<f64>,
    pub alpha: f64,
    /// Monte Carlo standard error (zero for deterministic rules).
    pub std_error: f64,
}

/// `E_α(ψ) = ∫ (1 + |dψ|²)^α dV`.
pub fn alpha_energy(map: &MapField, alpha: f64) -> Result<EnergyReport> {
    check_alpha(alpha)?;
    let src = map.source();
    let density: Vec<f64> = (0..src.len())
        .into_par_iter()
        .map(|n| (1.0 + map.hs_norm_sq(n)).powf(alpha))
        .collect();
    let (value, std_error) = src.integrate_with_error(&density)?;
    Ok(EnergyReport {
        value,
        density,
        alpha,
        std_error,
    })
}

/// `τ(ψ) = Tr_g ∇dψ` at a source point.
pub fn tension_at(map: &MapField, p: &Point) -> DVector<f64> {
    let j2 = map.jet2_at(p);
    let tgt = map.target();
    let jet = &j2.jet;
    let m = jet.d.len();
    let mut acc = DVector::zeros(jet.value.len());
    for i in 0..m {
        for j in 0..m {
            let gij = jet.frame.inverse[(i, j)];
            if gij == 0.0 {
                continue;
            }
            let mut term = j2.hessian[i][j].clone();
            for k in 0..m {
                let c = j2.christoffel.get(k, i, j);
                if c != 0.0 {
                    term.axpy(-c, &jet.d[k], 1.0);
                }
            }
            term += tgt.connection(&jet.value, &jet.d[i], &jet.d[j]);
            acc.axpy(gij, &term, 1.0);
        }
    }
    tgt.tangentialize(&jet.value, &acc)
}

pub fn tension(map: &MapField, node: usize) -> DVector<f64> {
    tension_at(map, map.source().node(node))
}

fn alpha_factor(alpha: f64, hs: f64) -> f64 {
    2.0 * alpha * (1.0 + hs).powf(alpha - 1.0)
}

/// `dψ(grad φ)` for a scalar function probed around the jet's point.
fn push_gradient<F>(map: &MapField, jet: &Jet, scheme: Scheme, phi: F) -> DVector<f64>
where
    F: Fn(&Point) -> f64,
{
    let src = map.source();
    let m = jet.d.len();
    let dphi = DVector::from_fn(m, |j, _| {
        scheme.d1_scalar(|t| phi(&src.chart_offset(&jet.point, &jet.frame, j, t)))
    });
    let up = &jet.frame.inverse * dphi;
    jet.push(&up)
}

/// `τ_α = 2α(1+|dψ|²)^{α−1} τ + dψ(grad 2α(1+|dψ|²)^{α−1})` from the
/// closed formula.
pub fn alpha_tension_formula_at(map: &MapField, alpha: f64, p: &Point) -> DVector<f64> {
    let jet = map.jet_at(p);
    let s = alpha_factor(alpha, jet.hs_norm_sq(map.target()));
    let tau = tension_at(map, p);
    let grad = push_gradient(map, &jet, map.scheme(), |q| {
        alpha_factor(alpha, map.hs_norm_sq_at(q))
    });
    map.target().tangentialize(&jet.value, &(tau * s + grad))
}

/// α-tension at a node. Discrete maps return the exact negative gradient of
/// the discrete energy divided by the node weight, so that it is consistent
/// with the quadrature of [`alpha_energy`].
pub fn alpha_tension(map: &MapField, alpha: f64, node: usize) -> Result<DVector<f64>> {
    check_alpha(alpha)?;
    if map.is_discrete() {
        return Ok(discrete_alpha_tension(map, alpha)?.swap_remove(node));
    }
    Ok(alpha_tension_formula_at(map, alpha, map.source().node(node)))
}

/// α-tension at every node.
pub fn alpha_tension_field(map: &MapField, alpha: f64) -> Result<Vec<DVector<f64>>> {
    check_alpha(alpha)?;
    if map.is_discrete() {
        return discrete_alpha_tension(map, alpha);
    }
    let src = map.source();
    Ok(src
        .nodes()
        .par_iter()
        .map(|p| alpha_tension_formula_at(map, alpha, p))
        .collect())
}

fn discrete_alpha_tension(map: &MapField, alpha: f64) -> Result<Vec<DVector<f64>>> {
    let src = map.source();
    let tgt = map.target();
    let scheme = map.scheme();
    let h = scheme.step();
    let stencil = scheme.first_weights();
    let values = map.discrete_values().expect("discrete map");
    let m = src.dim();
    let nn = src.len();
    let w = src.weights();
    let sphere = tgt.is_sphere();

    struct NodeData {
        raw: Vec<DVector<f64>>,
        j: Vec<DVector<f64>>,
        ginv: DMatrix<f64>,
        s: f64,
        k: Vec<DVector<f64>>,
    }
    let data: Vec<NodeData> = (0..nn)
        .into_par_iter()
        .map(|n| {
            let y = &values[n];
            let raw: Vec<DVector<f64>> = (0..m)
                .map(|i| {
                    let mut d = DVector::zeros(y.len());
                    for &(s, c) in stencil {
                        if c == 0.0 {
                            continue;
                        }
                        let q = &values[src.grid_shift(n, i, s as i64)];
                        let diff = if sphere {
                            q.clone()
                        } else {
                            tgt.wrap_difference(&(q - y))
                        };
                        d.axpy(c / h, &diff, 1.0);
                    }
                    d
                })
                .collect();
            let j: Vec<DVector<f64>> = raw.iter().map(|d| tgt.tangentialize(y, d)).collect();
            let ginv = src.inverse_metric_at(n);
            let hmat = tgt.frame_at(y).metric;
            let mut hs = 0.0;
            for a in 0..m {
                for b in 0..m {
                    hs += ginv[(a, b)] * tgt.inner(y, &j[a], &j[b]);
                }
            }
            let s = alpha_factor(alpha, hs);
            let k = (0..m)
                .map(|a| {
                    let mut acc = DVector::zeros(y.len());
                    for b in 0..m {
                        acc.axpy(ginv[(a, b)], &j[b], 1.0);
                    }
                    if sphere {
                        acc
                    } else {
                        &hmat * acc
                    }
                })
                .collect();
            NodeData { raw, j, ginv, s, k }
        })
        .collect();

    let out: Vec<Result<DVector<f64>>> = (0..nn)
        .into_par_iter()
        .map(|q| {
            let y = &values[q];
            let mut grad = DVector::zeros(y.len());
            for i in 0..m {
                for &(s, c) in stencil {
                    if c == 0.0 {
                        continue;
                    }
                    let n = src.grid_shift(q, i, -(s as i64));
                    grad.axpy(w[n] * data[n].s * c / h, &data[n].k[i], 1.0);
                }
            }
            let dq = &data[q];
            if sphere {
                for a in 0..m {
                    for b in 0..m {
                        let coef = dq.ginv[(a, b)] * y.dot(&dq.raw[a]);
                        grad.axpy(-w[q] * dq.s * coef, &dq.j[b], 1.0);
                    }
                }
                let g = tgt.tangentialize(y, &grad);
                Ok(g * (-1.0 / w[q]))
            } else {
                if tgt.torus_metric() != TorusMetric::Flat {
                    let metric = tgt.torus_metric();
                    for a in 0..m.min(y.len()) {
                        let dh = Scheme::analytic().d1(|t| {
                            let mut z = y.clone();
                            z[a] += t;
                            let mat = metric.matrix(z.as_slice());
                            DVector::from_column_slice(mat.as_slice())
                        });
                        let dh = DMatrix::from_column_slice(y.len(), y.len(), dh.as_slice());
                        let mut acc = 0.0;
                        for i in 0..m {
                            for jj in 0..m {
                                acc += dq.ginv[(i, jj)] * (&dh * &dq.j[jj]).dot(&dq.j[i]);
                            }
                        }
                        grad[a] += w[q] * 0.5 * dq.s * acc;
                    }
                }
                let hmat = tgt.frame_at(y).metric;
                let sol = hmat
                    .lu()
                    .solve(&grad)
                    .ok_or_else(|| Error::Numeric("singular target metric".into()))?;
                Ok(sol * (-1.0 / w[q]))
            }
        })
        .collect();
    out.into_iter().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TensionReport {
    pub alpha: f64,
    pub tension: Vec<DVector<f64>>,
    pub alpha_tension: Vec<DVector<f64>>,
    pub tension_l2: f64,
    pub tension_sup: f64,
    pub alpha_tension_l2: f64,
    pub alpha_tension_sup: f64,
    pub alpha_harmonic: bool,
}

/// `(L², sup)` norms of a tangent field along the map.
pub fn field_norms(map: &MapField, field: &[DVector<f64>]) -> Result<(f64, f64)> {
    let tgt = map.target();
    let vals = map.values();
    let sq: Vec<f64> = field
        .iter()
        .zip(&vals)
        .map(|(v, y)| tgt.norm_sq(y, v))
        .collect();
    let l2 = map.source().integrate(&sq)?.max(0.0).sqrt();
    let sup = sq.iter().fold(0.0f64, |a, b| a.max(*b)).sqrt();
    Ok((l2, sup))
}

pub fn tension_report(map: &MapField, alpha: f64) -> Result<TensionReport> {
    check_alpha(alpha)?;
    let src = map.source();
    let tension: Vec<DVector<f64>> = src.nodes().par_iter().map(|p| tension_at(map, p)).collect();
    let alpha_tension = alpha_tension_field(map, alpha)?;
    let (tension_l2, tension_sup) = field_norms(map, &tension)?;
    let (alpha_tension_l2, alpha_tension_sup) = field_norms(map, &alpha_tension)?;
    Ok(TensionReport {
        alpha,
        tension,
        alpha_tension,
        tension_l2,
        tension_sup,
        alpha_tension_l2,
        alpha_tension_sup,
        alpha_harmonic: alpha_tension_sup <= tolerances::ALPHA_HARMONIC,
    })
}

/// `μ = (2α)^{1/(m−2)} (1 + |dψ|²)^{(α−1)/(m−2)}`.
pub fn conformal_factor_value(m: usize, alpha: f64, hs: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if m <= 2 {
        return Err(Error::Dimension(format!(
            "the conformal deformation needs m > 2, got m = {m}"
        )));
    }
    let k = 1.0 / (m as f64 - 2.0);
    Ok((2.0 * alpha).powf(k) * (1.0 + hs).powf((alpha - 1.0) * k))
}

pub fn conformal_factor(map: &MapField, alpha: f64, node: usize) -> Result<f64> {
    conformal_factor_value(map.source().dim(), alpha, map.hs_norm_sq(node))
}

fn check_non_degenerate(map: &MapField, node: usize) -> Result<()> {
    let sigma_min = map.sigma_min(node);
    if sigma_min <= tolerances::NON_DEGENERATE {
        return Err(Error::Degenerate { node, sigma_min });
    }
    Ok(())
}

/// `τ̄ = μ^{−m} (μ^{m−2} τ + dψ(grad μ^{m−2}))`, the tension of `ψ` for the
/// conformally deformed source metric.
pub fn deformed_tension(map: &MapField, alpha: f64, node: usize) -> Result<DVector<f64>> {
    let m = map.source().dim();
    let mu = conformal_factor(map, alpha, node)?;
    check_non_degenerate(map, node)?;
    let p = map.source().node(node);
    let jet = map.jet_at(p);
    let e = m as f64 - 2.0;
    let phi = mu.powf(e);
    let tau = tension_at(map, p);
    let grad = push_gradient(map, &jet, map.scheme(), |q| {
        conformal_factor_value(m, alpha, map.hs_norm_sq_at(q))
            .map(|mu| mu.powf(e))
            .unwrap_or(f64::NAN)
    });
    Ok((tau * phi + grad) / mu.powi(m as i32))
}

/// `sup ‖μ^m τ̄ − τ_α‖` over nodes.
pub fn audit_conformal_equivalence(map: &MapField, alpha: f64) -> Result<f64> {
    let m = map.source().dim();
    let src = map.source();
    let tgt = map.target();
    let per_node: Vec<Result<f64>> = (0..src.len())
        .into_par_iter()
        .map(|n| {
            let mu = conformal_factor(map, alpha, n)?;
            let bar = deformed_tension(map, alpha, n)?;
            let ta = alpha_tension_formula_at(map, alpha, src.node(n));
            let diff = bar * mu.powi(m as i32) - ta;
            Ok(tgt.norm_sq(&map.value(n), &diff).sqrt())
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in per_node {
        worst = worst.max(r?);
    }
    Ok(worst)
}

/// `(d/dt E_α(Π(ψ + t v))|₀, −∫ h(τ_α, v) dV)`.
pub fn first_variation_pairing(
    map: &Arc<MapField>,
    alpha: f64,
    v: &Section,
) -> Result<(f64, f64)> {
    check_alpha(alpha)?;
    if !Arc::ptr_eq(v.base(), map) {
        return Err(Error::MismatchedBase);
    }
    let energy = |t: f64| -> f64 {
        map.perturbed(v, t)
            .and_then(|pm| alpha_energy(&pm, alpha))
            .map(|r| r.value)
            .unwrap_or(f64::NAN)
    };
    let lhs = first_derivative_richardson(energy, 1e-3);
    if !lhs.is_finite() {
        return Err(Error::Numeric("energy along the variation is not finite".into()));
    }
    let tau = alpha_tension_field(map, alpha)?;
    let tgt = map.target();
    let vals = map.values();
    let vs = v.sample();
    let integrand: Vec<f64> = tau
        .iter()
        .zip(&vs)
        .zip(&vals)
        .map(|((t, v), y)| tgt.inner(y, t, v))
        .collect();
    let rhs = -map.source().integrate(&integrand)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ManifoldBackend;
    use std::f64::consts::PI;

    fn sphere(m: usize, res: usize) -> Arc<ManifoldBackend> {
        Arc::new(ManifoldBackend::build_sphere(m, res).unwrap())
    }

    fn torus(m: usize, n: usize, metric: TorusMetric) -> Arc<ManifoldBackend> {
        Arc::new(ManifoldBackend::build_torus(m, n, metric).unwrap())
    }

    #[test]
    fn energy_closed_forms() {
        let s = sphere(2, 16);
        let id = MapField::identity(s.clone());
        let e = alpha_energy(&id, 2.0).unwrap().value;
        assert!((e - 36.0 * PI).abs() < 1e-8 * 36.0 * PI);
        let c = MapField::from_catalog("constant", &[], s.clone(), s).unwrap();
        assert!((alpha_energy(&c, 2.0).unwrap().value - 4.0 * PI).abs() < 1e-10);
        let t = torus(2, 8, TorusMetric::Flat);
        let lin = MapField::from_catalog("torus_linear", &[2.0, 0.0, 0.0, 1.0], t.clone(), t).unwrap();
        assert!((alpha_energy(&lin, 1.5).unwrap().value - 6f64.powf(1.5)).abs() < 1e-10);
    }

    #[test]
    fn alpha_at_most_one_is_rejected() {
        let s = sphere(2, 4);
        let id = MapField::identity(s);
        assert!(matches!(alpha_energy(&id, 1.0), Err(Error::AlphaOutOfRange(_))));
    }

    #[test]
    fn wiggle_tension() {
        let t = torus(1, 16, TorusMetric::Flat);
        let w = MapField::torus_wiggle(t.clone(), t, 0.1, 1).unwrap();
        let p = DVector::from_vec(vec![0.25]);
        let tau = tension_at(&w, &p);
        assert!((tau[0] + 0.1 * 4.0 * PI * PI).abs() < 1e-10);
        let ta = alpha_tension_formula_at(&w, 2.0, &DVector::from_vec(vec![0.0]));
        assert!(ta[0].abs() < 1e-8);
    }

    #[test]
    fn equator_is_harmonic() {
        let eq = MapField::equator_inclusion(sphere(1, 32), sphere(2, 4)).unwrap();
        for n in 0..32 {
            assert!(tension(&eq, n).norm() < 1e-8);
        }
    }

    #[test]
    fn conformal_factor_examples() {
        assert!((conformal_factor_value(3, 2.0, 3.0).unwrap() - 16.0).abs() < 1e-12);
        assert!((conformal_factor_value(4, 2.0, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(conformal_factor_value(2, 2.0, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn degenerate_map_is_rejected() {
        let t = torus(3, 6, TorusMetric::Flat);
        let c = MapField::from_catalog("constant", &[0.1, 0.2, 0.3], t.clone(), t).unwrap();
        assert!(matches!(deformed_tension(&c, 2.0, 0), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn discrete_gradient_matches_finite_difference_of_energy() {
        let t = torus(1, 12, TorusMetric::Flat);
        let s2 = sphere(2, 4);
        let lp = MapField::circle_loop(t.clone(), s2, 1).unwrap().discretize().unwrap();
        let lp = Arc::new(lp);
        let mut vals = vec![DVector::zeros(3); 12];
        vals[5] = DVector::from_vec(vec![0.3, -0.2, 0.7]);
        let v = Section::discrete(lp.clone(), vals).unwrap();
        let (lhs, rhs) = first_variation_pairing(&lp, 2.0, &v).unwrap();
        assert!((lhs - rhs).abs() < 1e-7 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn discrete_gradient_on_warped_target() {
        let src = torus(1, 10, TorusMetric::Flat);
        let tgt = torus(2, 5, TorusMetric::Warp2 { eps: 0.3 });
        let vals = (0..10)
            .map(|i| {
                let x = i as f64 / 10.0;
                DVector::from_vec(vec![x + 0.05 * (2.0 * PI * x).sin(), 0.1 * (2.0 * PI * x).cos()])
            })
            .collect();
        let map = Arc::new(MapField::discrete(src, tgt, vals).unwrap());
        let mut d = vec![DVector::zeros(2); 10];
        d[3] = DVector::from_vec(vec![0.4, 1.0]);
        let v = Section::discrete(map.clone(), d).unwrap();
        let (lhs, rhs) = first_variation_pairing(&map, 1.5, &v).unwrap();
        assert!((lhs - rhs).abs() < 1e-7 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
    }
}
