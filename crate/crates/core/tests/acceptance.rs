//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero when any of them fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use alpha_harmonic::energy::{alpha_energy, audit_conformal_equivalence, tension_report};
use alpha_harmonic::fd::second_derivative_richardson;
use alpha_harmonic::fields::{nonexistence_audit, MapField, Polynomial, Section, SourceScalar};
use alpha_harmonic::geometry::{ManifoldBackend, TorusMetric};
use alpha_harmonic::lab::{execute, Experiment, RunOptions, ScenarioConfig};
use alpha_harmonic::optimize::{flow, Termination, DEFAULT_MAX_ITER};
use alpha_harmonic::stability::{
    assemble, conformal_instability_coefficient, default_basis, identity_field_stats, index_form,
    smallest_ritz, sphere_identity_verdict, totally_geodesic_check, yano_check, BasisFamily,
    Verdict, VerdictRecord,
};

type Check = Result<(), String>;

fn sphere(m: usize, res: usize) -> Arc<ManifoldBackend> {
    Arc::new(ManifoldBackend::build_sphere(m, res).unwrap())
}

fn torus(m: usize, n: usize, metric: TorusMetric) -> Arc<ManifoldBackend> {
    Arc::new(ManifoldBackend::build_torus(m, n, metric).unwrap())
}

fn flat(m: usize, n: usize) -> Arc<ManifoldBackend> {
    torus(m, n, TorusMetric::Flat)
}

fn ident(b: &Arc<ManifoldBackend>) -> Arc<MapField> {
    Arc::new(MapField::identity(b.clone()))
}

fn e(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn energy_closed_forms() -> Check {
    let s2 = sphere(2, 16);
    let e = alpha_energy(&MapField::identity(s2.clone()), 2.0).map_err(|e| e.to_string())?.value;
    ensure(rel(e, 36.0 * PI) <= 1e-8, || format!("E_2(id_S2) = {e}"))?;
    let c = MapField::constant(s2.clone(), s2.clone(), e3()).unwrap();
    let v = alpha_energy(&c, 2.0).unwrap().value;
    ensure(rel(v, 4.0 * PI) <= 1e-10, || format!("E_2(const) = {v}"))?;
    let t = flat(2, 8);
    let c = MapField::constant(t.clone(), t, DVector::from_vec(vec![0.3, 0.7])).unwrap();
    let v = alpha_energy(&c, 1.5).unwrap().value;
    ensure((v - 1.0).abs() <= 1e-10, || format!("E_1.5(const on T2) = {v}"))
}

fn e3() -> DVector<f64> {
    e(3, 2)
}

fn identities_are_alpha_harmonic() -> Check {
    let backends = [sphere(2, 10), sphere(3, 6), flat(2, 12), flat(3, 6)];
    for b in &backends {
        for a in [1.5, 2.0, 3.0] {
            let r = tension_report(&MapField::identity(b.clone()), a).unwrap();
            ensure(r.alpha_tension_sup <= 1e-7, || {
                format!("{:?} dim {} α={a}: sup τ_α = {:e}", b.kind(), b.dim(), r.alpha_tension_sup)
            })?;
        }
    }
    Ok(())
}

fn conformal_equivalence() -> Check {
    let t3 = flat(3, 8);
    let shear = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let cases = vec![
        ("S3", MapField::identity(sphere(3, 6))),
        ("T3 flat", MapField::identity(t3.clone())),
        ("T3 warp1", MapField::identity(torus(3, 8, TorusMetric::Warp1 { eps: 0.1 }))),
        ("T3 warp2", MapField::identity(torus(3, 8, TorusMetric::Warp2 { eps: 0.1 }))),
        ("T3 shear", MapField::torus_linear(t3.clone(), t3, shear).unwrap()),
    ];
    for (name, map) in &cases {
        for a in [1.5, 2.0, 3.0] {
            let r = audit_conformal_equivalence(map, a).unwrap();
            ensure(r <= 1e-5, || format!("{name} α={a}: residual {r:e}"))?;
        }
    }
    Ok(())
}

fn nonexistence_identity() -> Check {
    let id = ident(&sphere(2, 10));
    let w = Section::conformal(id.clone(), e(3, 2)).unwrap();
    for a in [1.5, 2.0] {
        let r = nonexistence_audit(&id, &w, a).unwrap();
        ensure(r.residual <= 1e-6, || format!("α={a}: pointwise {:e}", r.residual))?;
        ensure(r.integral.abs() <= 1e-8, || format!("α={a}: ∫div ω = {:e}", r.integral))?;
    }
    Ok(())
}

fn hessian_consistency() -> Check {
    let s1 = sphere(1, 24);
    let s2 = sphere(2, 8);
    let t2 = flat(2, 10);
    let shear = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let maps = vec![
        ("id S2", ident(&s2)),
        ("id S3", ident(&sphere(3, 5))),
        ("id T2", ident(&t2)),
        ("equator S1⊂S2", Arc::new(MapField::equator_inclusion(s1, s2.clone()).unwrap())),
        ("linear T2", Arc::new(MapField::torus_linear(t2.clone(), t2, shear).unwrap())),
    ];
    for (name, map) in &maps {
        let mut dirs = Vec::new();
        for fam in default_basis(map, 2) {
            dirs.extend(fam.build(map).unwrap());
        }
        dirs.truncate(10);
        ensure(dirs.len() == 10, || format!("{name}: only {} directions", dirs.len()))?;
        for a in [1.5, 2.0] {
            for v in &dirs {
                let exact = index_form(map, a, v, v).unwrap();
                let fd = second_derivative_richardson(
                    |t| alpha_energy(&map.perturbed(v, t).unwrap(), a).unwrap().value,
                    1e-2,
                );
                // absolute floor for directions with I = 0
                let gap = (fd - exact).abs() / exact.abs().max(1.0);
                ensure(gap <= 1e-4, || {
                    format!("{name} α={a} {}: FD {fd} vs I {exact}", v.label())
                })?;
            }
        }
    }
    Ok(())
}

fn flat_targets_semidefinite() -> Check {
    let t2 = flat(2, 12);
    let shear = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]);
    let maps = vec![
        ("id T1", ident(&flat(1, 32))),
        ("id T2", ident(&t2)),
        ("linear T2", Arc::new(MapField::torus_linear(t2.clone(), t2, shear).unwrap())),
    ];
    for (name, map) in &maps {
        for l in 1..=4 {
            for a in [1.5, 2.0, 3.0] {
                let r = smallest_ritz(&assemble(map, a, &[BasisFamily::Fourier { degree: l }]).unwrap()).unwrap();
                ensure(r.theta_min >= -1e-8, || format!("{name} L={l} α={a}: θ = {:e}", r.theta_min))?;
            }
        }
    }
    Ok(())
}

fn yano_identity() -> Check {
    let id2 = ident(&sphere(2, 10));
    let id3 = ident(&sphere(3, 8));
    let idt = ident(&flat(2, 16));
    let fields = vec![
        Section::killing_rotation(id2.clone(), 0, 1),
        Section::killing_rotation(id2.clone(), 1, 2),
        Section::gradient(id2.clone(), Polynomial::linear(&[0.0, 0.0, 1.0])),
        Section::gradient(id2.clone(), Polynomial::zonal_harmonic(3, 2)),
        Section::gradient(id2.clone(), Polynomial::monomial(vec![1, 1, 0])),
        Section::gradient(id3.clone(), Polynomial::linear(&[1.0, 0.0, 0.0, 0.0])),
        Section::killing_rotation(id3.clone(), 0, 3),
        Section::killing_rotation(id3.clone(), 1, 2),
        Section::gradient(id3.clone(), Polynomial::zonal_harmonic(4, 2)),
        Section::constant(idt.clone(), DVector::from_vec(vec![1.0, 0.5])),
        Section::scaled(idt.clone(), SourceScalar::Fourier { k: vec![1, 0], sine: true }, e(2, 1)),
        Section::scaled(idt.clone(), SourceScalar::Fourier { k: vec![1, 1], sine: false }, e(2, 0)),
    ];
    for (i, f) in fields.into_iter().enumerate() {
        let f = f.unwrap();
        let (l, r) = yano_check(&f).unwrap();
        ensure((l - r).abs() <= 1e-4 * (1.0 + l.abs()), || format!("field {i}: {l} vs {r}"))?;
    }
    Ok(())
}

fn conformal_closed_form() -> Check {
    for (m, res) in [(2, 10), (3, 8)] {
        let id = ident(&sphere(m, res));
        let w = Section::conformal(id.clone(), e(m + 1, m)).unwrap();
        let div_sq = identity_field_stats(&w).unwrap().div_sq;
        for a in [1.5, 2.0, 3.0] {
            let (coeff, c) = conformal_instability_coefficient(m, a);
            let closed = c * coeff * div_sq;
            let direct = index_form(&id, a, &w, &w).unwrap();
            ensure(rel(direct, closed) <= 1e-4, || format!("m={m} α={a}: {direct} vs {closed}"))?;
        }
    }
    for m in 2..=10i64 {
        for two_a in [3i64, 4, 5, 6] {
            let (coeff, _) = conformal_instability_coefficient(m as usize, two_a as f64 / 2.0);
            let exact = two_a * m + 2 - m - m * m;
            ensure(coeff == exact as f64, || format!("m={m} 2α={two_a}: {coeff} vs {exact}"))?;
        }
    }
    Ok(())
}

fn totally_geodesic() -> Check {
    for m in [2, 3] {
        for a in [1.5, 2.0] {
            let c = totally_geodesic_check(a, m, 10).unwrap();
            ensure(c.relative_gap <= 1e-4, || {
                format!("m={m} α={a}: {} vs {}", c.assembled, c.closed_form)
            })?;
        }
    }
    Ok(())
}

fn witness_verified(r: &VerdictRecord) -> Check {
    if r.verdict != Verdict::CertifiedUnstable {
        return Ok(());
    }
    let w = r.witness.as_ref().ok_or("certified record without witness")?;
    let s = w.section.as_ref().ok_or("witness without section")?;
    let i = index_form(s.base(), r.alpha, s, s).unwrap();
    ensure(i < 0.0 && w.index_value < 0.0, || format!("witness index {i}"))
}

fn killing_and_ritz() -> Check {
    for (m, res) in [(2, 10), (3, 8)] {
        let id = ident(&sphere(m, res));
        for i in 0..=m {
            for j in i + 1..=m {
                let k = Section::killing_rotation(id.clone(), i, j).unwrap();
                for a in [1.5, 2.0, 3.0] {
                    let v = index_form(&id, a, &k, &k).unwrap();
                    ensure(v.abs() <= 1e-6, || format!("S{m} rot{i}{j} α={a}: {v:e}"))?;
                }
            }
        }
    }
    let t2 = flat(2, 10);
    let s2 = sphere(2, 8);
    let cases: Vec<(&str, Arc<MapField>, f64)> = vec![
        ("id S2", ident(&s2), 2.0),
        ("id S3", ident(&sphere(3, 6)), 1.5),
        ("id T2", ident(&t2), 2.0),
        ("loop T1→S2", Arc::new(MapField::circle_loop(flat(1, 32), s2, 1).unwrap()), 2.0),
    ];
    let mut certified = 0;
    for (name, map, a) in &cases {
        let mut last = f64::INFINITY;
        for l in 1..=3 {
            let r = smallest_ritz(&assemble(map, *a, &default_basis(map, l)).unwrap()).unwrap();
            ensure(r.theta_min <= last + 1e-9 * (1.0 + last.abs()), || {
                format!("{name}: θ rose from {last} to {} at L={l}", r.theta_min)
            })?;
            last = r.theta_min;
            certified += usize::from(r.verdict == Verdict::CertifiedUnstable);
            witness_verified(&r).map_err(|e| format!("{name} L={l}: {e}"))?;
        }
    }
    ensure(certified > 0, || "no Ritz record was certified".into())?;
    let r = sphere_identity_verdict(6, 2.0, 2).unwrap();
    ensure(r.verdict == Verdict::CertifiedUnstable, || "S6 identity not certified".into())?;
    witness_verified(&r)
}

fn flow_convergence() -> Check {
    let t = flat(1, 32);
    let map = MapField::torus_wiggle(t.clone(), t, 0.1, 1).unwrap();
    let trace = flow(&map, 2.0, 1e-6, DEFAULT_MAX_ITER).unwrap();
    ensure(trace.reason == Termination::Converged, || format!("{:?}", trace.reason))?;
    ensure(trace.final_tension() <= 1e-6, || format!("‖τ‖ = {:e}", trace.final_tension()))?;
    ensure(trace.log.windows(2).all(|w| w[1].energy <= w[0].energy), || "energy increased".into())?;
    let e = trace.final_energy();
    ensure((e - 4.0).abs() <= 1e-6, || format!("E = {e}"))
}

fn conflict_surfacing() -> Check {
    let cfg = ScenarioConfig::parse(
        "experiment = \"phase-diagram\"\n[phase_diagram]\ndims = [10]\nalphas = [2.5]\n",
    )
    .map_err(|e| e.to_string())?;
    let out = execute(&cfg, Experiment::PhaseDiagram, &RunOptions::default()).map_err(|e| e.to_string())?;
    let t = &out.tables[0];
    let text = |c: &str| t.get(0, c).map(|v| v.render()).unwrap_or_default();
    let num = |c: &str| t.get(0, c).and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
    ensure(text("einstein_claim_verdict") == "stable", || text("einstein_claim_verdict"))?;
    ensure(text("conformal_verdict") == "unstable", || text("conformal_verdict"))?;
    ensure(text("conflict_flag") == "true", || text("conflict_flag"))?;
    ensure(num("conformal_coeff") == -58.0, || format!("coefficient {}", num("conformal_coeff")))?;
    ensure((num("einstein_threshold") - 140.0 / 11.0).abs() < 1e-12, || {
        format!("threshold {}", num("einstein_threshold"))
    })?;
    ensure(!out.conflicts.is_empty(), || "conflict not reported".into())
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Duration, fn() -> Check)> = vec![
        ("α-energy closed forms", Duration::from_secs(1), energy_closed_forms),
        ("identity maps are α-harmonic", Duration::from_secs(10), identities_are_alpha_harmonic),
        ("conformal equivalence of tensions", Duration::from_secs(30), conformal_equivalence),
        ("non-existence identity", Duration::from_secs(5), nonexistence_identity),
        ("Hessian consistency", Duration::from_secs(120), hessian_consistency),
        ("flat targets are semidefinite", Duration::from_secs(60), flat_targets_semidefinite),
        ("Yano identity", Duration::from_secs(60), yano_identity),
        ("conformal closed form", Duration::from_secs(60), conformal_closed_form),
        ("totally geodesic equator", Duration::from_secs(60), totally_geodesic),
        ("Killing neutrality and Ritz soundness", Duration::from_secs(60), killing_and_ritz),
        ("flow convergence", Duration::from_secs(30), flow_convergence),
        ("conflict surfacing", Duration::from_secs(5), conflict_surfacing),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let result = result.and_then(|_| {
            ensure(took <= budget, || format!("took {took:.2?}, budget {budget:?}"))
        });
        match result {
            Ok(()) => println!("criterion {:>2} PASS  {name} ({:.2?})", i + 1, took),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({:.2?}): {msg}", i + 1, took);
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
