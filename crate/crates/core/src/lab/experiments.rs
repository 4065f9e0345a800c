use std::sync::Arc;

use rayon::prelude::*;

use crate::energy::{alpha_energy, audit_conformal_equivalence, tension_report};
use crate::error::{Error, Result};
use crate::fields::{nonexistence_audit, MapField};
use crate::geometry::ManifoldBackend;
use crate::optimize::{flow, FlowTrace};
use crate::spectral::{function_spectrum, function_spectrum_with_degree};
use crate::stability::{
    assemble, conformal_instability_coefficient, default_basis, einstein_threshold_claimed,
    k3_margin, smallest_ritz, sphere_identity_verdict, stability_verdict, trace_criterion,
    Verdict, VerdictRecord,
};
use crate::tolerances;

use super::config::{at, ScenarioConfig};
use super::output::{Checkpoint, PlotData, Table};

/// Pass/fail thresholds after config overrides and `--tol-scale`.
#[derive(Debug, Clone, Copy)]
pub struct Thresholds {
    pub scale: f64,
    pub alpha_harmonic: f64,
    pub cross_check: f64,
    pub fd: f64,
}

impl Thresholds {
    pub fn new(cfg: &ScenarioConfig, tol_scale: f64) -> Self {
        let o = &cfg.tolerances;
        let scale = o.scale.unwrap_or(1.0) * tol_scale;
        Self {
            scale,
            alpha_harmonic: o.alpha_harmonic.unwrap_or(tolerances::ALPHA_HARMONIC) * scale,
            cross_check: o.cross_check.unwrap_or(tolerances::CROSS_CHECK) * scale,
            fd: o.fd.unwrap_or(tolerances::FD) * scale,
        }
    }
}

/// Everything an experiment produces before it is written to disk.
#[derive(Debug, Default)]
pub struct ExperimentOutput {
    pub tables: Vec<Table>,
    pub plots: Vec<PlotData>,
    pub files: Vec<(String, Vec<u8>)>,
    pub conflicts: Vec<String>,
    pub failures: Vec<String>,
}

pub fn energy(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    let map = cfg.build_map()?;
    let mut t = Table::new("energy", &["map", "alpha", "energy", "std_error"]);
    for a in cfg.alpha_values() {
        let r = alpha_energy(&map, a)?;
        t.push(vec![map.kind_id().into(), a.into(), r.value.into(), r.std_error.into()]);
    }
    Ok(ExperimentOutput { tables: vec![t], ..Default::default() })
}

pub fn tension(cfg: &ScenarioConfig, th: &Thresholds) -> Result<ExperimentOutput> {
    let map = cfg.build_map()?;
    let mut t = Table::new(
        "tension",
        &[
            "map",
            "alpha",
            "tension_l2",
            "tension_sup",
            "alpha_tension_l2",
            "alpha_tension_sup",
            "alpha_harmonic",
        ],
    );
    for a in cfg.alpha_values() {
        let r = tension_report(&map, a)?;
        t.push(vec![
            map.kind_id().into(),
            a.into(),
            r.tension_l2.into(),
            r.tension_sup.into(),
            r.alpha_tension_l2.into(),
            r.alpha_tension_sup.into(),
            (r.alpha_tension_sup <= th.alpha_harmonic).into(),
        ]);
    }
    Ok(ExperimentOutput { tables: vec![t], ..Default::default() })
}

pub fn audit_conformal(cfg: &ScenarioConfig, th: &Thresholds) -> Result<ExperimentOutput> {
    let map = cfg.build_map()?;
    let tol = 1e-5 * th.scale;
    let mut out = ExperimentOutput::default();
    let mut t = Table::new("audit_conformal", &["map", "alpha", "sup_residual", "tolerance", "pass"]);
    for a in cfg.alpha_values() {
        let r = audit_conformal_equivalence(&map, a).map_err(|e| at("map", e))?;
        if r > tol {
            out.failures.push(format!("conformal equivalence at α = {a}: {r:e}"));
        }
        t.push(vec![map.kind_id().into(), a.into(), r.into(), tol.into(), (r <= tol).into()]);
    }
    out.tables.push(t);
    Ok(out)
}

pub fn nonexistence(cfg: &ScenarioConfig, th: &Thresholds) -> Result<ExperimentOutput> {
    let map = cfg.build_map()?;
    let fc = cfg.field.as_ref().ok_or_else(|| Error::Config {
        path: "field".into(),
        message: "nonexistence needs a [field] table (a conformal field on the target)".into(),
    })?;
    let id = Arc::new(MapField::identity(map.target().clone()));
    let field = fc.build(&id).map_err(|e| at("field", e))?;
    let mut out = ExperimentOutput::default();
    let mut t = Table::new(
        "nonexistence",
        &["alpha", "pointwise_residual", "integral", "tolerance", "pass"],
    );
    for a in cfg.alpha_values() {
        let r = nonexistence_audit(&map, &field, a)?;
        let pass = r.residual <= th.alpha_harmonic && r.integral.abs() <= 1e-8 * th.scale;
        if !pass {
            out.failures.push(format!("nonexistence identity at α = {a}"));
        }
        t.push(vec![a.into(), r.residual.into(), r.integral.into(), th.alpha_harmonic.into(), pass.into()]);
    }
    out.tables.push(t);
    Ok(out)
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::CertifiedUnstable => "certified_unstable",
        Verdict::StableOnBasis => "stable_on_basis",
    }
}

pub fn index(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    let map = cfg.build_map()?;
    if cfg.index.trace && !map.target().is_sphere() {
        return Err(Error::Config {
            path: "index.trace".into(),
            message: "the trace criterion needs an embedded sphere target".into(),
        });
    }
    let mut out = ExperimentOutput::default();
    let mut t = Table::new(
        "index",
        &[
            "alpha",
            "degree",
            "theta_min",
            "verdict",
            "method",
            "basis_size",
            "pruned",
            "witness_index",
            "witness_mass",
            "conflict",
            "trace",
            "trace_hypothesis",
        ],
    );
    let mut plot = PlotData::new("plot_theta_vs_alpha");
    let alphas = cfg.alpha_values();
    let rows: Vec<Result<Vec<(u32, VerdictRecord)>>> = alphas
        .par_iter()
        .map(|&a| {
            (1..=cfg.degree.max(1))
                .map(|l| stability_verdict(&map, a, l).map(|r| (l, r)))
                .collect()
        })
        .collect();
    for (&a, recs) in alphas.iter().zip(rows) {
        let recs = recs?;
        let trace = if cfg.index.trace { Some(trace_criterion(&map, a)?) } else { None };
        let mut prev: Option<f64> = None;
        for (l, r) in &recs {
            if let Some(p) = prev {
                if r.theta_min > p + 1e-9 * (1.0 + p.abs()) {
                    out.failures.push(format!("θ_min increased with L at α = {a}, L = {l}"));
                }
            }
            prev = Some(r.theta_min);
            if r.verdict == Verdict::CertifiedUnstable
                && !r.witness.as_ref().is_some_and(|w| w.index_value < 0.0)
            {
                out.failures.push(format!("unverified instability at α = {a}, L = {l}"));
            }
            if r.conflict {
                out.conflicts.push(format!("Einstein threshold vs computed verdict at α = {a}"));
            }
            t.push(vec![
                a.into(),
                (*l).into(),
                r.theta_min.into(),
                verdict_name(r.verdict).into(),
                format!("{:?}", r.method).to_lowercase().into(),
                r.basis_size.into(),
                r.pruned.into(),
                r.witness.as_ref().map(|w| w.index_value).into(),
                r.witness.as_ref().map(|w| w.mass).into(),
                r.conflict.into(),
                trace.as_ref().map(|c| c.trace).into(),
                trace.as_ref().map(|c| c.hypothesis).into(),
            ]);
        }
        if let Some((l, r)) = recs.last() {
            plot.push(format!("theta_min L={l}"), a, r.theta_min);
        }
    }
    out.conflicts.dedup();
    out.tables.push(t);
    out.plots.push(plot);
    Ok(out)
}

pub fn spectrum(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    let (src, _) = cfg.backends()?;
    let count = cfg.spectrum.count.unwrap_or(4);
    let r = match cfg.spectrum.degree {
        Some(d) => function_spectrum_with_degree(&src, count, d)?,
        None => function_spectrum(&src, count)?,
    };
    let mut t = Table::new("spectrum", &["index", "eigenvalue", "multiplicity", "method", "resolution"]);
    for (i, (v, mult)) in r.eigenvalues.iter().enumerate() {
        t.push(vec![
            i.into(),
            (*v).into(),
            (*mult).into(),
            format!("{:?}", r.method).to_lowercase().into(),
            r.resolution.into(),
        ]);
    }
    Ok(ExperimentOutput { tables: vec![t], ..Default::default() })
}

fn checkpoint_of(trace: &FlowTrace) -> Checkpoint {
    let map = &trace.terminal;
    Checkpoint {
        alpha: trace.alpha,
        iteration: trace.log.last().map_or(0, |s| s.iter as u64),
        source_dim: map.source().dim() as u32,
        n_per_axis: map.source().grid_size().unwrap_or(0) as u32,
        values: map
            .discrete_values()
            .map(|v| v.iter().map(|y| y.iter().copied().collect()).collect())
            .unwrap_or_default(),
    }
}

pub fn flow_experiment(cfg: &ScenarioConfig, base_dir: &std::path::Path) -> Result<ExperimentOutput> {
    let mut map = cfg.build_map()?;
    if let Some(path) = &cfg.flow.resume {
        let path = base_dir.join(path);
        let ck = Checkpoint::load(&path)?;
        let src = map.source();
        if ck.values.len() != src.len() || ck.source_dim as usize != src.dim() {
            return Err(Error::Config {
                path: "flow.resume".into(),
                message: "checkpoint does not match the configured source grid".into(),
            });
        }
        let values = ck.values.into_iter().map(nalgebra::DVector::from_vec).collect();
        map = Arc::new(MapField::discrete(src.clone(), map.target().clone(), values)?);
    }
    let mut out = ExperimentOutput::default();
    let mut log = Table::new("flow", &["alpha", "iter", "energy", "tension_l2", "step"]);
    let mut summary = Table::new(
        "flow_summary",
        &["alpha", "reason", "iterations", "final_energy", "final_tension_l2"],
    );
    let mut plot = PlotData::new("plot_flow");
    for (i, a) in cfg.alpha_values().into_iter().enumerate() {
        let trace = flow(&map, a, cfg.flow.tol, cfg.flow.max_iter)?;
        for s in &trace.log {
            log.push(vec![a.into(), s.iter.into(), s.energy.into(), s.tension_l2.into(), s.step.into()]);
            plot.push(format!("energy alpha={a}"), s.iter as f64, s.energy);
        }
        summary.push(vec![
            a.into(),
            format!("{:?}", trace.reason).to_lowercase().into(),
            trace.steps().into(),
            trace.final_energy().into(),
            trace.final_tension().into(),
        ]);
        out.files.push((format!("flow_{i}.ckpt"), checkpoint_of(&trace).to_bytes()));
    }
    out.tables.push(log);
    out.tables.push(summary);
    out.plots.push(plot);
    Ok(out)
}

/// One `(m, α)` cell of the phase diagram.
#[derive(Debug, Clone)]
pub struct PhaseCell {
    pub m: usize,
    pub alpha: f64,
    pub k3_margin: f64,
    pub k2_h: f64,
    pub conformal_coeff: f64,
    pub conformal_c: f64,
    pub trace_hypothesis: bool,
    pub einstein_lambda: f64,
    pub einstein_mu1: f64,
    pub einstein_threshold: f64,
    pub einstein_claims_stable: bool,
    pub record: VerdictRecord,
}

impl PhaseCell {
    pub fn conformal_unstable(&self) -> bool {
        self.conformal_coeff < 0.0
    }
}

pub fn phase_cell(m: usize, alpha: f64, degree: u32, resolution: usize) -> Result<PhaseCell> {
    let record = if m <= 3 {
        let id = Arc::new(MapField::identity(Arc::new(ManifoldBackend::build_sphere(m, resolution)?)));
        smallest_ritz(&assemble(&id, alpha, &default_basis(&id, degree))?)?
    } else {
        sphere_identity_verdict(m, alpha, degree)?
    };
    let mf = m as f64;
    let (k3, h) = k3_margin(m, alpha);
    let (coeff, c) = conformal_instability_coefficient(m, alpha);
    let claim = einstein_threshold_claimed(mf - 1.0, mf, m, alpha);
    Ok(PhaseCell {
        m,
        alpha,
        k3_margin: k3,
        k2_h: h,
        conformal_coeff: coeff,
        conformal_c: c,
        trace_hypothesis: record.criteria.trace_hypothesis.unwrap_or(false),
        einstein_lambda: claim.lambda,
        einstein_mu1: claim.mu1,
        einstein_threshold: claim.threshold,
        einstein_claims_stable: claim.stable,
        record,
    })
}

pub const PHASE_COLUMNS: &[&str] = &[
    "m",
    "alpha",
    "k3_margin",
    "k2_h",
    "conformal_coeff",
    "conformal_c",
    "conformal_verdict",
    "trace_hypothesis",
    "einstein_lambda",
    "einstein_mu1",
    "einstein_threshold",
    "einstein_claim_verdict",
    "theta_min",
    "theta_method",
    "verdict",
    "conflict_flag",
];

pub fn phase_diagram(cfg: &ScenarioConfig) -> Result<ExperimentOutput> {
    let pd = &cfg.phase_diagram;
    let cells: Vec<(usize, f64)> = pd
        .dims
        .iter()
        .flat_map(|&m| pd.alphas.iter().map(move |&a| (m, a)))
        .collect();
    // the pool may finish cells in any order; collect keeps (m, α) order
    let results: Vec<Result<PhaseCell>> = cells
        .par_iter()
        .map(|&(m, a)| phase_cell(m, a, cfg.degree, pd.resolution))
        .collect();
    let mut out = ExperimentOutput::default();
    let mut t = Table::new("phase_diagram", PHASE_COLUMNS);
    let mut plot = PlotData::new("plot_phase");
    for r in results {
        let c = r?;
        let rec = &c.record;
        if rec.conflict {
            out.conflicts.push(format!(
                "(m, α) = ({}, {}): Einstein threshold says stable, conformal coefficient {} says unstable",
                c.m, c.alpha, c.conformal_coeff
            ));
        }
        t.push(vec![
            c.m.into(),
            c.alpha.into(),
            c.k3_margin.into(),
            c.k2_h.into(),
            c.conformal_coeff.into(),
            c.conformal_c.into(),
            if c.conformal_unstable() { "unstable" } else { "nonnegative" }.into(),
            c.trace_hypothesis.into(),
            c.einstein_lambda.into(),
            c.einstein_mu1.into(),
            c.einstein_threshold.into(),
            if c.einstein_claims_stable { "stable" } else { "no_claim" }.into(),
            rec.theta_min.into(),
            format!("{:?}", rec.method).to_lowercase().into(),
            verdict_name(rec.verdict).into(),
            rec.conflict.into(),
        ]);
        let code = if rec.verdict == Verdict::CertifiedUnstable { 1.0 } else { 0.0 };
        plot.push(format!("verdict_code alpha={}", c.alpha), c.m as f64, code);
        plot.push(format!("theta_min alpha={}", c.alpha), c.m as f64, rec.theta_min);
    }
    out.tables.push(t);
    out.plots.push(plot);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conflict_cell() {
        let c = phase_cell(10, 2.5, 2, 4).unwrap();
        assert!(c.einstein_claims_stable);
        assert!(c.conformal_unstable());
        assert_eq!(c.conformal_coeff, -58.0);
        assert!(c.record.conflict);
        assert_eq!(c.record.verdict, Verdict::CertifiedUnstable);
    }

    #[test]
    fn energy_scenario_row() {
        let cfg = ScenarioConfig::parse(
            "experiment = \"energy\"\n[manifold]\nkind = \"sphere\"\ndim = 2\nresolution = 16\n",
        )
        .unwrap();
        let out = energy(&cfg).unwrap();
        let e = out.tables[0].get(0, "energy").unwrap().as_f64().unwrap();
        assert!((e - 113.097).abs() < 1e-3);
    }

    #[test]
    fn trace_on_torus_reports_key_path() {
        let cfg = ScenarioConfig::parse(
            "[manifold]\nkind = \"torus\"\ndim = 2\nn_per_axis = 8\n[index]\ntrace = true\n",
        )
        .unwrap();
        match index(&cfg) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "index.trace"),
            other => panic!("{other:?}"),
        }
    }
}
