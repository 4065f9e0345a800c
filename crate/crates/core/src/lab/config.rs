//! Scenario files (TOML).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{MapField, Polynomial, Section};
use crate::geometry::{ManifoldBackend, DEFAULT_MC_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Energy,
    Tension,
    AuditConformal,
    Nonexistence,
    Index,
    Spectrum,
    PhaseDiagram,
    Flow,
    AuditAll,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Energy,
        Experiment::Tension,
        Experiment::AuditConformal,
        Experiment::Nonexistence,
        Experiment::Index,
        Experiment::Spectrum,
        Experiment::PhaseDiagram,
        Experiment::Flow,
        Experiment::AuditAll,
    ];

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Energy => "energy",
            Experiment::Tension => "tension",
            Experiment::AuditConformal => "audit-conformal",
            Experiment::Nonexistence => "nonexistence",
            Experiment::Index => "index",
            Experiment::Spectrum => "spectrum",
            Experiment::PhaseDiagram => "phase-diagram",
            Experiment::Flow => "flow",
            Experiment::AuditAll => "audit-all",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldType {
    Sphere,
    Torus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    pub kind: ManifoldType,
    pub dim: usize,
    /// Sphere quadrature resolution.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Torus grid size per axis.
    #[serde(default = "default_grid")]
    pub n_per_axis: usize,
    #[serde(default = "default_metric")]
    pub metric: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

fn default_resolution() -> usize {
    10
}
fn default_grid() -> usize {
    16
}
fn default_metric() -> String {
    "flat".into()
}

impl ManifoldConfig {
    pub fn build(&self, seed: Option<u64>) -> Result<ManifoldBackend> {
        match self.kind {
            ManifoldType::Sphere if self.dim >= 4 => ManifoldBackend::build_sphere_monte_carlo(
                self.dim,
                self.resolution.pow(3),
                seed.unwrap_or(DEFAULT_MC_SEED),
            ),
            ManifoldType::Sphere => ManifoldBackend::build_sphere(self.dim, self.resolution),
            ManifoldType::Torus => {
                ManifoldBackend::build_torus_by_id(self.dim, self.n_per_axis, &self.metric, &self.params)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            kind: "identity".into(),
            params: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    /// `a − ⟨a, x⟩x` on a sphere.
    Conformal,
    /// Rotation in the plane `(plane[0], plane[1])`.
    Killing,
    /// Gradient of the linear function `⟨a, x⟩`.
    GradientLinear,
    /// Constant vector (tori) or its projection (spheres).
    Constant,
}

/// A vector field on a manifold (sections over its identity).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    #[serde(default)]
    pub vector: Vec<f64>,
    #[serde(default)]
    pub plane: Option<[usize; 2]>,
}

impl FieldConfig {
    pub fn build(&self, id: &Arc<MapField>) -> Result<Section> {
        let n = id.target().ambient_dim();
        let vector = || -> Result<nalgebra::DVector<f64>> {
            if self.vector.len() != n {
                return Err(Error::Config {
                    path: "field.vector".into(),
                    message: format!("expected {n} entries, got {}", self.vector.len()),
                });
            }
            Ok(nalgebra::DVector::from_column_slice(&self.vector))
        };
        match self.kind {
            FieldKind::Conformal => Section::conformal(id.clone(), vector()?),
            FieldKind::Killing => {
                let [i, j] = self.plane.unwrap_or([0, 1]);
                Section::killing_rotation(id.clone(), i, j)
            }
            FieldKind::GradientLinear => {
                Section::gradient(id.clone(), Polynomial::linear(vector()?.as_slice()))
            }
            FieldKind::Constant => Section::constant(id.clone(), vector()?),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    /// Multiplies every pass/fail threshold.
    pub scale: Option<f64>,
    pub alpha_harmonic: Option<f64>,
    pub cross_check: Option<f64>,
    pub fd: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    #[serde(default = "default_flow_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Checkpoint to restart from.
    #[serde(default)]
    pub resume: Option<String>,
}

fn default_flow_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    crate::optimize::DEFAULT_MAX_ITER
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            tol: default_flow_tol(),
            max_iter: default_max_iter(),
            resume: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub count: Option<usize>,
    /// Trial degree of a discrete solve; analytic sphere values when unset.
    #[serde(default)]
    pub degree: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexConfig {
    /// Also evaluate the ambient-frame trace criterion.
    #[serde(default)]
    pub trace: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
    #[serde(default = "default_phase_alphas")]
    pub alphas: Vec<f64>,
    /// Quadrature resolution for the numeric cells (m ≤ 3).
    #[serde(default = "default_phase_resolution")]
    pub resolution: usize,
}

fn default_dims() -> Vec<usize> {
    (2..=10).collect()
}
fn default_phase_alphas() -> Vec<f64> {
    vec![1.5, 2.0, 2.5, 3.0]
}
fn default_phase_resolution() -> usize {
    8
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            dims: default_dims(),
            alphas: default_phase_alphas(),
            resolution: default_phase_resolution(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AlphaRange {
    /// Inclusive grid, robust to rounding at the end point.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub alphas: Vec<f64>,
    #[serde(default)]
    pub alpha_range: Option<AlphaRange>,
    #[serde(default = "default_degree")]
    pub degree: u32,
    #[serde(default)]
    pub manifold: Option<ManifoldConfig>,
    /// Defaults to `manifold`.
    #[serde(default)]
    pub target: Option<ManifoldConfig>,
    #[serde(default)]
    pub map: MapConfig,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub index: IndexConfig,
    #[serde(default)]
    pub phase_diagram: PhaseConfig,
}

fn default_degree() -> u32 {
    2
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is valid")
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config {
            path: String::new(),
            message: e.to_string(),
        })?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::parse(&text)?, text))
    }

    fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Err(Error::Config { path: path.into(), message });
        for (i, a) in self.alphas.iter().enumerate() {
            if !(a.is_finite() && *a > 1.0) {
                return bad(&format!("alphas[{i}]"), format!("α must exceed 1, got {a}"));
            }
        }
        if let Some(r) = &self.alpha_range {
            if !(r.step > 0.0 && r.start > 1.0 && r.stop >= r.start) {
                return bad("alpha_range", "need 1 < start ≤ stop and step > 0".into());
            }
        }
        if let Some(s) = self.tolerances.scale {
            if !(s.is_finite() && s > 0.0) {
                return bad("tolerances.scale", format!("must be positive, got {s}"));
            }
        }
        for (i, m) in self.phase_diagram.dims.iter().enumerate() {
            if *m < 2 {
                return bad(&format!("phase_diagram.dims[{i}]"), "dimensions start at 2".into());
            }
        }
        if !(self.flow.tol > 0.0) {
            return bad("flow.tol", "must be positive".into());
        }
        Ok(())
    }

    /// α values: explicit list, then range, then `[2]`.
    pub fn alpha_values(&self) -> Vec<f64> {
        if !self.alphas.is_empty() {
            self.alphas.clone()
        } else if let Some(r) = &self.alpha_range {
            r.values()
        } else {
            vec![2.0]
        }
    }

    pub fn manifold_config(&self) -> Result<&ManifoldConfig> {
        self.manifold.as_ref().ok_or_else(|| Error::Config {
            path: "manifold".into(),
            message: "this experiment needs a [manifold] table".into(),
        })
    }

    /// Source and target backends (shared when no target is given).
    pub fn backends(&self) -> Result<(Arc<ManifoldBackend>, Arc<ManifoldBackend>)> {
        let src = Arc::new(self.manifold_config()?.build(self.seed).map_err(|e| at("manifold", e))?);
        let tgt = match &self.target {
            None => src.clone(),
            Some(t) => Arc::new(t.build(self.seed).map_err(|e| at("target", e))?),
        };
        Ok((src, tgt))
    }

    pub fn build_map(&self) -> Result<Arc<MapField>> {
        let (src, tgt) = self.backends()?;
        MapField::from_catalog(&self.map.kind, &self.map.params, src, tgt)
            .map(Arc::new)
            .map_err(|e| at("map", e))
    }
}

/// Attaches a key path to an error raised while building from config.
pub(crate) fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => Error::Config {
            path: path.into(),
            message: other.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_report_their_path() {
        let err = ScenarioConfig::parse("[manifold]\nkind = \"sphere\"\ndim = 2\nradius = 3\n").unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "manifold.radius");
                assert!(message.contains("radius"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let err = ScenarioConfig::parse("alphas = [2.0, 0.5]").unwrap_err();
        assert!(matches!(err, Error::Config { path, .. } if path == "alphas[1]"));
        let err = ScenarioConfig::parse("experiment = \"dance\"").unwrap_err();
        assert!(matches!(err, Error::Config { path, .. } if path == "experiment"));
    }

    #[test]
    fn defaults_and_ranges() {
        let c = ScenarioConfig::parse(
            "experiment = \"index\"\nalpha_range = { start = 1.1, stop = 3.0, step = 0.1 }\n",
        )
        .unwrap();
        assert_eq!(c.experiment, Some(Experiment::Index));
        assert_eq!(c.alpha_values().len(), 20);
        assert_eq!(c.phase_diagram.dims.len(), 9);
        assert_eq!(ScenarioConfig::default().alpha_values(), vec![2.0]);
    }
}
