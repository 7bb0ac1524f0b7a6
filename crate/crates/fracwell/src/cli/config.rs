//! Scenario configuration (TOML).
//!
//! ```toml
//! name = "example"
//! seed = 7
//! result = "what this scenario demonstrates"
//!
//! [kernel]                      # power | double-phase | power-log
//! type = "power"
//! p = "2 + 0.2*cos(pi*(x-y))"   # number or expression in x, y
//! s = 0.4
//!
//! [source]                      # single-power | two-power | zero
//! type = "single-power"
//! q = 3.0
//!
//! [mesh]
//! nodes = 32                    # length = 1.0, basis = "nodal" | "sine", modes
//!
//! [integrator]                  # any IntegratorConfig field
//! t_end = 5.0
//!
//! [initial]                     # expression | scaled | fiber | energy-level | high-energy | file
//! type = "fiber"
//! direction = "sin(pi*x)"
//! factor = 0.6
//!
//! [analysis]                    # directions, embedding_samples, delta_grid, ...
//!
//! [sweep]
//! parameter = "initial.factor"
//! values = [0.4, 0.6]
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh_space::{Discretization, Mesh1D};
use crate::nfunction::{KernelFamily, KernelVariant, OrliczShape};
use crate::operator::{Basis, Problem};
use crate::source::{SourceFamily, SourceVariant};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Statement this scenario exercises, copied into JSON headers.
    #[serde(default)]
    pub result: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    pub kernel: KernelSpec,
    pub source: SourceSpec,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_seed() -> u64 {
    1
}

/// A number or an expression in `x` and `y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldSpec {
    Number(f64),
    Expr(String),
}

impl FieldSpec {
    pub fn to_field(&self) -> Result<Field<f64>> {
        match self {
            FieldSpec::Number(v) => Ok(Field::constant(*v)),
            FieldSpec::Expr(s) => Field::parse(s),
        }
    }
}

fn one() -> FieldSpec {
    FieldSpec::Number(1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    Power { p: FieldSpec, s: f64 },
    DoublePhase { p: f64, q: f64, a: FieldSpec, s: f64 },
    PowerLog { p: f64, s: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    SinglePower {
        q: f64,
        #[serde(default = "one")]
        coeff: FieldSpec,
    },
    TwoPower { a: FieldSpec, b: FieldSpec, q1: FieldSpec, q2: FieldSpec },
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Nodal,
    Sine,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default = "default_length")]
    pub length: f64,
    pub nodes: usize,
    #[serde(default = "default_basis")]
    pub basis: BasisKind,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub exterior_radius: Option<f64>,
    #[serde(default)]
    pub near_diag_levels: Option<usize>,
}

fn default_length() -> f64 {
    1.0
}

fn default_basis() -> BasisKind {
    BasisKind::Nodal
}

/// Integrator settings with every field optional.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntegratorSpec(pub IntegratorOverrides);

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorOverrides {
    pub scheme: Option<crate::dynamics::Scheme>,
    pub dt0: Option<f64>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub t_end: Option<f64>,
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub blowup_factor: Option<f64>,
    pub vanish_factor: Option<f64>,
    pub output_stride: Option<usize>,
    pub adaptive: Option<bool>,
    pub max_rel_change: Option<f64>,
    pub rtol: Option<f64>,
    pub atol: Option<f64>,
    pub sample_every: Option<f64>,
    pub max_steps: Option<usize>,
}

impl IntegratorSpec {
    pub fn resolve(&self) -> IntegratorConfig {
        let o = &self.0;
        let mut c = IntegratorConfig::default();
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { c.$f = v; } )* };
        }
        set!(scheme, dt0, dt_min, dt_max, t_end, newton_tol, newton_max_iter, blowup_factor, vanish_factor,
             output_stride, adaptive, max_rel_change, rtol, atol, max_steps);
        if o.sample_every.is_some() {
            c.sample_every = o.sample_every;
        }
        c
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `scale · expr(x)`.
    Expression {
        expr: String,
        #[serde(default = "unit")]
        scale: f64,
    },
    /// `lambda · direction(x)`.
    Scaled { direction: String, lambda: f64 },
    /// `factor · λ*(v) · v`, with `λ*` the Nehari scaling of `v`.
    Fiber { direction: String, factor: f64 },
    /// `λ v` with `λ < λ*(v)` and `E(λ v) = ratio · d̂`; gives `I > 0`.
    EnergyLevel { direction: String, ratio: f64 },
    /// Two-bump construction with prescribed energy `target` or `target_over_depth · d̂`.
    HighEnergy {
        #[serde(default)]
        target: Option<f64>,
        #[serde(default)]
        target_over_depth: Option<f64>,
        omega1: [f64; 2],
        omega2: [f64; 2],
    },
    /// Grid CSV with columns `node,x,value`.
    File { path: PathBuf },
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSpec {
    /// Directions for the sampled depth and Nehari extrema.
    pub directions: usize,
    pub embedding_samples: usize,
    pub delta_grid: Option<Vec<f64>>,
    pub critical_band: f64,
    pub tol_i_rel: f64,
    pub divergence_threshold: f64,
    pub concavity_tol: f64,
    /// Also run the `λ_k u₀` sequence for critical-energy data.
    pub critical_sequence: bool,
    /// Sampling range for the growth constants `A, B`.
    pub t_range: [f64; 2],
    /// δ used for the derived bound constants.
    pub bound_delta: f64,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            directions: 32,
            embedding_samples: 64,
            delta_grid: None,
            critical_band: 1e-2,
            tol_i_rel: 1e-8,
            divergence_threshold: 1e6,
            concavity_tol: 1e-8,
            critical_sequence: false,
            t_range: [1e-6, 1e6],
            bound_delta: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path into the config, e.g. `initial.factor`.
    pub parameter: String,
    pub values: Vec<toml::Value>,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let v: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(v)
    }

    pub fn from_value(v: toml::Value) -> Result<Self> {
        let cfg: Self = v.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Schema checks that need no numerical work.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        let s = match &self.kernel {
            KernelSpec::Power { s, .. } | KernelSpec::DoublePhase { s, .. } | KernelSpec::PowerLog { s, .. } => *s,
        };
        if !(s > 0.0 && s < 1.0) {
            return bad(format!("kernel.s must lie in (0,1), got {s}"));
        }
        if !pos(self.mesh.length) {
            return bad("mesh.length must be positive".into());
        }
        if self.mesh.nodes < 4 {
            return bad("mesh.nodes must be at least 4".into());
        }
        if self.mesh.basis == BasisKind::Sine && self.mesh.modes.is_none() {
            return bad("mesh.modes is required for the sine basis".into());
        }
        let a = &self.analysis;
        if a.directions == 0 || a.embedding_samples < 32 {
            return bad("analysis.directions must be >= 1 and analysis.embedding_samples >= 32".into());
        }
        if !(pos(a.t_range[0]) && a.t_range[0] < a.t_range[1]) {
            return bad("analysis.t_range must be an increasing positive pair".into());
        }
        if !pos(a.bound_delta) || !pos(a.divergence_threshold) {
            return bad("analysis.bound_delta and analysis.divergence_threshold must be positive".into());
        }
        match &self.initial {
            Some(InitialSpec::Fiber { factor, .. }) if !pos(*factor) => {
                return bad("initial.factor must be positive".into());
            }
            Some(InitialSpec::EnergyLevel { ratio, .. }) if !(*ratio > 0.0 && *ratio <= 1.0) => {
                return bad("initial.ratio must lie in (0, 1]".into());
            }
            Some(InitialSpec::HighEnergy { target, target_over_depth, .. }) if target.is_some() == target_over_depth.is_some() => {
                return bad("initial needs exactly one of target, target_over_depth".into());
            }
            _ => {}
        }
        self.integrator.resolve().validate()?;
        // parse every expression up front
        self.kernel_family()?;
        self.source_family()?;
        self.initial_expressions()?;
        Ok(())
    }

    fn initial_expressions(&self) -> Result<()> {
        match &self.initial {
            Some(InitialSpec::Expression { expr: e, .. })
            | Some(InitialSpec::Scaled { direction: e, .. })
            | Some(InitialSpec::Fiber { direction: e, .. })
            | Some(InitialSpec::EnergyLevel { direction: e, .. }) => {
                let parsed = crate::expr::Expr::parse(e)?;
                if parsed.uses_y() {
                    return Err(Error::Config(format!("initial data '{e}' must not depend on y")));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn kernel_family(&self) -> Result<KernelFamily<f64>> {
        let l = self.mesh.length;
        let (variant, s) = match &self.kernel {
            KernelSpec::Power { p, s } => (KernelVariant::PowerVariableExponent { p: p.to_field()? }, *s),
            KernelSpec::DoublePhase { p, q, a, s } => (KernelVariant::DoublePhase { p: *p, q: *q, a: a.to_field()? }, *s),
            KernelSpec::PowerLog { p, s } => (KernelVariant::OrliczScalar(OrliczShape::PowerLog { p: *p }), *s),
        };
        KernelFamily::new(variant, s, l)
    }

    pub fn source_family(&self) -> Result<SourceFamily<f64>> {
        let l = self.mesh.length;
        let variant = match &self.source {
            SourceSpec::SinglePower { q, coeff } => SourceVariant::SinglePower { q: *q, coeff: coeff.to_field()? },
            SourceSpec::TwoPower { a, b, q1, q2 } => SourceVariant::TwoPower {
                a: a.to_field()?,
                b: b.to_field()?,
                q1: q1.to_field()?,
                q2: q2.to_field()?,
            },
            SourceSpec::Zero => SourceVariant::Zero,
        };
        SourceFamily::new(variant, l)
    }

    pub fn mesh(&self) -> Result<Mesh1D<f64>> {
        let m = &self.mesh;
        let base = Mesh1D::new(m.length, m.nodes)?;
        Mesh1D::with_options(
            m.length,
            m.nodes,
            m.exterior_radius.unwrap_or(base.exterior_radius),
            m.near_diag_levels.unwrap_or(base.near_diag_levels),
        )
    }

    pub fn problem(&self) -> Result<Problem<f64>> {
        let mesh = self.mesh()?;
        let family = self.kernel_family()?;
        let disc = Discretization::new(mesh, &family)?;
        let basis = match self.mesh.basis {
            BasisKind::Nodal => Basis::nodal_hat(&mesh),
            BasisKind::Sine => Basis::sine_spectral(&mesh, self.mesh.modes.unwrap_or(mesh.nodes))?,
        };
        Problem::new(disc, self.source_family()?, basis)
    }
}

/// Sets the value at a dotted path, creating tables as needed.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("sweep path '{path}' crosses a non-table value")))?;
        if i + 1 == parts.len() {
            table.insert(key.to_string(), value);
            return Ok(());
        }
        cur = table.entry(key.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
    }
    Err(Error::Config("empty sweep path".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [kernel]
        type = "power"
        p = 2.0
        s = 0.4
        [source]
        type = "single-power"
        q = 3.0
        [mesh]
        nodes = 16
    "#;

    #[test]
    fn minimal_config_parses() {
        let c = ScenarioConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.mesh.length, 1.0);
        assert!(c.problem().is_ok());
    }

    #[test]
    fn expression_exponent() {
        let text = BASE.replace("p = 2.0", "p = \"2 + 0.2*cos(pi*(x-y))\"");
        let c = ScenarioConfig::from_toml_str(&text).unwrap();
        let k = c.kernel_family().unwrap();
        assert!((k.g_plus() - 2.2).abs() < 1e-12);
    }

    #[test]
    fn schema_errors_are_config_errors() {
        for text in [
            BASE.replace("s = 0.4", "s = 1.4"),
            BASE.replace("nodes = 16", "nodes = 2"),
            BASE.replace("type = \"power\"", "type = \"cubic\""),
            BASE.replace("q = 3.0", "q = 3.0\nextra = 1"),
            BASE.replace("p = 2.0", "p = \"2 + (\""),
            format!("{BASE}\n[initial]\ntype = \"expression\"\nexpr = \"sin(pi*y)\""),
            "not toml [".to_string(),
        ] {
            match ScenarioConfig::from_toml_str(&text) {
                Err(Error::Config(_)) => {}
                other => panic!("expected config error for {text}: {other:?}"),
            }
        }
    }

    #[test]
    fn integrator_overrides_merge_with_defaults() {
        let text = format!("{BASE}\n[integrator]\nt_end = 2.5\n");
        let c = ScenarioConfig::from_toml_str(&text).unwrap();
        let r = c.integrator.resolve();
        assert_eq!(r.t_end, 2.5);
        assert_eq!(r.dt0, IntegratorConfig::default().dt0);
    }

    #[test]
    fn dotted_path_override() {
        let mut v: toml::Value = toml::from_str(BASE).unwrap();
        set_path(&mut v, "mesh.nodes", toml::Value::Integer(20)).unwrap();
        set_path(&mut v, "integrator.t_end", toml::Value::Float(0.5)).unwrap();
        let c = ScenarioConfig::from_value(v).unwrap();
        assert_eq!(c.mesh.nodes, 20);
        assert_eq!(c.integrator.resolve().t_end, 0.5);
    }
}
