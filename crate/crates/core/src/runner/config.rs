//! Run configuration: strict JSON schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fields::ExternalField;
use crate::params::PlasmaParams;
use crate::sphere::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Spin precession in a uniform field.
    Precession,
    /// Cold electrostatic Langmuir oscillation.
    PlasmaOsc,
    /// Field-free transport of a phase-space perturbation.
    FreeStream,
    /// Opposite spin beams in a field gradient.
    SternGerlach,
    /// Free spreading of a Gaussian packet.
    Spreading,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Precession,
        Scenario::PlasmaOsc,
        Scenario::FreeStream,
        Scenario::SternGerlach,
        Scenario::Spreading,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Precession => "precession",
            Scenario::PlasmaOsc => "plasma_osc",
            Scenario::FreeStream => "free_stream",
            Scenario::SternGerlach => "stern_gerlach",
            Scenario::Spreading => "spreading",
        }
    }

    /// Supported backends; the first is the default.
    pub fn backends(self) -> &'static [Backend] {
        match self {
            Scenario::Precession => &[Backend::Pic, Backend::Eulerian],
            Scenario::PlasmaOsc => &[Backend::Pic, Backend::Fluid],
            Scenario::FreeStream => &[Backend::Eulerian],
            Scenario::SternGerlach => &[Backend::Pic],
            Scenario::Spreading => &[Backend::Oracle, Backend::Fluid],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Pic,
    Eulerian,
    Fluid,
    Oracle,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Pic => "pic",
            Backend::Eulerian => "eulerian",
            Backend::Fluid => "fluid",
            Backend::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub n_x: usize,
    pub length: f64,
    pub n_v: usize,
    pub v_max: f64,
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_x: 64,
            length: 2.0 * std::f64::consts::PI,
            n_v: 32,
            v_max: 6.0,
            n_theta: 4,
            n_phi: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<Backend>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub params: PlasmaParams,
    /// Mean electron density `n0`.
    #[serde(default = "defaults::density")]
    pub density: f64,
    /// Relative density perturbation `ε`.
    #[serde(default = "defaults::perturbation")]
    pub perturbation: f64,
    /// Perturbation mode number.
    #[serde(default = "defaults::mode")]
    pub mode: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_thermal: Option<f64>,
    /// Packet width for the spreading scenario.
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    #[serde(rename = "B0", default = "defaults::b0")]
    pub b0: f64,
    #[serde(rename = "B1", default = "defaults::b1")]
    pub b1: f64,
    /// Overrides the field built from `B0` and `B1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalField>,
    #[serde(default = "defaults::spin_dir")]
    pub spin_dir: Vec3,
    #[serde(default = "defaults::n_particles")]
    pub n_particles: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "defaults::yes")]
    pub quiet: bool,
    #[serde(default = "defaults::dt")]
    pub dt: f64,
    #[serde(default = "defaults::t_end")]
    pub t_end: f64,
    /// Steps between snapshots; defaults to one snapshot at the end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cadence: Option<usize>,
    /// Quantum term of the selected backend; on by default only for spreading.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantum_term: Option<bool>,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    pub fn density() -> f64 {
        1.0
    }
    pub fn perturbation() -> f64 {
        1e-3
    }
    pub fn mode() -> usize {
        1
    }
    pub fn sigma() -> f64 {
        1.0
    }
    pub fn b0() -> f64 {
        1.0
    }
    pub fn b1() -> f64 {
        0.0
    }
    pub fn spin_dir() -> [f64; 3] {
        [1.0, 0.0, 0.0]
    }
    pub fn n_particles() -> usize {
        10_000
    }
    pub fn yes() -> bool {
        true
    }
    pub fn dt() -> f64 {
        0.01
    }
    pub fn t_end() -> f64 {
        10.0
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("runs")
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Number,
    Integer,
    Bool,
    Text,
    Object,
    Vec3,
    Choice(&'static [&'static str]),
}

impl Kind {
    fn describe(self) -> String {
        match self {
            Kind::Number => "number".into(),
            Kind::Integer => "non-negative integer".into(),
            Kind::Bool => "boolean".into(),
            Kind::Text => "string".into(),
            Kind::Object => "object".into(),
            Kind::Vec3 => "array of 3 numbers".into(),
            Kind::Choice(opts) => format!("one of {}", opts.join(", ")),
        }
    }

    fn accepts(self, v: &Value) -> bool {
        match self {
            Kind::Number => v.is_number(),
            Kind::Integer => v.is_u64(),
            Kind::Bool => v.is_boolean(),
            Kind::Text => v.is_string(),
            Kind::Object => v.is_object(),
            Kind::Vec3 => v
                .as_array()
                .is_some_and(|a| a.len() == 3 && a.iter().all(Value::is_number)),
            Kind::Choice(opts) => v.as_str().is_some_and(|s| opts.contains(&s)),
        }
    }
}

const SCENARIOS: &[&str] = &[
    "precession",
    "plasma_osc",
    "free_stream",
    "stern_gerlach",
    "spreading",
];
const BACKENDS: &[&str] = &["pic", "eulerian", "fluid", "oracle"];

const TOP: &[(&str, Kind)] = &[
    ("scenario", Kind::Choice(SCENARIOS)),
    ("backend", Kind::Choice(BACKENDS)),
    ("grid", Kind::Object),
    ("params", Kind::Object),
    ("density", Kind::Number),
    ("perturbation", Kind::Number),
    ("mode", Kind::Integer),
    ("v_thermal", Kind::Number),
    ("sigma", Kind::Number),
    ("B0", Kind::Number),
    ("B1", Kind::Number),
    ("external", Kind::Object),
    ("spin_dir", Kind::Vec3),
    ("n_particles", Kind::Integer),
    ("seed", Kind::Integer),
    ("quiet", Kind::Bool),
    ("dt", Kind::Number),
    ("t_end", Kind::Number),
    ("cadence", Kind::Integer),
    ("quantum_term", Kind::Bool),
    ("out_dir", Kind::Text),
];

const GRID: &[(&str, Kind)] = &[
    ("n_x", Kind::Integer),
    ("length", Kind::Number),
    ("n_v", Kind::Integer),
    ("v_max", Kind::Number),
    ("n_theta", Kind::Integer),
    ("n_phi", Kind::Integer),
];

const PARAMS: &[(&str, Kind)] = &[
    ("mass", Kind::Number),
    ("charge", Kind::Number),
    ("hbar", Kind::Number),
    ("eps0", Kind::Number),
    ("c", Kind::Number),
];

fn check_object(
    prefix: &str,
    obj: &serde_json::Map<String, Value>,
    schema: &[(&str, Kind)],
    errors: &mut Vec<String>,
) {
    for (key, v) in obj {
        let path = format!("{prefix}{key}");
        match schema.iter().find(|(k, _)| k == key) {
            None => {
                let known: Vec<&str> = schema.iter().map(|(k, _)| *k).collect();
                errors.push(format!(
                    "{path}: unknown key (expected one of {})",
                    known.join(", ")
                ));
            }
            Some((_, kind)) if !kind.accepts(v) => {
                errors.push(format!("{path}: expected {}, got {v}", kind.describe()));
            }
            _ => {}
        }
    }
}

/// Lists every unknown or mistyped key of a raw config document.
fn schema_errors(doc: &Value) -> Vec<String> {
    let mut errors = Vec::new();
    let Some(obj) = doc.as_object() else {
        return vec!["config: expected a JSON object".into()];
    };
    if !obj.contains_key("scenario") {
        errors.push(format!(
            "scenario: required, expected {}",
            Kind::Choice(SCENARIOS).describe()
        ));
    }
    check_object("", obj, TOP, &mut errors);
    for (key, schema) in [("grid", GRID), ("params", PARAMS)] {
        if let Some(Value::Object(inner)) = obj.get(key) {
            check_object(&format!("{key}."), inner, schema, &mut errors);
        }
    }
    if let Some(ext @ Value::Object(_)) = obj.get("external") {
        if let Err(e) = serde_json::from_value::<ExternalField>(ext.clone()) {
            errors.push(format!("external: {e}"));
        }
    }
    errors
}

impl RunConfig {
    /// Parses and validates a config document, filling every default.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("config: invalid JSON: {e}")]))?;
        let errors = schema_errors(&doc);
        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        let cfg: RunConfig =
            serde_json::from_value(doc).map_err(|e| Error::Config(vec![e.to_string()]))?;
        let cfg = cfg.expanded();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Minimal config for a scenario with every default filled.
    pub fn preset(scenario: Scenario) -> Self {
        let doc = serde_json::json!({ "scenario": scenario.name() });
        let cfg: RunConfig = serde_json::from_value(doc).expect("preset is valid");
        cfg.expanded()
    }

    /// Resolves scenario-dependent defaults.
    pub fn expanded(mut self) -> Self {
        if self.backend.is_none() {
            self.backend = Some(self.scenario.backends()[0]);
        }
        if self.v_thermal.is_none() {
            self.v_thermal = Some(match self.scenario {
                Scenario::FreeStream => 1.0,
                _ => 0.0,
            });
        }
        if self.external.is_none() {
            self.external = match self.scenario {
                Scenario::Precession => Some(ExternalField::UniformB {
                    b: [0.0, 0.0, self.b0],
                }),
                Scenario::SternGerlach => Some(ExternalField::GradientB {
                    b0: self.b0,
                    b1: self.b1,
                }),
                _ => None,
            };
        }
        if self.quantum_term.is_none() {
            self.quantum_term = Some(self.scenario == Scenario::Spreading);
        }
        if self.cadence.is_none() {
            self.cadence = Some(self.steps().max(1));
        }
        self
    }

    pub fn backend(&self) -> Backend {
        self.backend.unwrap_or(self.scenario.backends()[0])
    }

    pub fn v_thermal(&self) -> f64 {
        self.v_thermal.unwrap_or(0.0)
    }

    pub fn quantum_term(&self) -> bool {
        self.quantum_term
            .unwrap_or(self.scenario == Scenario::Spreading)
    }

    pub fn cadence(&self) -> usize {
        self.cadence.unwrap_or_else(|| self.steps().max(1))
    }

    /// Number of steps `t_end / dt`, rounded.
    pub fn steps(&self) -> usize {
        if self.dt > 0.0 && self.t_end > 0.0 && (self.t_end / self.dt).is_finite() {
            (self.t_end / self.dt).round() as usize
        } else {
            0
        }
    }

    /// Range and consistency checks; every violation is reported.
    pub fn validate(&self) -> Result<()> {
        let mut e = Vec::new();
        let g = &self.grid;
        let positive_counts = [
            ("grid.n_x", g.n_x),
            ("grid.n_v", g.n_v),
            ("grid.n_theta", g.n_theta),
            ("grid.n_phi", g.n_phi),
            ("mode", self.mode),
            ("n_particles", self.n_particles),
        ];
        for (name, v) in positive_counts {
            if v == 0 {
                e.push(format!("{name}: expected integer > 0, got 0"));
            }
        }
        let positive = [
            ("grid.length", g.length),
            ("grid.v_max", g.v_max),
            ("params.mass", self.params.mass),
            ("params.charge", self.params.charge),
            ("params.hbar", self.params.hbar),
            ("params.eps0", self.params.eps0),
            ("params.c", self.params.c),
            ("density", self.density),
            ("sigma", self.sigma),
            ("dt", self.dt),
            ("t_end", self.t_end),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                e.push(format!("{name}: expected finite number > 0, got {v}"));
            }
        }
        if !(self.perturbation.is_finite() && self.perturbation.abs() < 1.0) {
            e.push(format!(
                "perturbation: expected |value| < 1, got {}",
                self.perturbation
            ));
        }
        if let Some(v) = self.v_thermal {
            if !(v.is_finite() && v >= 0.0) {
                e.push(format!("v_thermal: expected finite number >= 0, got {v}"));
            }
        }
        for (name, v) in [("B0", self.b0), ("B1", self.b1)] {
            if !v.is_finite() {
                e.push(format!("{name}: expected finite number, got {v}"));
            }
        }
        if !self.spin_dir.iter().all(|c| c.is_finite()) || crate::sphere::norm(self.spin_dir) == 0.0
        {
            e.push(format!(
                "spin_dir: expected a finite non-zero vector, got {:?}",
                self.spin_dir
            ));
        }
        if self.dt > 0.0 && self.t_end > 0.0 {
            if self.dt >= self.t_end {
                e.push(format!(
                    "dt: expected dt < t_end, got dt = {} and t_end = {}",
                    self.dt, self.t_end
                ));
            } else {
                let ratio = self.t_end / self.dt;
                if (ratio - ratio.round()).abs() > 1e-9 * ratio {
                    e.push(format!(
                        "t_end: expected an integer multiple of dt, got t_end/dt = {ratio}"
                    ));
                }
            }
        }
        match self.cadence {
            Some(0) => e.push("cadence: expected integer > 0, got 0".into()),
            Some(c) if self.steps() > 0 && !self.steps().is_multiple_of(c) => e.push(format!(
                "cadence: expected a divisor of the step count {}, got {c}",
                self.steps()
            )),
            _ => {}
        }
        if let Some(b) = self.backend {
            if !self.scenario.backends().contains(&b) {
                let names: Vec<&str> = self.scenario.backends().iter().map(|b| b.name()).collect();
                e.push(format!(
                    "backend: scenario {} supports {}, got {}",
                    self.scenario.name(),
                    names.join(", "),
                    b.name()
                ));
            }
        }
        if self.backend() == Backend::Eulerian && self.v_thermal() <= 0.0 {
            e.push("v_thermal: expected > 0 for the eulerian backend".into());
        }
        if e.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(e))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text)
}

pub fn write_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    super::io::write_atomic(path.as_ref(), cfg.to_json().as_bytes())
}
