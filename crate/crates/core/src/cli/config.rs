//! Strict JSON scenario configuration.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bounds::Horizon;
use crate::error::{Error, Result};
use crate::model::{
    acc_model, scenario_barrier, Barrier, ControlBox, LinearModel, QuadraticBarrier, SdeModel,
    StateVector,
};
use crate::sim::{classify_state, PointClass};
use crate::synthesis::{
    ProblemSpec, ProblemVariant, DEFAULT_LEXICOGRAPHIC_THRESHOLD, DEFAULT_STRICT_MARGIN,
};

pub const DEFAULT_MC_HORIZON: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccParams {
    #[serde(default = "AccParams::default_f0")]
    pub f0: f64,
    #[serde(default = "AccParams::default_f1")]
    pub f1: f64,
    #[serde(default = "AccParams::default_f2")]
    pub f2: f64,
    #[serde(default = "AccParams::default_mass")]
    pub mass: f64,
    #[serde(default = "AccParams::default_lead_velocity")]
    pub lead_velocity: f64,
    #[serde(default = "AccParams::default_u_lo")]
    pub u_lo: f64,
    #[serde(default = "AccParams::default_u_hi")]
    pub u_hi: f64,
}

impl AccParams {
    fn default_f0() -> f64 {
        0.1
    }
    fn default_f1() -> f64 {
        5.0
    }
    fn default_f2() -> f64 {
        0.25
    }
    fn default_mass() -> f64 {
        1650.0
    }
    fn default_lead_velocity() -> f64 {
        0.5
    }
    fn default_u_lo() -> f64 {
        -1.0
    }
    fn default_u_hi() -> f64 {
        1.0
    }
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            f0: Self::default_f0(),
            f1: Self::default_f1(),
            f2: Self::default_f2(),
            mass: Self::default_mass(),
            lead_velocity: Self::default_lead_velocity(),
            u_lo: Self::default_u_lo(),
            u_hi: Self::default_u_hi(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deterministic1dParams {
    pub rate: f64,
}

/// `dx = (a x + c + b u) dt + sigma dW` with `u` in `[u_lo, u_hi]`; matrices
/// are row-major lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams {
    pub a: Vec<Vec<f64>>,
    pub c: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<f64>>,
    pub u_lo: Vec<f64>,
    pub u_hi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ModelConfig {
    Acc(AccParams),
    #[serde(rename = "deterministic_1d")]
    Deterministic1d(Deterministic1dParams),
    Linear(LinearParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierConfig {
    Scenario(u8),
    Quadratic {
        q: Vec<Vec<f64>>,
        linear: Vec<f64>,
        constant: f64,
    },
}

/// A positive number, or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HorizonRepr", into = "HorizonRepr")]
pub struct HorizonSetting(pub Horizon);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum HorizonRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<HorizonRepr> for HorizonSetting {
    type Error = String;

    fn try_from(r: HorizonRepr) -> std::result::Result<Self, String> {
        match r {
            HorizonRepr::Number(t) => Ok(HorizonSetting(Horizon::Finite(t))),
            HorizonRepr::Text(s) => s.parse(),
        }
    }
}

impl From<HorizonSetting> for HorizonRepr {
    fn from(h: HorizonSetting) -> Self {
        match h.0 {
            Horizon::Finite(t) => HorizonRepr::Number(t),
            Horizon::Infinite => HorizonRepr::Text("inf".into()),
        }
    }
}

impl FromStr for HorizonSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(HorizonSetting(Horizon::Infinite));
        }
        s.parse::<f64>()
            .map(|t| HorizonSetting(Horizon::Finite(t)))
            .map_err(|_| format!("expected a number or \"inf\", got {s:?}"))
    }
}

impl fmt::Display for HorizonSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

fn default_mc_horizon() -> f64 {
    DEFAULT_MC_HORIZON
}

fn default_strict_margin() -> f64 {
    DEFAULT_STRICT_MARGIN
}

fn default_z() -> f64 {
    crate::mc::DEFAULT_Z
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub model: ModelConfig,
    pub barrier: BarrierConfig,
    pub variant: ProblemVariant,
    pub x0: Vec<f64>,
    pub horizon: HorizonSetting,
    /// Simulated horizon when `horizon` is infinite.
    #[serde(default = "default_mc_horizon")]
    pub mc_horizon: f64,
    pub dt: f64,
    pub w: f64,
    pub delta: f64,
    #[serde(default = "default_strict_margin")]
    pub strict_margin_eps: f64,
    pub n_paths: u64,
    pub master_seed: u64,
    #[serde(default = "default_z")]
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicographic_threshold: Option<f64>,
}

/// Command-line replacements for config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_paths: Option<u64>,
    pub master_seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<HorizonSetting>,
    pub w: Option<f64>,
    pub delta: Option<f64>,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::config(field, "rows have different lengths"));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(
            field,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

fn rehome(field: &str, e: Error) -> Error {
    match e {
        e @ Error::Config { .. } => e,
        other => Error::config(field, other.to_string()),
    }
}

impl ScenarioConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.n_paths {
            self.n_paths = v;
        }
        if let Some(v) = o.master_seed {
            self.master_seed = v;
        }
        if let Some(v) = o.dt {
            self.dt = v;
        }
        if let Some(v) = o.horizon {
            self.horizon = v;
        }
        if let Some(v) = o.w {
            self.w = v;
        }
        if let Some(v) = o.delta {
            self.delta = v;
        }
    }

    pub fn build_model(&self) -> Result<Box<dyn SdeModel>> {
        let model: Box<dyn SdeModel> = match &self.model {
            ModelConfig::Acc(p) => Box::new(
                acc_model(p.f0, p.f1, p.f2, p.mass, p.lead_velocity, p.u_lo, p.u_hi)
                    .map_err(|e| rehome("model.params", e))?,
            ),
            ModelConfig::Deterministic1d(p) => Box::new(
                LinearModel::deterministic_1d(p.rate)
                    .map_err(|e| rehome("model.params.rate", e))?,
            ),
            ModelConfig::Linear(p) => {
                let control_box = ControlBox::new(p.u_lo.clone(), p.u_hi.clone())
                    .map_err(|e| rehome("model.params.u_lo", e))?;
                let built = LinearModel::new(
                    matrix("model.params.a", &p.a)?,
                    DVector::from_vec(p.c.clone()),
                    matrix("model.params.b", &p.b)?,
                    matrix("model.params.sigma", &p.sigma)?,
                    control_box,
                );
                Box::new(built.map_err(|e| rehome("model.params", e))?)
            }
        };
        Ok(model)
    }

    pub fn build_barrier(&self) -> Result<Arc<dyn Barrier>> {
        let barrier = match &self.barrier {
            BarrierConfig::Scenario(id) => {
                scenario_barrier(*id).map_err(|e| rehome("barrier.scenario", e))?
            }
            BarrierConfig::Quadratic {
                q,
                linear,
                constant,
            } => QuadraticBarrier::new(
                matrix("barrier.quadratic.q", q)?,
                DVector::from_vec(linear.clone()),
                *constant,
            )
            .map_err(|e| rehome("barrier.quadratic", e))?,
        };
        Ok(Arc::new(barrier))
    }

    pub fn build_spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec::new(self.variant, self.build_barrier()?, self.w, self.delta)
            .and_then(|s| s.with_strict_margin(self.strict_margin_eps))
            .and_then(|s| {
                s.with_lexicographic_threshold(
                    self.lexicographic_threshold
                        .unwrap_or(DEFAULT_LEXICOGRAPHIC_THRESHOLD),
                )
            });
        spec.map_err(|e| rehome("w", e))
    }

    pub fn x0_vector(&self) -> StateVector {
        StateVector::from_row_slice(&self.x0)
    }

    /// Horizon actually simulated.
    pub fn simulated_horizon(&self) -> f64 {
        match self.horizon.0 {
            Horizon::Finite(t) => t,
            Horizon::Infinite => self.mc_horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("dt", self.dt)?;
        if let Horizon::Finite(t) = self.horizon.0 {
            positive("horizon", t)?;
        }
        positive("mc_horizon", self.mc_horizon)?;
        finite("w", self.w)?;
        if self.w < 0.0 {
            return Err(Error::config("w", format!("must be >= 0, got {}", self.w)));
        }
        positive("delta", self.delta)?;
        positive("strict_margin_eps", self.strict_margin_eps)?;
        positive("z", self.z)?;
        if let Some(t) = self.lexicographic_threshold {
            positive("lexicographic_threshold", t)?;
        }
        for (i, v) in self.x0.iter().enumerate() {
            finite(&format!("x0[{i}]"), *v)?;
        }

        let model = self.build_model()?;
        let spec = self.build_spec()?;
        if self.x0.len() != model.state_dim() {
            return Err(Error::config(
                "x0",
                format!(
                    "has {} entries but the model state has {}",
                    self.x0.len(),
                    model.state_dim()
                ),
            ));
        }
        if spec.barrier.dim() != model.state_dim() {
            return Err(Error::config(
                "barrier",
                format!(
                    "has dimension {} but the model state has {}",
                    spec.barrier.dim(),
                    model.state_dim()
                ),
            ));
        }
        let x0 = self.x0_vector();
        crate::model::check_model_at(model.as_ref(), &x0).map_err(|e| rehome("model", e))?;
        match classify_state(self.variant, spec.barrier.as_ref(), &x0) {
            PointClass::Interior => Ok(()),
            class => Err(Error::config(
                "x0",
                format!(
                    "is not interior ({class:?}, barrier value {})",
                    spec.barrier.value(&x0)
                ),
            )),
        }
    }
}

/// Parses and validates a config from JSON text.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let cfg = parse_unvalidated(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn parse_unvalidated(text: &str) -> Result<ScenarioConfig> {
    let mut de = serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path.is_empty() || path == "." {
            "<root>".to_string()
        } else {
            path
        };
        Error::config(field, e.into_inner().to_string())
    })?;
    de.end()
        .map_err(|e| Error::config("<root>", e.to_string()))?;
    Ok(cfg)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&read_text(path)?)
}

/// Loads, applies overrides, then validates.
pub fn load_scenario_with(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = parse_unvalidated(&read_text(path)?)?;
    cfg.apply(overrides);
    cfg.validate()?;
    Ok(cfg)
}
