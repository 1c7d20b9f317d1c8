//! Scenario configuration: JSON files deep-merged over committed defaults.

use std::path::{Path, PathBuf};

use fraclab_core::kernel::preset_kernel;
use fraclab_core::{
    EllipticityParams, Exterior, KernelSpec, LabError, Modulation, OperatorSpec, Result,
    SolverConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const DEFAULTS: &str = include_str!("../scenarios/defaults.json");

/// Built-in scenarios by name.
pub const SCENARIOS: [(&str, &str); 5] = [
    ("zero", include_str!("../scenarios/zero.json")),
    ("holder-data", include_str!("../scenarios/holder-data.json")),
    ("jump-data", include_str!("../scenarios/jump-data.json")),
    ("bounded-data", include_str!("../scenarios/bounded-data.json")),
    ("evans-krylov", include_str!("../scenarios/evans-krylov.json")),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberPreset {
    pub kernel: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub drift: f64,
}

/// Operators addressable by preset name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OperatorPreset {
    Linear {
        kernel: String,
        #[serde(default)]
        value: Option<f64>,
        #[serde(default)]
        drift: f64,
    },
    ExtremalPlus,
    ExtremalMinus,
    /// Pointwise minimum of linear members.
    Min {
        kernels: Vec<MemberPreset>,
        #[serde(default)]
        modulation: Option<Modulation>,
    },
    Spec {
        spec: OperatorSpec,
    },
}

impl OperatorPreset {
    pub fn build(&self, params: &EllipticityParams) -> Result<OperatorSpec> {
        let member = |name: &str, value: Option<f64>, drift: f64| -> Result<KernelSpec> {
            KernelSpec::new(preset_kernel(name, params, value)?, drift, *params)
        };
        let spec = match self {
            OperatorPreset::Linear {
                kernel,
                value,
                drift,
            } => OperatorSpec::Linear {
                kernel: member(kernel, *value, *drift)?,
            },
            OperatorPreset::ExtremalPlus => OperatorSpec::ExtremalPlus { params: *params },
            OperatorPreset::ExtremalMinus => OperatorSpec::ExtremalMinus { params: *params },
            OperatorPreset::Min {
                kernels,
                modulation,
            } => OperatorSpec::InfSup {
                rows: kernels
                    .iter()
                    .map(|m| member(&m.kernel, m.value, m.drift).map(|k| vec![k]))
                    .collect::<Result<_>>()?,
                modulation: *modulation,
            },
            OperatorPreset::Spec { spec } => spec.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    U,
    Ut,
    /// `(−Δ)^{σ/2}u`
    Fraclap,
}

fn default_dx() -> f64 {
    0.02
}

fn default_n_times() -> usize {
    128
}

fn default_refine() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MetricRequest {
    /// Parabolic Hölder seminorm on the cylinder `cyl = [x, t, r]`. The
    /// `fraclap` quantity is sampled on a lattice of spacing `dx` and at
    /// `n_times` equispaced times, so grids of different resolution see the
    /// same points.
    Holder {
        label: String,
        of: Quantity,
        alpha: f64,
        cyl: [f64; 3],
        #[serde(default = "default_dx")]
        dx: f64,
        #[serde(default = "default_n_times")]
        n_times: usize,
    },
    /// Fitted time exponent at `x`; `parabolic` reports `σ·slope`.
    TimeExponent {
        label: String,
        of: Quantity,
        x: f64,
        cyl: [f64; 3],
        #[serde(default)]
        parabolic: bool,
    },
    /// Ratio of `sup_{τ ≥ floor} |δ_τu_t|/τ^exponent` between the floors
    /// `Δt` and `refine·Δt`.
    QuotientGrowth {
        label: String,
        x: f64,
        cyl: [f64; 3],
        exponent: f64,
        #[serde(default = "default_refine")]
        refine: usize,
    },
    L1Sigma {
        label: String,
    },
    Tail {
        label: String,
        r: f64,
        gamma: f64,
    },
    Audit {
        label: String,
        beta: f64,
        eps_h: f64,
        mu: f64,
        base: [f64; 2],
    },
    /// Largest mid-step defect relative to its tolerance.
    Residual {
        label: String,
    },
}

impl MetricRequest {
    pub fn label(&self) -> &str {
        match self {
            MetricRequest::Holder { label, .. }
            | MetricRequest::TimeExponent { label, .. }
            | MetricRequest::QuotientGrowth { label, .. }
            | MetricRequest::L1Sigma { label }
            | MetricRequest::Tail { label, .. }
            | MetricRequest::Audit { label, .. }
            | MetricRequest::Residual { label } => label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    pub metric: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl Threshold {
    pub fn accepts(&self, v: f64) -> bool {
        !v.is_nan() && self.min.into_iter().all(|m| v >= m) && self.max.into_iter().all(|m| v <= m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub params: EllipticityParams,
    pub solver: SolverConfig,
    pub window: Window,
    pub operator: OperatorPreset,
    pub exterior: Exterior,
    pub rhs: Exterior,
    pub metrics: Vec<MetricRequest>,
    pub thresholds: Vec<Threshold>,
    pub output: PathBuf,
    pub seed: u64,
    pub budget_secs: f64,
}

/// Recursively overlays `patch` on `base`; objects merge key by key, every
/// other value is replaced.
pub fn deep_merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => deep_merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn config_err(e: impl std::fmt::Display) -> LabError {
    LabError::Config(e.to_string())
}

impl ScenarioConfig {
    /// Parses `text` over the defaults and validates the result.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut base: Value = serde_json::from_str(DEFAULTS).map_err(config_err)?;
        let patch: Value = serde_json::from_str(text).map_err(config_err)?;
        if !patch.is_object() {
            return Err(LabError::Config("config must be a JSON object".into()));
        }
        // tagged objects are replaced whole when the tag changes
        if let (Some(b), Some(p)) = (base.as_object_mut(), patch.as_object()) {
            for key in ["operator", "exterior", "rhs"] {
                let (Some(old), Some(new)) = (b.get(key), p.get(key)) else {
                    continue;
                };
                if old.get("kind") != new.get("kind") {
                    b.remove(key);
                }
            }
        }
        deep_merge(&mut base, patch);
        let cfg: ScenarioConfig = serde_json::from_value(base).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file, or a built-in scenario when `path` names one.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some((_, text)) = path
                .to_str()
                .and_then(|name| SCENARIOS.iter().find(|(n, _)| *n == name))
            {
                return Self::from_json(text);
            }
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        SCENARIOS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| LabError::Config(format!("unknown scenario '{name}'")))
            .and_then(|(_, text)| Self::from_json(text))
    }

    pub fn operator_spec(&self) -> Result<OperatorSpec> {
        self.operator.build(&self.params).map_err(config_err)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(config_err)?;
        self.solver.validate().map_err(config_err)?;
        self.operator_spec()?;
        if !(self.window.t_end > self.window.t_start) {
            return Err(LabError::Config("window must have t_end > t_start".into()));
        }
        if !(self.budget_secs > 0.0) {
            return Err(LabError::Config("budget_secs must be positive".into()));
        }
        let mut labels = std::collections::BTreeSet::new();
        for m in &self.metrics {
            if !labels.insert(m.label().to_string()) {
                return Err(LabError::Config(format!("duplicate metric label '{}'", m.label())));
            }
            let bad = match m {
                MetricRequest::Holder { alpha, cyl, dx, n_times, .. } => {
                    !(*alpha > 0.0 && *alpha <= 1.0) || cyl[2] <= 0.0 || *dx <= 0.0 || *n_times < 2
                }
                MetricRequest::TimeExponent { cyl, .. } => cyl[2] <= 0.0,
                MetricRequest::QuotientGrowth {
                    cyl,
                    exponent,
                    refine,
                    ..
                } => cyl[2] <= 0.0 || !(*exponent > 0.0 && *exponent < 1.0) || *refine < 2,
                MetricRequest::Tail { r, gamma, .. } => *r <= 0.0 || !(*gamma > 0.0 && *gamma < 1.0),
                MetricRequest::Audit { beta, eps_h, mu, .. } => [beta, eps_h, mu]
                    .iter()
                    .any(|v| !(**v > 0.0 && **v < 1.0)),
                MetricRequest::L1Sigma { .. } | MetricRequest::Residual { .. } => false,
            };
            if bad {
                return Err(LabError::Config(format!(
                    "metric '{}' has parameters out of range",
                    m.label()
                )));
            }
        }
        for t in &self.thresholds {
            if !labels.contains(&t.metric) {
                return Err(LabError::Config(format!(
                    "threshold refers to unknown metric '{}'",
                    t.metric
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_committed_values() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "x"}"#).unwrap();
        assert_eq!(cfg.params, EllipticityParams { sigma: 1.5, lambda: 1.0, lambda_hi: 2.0 });
        assert_eq!(cfg.solver.h, 0.01);
        assert_eq!(cfg.solver.r_max, 4.0);
        assert_eq!(cfg.solver.cfl, 0.5);
    }

    #[test]
    fn merge_is_deep() {
        let cfg = ScenarioConfig::from_json(r#"{"scenario": "x", "solver": {"h": 0.02}}"#).unwrap();
        assert_eq!(cfg.solver.h, 0.02);
        assert_eq!(cfg.solver.cfl, 0.5);
    }

    #[test]
    fn every_builtin_parses() {
        for (name, _) in SCENARIOS {
            let cfg = ScenarioConfig::builtin(name).unwrap();
            assert_eq!(cfg.scenario, name);
        }
    }

    #[test]
    fn config_errors() {
        for bad in [
            r#"{"scenario": "x", "operator": {"kind": "linear", "kernel": "nope"}}"#,
            r#"{"scenario": "x", "metrics": [{"kind": "tail", "label": "t", "r": 1.0, "gamma": 1.5}]}"#,
            r#"{"scenario": "x", "thresholds": [{"metric": "missing", "min": 0.0}]}"#,
            r#"{"scenario": "x", "params": {"lambda_hi": 0.5}}"#,
            r#"{"scenario": "x", "colour": "red"}"#,
            r#"[1, 2]"#,
        ] {
            assert!(matches!(ScenarioConfig::from_json(bad), Err(LabError::Config(_))), "{bad}");
        }
    }
}
