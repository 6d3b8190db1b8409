//! Experiment configuration: JSON schema, defaults and validation.
//!
//! A config file looks like
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "kind": "sweep",
//!   "system": { "a": [[1.0, 2.0], [1.0, 0.5]], "b": [[1.0], [0.5]], "sigma_w": 1.0 },
//!   "cost": { "q": [[1.0, 0.0], [0.0, 1.0]], "r": [[1.0]] },
//!   "seed": 7,
//!   "params": { "num_models": 20, "horizons": [1, 2, 3] },
//!   "output": { "path": "sweep.csv", "format": "csv" }
//! }
//! ```
//!
//! Unknown fields are rejected at every level and every error names the
//! offending field path. `system` may instead be `{ "path": "plant.json" }`,
//! resolved relative to the config file, pointing at a file holding the same
//! `a`/`b`/`sigma_w`/`sigma_x` object.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::linalg;
use crate::model::{CostSpec, LinearSystem};

pub const SCHEMA_VERSION: u32 = 1;

/// Default horizon grid `1..=15`.
pub const DEFAULT_HORIZONS: std::ops::RangeInclusive<usize> = 1..=15;

type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Dare,
    Synthesize,
    Evaluate,
    Bound,
    Sweep,
    Identify,
    Adaptive,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Dare => "dare",
            Kind::Synthesize => "synthesize",
            Kind::Evaluate => "evaluate",
            Kind::Bound => "bound",
            Kind::Sweep => "sweep",
            Kind::Identify => "identify",
            Kind::Adaptive => "adaptive",
        }
    }

    /// CSV for the tabular experiments, JSON otherwise.
    pub fn default_format(self) -> Format {
        match self {
            Kind::Sweep | Kind::Identify | Kind::Adaptive => Format::Csv,
            _ => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}`, expected csv or json")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Rows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostFile {
    pub q: Rows,
    pub r: Rows,
}

/// A nominal model given inline; noise levels are taken from the true system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub a: Rows,
    pub b: Rows,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DareParams {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DareParams {
    fn default() -> Self {
        Self {
            tol: crate::riccati::DARE_TOL,
            max_iter: crate::riccati::DARE_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesizeParams {
    pub horizon: usize,
    /// Zero when absent.
    pub terminal: Option<Rows>,
    /// The true system when absent.
    pub nominal: Option<ModelSpec>,
}

impl Default for SynthesizeParams {
    fn default() -> Self {
        Self {
            horizon: 5,
            terminal: None,
            nominal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmpiricalParams {
    pub steps: usize,
    pub trials: usize,
}

impl Default for EmpiricalParams {
    fn default() -> Self {
        Self {
            steps: 4096,
            trials: 64,
        }
    }
}

/// Either an explicit `gain` or the receding-horizon design parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateParams {
    pub gain: Option<Rows>,
    pub horizon: Option<usize>,
    pub terminal: Option<Rows>,
    pub nominal: Option<ModelSpec>,
    pub empirical: Option<EmpiricalParams>,
}

/// Error levels are given directly or measured from a nominal model and
/// terminal weight. Absent both, `eps_m = 0` and the terminal weight is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    pub eps_m: Option<f64>,
    pub eps_p: Option<f64>,
    pub nominal: Option<ModelSpec>,
    pub terminal: Option<Rows>,
    pub horizons: Vec<usize>,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            eps_m: None,
            eps_p: None,
            nominal: None,
            terminal: None,
            horizons: DEFAULT_HORIZONS.collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub num_models: usize,
    /// Half-width `r` of the entrywise `U(-r, r)` perturbation.
    pub perturbation_range: f64,
    pub horizons: Vec<usize>,
    /// Defaults to the reference terminal weight for the default system and
    /// to zero otherwise.
    pub terminal: Option<Rows>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            num_models: 20,
            perturbation_range: 0.5,
            horizons: DEFAULT_HORIZONS.collect(),
            terminal: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyParams {
    pub t_grid: Vec<usize>,
    pub seeds: usize,
    pub t_h: usize,
    pub sigma_u: f64,
}

impl Default for IdentifyParams {
    fn default() -> Self {
        Self {
            t_grid: vec![64, 256, 1024, 4096],
            seeds: 20,
            t_h: 2,
            sigma_u: 1.0,
        }
    }
}

/// `"fixed:N"` or `"adaptive_log"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModeSpec(pub crate::adaptive::HorizonMode);

impl TryFrom<String> for ModeSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        use crate::adaptive::HorizonMode;
        if s == "adaptive_log" {
            return Ok(ModeSpec(HorizonMode::AdaptiveLog));
        }
        match s.strip_prefix("fixed:").map(str::parse::<usize>) {
            Some(Ok(n)) if n >= 1 => Ok(ModeSpec(HorizonMode::Fixed(n))),
            _ => Err(format!(
                "invalid mode `{s}`, expected `adaptive_log` or `fixed:N` with N >= 1"
            )),
        }
    }
}

impl From<ModeSpec> for String {
    fn from(m: ModeSpec) -> String {
        m.label()
    }
}

impl ModeSpec {
    pub fn label(&self) -> String {
        match self.0 {
            crate::adaptive::HorizonMode::Fixed(n) => format!("fixed:{n}"),
            crate::adaptive::HorizonMode::AdaptiveLog => "adaptive_log".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveParams {
    pub modes: Vec<ModeSpec>,
    pub total_steps: u64,
    pub seeds: usize,
    pub warmup_epochs: u32,
    /// Initial stabilizing gain; `K*` of the true system when absent.
    pub k0_gain: Option<Rows>,
    /// Defaults to the rate implied by `beta*` of the true system.
    pub gamma_bar: Option<f64>,
    /// `sigma_k^2 = t_k^(-sigma_power)`; ignored when `sigma_constant` is set.
    pub sigma_power: f64,
    pub sigma_constant: Option<f64>,
    pub warmup_sigma: f64,
    pub max_horizon: usize,
    pub info_threshold: f64,
    pub overflow_guard: f64,
    /// Design on the true model instead of the estimate.
    pub oracle: bool,
    /// Write every `record_stride`-th step to CSV (the final step always).
    pub record_stride: u64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        use crate::adaptive::*;
        Self {
            modes: vec![ModeSpec(HorizonMode::Fixed(2)), ModeSpec(HorizonMode::AdaptiveLog)],
            total_steps: 1 << 14,
            seeds: 20,
            warmup_epochs: DEFAULT_WARMUP_EPOCHS,
            k0_gain: None,
            gamma_bar: None,
            sigma_power: 0.5,
            sigma_constant: None,
            warmup_sigma: 1.0,
            max_horizon: DEFAULT_MAX_HORIZON,
            info_threshold: DEFAULT_INFO_THRESHOLD,
            overflow_guard: DEFAULT_OVERFLOW_GUARD,
            oracle: false,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Params {
    Dare(DareParams),
    Synthesize(SynthesizeParams),
    Evaluate(EvaluateParams),
    Bound(BoundParams),
    Sweep(SweepParams),
    Identify(IdentifyParams),
    Adaptive(AdaptiveParams),
}

impl Params {
    pub fn default_for(kind: Kind) -> Self {
        match kind {
            Kind::Dare => Params::Dare(Default::default()),
            Kind::Synthesize => Params::Synthesize(Default::default()),
            Kind::Evaluate => Params::Evaluate(Default::default()),
            Kind::Bound => Params::Bound(Default::default()),
            Kind::Sweep => Params::Sweep(Default::default()),
            Kind::Identify => Params::Identify(Default::default()),
            Kind::Adaptive => Params::Adaptive(Default::default()),
        }
    }

    pub fn kind(&self) -> Kind {
        match self {
            Params::Dare(_) => Kind::Dare,
            Params::Synthesize(_) => Kind::Synthesize,
            Params::Evaluate(_) => Kind::Evaluate,
            Params::Bound(_) => Kind::Bound,
            Params::Sweep(_) => Kind::Sweep,
            Params::Identify(_) => Kind::Identify,
            Params::Adaptive(_) => Kind::Adaptive,
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: LinearSystem,
    pub cost: CostSpec,
    /// True when `system` was not given and the reference plant is used.
    pub default_system: bool,
    pub params: Params,
    pub seed: u64,
    pub output: OutputSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    kind: Kind,
    #[serde(default)]
    system: Option<SystemSpec>,
    #[serde(default)]
    cost: Option<CostFile>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    params: Option<serde_json::Value>,
    #[serde(default)]
    output: Option<OutputSpec>,
}

/// The two-state reference plant `A = [[1, 2], [1, 0.5]]`, `B = [1; 0.5]`.
pub fn reference_system(sigma_w: f64) -> LinearSystem {
    LinearSystem::new(
        DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 0.5]),
        DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
        sigma_w,
        0.0,
    )
    .expect("reference plant is valid")
}

/// Terminal weight used with the reference plant in the horizon sweep.
pub fn reference_terminal() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[2.4, 1.2, 1.2, 3.4])
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("{field}: {msg}"))
}

fn parse_json<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = match (prefix.is_empty(), path.as_str()) {
            (true, ".") => "config".to_string(),
            (true, _) => path,
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{path}"),
        };
        config_err(&field, e.into_inner())
    })
}

fn parse_value<T: DeserializeOwned>(v: serde_json::Value, prefix: &str) -> Result<T, HarnessError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." { prefix.to_string() } else { format!("{prefix}.{path}") };
        config_err(&field, e.into_inner())
    })
}

/// Converts nested rows to a matrix, naming `field` on failure.
pub fn matrix(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, HarnessError> {
    linalg::from_rows(rows).map_err(|e| config_err(field, e))
}

pub(crate) fn nominal_system(
    spec: &ModelSpec,
    truth: &LinearSystem,
    field: &str,
) -> Result<LinearSystem, HarnessError> {
    let a = matrix(&spec.a, &format!("{field}.a"))?;
    let b = matrix(&spec.b, &format!("{field}.b"))?;
    truth.with_matrices(a, b).map_err(|e| config_err(field, e))
}

pub(crate) fn square_matrix(
    rows: &[Vec<f64>],
    n: usize,
    field: &str,
) -> Result<DMatrix<f64>, HarnessError> {
    let m = matrix(rows, field)?;
    if m.shape() != (n, n) {
        return Err(config_err(
            field,
            format!("expected {n}x{n}, got {}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(m)
}

fn resolve_system(spec: SystemSpec, base: Option<&Path>) -> Result<LinearSystem, HarnessError> {
    let spec = match spec.path {
        Some(path) => {
            if spec.a.is_some() || spec.b.is_some() {
                return Err(config_err("system.path", "cannot be combined with inline a/b"));
            }
            let full = base.map_or(path.clone(), |b| b.join(&path));
            let text = fs::read_to_string(&full)
                .map_err(|e| config_err("system.path", format!("{}: {e}", full.display())))?;
            let file: SystemSpec = parse_json(&text, "system")?;
            if file.path.is_some() {
                return Err(config_err("system.path", "system files cannot nest paths"));
            }
            SystemSpec {
                path: None,
                a: file.a,
                b: file.b,
                sigma_w: spec.sigma_w.or(file.sigma_w),
                sigma_x: spec.sigma_x.or(file.sigma_x),
            }
        }
        None => spec,
    };
    let a = matrix(spec.a.as_deref().ok_or_else(|| config_err("system.a", "missing"))?, "system.a")?;
    let b = matrix(spec.b.as_deref().ok_or_else(|| config_err("system.b", "missing"))?, "system.b")?;
    LinearSystem::new(a, b, spec.sigma_w.unwrap_or(1.0), spec.sigma_x.unwrap_or(0.0))
        .map_err(|e| config_err("system", e))
}

impl ExperimentConfig {
    /// The reference plant with identity weights and default parameters.
    pub fn default_for(kind: Kind) -> Self {
        let system = reference_system(1.0);
        Self {
            cost: CostSpec::identity(2, 1),
            system,
            default_system: true,
            params: Params::default_for(kind),
            seed: 0,
            output: OutputSpec::default(),
        }
    }

    pub fn kind(&self) -> Kind {
        self.params.kind()
    }

    /// Parses and validates a config; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self, HarnessError> {
        let raw: RawConfig = parse_json(text, "")?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(config_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", raw.schema_version),
            ));
        }
        let default_system = raw.system.is_none();
        let system = match raw.system {
            Some(spec) => resolve_system(spec, base)?,
            None => reference_system(1.0),
        };
        let cost = match raw.cost {
            Some(c) => {
                let q = matrix(&c.q, "cost.q")?;
                let r = matrix(&c.r, "cost.r")?;
                let cost = CostSpec::new(q, r).map_err(|e| config_err("cost", e))?;
                cost.check_system(&system).map_err(|e| config_err("cost", e))?;
                cost
            }
            None => CostSpec::identity(system.n(), system.m()),
        };
        let value = raw.params.unwrap_or_else(|| serde_json::Value::Object(Default::default()));
        let params = match raw.kind {
            Kind::Dare => Params::Dare(parse_value(value, "params")?),
            Kind::Synthesize => Params::Synthesize(parse_value(value, "params")?),
            Kind::Evaluate => Params::Evaluate(parse_value(value, "params")?),
            Kind::Bound => Params::Bound(parse_value(value, "params")?),
            Kind::Sweep => Params::Sweep(parse_value(value, "params")?),
            Kind::Identify => Params::Identify(parse_value(value, "params")?),
            Kind::Adaptive => Params::Adaptive(parse_value(value, "params")?),
        };
        let mut output = raw.output.unwrap_or_default();
        if let (Some(base), Some(p)) = (base, output.path.as_mut()) {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        let cfg = Self {
            system,
            cost,
            default_system,
            params,
            seed: raw.seed.unwrap_or(0),
            output,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err("--config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    /// Range checks that serde cannot express.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let n = self.system.n();
        fn horizons(h: &[usize]) -> Result<(), HarnessError> {
            if h.is_empty() {
                return Err(config_err("params.horizons", "must not be empty"));
            }
            if h.contains(&0) {
                return Err(config_err("params.horizons", "horizons must be at least 1"));
            }
            Ok(())
        }
        match &self.params {
            Params::Dare(p) => {
                if !(p.tol > 0.0 && p.tol.is_finite()) {
                    return Err(config_err("params.tol", "must be positive"));
                }
                if p.max_iter == 0 {
                    return Err(config_err("params.max_iter", "must be at least 1"));
                }
            }
            Params::Synthesize(p) => {
                if p.horizon == 0 {
                    return Err(config_err("params.horizon", "must be at least 1"));
                }
                if let Some(t) = &p.terminal {
                    square_matrix(t, n, "params.terminal")?;
                }
                if let Some(m) = &p.nominal {
                    nominal_system(m, &self.system, "params.nominal")?;
                }
            }
            Params::Evaluate(p) => {
                if p.gain.is_some() && (p.horizon.is_some() || p.terminal.is_some() || p.nominal.is_some()) {
                    return Err(config_err(
                        "params.gain",
                        "cannot be combined with horizon, terminal or nominal",
                    ));
                }
                if let Some(g) = &p.gain {
                    let k = matrix(g, "params.gain")?;
                    if k.shape() != (self.system.m(), n) {
                        return Err(config_err(
                            "params.gain",
                            format!("expected {}x{n}, got {}x{}", self.system.m(), k.nrows(), k.ncols()),
                        ));
                    }
                }
                if p.horizon == Some(0) {
                    return Err(config_err("params.horizon", "must be at least 1"));
                }
                if let Some(t) = &p.terminal {
                    square_matrix(t, n, "params.terminal")?;
                }
                if let Some(m) = &p.nominal {
                    nominal_system(m, &self.system, "params.nominal")?;
                }
                if let Some(e) = &p.empirical {
                    if e.steps == 0 || e.trials == 0 {
                        return Err(config_err("params.empirical", "steps and trials must be at least 1"));
                    }
                }
            }
            Params::Bound(p) => {
                horizons(&p.horizons)?;
                if p.eps_m.is_some() && p.nominal.is_some() {
                    return Err(config_err("params.eps_m", "cannot be combined with params.nominal"));
                }
                if p.eps_p.is_some() && p.terminal.is_some() {
                    return Err(config_err("params.eps_p", "cannot be combined with params.terminal"));
                }
                for (v, f) in [(p.eps_m, "params.eps_m"), (p.eps_p, "params.eps_p")] {
                    if let Some(v) = v {
                        if !(v.is_finite() && v >= 0.0) {
                            return Err(config_err(f, "must be finite and nonnegative"));
                        }
                    }
                }
                if let Some(t) = &p.terminal {
                    square_matrix(t, n, "params.terminal")?;
                }
                if let Some(m) = &p.nominal {
                    nominal_system(m, &self.system, "params.nominal")?;
                }
            }
            Params::Sweep(p) => {
                horizons(&p.horizons)?;
                if !(p.perturbation_range.is_finite() && p.perturbation_range >= 0.0) {
                    return Err(config_err("params.perturbation_range", "must be finite and nonnegative"));
                }
                if let Some(t) = &p.terminal {
                    square_matrix(t, n, "params.terminal")?;
                }
            }
            Params::Identify(p) => {
                if p.t_grid.is_empty() {
                    return Err(config_err("params.t_grid", "must not be empty"));
                }
                if p.seeds == 0 {
                    return Err(config_err("params.seeds", "must be at least 1"));
                }
                if p.t_h == 0 {
                    return Err(config_err("params.t_h", "must be at least 1"));
                }
                if !(p.sigma_u.is_finite() && p.sigma_u > 0.0) {
                    return Err(config_err("params.sigma_u", "must be positive"));
                }
            }
            Params::Adaptive(p) => {
                if p.modes.is_empty() {
                    return Err(config_err("params.modes", "must not be empty"));
                }
                if p.seeds == 0 {
                    return Err(config_err("params.seeds", "must be at least 1"));
                }
                if p.record_stride == 0 {
                    return Err(config_err("params.record_stride", "must be at least 1"));
                }
                if let Some(k) = &p.k0_gain {
                    let k = matrix(k, "params.k0_gain")?;
                    if k.shape() != (self.system.m(), n) {
                        return Err(config_err(
                            "params.k0_gain",
                            format!("expected {}x{n}, got {}x{}", self.system.m(), k.nrows(), k.ncols()),
                        ));
                    }
                }
                if let Some(g) = p.gamma_bar {
                    if !(g > 0.0 && g < 1.0) {
                        return Err(config_err("params.gamma_bar", "must lie in (0, 1)"));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        match ExperimentConfig::from_json(text, None) {
            Err(HarnessError::Config(m)) => m,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_reference_plant() {
        let cfg = ExperimentConfig::from_json(r#"{"schema_version": 1, "kind": "sweep"}"#, None).unwrap();
        assert!(cfg.default_system);
        assert_eq!(cfg.system, reference_system(1.0));
        assert_eq!(cfg.params, Params::Sweep(SweepParams::default()));
    }

    #[test]
    fn errors_name_the_field() {
        assert!(err(r#"{"schema_version": 1, "kind": "sweep", "bogus": 1}"#).contains("bogus"));
        assert!(err(r#"{"schema_version": 1, "kind": "sweep", "params": {"num_modls": 3}}"#)
            .starts_with("params"));
        assert!(err(r#"{"schema_version": 1, "kind": "sweep", "params": {"horizons": "x"}}"#)
            .starts_with("params.horizons"));
        assert!(err(r#"{"schema_version": 2, "kind": "sweep"}"#).starts_with("schema_version"));
        assert!(err(r#"{"kind": "sweep"}"#).contains("schema_version"));
        assert!(err(r#"{"schema_version": 1, "kind": "sweep", "system": {"a": [[1.0]]}}"#)
            .starts_with("system.b"));
        assert!(err(r#"{"schema_version": 1, "kind": "adaptive", "params": {"modes": ["fixed:0"]}}"#)
            .starts_with("params.modes[0]"));
        assert!(err(r#"{"schema_version": 1, "kind": "bound", "params": {"horizons": [0]}}"#)
            .starts_with("params.horizons"));
        assert!(err(r#"{"schema_version": 1, "kind": "dare", "cost": {"q": [[1.0]], "r": [[1.0]]}}"#)
            .starts_with("cost"));
    }

    #[test]
    fn mode_spec_round_trips() {
        for s in ["fixed:3", "adaptive_log"] {
            let m = ModeSpec::try_from(s.to_string()).unwrap();
            assert_eq!(m.label(), s);
        }
        assert!(ModeSpec::try_from("fixed:x".to_string()).is_err());
    }
}
