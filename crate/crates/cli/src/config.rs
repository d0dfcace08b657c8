//! Strict JSON run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use paramop_core::families::{validate_h_sequence, ParamValue, Params, DEFAULT_H_SEQUENCE, REGISTRY};
use paramop_core::fredholm::KERNEL_REGISTRY;
use paramop_core::semilinear::G_REGISTRY;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    UnknownKey { path: String, key: String, suggestion: Option<String> },
    Invalid { field: String, message: String },
    UnknownProblem { name: String, suggestion: Option<String>, available: Vec<String> },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "config parse error at line {line}, column {column}: {message}")
            }
            ConfigError::UnknownKey { path, key, suggestion } => {
                let place = if path.is_empty() { String::new() } else { format!(" in '{path}'") };
                write!(f, "unknown key \"{key}\"{place}")?;
                if let Some(s) = suggestion {
                    write!(f, "; did you mean \"{s}\"?")?;
                }
                Ok(())
            }
            ConfigError::Invalid { field, message } => write!(f, "invalid value for '{field}': {message}"),
            ConfigError::UnknownProblem { name, suggestion, available } => {
                write!(f, "unknown problem \"{name}\"")?;
                if let Some(s) = suggestion {
                    write!(f, "; did you mean \"{s}\"?")?;
                }
                write!(f, " (available: {})", available.join(", "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

/// Closest candidate by edit distance, if it is plausibly a typo.
pub fn suggest<'a>(word: &str, candidates: impl IntoIterator<Item = &'a str>) -> Option<String> {
    let limit = (word.chars().count() / 3).max(2);
    candidates
        .into_iter()
        .map(|c| (strsim::damerau_levenshtein(word, c), c))
        .filter(|(d, _)| *d <= limit)
        .min_by_key(|(d, _)| *d)
        .map(|(_, c)| c.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Solve,
    Continuity,
    Sensitivity,
    Assumptions,
    Blowup,
    Counterexample,
}

impl Task {
    pub const ALL: [&'static str; 6] = ["solve", "continuity", "sensitivity", "assumptions", "blowup", "counterexample"];

    pub fn name(self) -> &'static str {
        Task::ALL[self as usize]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamJson {
    Number(f64),
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ProblemRepr")]
pub struct ProblemSpec {
    pub name: String,
    pub params: BTreeMap<String, ParamJson>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ProblemRepr {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        params: BTreeMap<String, ParamJson>,
    },
}

impl From<ProblemRepr> for ProblemSpec {
    fn from(r: ProblemRepr) -> Self {
        match r {
            ProblemRepr::Name(name) => ProblemSpec {
                name,
                params: BTreeMap::new(),
            },
            ProblemRepr::Full { name, params } => ProblemSpec { name, params },
        }
    }
}

impl ProblemSpec {
    pub fn params(&self) -> Params {
        Params(
            self.params
                .iter()
                .map(|(k, v)| {
                    let v = match v {
                        ParamJson::Number(x) => ParamValue::Number(*x),
                        ParamJson::List(xs) => ParamValue::List(xs.clone()),
                        ParamJson::Text(s) => ParamValue::Text(s.clone()),
                    };
                    (k.clone(), v)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarSpec {
    pub rings: usize,
    pub spokes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSpec {
    #[serde(default, deserialize_with = "complex_pair")]
    pub center: [f64; 2],
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_h_sequence")]
    pub h_sequence: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polar: Option<PolarSpec>,
}

fn default_radius() -> f64 {
    0.5
}

fn default_samples() -> usize {
    5
}

fn default_h_sequence() -> Vec<f64> {
    DEFAULT_H_SEQUENCE.to_vec()
}

fn complex_pair<'de, D: serde::Deserializer<'de>>(d: D) -> Result<[f64; 2], D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either {
        Real(f64),
        Pair([f64; 2]),
    }
    Ok(match Either::deserialize(d)? {
        Either::Real(x) => [x, 0.0],
        Either::Pair(p) => p,
    })
}

impl Default for DiscSpec {
    fn default() -> Self {
        DiscSpec {
            center: [0.0, 0.0],
            radius: default_radius(),
            samples: default_samples(),
            h_sequence: default_h_sequence(),
            polar: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub newton_max_halvings: usize,
    pub slope_threshold: f64,
    pub verdict_tail: usize,
    pub zero_tol: f64,
    pub fd_step: f64,
    pub ball_radius: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            newton_max_halvings: 30,
            slope_threshold: 0.9,
            verdict_tail: 3,
            zero_tol: 1e-13,
            fd_step: 1e-4,
            ball_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    #[serde(default)]
    pub disc: DiscSpec,
    pub tasks: Vec<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
}

const TOP_KEYS: &[&str] = &["problem", "disc", "tasks", "output_dir", "seed", "tolerances"];
const PROBLEM_KEYS: &[&str] = &["name", "params"];
const DISC_KEYS: &[&str] = &["center", "radius", "samples", "h_sequence", "polar"];
const POLAR_KEYS: &[&str] = &["rings", "spokes"];
const TOLERANCE_KEYS: &[&str] = &[
    "newton_tol",
    "newton_max_iter",
    "newton_max_halvings",
    "slope_threshold",
    "verdict_tail",
    "zero_tol",
    "fd_step",
    "ball_radius",
];

/// Right-hand-side keys accepted by every registry family.
pub const RHS_KEYS: &[&str] = &["f", "f_slope"];
pub const FREDHOLM_KEYS: &[&str] = &["kernel", "nodes", "source", "lambda", "lo", "hi"];
pub const SEMILINEAR_KEYS: &[&str] = &["g", "a", "kappa", "nodes", "f1", "f1_slope"];
pub const SOURCES: &[&str] = &["linear", "one"];

pub fn problem_names() -> Vec<String> {
    let mut names: Vec<String> = REGISTRY.iter().map(|(n, _)| n.to_string()).collect();
    names.push("fredholm".into());
    names.push("semilinear".into());
    names
}

/// Parameter keys accepted for a problem, or `None` for an unknown problem.
pub fn problem_keys(name: &str) -> Option<Vec<&'static str>> {
    match name {
        "fredholm" => Some(FREDHOLM_KEYS.to_vec()),
        "semilinear" => Some(SEMILINEAR_KEYS.to_vec()),
        _ => REGISTRY
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, keys)| keys.iter().chain(RHS_KEYS).copied().collect()),
    }
}

fn check_keys(value: &Value, path: &str, allowed: &[&str]) -> Result<(), ConfigError> {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    path: path.to_string(),
                    key: key.clone(),
                    suggestion: suggest(key, allowed.iter().copied()),
                });
            }
        }
    }
    Ok(())
}

fn check_all_keys(root: &Value) -> Result<(), ConfigError> {
    if !root.is_object() {
        return Err(invalid("config", "top level must be a JSON object"));
    }
    check_keys(root, "", TOP_KEYS)?;
    if let Some(p) = root.get("problem") {
        check_keys(p, "problem", PROBLEM_KEYS)?;
    }
    if let Some(d) = root.get("disc") {
        check_keys(d, "disc", DISC_KEYS)?;
        if let Some(p) = d.get("polar") {
            check_keys(p, "disc.polar", POLAR_KEYS)?;
        }
    }
    if let Some(t) = root.get("tolerances") {
        check_keys(t, "tolerances", TOLERANCE_KEYS)?;
    }
    if let Some(Value::Array(tasks)) = root.get("tasks") {
        for t in tasks {
            if let Value::String(s) = t {
                if !Task::ALL.contains(&s.as_str()) {
                    return Err(ConfigError::Invalid {
                        field: "tasks".into(),
                        message: match suggest(s, Task::ALL) {
                            Some(g) => format!("unknown task \"{s}\"; did you mean \"{g}\"?"),
                            None => format!("unknown task \"{s}\" (available: {})", Task::ALL.join(", ")),
                        },
                    });
                }
            }
        }
    }
    Ok(())
}

/// Parse and validate a configuration; defaults are filled in.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    check_all_keys(&root)?;
    let cfg: RunConfig = serde_json::from_value(root).map_err(|e| invalid("config", e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn serialize_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let name = self.problem.name.as_str();
        let Some(allowed) = problem_keys(name) else {
            let names = problem_names();
            return Err(ConfigError::UnknownProblem {
                name: name.to_string(),
                suggestion: suggest(name, names.iter().map(String::as_str)),
                available: names,
            });
        };
        for key in self.problem.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    path: "problem.params".into(),
                    key: key.clone(),
                    suggestion: suggest(key, allowed.iter().copied()),
                });
            }
        }
        self.validate_choices()?;

        if self.tasks.is_empty() {
            return Err(invalid("tasks", "at least one task is required"));
        }
        let d = &self.disc;
        if !d.radius.is_finite() || d.radius <= 0.0 {
            return Err(invalid("disc.radius", format!("must be positive, got {}", d.radius)));
        }
        if !d.center.iter().all(|x| x.is_finite()) {
            return Err(invalid("disc.center", "must be finite"));
        }
        if d.samples == 0 {
            return Err(invalid("disc.samples", "must be at least 1"));
        }
        if let Some(p) = d.polar {
            if p.rings == 0 || p.spokes == 0 {
                return Err(invalid("disc.polar", "rings and spokes must be at least 1"));
            }
        }
        validate_h_sequence(&d.h_sequence).map_err(|e| invalid("disc.h_sequence", e.to_string()))?;

        let t = &self.tolerances;
        for (field, v) in [
            ("tolerances.newton_tol", t.newton_tol),
            ("tolerances.slope_threshold", t.slope_threshold),
            ("tolerances.zero_tol", t.zero_tol),
            ("tolerances.fd_step", t.fd_step),
            ("tolerances.ball_radius", t.ball_radius),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(invalid(field, format!("must be positive, got {v}")));
            }
        }
        if t.newton_max_iter == 0 {
            return Err(invalid("tolerances.newton_max_iter", "must be at least 1"));
        }
        if t.verdict_tail < 2 {
            return Err(invalid("tolerances.verdict_tail", "must be at least 2"));
        }

        let has = |task| self.tasks.contains(&task);
        if has(Task::Counterexample) && name != "remark12" {
            return Err(invalid("tasks", "counterexample applies to the remark12 problem only"));
        }
        if has(Task::Sensitivity) && name == "remark12" {
            return Err(invalid("tasks", "remark12 has no k-derivative, so sensitivity is unavailable"));
        }
        let linear = !matches!(name, "cubic-pointwise" | "linear-wrapped" | "semilinear");
        if has(Task::Blowup) && !linear {
            return Err(invalid("tasks", "blowup applies to linear problems only"));
        }
        Ok(())
    }

    fn validate_choices(&self) -> Result<(), ConfigError> {
        let text = |key: &str| match self.problem.params.get(key) {
            Some(ParamJson::Text(s)) => Some(s.as_str()),
            _ => None,
        };
        let check = |key: &str, value: Option<&str>, options: &[&str]| -> Result<(), ConfigError> {
            match value {
                Some(v) if !options.contains(&v) => Err(invalid(
                    &format!("problem.params.{key}"),
                    match suggest(v, options.iter().copied()) {
                        Some(s) => format!("unknown value \"{v}\"; did you mean \"{s}\"?"),
                        None => format!("unknown value \"{v}\" (available: {})", options.join(", ")),
                    },
                )),
                _ => Ok(()),
            }
        };
        match self.problem.name.as_str() {
            "fredholm" => {
                let kernels: Vec<&str> = KERNEL_REGISTRY.iter().map(|(n, _)| *n).collect();
                check("kernel", text("kernel"), &kernels)?;
                check("source", text("source"), SOURCES)
            }
            "semilinear" => check("g", text("g"), G_REGISTRY),
            "linear-wrapped" => {
                let inner: Vec<&str> = REGISTRY
                    .iter()
                    .map(|(n, _)| *n)
                    .filter(|n| !matches!(*n, "cubic-pointwise" | "linear-wrapped"))
                    .collect();
                check("inner", text("inner"), &inner)
            }
            _ => Ok(()),
        }
    }

    pub fn uses_sensitivity(&self) -> bool {
        self.tasks.contains(&Task::Sensitivity)
    }
}
