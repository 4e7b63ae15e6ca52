//! Run configuration: `key = value` text with `[section]` headers, or the
//! `config` object of a previous JSON output.
//!
//! ```text
//! [model]
//! alpha1 = -2.8
//! alpha2 = -2
//! a = 5
//! field = 0.17
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use resonance_core::kernel::{ModelParams, ParamError};
use resonance_core::survival::GaussianState;
use serde_json::{json, Value};

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Line { file: String, line: usize },
    Json { file: String, key: String },
    Override(String),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Line { file, line } => write!(f, "{file}:{line}"),
            Origin::Json { file, key } => write!(f, "{file}: {key}"),
            Origin::Override(text) => write!(f, "--set {text}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: Option<Origin>,
    pub message: String,
}

impl ConfigError {
    fn at(origin: &Origin, message: impl Into<String>) -> Self {
        ConfigError { origin: Some(origin.clone()), message: message.into() }
    }

    fn bare(message: impl Into<String>) -> Self {
        ConfigError { origin: None, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.origin {
            Some(o) => write!(f, "{o}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: [(&str, &[&str]); 5] = [
    ("model", &["alpha1", "alpha2", "x1", "a", "field"]),
    ("state", &["center", "sigma"]),
    ("sweep", &["f_min", "f_max", "f_steps"]),
    ("time", &["t_min", "t_max", "t_points", "spacing"]),
    ("output", &["path", "format", "precision"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

/// Raw settings keyed by `section.key`, before typing.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: BTreeMap<String, Entry>,
}

fn check_key(section: &str, key: &str, origin: &Origin) -> Result<String, ConfigError> {
    let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == section) else {
        return Err(ConfigError::at(origin, format!("unknown section [{section}]")));
    };
    if !keys.contains(&key) {
        return Err(ConfigError::at(
            origin,
            format!("unknown key `{key}` in [{section}] (expected one of {})", keys.join(", ")),
        ));
    }
    Ok(format!("{section}.{key}"))
}

impl Settings {
    pub fn parse_text(text: &str, file: &str) -> Result<Self, ConfigError> {
        let mut settings = Settings::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let origin = Origin::Line { file: file.to_string(), line: n + 1 };
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::at(&origin, "section header is missing `]`"))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(ConfigError::at(&origin, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::at(&origin, format!("expected `key = value`, found `{line}`")))?;
            let section = section
                .as_deref()
                .ok_or_else(|| ConfigError::at(&origin, "setting outside of any [section]"))?;
            let full = check_key(section, key.trim(), &origin)?;
            if let Some(prev) = settings.entries.get(&full) {
                return Err(ConfigError::at(&origin, format!("`{full}` already set at {}", prev.origin)));
            }
            settings.entries.insert(full, Entry { value: value.trim().to_string(), origin });
        }
        Ok(settings)
    }

    /// Reads the `config` object of a JSON output, or a bare object of sections.
    pub fn parse_json(text: &str, file: &str) -> Result<Self, ConfigError> {
        let root: Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::at(&Origin::Line { file: file.to_string(), line: e.line() }, e.to_string()))?;
        let config = root.get("config").unwrap_or(&root);
        let sections = config
            .as_object()
            .ok_or_else(|| ConfigError::bare(format!("{file}: expected a JSON object of sections")))?;
        let mut settings = Settings::default();
        for (section, body) in sections {
            let origin = Origin::Json { file: file.to_string(), key: section.clone() };
            let body = body
                .as_object()
                .ok_or_else(|| ConfigError::at(&origin, "expected an object of settings"))?;
            for (key, value) in body {
                let origin = Origin::Json { file: file.to_string(), key: format!("{section}.{key}") };
                let full = check_key(section, key, &origin)?;
                let text = match value {
                    Value::Null => continue,
                    Value::String(s) => s.clone(),
                    Value::Number(n) => n.to_string(),
                    other => return Err(ConfigError::at(&origin, format!("unsupported value {other}"))),
                };
                settings.entries.insert(full, Entry { value: text, origin });
            }
        }
        Ok(settings)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::bare(format!("cannot read {file}: {e}")))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            Self::parse_json(&text, &file)
        } else {
            Self::parse_text(&text, &file)
        }
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let origin = Origin::Override(assignment.to_string());
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::at(&origin, "expected section.key=value"))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| ConfigError::at(&origin, "expected section.key=value"))?;
        let full = check_key(section, key, &origin)?;
        self.entries.insert(full, Entry { value: value.trim().to_string(), origin });
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn number(&self, key: &str) -> Result<Option<(f64, Origin)>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let v: f64 = e
            .value
            .parse()
            .map_err(|_| ConfigError::at(&e.origin, format!("`{key}` must be a number, found `{}`", e.value)))?;
        if !v.is_finite() {
            return Err(ConfigError::at(&e.origin, format!("`{key}` must be finite")));
        }
        Ok(Some((v, e.origin.clone())))
    }

    fn required(&self, key: &str) -> Result<(f64, Origin), ConfigError> {
        self.number(key)?.ok_or_else(|| ConfigError::bare(format!("missing required setting `{key}`")))
    }

    fn count(&self, key: &str) -> Result<Option<(usize, Origin)>, ConfigError> {
        let Some(e) = self.get(key) else { return Ok(None) };
        let v = e
            .value
            .parse()
            .map_err(|_| ConfigError::at(&e.origin, format!("`{key}` must be a non-negative integer, found `{}`", e.value)))?;
        Ok(Some((v, e.origin.clone())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    pub alpha1: f64,
    pub alpha2: f64,
    pub x1: f64,
    /// Well separation `x₂ - x₁`.
    pub a: f64,
    pub field: Option<f64>,
}

impl Model {
    /// Parameters at `field`.
    pub fn params(&self, field: f64) -> Result<ModelParams, ParamError> {
        ModelParams::new(self.alpha1, self.alpha2, self.x1, self.x1 + self.a, field)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub f_min: f64,
    pub f_max: f64,
    pub f_steps: usize,
}

impl Sweep {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.f_steps;
        (0..n).map(|k| self.f_min + (self.f_max - self.f_min) * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Time {
    pub t_min: f64,
    pub t_max: f64,
    pub t_points: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub path: Option<PathBuf>,
    pub format: Format,
    pub precision: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub state: GaussianState,
    pub sweep: Option<Sweep>,
    pub time: Time,
    pub output: Output,
}

fn param_error(settings: &Settings, err: ParamError) -> ConfigError {
    let key = match err {
        ParamError::NonFinite("x2") | ParamError::Positions { .. } => "model.a",
        ParamError::NonFinite(name) => match name {
            "alpha1" => "model.alpha1",
            "alpha2" => "model.alpha2",
            "x1" => "model.x1",
            _ => "model.field",
        },
        ParamError::Strengths { .. } => "model.alpha2",
        ParamError::Field(_) => "model.field",
    };
    match settings.get(key) {
        Some(e) => ConfigError::at(&e.origin, err.to_string()),
        None => ConfigError::bare(err.to_string()),
    }
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let (alpha1, _) = s.required("model.alpha1")?;
        let (alpha2, _) = s.required("model.alpha2")?;
        let (a, _) = s.required("model.a")?;
        let x1 = s.number("model.x1")?.map_or(0.0, |v| v.0);
        let field = s.number("model.field")?.map(|v| v.0);
        let model = Model { alpha1, alpha2, x1, a, field };
        // a placeholder field checks the remaining invariants when none is given
        model.params(field.unwrap_or(1.0)).map_err(|e| param_error(s, e))?;

        let center = s.number("state.center")?.map_or(x1, |v| v.0);
        let sigma = match s.number("state.sigma")? {
            Some((v, o)) if v <= 0.0 => return Err(ConfigError::at(&o, "`state.sigma` must be positive")),
            Some((v, _)) => v,
            None => 0.5,
        };
        let state = GaussianState { center, sigma };

        let sweep = match (s.number("sweep.f_min")?, s.number("sweep.f_max")?, s.count("sweep.f_steps")?) {
            (None, None, None) => None,
            (Some((f_min, o_min)), Some((f_max, o_max)), steps) => {
                if f_min <= 0.0 {
                    return Err(ConfigError::at(&o_min, "`sweep.f_min` must be positive"));
                }
                if f_min >= f_max {
                    return Err(ConfigError::at(&o_max, "`sweep.f_max` must exceed `sweep.f_min`"));
                }
                let f_steps = match steps {
                    Some((n, o)) if n < 2 => return Err(ConfigError::at(&o, "`sweep.f_steps` must be at least 2")),
                    Some((n, _)) => n,
                    None => 41,
                };
                Some(Sweep { f_min, f_max, f_steps })
            }
            _ => return Err(ConfigError::bare("[sweep] needs both `f_min` and `f_max`")),
        };

        let spacing = match s.get("time.spacing") {
            None => Spacing::Log,
            Some(e) => match e.value.as_str() {
                "log" => Spacing::Log,
                "linear" => Spacing::Linear,
                other => return Err(ConfigError::at(&e.origin, format!("`time.spacing` must be linear or log, found `{other}`"))),
            },
        };
        let t_min = s.number("time.t_min")?;
        let t_max = s.number("time.t_max")?;
        let time = Time {
            t_min: t_min.as_ref().map_or(1e2, |v| v.0),
            t_max: t_max.as_ref().map_or(1e4, |v| v.0),
            t_points: match s.count("time.t_points")? {
                Some((n, o)) if n < 2 => return Err(ConfigError::at(&o, "`time.t_points` must be at least 2")),
                Some((n, _)) => n,
                None => 2000,
            },
            spacing,
        };
        let time_origin = t_max.or(t_min).map(|v| v.1);
        let time_error = |msg: &str| match &time_origin {
            Some(o) => ConfigError::at(o, msg),
            None => ConfigError::bare(msg),
        };
        if time.t_min < 0.0 || (spacing == Spacing::Log && time.t_min <= 0.0) {
            return Err(time_error("`time.t_min` must be positive (non-negative for linear spacing)"));
        }
        if time.t_min >= time.t_max {
            return Err(time_error("`time.t_max` must exceed `time.t_min`"));
        }

        let format = match s.get("output.format") {
            None => Format::Csv,
            Some(e) => match e.value.as_str() {
                "csv" => Format::Csv,
                "json" => Format::Json,
                other => return Err(ConfigError::at(&e.origin, format!("`output.format` must be csv or json, found `{other}`"))),
            },
        };
        let precision = match s.count("output.precision")? {
            Some((n, o)) if !(1..=17).contains(&n) => {
                return Err(ConfigError::at(&o, "`output.precision` must be between 1 and 17"))
            }
            Some((n, _)) => n,
            None => 17,
        };
        let path = s.get("output.path").filter(|e| !e.value.is_empty()).map(|e| PathBuf::from(&e.value));
        Ok(RunConfig { model, state, sweep, time, output: Output { path, format, precision } })
    }

    /// The fixed field, required by single-field commands.
    pub fn field(&self) -> Result<f64, ConfigError> {
        self.model
            .field
            .ok_or_else(|| ConfigError::bare("this command needs `model.field`"))
    }

    pub fn params(&self) -> Result<ModelParams, ConfigError> {
        self.model.params(self.field()?).map_err(|e| ConfigError::bare(e.to_string()))
    }

    pub fn times(&self) -> Vec<f64> {
        let t = &self.time;
        match t.spacing {
            Spacing::Log => resonance_core::survival::log_spaced(t.t_min, t.t_max, t.t_points),
            Spacing::Linear => resonance_core::survival::linear_spaced(t.t_min, t.t_max, t.t_points),
        }
    }

    pub fn to_json(&self) -> Value {
        let mut root = json!({
            "model": {
                "alpha1": self.model.alpha1,
                "alpha2": self.model.alpha2,
                "x1": self.model.x1,
                "a": self.model.a,
                "field": self.model.field,
            },
            "state": { "center": self.state.center, "sigma": self.state.sigma },
            "time": {
                "t_min": self.time.t_min,
                "t_max": self.time.t_max,
                "t_points": self.time.t_points,
                "spacing": match self.time.spacing { Spacing::Log => "log", Spacing::Linear => "linear" },
            },
            "output": {
                "path": self.output.path.as_ref().map(|p| p.display().to_string()),
                "format": match self.output.format { Format::Csv => "csv", Format::Json => "json" },
                "precision": self.output.precision,
            },
        });
        if let Some(sw) = &self.sweep {
            root["sweep"] = json!({ "f_min": sw.f_min, "f_max": sw.f_max, "f_steps": sw.f_steps });
        }
        root
    }

    /// The resolved configuration in the text format, one line per setting.
    pub fn to_text(&self) -> Vec<String> {
        let json = self.to_json();
        let mut lines = Vec::new();
        for (section, _) in KEYS {
            let Some(body) = json.get(section).and_then(Value::as_object) else { continue };
            lines.push(format!("[{section}]"));
            for (key, value) in body {
                match value {
                    Value::Null => {}
                    Value::String(s) => lines.push(format!("{key} = {s}")),
                    other => lines.push(format!("{key} = {other}")),
                }
            }
        }
        lines
    }
}
