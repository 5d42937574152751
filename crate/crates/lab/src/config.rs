//! Experiment configuration: key=value or JSON files, `--set` overrides, strict keys.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use wkde::conditions::geometric_t_grid;
use wkde::functional::LipschitzFunctional;
use wkde::{BandwidthSelector, BandwidthWindow, DensityModel, Kernel, SlowlyVarying, WeightFunction};

use crate::error::{LabError, Result};

/// Every knob of the runner. Unset keys take the documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `gaussian`, `laplace`, `cauchy`, `bump` or `uniform-box`.
    pub model: String,
    pub dim: usize,
    /// Scale (laplace, cauchy) or power (bump).
    pub model_param: Option<f64>,
    /// `inverse-density` (`ψ = factor · f^{-β}`) or `constant`.
    pub weight: String,
    pub beta: f64,
    pub weight_factor: f64,
    /// Kernel family, optionally with `dim=<d>`; the product dimension defaults to `dim`.
    pub kernel: String,
    pub alpha: f64,
    pub mu: f64,
    /// `L₁(t) = c · (ln t)^p` as `[c, p]`.
    pub l1: [f64; 2],
    pub l2: [f64; 2],
    pub n_list: Vec<u64>,
    pub replications: u32,
    pub subgrid_k: u32,
    pub grid_cap: usize,
    pub seed: u64,
    pub selector: String,
    /// Run the boundedness experiment even when the tail condition is violated.
    pub override_tail: bool,
    pub paths: u32,
    pub quad_points: usize,
    /// Sample size of the single-sample subcommands.
    pub n: u64,
    /// Fixed bandwidth of `estimate`; the selector is used when unset.
    pub h: Option<f64>,
    pub functional: String,
    pub functional_configs: u32,
    pub functional_n: u64,
    pub tail_decades: u32,
    pub tail_per_decade: u32,
    pub mc_samples: usize,
    pub centering_n_list: Vec<u64>,
    /// Headerless CSV of sample points used by `estimate` and `deviation` instead of a draw.
    pub data: Option<String>,
    /// Output directory, used when `--out` is not given.
    pub out: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "gaussian".into(),
            dim: 1,
            model_param: None,
            weight: "inverse-density".into(),
            beta: 0.25,
            weight_factor: 1.0,
            kernel: "uniform".into(),
            alpha: 0.7,
            mu: 0.3,
            l1: [1.0, 0.0],
            l2: [1.0, 0.0],
            n_list: (9..=14).map(|e| 1u64 << e).collect(),
            replications: 200,
            subgrid_k: 8,
            grid_cap: 4096,
            seed: 1,
            selector: "geometric-midpoint".into(),
            override_tail: false,
            paths: 5,
            quad_points: wkde::deviation::DEFAULT_QUAD_POINTS,
            n: 1024,
            h: None,
            functional: "min:0.2".into(),
            functional_configs: 200,
            functional_n: 1024,
            tail_decades: 12,
            tail_per_decade: 8,
            mc_samples: 400_000,
            centering_n_list: vec![1 << 9, 1 << 11, 1 << 13],
            data: None,
            out: None,
        }
    }
}

/// The config objects built from the id strings.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: DensityModel,
    pub weight: WeightFunction,
    pub kernel: Kernel,
    pub window: BandwidthWindow,
}

impl ExperimentConfig {
    pub fn known_keys() -> Vec<String> {
        match serde_json::to_value(ExperimentConfig::default()) {
            Ok(Value::Object(map)) => map.keys().cloned().collect(),
            _ => unreachable!("the config serializes to an object"),
        }
    }

    /// Resolves every id and checks the cross-field invariants.
    pub fn resolve(&self) -> Result<Resolved> {
        if self.n_list.is_empty() {
            return Err(LabError::Config("n_list must not be empty".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(LabError::Config(format!(
                "n_list must be geometric with ratio 2, got {:?}",
                self.n_list
            )));
        }
        if self.replications == 0 || self.paths == 0 || self.functional_configs == 0 {
            return Err(LabError::Config(
                "replications, paths and functional_configs must be positive".into(),
            ));
        }
        if self.subgrid_k == 0 {
            return Err(LabError::Config("subgrid_k must be positive".into()));
        }
        let model = DensityModel::parse(&self.model, self.dim, self.model_param)?;
        let weight = WeightFunction::parse(&self.weight, self.beta, self.weight_factor)?;
        let spec = if self.kernel.contains("dim=") {
            self.kernel.clone()
        } else {
            format!("{} dim={}", self.kernel, self.dim)
        };
        let kernel = Kernel::parse(&spec)?;
        if kernel.dim() != self.dim {
            return Err(LabError::Config(format!(
                "kernel dimension {} does not match dim={}",
                kernel.dim(),
                self.dim
            )));
        }
        let window = BandwidthWindow::new(
            self.alpha,
            self.mu,
            SlowlyVarying::new(self.l1[0], self.l1[1])?,
            SlowlyVarying::new(self.l2[0], self.l2[1])?,
        )?;
        self.selector(&kernel)?;
        LipschitzFunctional::parse(&self.functional)?;
        Ok(Resolved {
            model,
            weight,
            kernel,
            window,
        })
    }

    /// The configured selector; cross-validation scores with `kernel`.
    pub fn selector(&self, kernel: &Kernel) -> Result<BandwidthSelector> {
        Ok(BandwidthSelector::parse(&self.selector, kernel)?)
    }

    pub fn functional(&self) -> Result<LipschitzFunctional> {
        Ok(LipschitzFunctional::parse(&self.functional)?)
    }

    pub fn t_grid(&self) -> Vec<f64> {
        geometric_t_grid(self.tail_decades, self.tail_per_decade)
    }

    /// The resolved configuration as sorted `key=value` lines, the format accepted back by
    /// [`load_config`].
    pub fn echo(&self) -> String {
        let mut out = String::new();
        if let Ok(Value::Object(map)) = serde_json::to_value(self) {
            let sorted: BTreeMap<_, _> = map.into_iter().collect();
            for (k, v) in sorted {
                let text = match v {
                    Value::Null => continue,
                    Value::String(s) => s,
                    Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                    other => other.to_string(),
                };
                let _ = writeln!(out, "{k}={text}");
            }
        }
        out
    }
}

/// Parses a config text: a JSON object when it starts with `{`, `key=value` lines otherwise
/// (`#` starts a comment line).
pub fn parse_entries(text: &str) -> Result<Map<String, Value>> {
    let trimmed = text.trim_start_matches('\u{feff}').trim_start();
    if trimmed.starts_with('{') {
        return match serde_json::from_str(trimmed)? {
            Value::Object(map) => Ok(map),
            _ => Err(LabError::Config("JSON config must be an object".into())),
        };
    }
    let mut map = Map::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = parse_assignment(line).map_err(|e| LabError::Config(format!("line {}: {e}", lineno + 1)))?;
        map.insert(k, v);
    }
    Ok(map)
}

/// Parses one `key=value` assignment. Values that read as JSON keep their type; lists may be
/// written comma separated.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, Value), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let key = k.trim();
    if key.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    let v = v.trim();
    let value = if LIST_KEYS.contains(&key) && !v.starts_with('[') {
        Value::Array(v.split(',').map(|p| scalar(p.trim())).collect())
    } else {
        scalar(v)
    };
    Ok((key.to_string(), value))
}

const LIST_KEYS: [&str; 4] = ["n_list", "centering_n_list", "l1", "l2"];

fn scalar(v: &str) -> Value {
    serde_json::from_str::<Value>(v).unwrap_or_else(|_| Value::String(v.to_string()))
}

/// Merges the layers (later wins), rejects unknown keys and applies the defaults.
pub fn resolve_entries(layers: &[Map<String, Value>]) -> Result<ExperimentConfig> {
    let known = ExperimentConfig::known_keys();
    let mut merged = Map::new();
    for layer in layers {
        for (k, v) in layer {
            merged.insert(k.clone(), v.clone());
        }
    }
    let unknown: Vec<String> = merged.keys().filter(|k| !known.contains(k)).cloned().collect();
    if !unknown.is_empty() {
        return Err(LabError::UnknownKeys(unknown));
    }
    // a scalar where a list is expected becomes a one-element list
    for key in LIST_KEYS {
        if let Some(v) = merged.get_mut(key) {
            if !v.is_array() {
                *v = Value::Array(vec![v.take()]);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| LabError::Config(format!("type mismatch: {e}")))
}

/// Loads `path` (if any) and applies the `--set` overrides on top.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    let mut layers = Vec::new();
    if let Some(p) = path {
        let bytes = std::fs::read(p).map_err(|e| LabError::io(p, e))?;
        let text =
            String::from_utf8(bytes).map_err(|_| LabError::Config(format!("{} is not valid UTF-8", p.display())))?;
        layers.push(parse_entries(&text)?);
    }
    let mut set = Map::new();
    for o in overrides {
        let (k, v) = parse_assignment(o).map_err(LabError::Config)?;
        set.insert(k, v);
    }
    layers.push(set);
    resolve_entries(&layers)
}
