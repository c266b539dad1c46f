//! Flat `key = value` experiment configs.
//!
//! The grammar is the flat subset of TOML: strings are quoted, vectors are bracketed
//! and comma separated, matrices are lists of vectors. Tables are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use toml::{Table, Value};
use tweedie_prox::Vector;

use crate::error::{CliError, Result};
use crate::registry::{self, Experiment};

/// Keys accepted by every experiment.
pub const COMMON_KEYS: [&str; 3] = ["experiment", "output_dir", "seed"];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    source: String,
    table: Table,
    /// Raw command-line assignments applied on top of the file, by key.
    pub overrides: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::ConfigInvalid(msg) => CliError::ConfigInvalid(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| CliError::ConfigInvalid(e.to_string()))?;
        let config = Self {
            source: text.to_string(),
            table,
            overrides: BTreeMap::new(),
        };
        for (key, value) in &config.table {
            if matches!(value, Value::Table(_)) || value.as_array().is_some_and(|a| a.iter().any(Value::is_table)) {
                return Err(config.violation(key, "nested tables are not supported"));
            }
        }
        Ok(config)
    }

    /// Applies `key=value`; the value is read as a config value, or as a bare string.
    pub fn set_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::ConfigInvalid(format!("override `{assignment}` is not of the form key=value")))?;
        let (key, raw) = (key.trim(), raw.trim());
        if key.is_empty() {
            return Err(CliError::ConfigInvalid(format!("override `{assignment}` has an empty key")));
        }
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        if value.is_table() {
            return Err(CliError::ConfigInvalid(format!("override `{key}`: nested tables are not supported")));
        }
        self.table.insert(key.to_string(), value);
        self.overrides.insert(key.to_string(), raw.to_string());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.table.insert(key.to_string(), value);
    }

    pub fn table(&self) -> &Table {
        &self.table
    }

    pub fn experiment_name(&self) -> Result<&str> {
        match self.table.get("experiment") {
            Some(Value::String(s)) => Ok(s),
            Some(_) => Err(self.violation("experiment", "expected a string")),
            None => Err(CliError::ConfigInvalid("missing required key `experiment`".into())),
        }
    }

    pub fn experiment(&self) -> Result<&'static Experiment> {
        let name = self.experiment_name()?;
        registry::find(name).ok_or_else(|| {
            self.violation(
                "experiment",
                &format!("unknown experiment `{name}` (see `list` for the registry)"),
            )
        })
    }

    pub fn seed(&self) -> Result<u64> {
        match self.table.get("seed") {
            None => Ok(0),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as u64),
            Some(_) => Err(self.violation("seed", "expected a nonnegative integer")),
        }
    }

    pub fn output_dir(&self) -> Result<Option<PathBuf>> {
        match self.table.get("output_dir") {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
            Some(_) => Err(self.violation("output_dir", "expected a string")),
        }
    }

    /// Rejects keys the experiment does not document.
    pub fn check_keys(&self, experiment: &Experiment) -> Result<()> {
        let unknown: Vec<String> = self
            .table
            .keys()
            .filter(|k| !COMMON_KEYS.contains(&k.as_str()) && !experiment.keys.iter().any(|s| s.name == k.as_str()))
            .map(|k| match self.line_of(k) {
                Some(line) => format!("`{k}` (line {line})"),
                None => format!("`{k}` (override)"),
            })
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::ConfigInvalid(format!(
                "unknown key(s) for `{}`: {}",
                experiment.name,
                unknown.join(", ")
            )))
        }
    }

    /// Line of the first `key = ...` assignment in the source file, 1-based.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        self.source.lines().position(|line| {
            let line = line.trim_start();
            line.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
    }

    pub fn violation(&self, key: &str, message: &str) -> CliError {
        let place = if self.overrides.contains_key(key) {
            "override".to_string()
        } else {
            match self.line_of(key) {
                Some(line) => format!("line {line}"),
                None => "default".to_string(),
            }
        };
        CliError::ConfigInvalid(format!("key `{key}` ({place}): {message}"))
    }

    pub fn params(&self) -> Params<'_> {
        Params { config: self }
    }

    /// The config as JSON, for the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.table).unwrap_or(serde_json::Value::Null)
    }
}

/// Typed, defaulted access to experiment parameters.
#[derive(Clone, Copy)]
pub struct Params<'a> {
    config: &'a ExperimentConfig,
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl<'a> Params<'a> {
    pub fn config(&self) -> &'a ExperimentConfig {
        self.config
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.config.table.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.get(key).is_some()
    }

    pub fn violation(&self, key: &str, message: &str) -> CliError {
        self.config.violation(key, message)
    }

    pub fn f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => as_f64(v).ok_or_else(|| self.violation(key, "expected a number")),
        }
    }

    pub fn usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(Value::Integer(i)) if *i >= 0 => Ok(*i as usize),
            Some(_) => Err(self.violation(key, "expected a nonnegative integer")),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String> {
        match self.get(key) {
            None => Ok(default.to_string()),
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => Err(self.violation(key, "expected a string")),
        }
    }

    pub fn f64_list(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(as_f64)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.violation(key, "expected a list of numbers")),
            Some(v) => as_f64(v)
                .map(|x| vec![x])
                .ok_or_else(|| self.violation(key, "expected a list of numbers")),
        }
    }

    pub fn usize_list(&self, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.violation(key, "expected a list of nonnegative integers")),
            Some(_) => Err(self.violation(key, "expected a list of nonnegative integers")),
        }
    }

    pub fn string_list(&self, key: &str, default: &[&str]) -> Result<Vec<String>> {
        match self.get(key) {
            None => Ok(default.iter().map(|s| s.to_string()).collect()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.violation(key, "expected a list of strings")),
            Some(Value::String(s)) => Ok(vec![s.clone()]),
            Some(_) => Err(self.violation(key, "expected a list of strings")),
        }
    }

    pub fn vector(&self, key: &str, default: &[f64]) -> Result<Vector> {
        Ok(Vector::from_vec(self.f64_list(key, default)?))
    }

    /// A list of equal-length numeric lists.
    pub fn rows(&self, key: &str, default: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let rows = match self.get(key) {
            None => default.iter().map(|r| r.to_vec()).collect(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|row| row.as_array().and_then(|r| r.iter().map(as_f64).collect::<Option<Vec<_>>>()))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| self.violation(key, "expected a list of lists of numbers"))?,
            Some(_) => return Err(self.violation(key, "expected a list of lists of numbers")),
        };
        let rows: Vec<Vec<f64>> = rows;
        if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len() || r.is_empty()) {
            return Err(self.violation(key, "rows must be nonempty and of equal length"));
        }
        Ok(rows)
    }
}
