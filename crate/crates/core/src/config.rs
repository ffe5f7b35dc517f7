//! Typed ADS parameters and configuration instances.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ads;
use crate::error::{Error, Result};
use crate::scenario::{Apply, DeltaKind, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ParamKind {
    Real { lo: f64, hi: f64 },
    Enum { values: Vec<String> },
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub module: String,
    pub name: String,
    pub kind: ParamKind,
    pub default: Value,
}

impl ParameterSpec {
    pub fn real(module: &str, name: &str, lo: f64, hi: f64, default: f64) -> Self {
        Self {
            module: module.into(),
            name: name.into(),
            kind: ParamKind::Real { lo, hi },
            default: Value::Real(default),
        }
    }

    pub fn boolean(module: &str, name: &str, default: bool) -> Self {
        Self {
            module: module.into(),
            name: name.into(),
            kind: ParamKind::Boolean,
            default: Value::Bool(default),
        }
    }

    /// `module.name`, the key used in configurations and cyber delta paths.
    pub fn key(&self) -> String {
        format!("{}.{}", self.module, self.name)
    }

    pub fn admits(&self, v: &Value) -> bool {
        match (&self.kind, v) {
            (ParamKind::Real { lo, hi }, Value::Real(x)) => x.is_finite() && *x >= *lo && *x <= *hi,
            (ParamKind::Enum { values }, Value::Label(s)) => values.iter().any(|x| x == s),
            (ParamKind::Boolean, Value::Bool(_)) => true,
            _ => false,
        }
    }

    /// Width of the real range, used to normalize cost terms.
    pub fn width(&self) -> Option<f64> {
        match self.kind {
            ParamKind::Real { lo, hi } => Some(hi - lo),
            _ => None,
        }
    }
}

/// Checks spec-level invariants: defaults in range, unique keys.
pub fn check_specs(specs: &[ParameterSpec]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for s in specs {
        if !s.admits(&s.default) {
            return Err(Error::InvalidConfig(format!(
                "default of `{}` outside its range",
                s.key()
            )));
        }
        if !seen.insert(s.key()) {
            return Err(Error::InvalidConfig(format!("duplicate parameter `{}`", s.key())));
        }
    }
    Ok(())
}

/// One value per registered parameter, keyed `module.name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CyberConfiguration {
    pub assignments: BTreeMap<String, Value>,
}

impl Default for CyberConfiguration {
    fn default() -> Self {
        Self {
            assignments: ads::parameter_specs()
                .iter()
                .map(|s| (s.key(), s.default.clone()))
                .collect(),
        }
    }
}

impl CyberConfiguration {
    /// Defaults with the given overrides applied (validated).
    pub fn with_overrides(overrides: &BTreeMap<String, Value>) -> Result<Self> {
        let mut c = Self::default();
        for (k, v) in overrides {
            c.write(k, v)?;
        }
        Ok(c)
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.assignments.get(key)
    }

    pub fn real(&self, key: &str) -> f64 {
        self.assignments
            .get(key)
            .and_then(Value::as_real)
            .unwrap_or_else(|| panic!("missing real parameter `{key}`"))
    }

    pub fn flag(&self, key: &str) -> bool {
        self.assignments
            .get(key)
            .and_then(Value::as_bool)
            .unwrap_or_else(|| panic!("missing boolean parameter `{key}`"))
    }

    /// Every spec has exactly one admissible assignment and nothing else is assigned.
    pub fn validate(&self) -> Result<()> {
        let specs = ads::parameter_specs();
        for s in specs {
            match self.assignments.get(&s.key()) {
                None => return Err(Error::InvalidConfig(format!("missing `{}`", s.key()))),
                Some(v) if !s.admits(v) => {
                    return Err(Error::InvalidConfig(format!("`{}` = {v} outside its range", s.key())))
                }
                _ => {}
            }
        }
        if self.assignments.len() != specs.len() {
            let unknown = self
                .assignments
                .keys()
                .find(|k| ads::find_spec(k).is_none())
                .cloned()
                .unwrap_or_default();
            return Err(Error::InvalidConfig(format!("unknown parameter `{unknown}`")));
        }
        Ok(())
    }
}

impl Apply for CyberConfiguration {
    const KIND: DeltaKind = DeltaKind::Cyber;

    fn read(&self, path: &str) -> Result<Value> {
        self.assignments
            .get(path)
            .cloned()
            .ok_or_else(|| Error::UnresolvedPath(path.to_string()))
    }

    fn write(&mut self, path: &str, value: &Value) -> Result<()> {
        let spec = ads::find_spec(path).ok_or_else(|| Error::UnresolvedPath(path.to_string()))?;
        if !spec.admits(value) {
            return Err(Error::InvalidDeltaEntry {
                path: path.to_string(),
                reason: format!("{value} violates the parameter range"),
            });
        }
        self.assignments.insert(path.to_string(), value.clone());
        Ok(())
    }
}

/// Normalization width for a cyber delta path.
pub fn cyber_scale(path: &str) -> Option<f64> {
    ads::find_spec(path).and_then(ParameterSpec::width)
}
