use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named catalog entry with numeric parameters, as referenced from configs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl CatalogEntry {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Parameter value or default; rejects unknown keys.
    pub(crate) fn param(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.params.get(key).copied().unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::BadParameter {
                entry: self.name.clone(),
                param: key.to_string(),
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }

    pub(crate) fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for k in self.params.keys() {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::BadParameter {
                    entry: self.name.clone(),
                    param: k.clone(),
                    reason: format!("unknown parameter (allowed: {})", allowed.join(", ")),
                });
            }
        }
        Ok(())
    }
}
