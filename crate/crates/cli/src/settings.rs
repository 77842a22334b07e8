//! Setting resolution: flag, then `TPOINT_<KEY>` environment variable, then
//! the `--config` JSON file, then the built-in default.

use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, Context, Result};
use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

#[derive(Debug, Default)]
pub struct Settings {
    file: Map<String, Value>,
    resolved: Map<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))? {
                    Value::Object(m) => m,
                    _ => return Err(anyhow!("config {} must hold a JSON object", p.display())),
                }
            }
        };
        Ok(Settings {
            file,
            resolved: Map::new(),
        })
    }

    pub fn env_name(key: &str) -> String {
        format!("TPOINT_{}", key.to_uppercase().replace('-', "_"))
    }

    /// Resolve `key` and remember the value for the manifest.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + DeserializeOwned + serde::Serialize + Clone,
        T::Err: std::fmt::Display,
    {
        let value = if let Some(v) = flag {
            v
        } else if let Ok(raw) = std::env::var(Self::env_name(key)) {
            raw.parse()
                .map_err(|e| anyhow!("invalid {} value `{raw}`: {e}", Self::env_name(key)))?
        } else if let Some(v) = self.file.get(key) {
            serde_json::from_value(v.clone()).with_context(|| format!("invalid `{key}` in config file"))?
        } else {
            default
        };
        self.resolved.insert(key.to_string(), serde_json::to_value(&value)?);
        Ok(value)
    }

    /// Record a value that is not subject to resolution.
    pub fn note(&mut self, key: &str, value: impl serde::Serialize) {
        self.resolved
            .insert(key.to_string(), serde_json::to_value(value).expect("settings serialize"));
    }

    pub fn resolved(&self) -> &Map<String, Value> {
        &self.resolved
    }
}
