//! Parameter resolution: command-line flag, then config file, then default.
//! Every resolved value is recorded for the run manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use serde_json::Value;

pub struct Resolver {
    config: BTreeMap<String, Value>,
    resolved: BTreeMap<String, Value>,
}

impl Resolver {
    pub fn new(config: Option<&Path>) -> Result<Self> {
        let config = match config {
            None => BTreeMap::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                let Value::Object(map) = value else {
                    bail!("config {} must be a flat JSON object", path.display());
                };
                let mut out = BTreeMap::new();
                for (k, v) in map {
                    if v.is_object() || v.is_array() {
                        bail!("config key `{k}` must map to a string, number or boolean");
                    }
                    out.insert(k.replace('_', "-"), v);
                }
                out
            }
        };
        Ok(Resolver { config, resolved: BTreeMap::new() })
    }

    fn lookup<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let Some(v) = self.config.get(key) else {
            return Ok(None);
        };
        let text = match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        };
        text.parse::<T>().map(Some).map_err(|e| anyhow!("config key `{key}`: {e}"))
    }

    /// Flag value if given, else the config entry, else `default`.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.lookup(key)?.unwrap_or(default),
        };
        self.record(key, &value);
        Ok(value)
    }

    /// As [`Resolver::get`] for parameters without a default.
    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => self.lookup(key)?.ok_or_else(|| anyhow!("missing required parameter --{key}"))?,
        };
        self.record(key, &value);
        Ok(value)
    }

    pub fn record(&mut self, key: &str, value: &dyn Display) {
        let text = value.to_string();
        let json = if let Ok(i) = text.parse::<i64>() {
            Value::from(i)
        } else {
            text.parse::<f64>().ok().and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::String(text))
        };
        self.resolved.insert(key.to_string(), json);
    }

    pub fn resolved(&self) -> &BTreeMap<String, Value> {
        &self.resolved
    }
}
