//! `section.key=value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Any key can be
//! overridden from the environment as `PENGAUGE_<KEY>`, with the key
//! upper-cased and dots replaced by underscores (`net.pitch` becomes
//! `PENGAUGE_NET_PITCH`).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "PENGAUGE_";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", i + 1)));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Applies `PENGAUGE_*` overrides from the process environment.
    pub fn with_env(self) -> Self {
        self.with_overrides(std::env::vars())
    }

    /// Applies overrides from `(name, value)` pairs shaped like environment
    /// variables. Variables for keys not present in the file are added too.
    pub fn with_overrides(mut self, vars: impl IntoIterator<Item = (String, String)>) -> Self {
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let existing = self.values.keys().find(|k| env_name(k) == name).cloned();
            let key = existing.unwrap_or_else(|| rest.to_ascii_lowercase().replacen('_', ".", 1));
            self.values.insert(key, value);
        }
        self
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.get_str(key)
            .ok_or_else(|| Error::Config(format!("missing config key `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get_str(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("`{key}` = `{v}`: {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing config key `{key}`")))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}

/// Environment variable name for a config key.
pub fn env_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.to_ascii_uppercase().replace('.', "_"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let c = Config::parse("# net\nnet.pitch = 0.025\n\nnet.twine=0.002\nseed=7\n").unwrap();
        assert_eq!(c.get::<f64>("net.pitch").unwrap(), Some(0.025));
        assert_eq!(c.require::<u64>("seed").unwrap(), 7);
        assert_eq!(c.get::<f64>("cam.focal").unwrap(), None);
        assert!(c.require::<f64>("cam.focal").is_err());
        assert!(Config::parse("no equals sign").is_err());
        assert!(Config::parse("=3").is_err());
    }

    #[test]
    fn bad_values_name_the_key() {
        let c = Config::parse("net.pitch=abc").unwrap();
        let err = c.get::<f64>("net.pitch").unwrap_err().to_string();
        assert!(err.contains("net.pitch"), "{err}");
    }

    #[test]
    fn env_overrides() {
        let c = Config::parse("net.pitch=0.025\nsim.speed_target=0.15").unwrap();
        let c = c.with_overrides([
            ("PENGAUGE_NET_PITCH".to_string(), "0.03".to_string()),
            ("PENGAUGE_SIM_SPEED_TARGET".to_string(), "0.2".to_string()),
            ("PENGAUGE_SCENE_SEED".to_string(), "9".to_string()),
            ("HOME".to_string(), "/root".to_string()),
        ]);
        assert_eq!(c.get_str("net.pitch"), Some("0.03"));
        assert_eq!(c.get_str("sim.speed_target"), Some("0.2"));
        assert_eq!(c.get_str("scene.seed"), Some("9"));
        assert_eq!(c.keys().count(), 3);
        assert_eq!(env_name("sim.speed_target"), "PENGAUGE_SIM_SPEED_TARGET");
    }
}
