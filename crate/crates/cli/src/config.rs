//! Run configuration. A config file is either flat `key = value` text or a
//! single JSON object; command-line flags are applied on top of it. Every value
//! is checked when it is set, so a `RunConfig` only ever holds known keys with
//! parseable values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use cpt_squeeze::{DetuningSetting, RawParams, C64};

use crate::CliError;

pub const PARAM_KEYS: [&str; 15] = [
    "alpha", "gamma", "gamma12", "gamma1", "gamma2", "delta", "delta_p", "delta_c", "setting", "omega",
    "omega_p0", "omega_c0", "lc", "xi_steps", "g_norm",
];

pub const GRID_KEYS: [&str; 9] = [
    "omega_min",
    "omega_max",
    "omega_points",
    "delta_min",
    "delta_max",
    "delta_points",
    "w_min",
    "w_max",
    "w_points",
];

/// Ratio list for `ratio-scan`, kept alongside the grid keys so that the echo
/// in the sidecar is enough to re-run.
pub const RATIOS_KEY: &str = "ratios";

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Real,
    Count,
    Complex,
    Setting,
    List,
}

fn kind(key: &str) -> Option<Kind> {
    Some(match key {
        "xi_steps" | "omega_points" | "delta_points" | "w_points" => Kind::Count,
        "omega_p0" | "omega_c0" => Kind::Complex,
        "setting" => Kind::Setting,
        RATIOS_KEY => Kind::List,
        k if PARAM_KEYS.contains(&k) || GRID_KEYS.contains(&k) => Kind::Real,
        _ => return None,
    })
}

/// Parses `re`, or `re,im` for a complex amplitude.
pub fn parse_complex(s: &str) -> Option<C64> {
    let mut parts = s.split(',').map(str::trim);
    let re = parts.next()?.parse().ok()?;
    let im = match parts.next() {
        Some(t) => t.parse().ok()?,
        None => 0.0,
    };
    parts.next().is_none().then_some(C64::new(re, im))
}

pub fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(|t| t.trim().parse().ok()).collect()
}

fn check_value(key: &str, value: &str) -> Result<(), CliError> {
    let ok = match kind(key) {
        None => return Err(CliError::Usage(format!("unknown configuration key `{key}`"))),
        Some(Kind::Real) => f64::from_str(value).is_ok(),
        Some(Kind::Count) => usize::from_str(value).is_ok(),
        Some(Kind::Complex) => parse_complex(value).is_some(),
        Some(Kind::Setting) => DetuningSetting::from_str(value).is_ok(),
        Some(Kind::List) => parse_list(value).is_some(),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("cannot parse `{value}` as a value for `{key}`")))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let value = value.trim();
        check_value(key, value)?;
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        self.entries.get(key).map(|v| v.parse().expect("checked on insert"))
    }

    pub fn count(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|v| v.parse().expect("checked on insert"))
    }

    pub fn complex(&self, key: &str) -> Option<C64> {
        self.entries.get(key).map(|v| parse_complex(v).expect("checked on insert"))
    }

    pub fn list(&self, key: &str) -> Option<Vec<f64>> {
        self.entries.get(key).map(|v| parse_list(v).expect("checked on insert"))
    }

    pub fn setting(&self) -> DetuningSetting {
        self.entries
            .get("setting")
            .map(|v| v.parse().expect("checked on insert"))
            .unwrap_or(DetuningSetting::Symmetric)
    }

    pub fn raw_params(&self) -> RawParams {
        RawParams {
            alpha: self.real("alpha"),
            gamma: self.real("gamma"),
            gamma12: self.real("gamma12"),
            gamma1: self.real("gamma1"),
            gamma2: self.real("gamma2"),
            delta: self.real("delta"),
            delta_p: self.real("delta_p"),
            delta_c: self.real("delta_c"),
            setting: self.entries.get("setting").map(|v| v.parse().expect("checked on insert")),
            omega: self.real("omega"),
            omega_p0: self.complex("omega_p0"),
            omega_c0: self.complex("omega_c0"),
            lc: self.real("lc"),
            xi_steps: self.count("xi_steps"),
            g_norm: self.real("g_norm"),
        }
    }

    /// Reads a config file, choosing JSON when the first non-blank character is `{`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_key_values(&text)
        }
    }

    pub fn from_key_values(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
            cfg.set(key.trim(), value)?;
        }
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let map: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config is not a JSON object: {e}")))?;
        let mut cfg = RunConfig::default();
        for (key, value) in &map {
            let text = json_scalar(value)
                .ok_or_else(|| CliError::Usage(format!("unsupported JSON value for `{key}`: {value}")))?;
            cfg.set(key, &text)?;
        }
        Ok(cfg)
    }

    /// Applies every entry of `other`, overriding existing values.
    pub fn merge(&mut self, other: &RunConfig) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }
}

/// Numbers and strings map to their text; arrays of numbers join with commas,
/// which covers complex amplitudes as `[re, im]` and ratio lists.
fn json_scalar(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Array(items) => {
            let parts: Option<Vec<String>> = items.iter().map(|x| x.as_number().map(|n| n.to_string())).collect();
            parts.map(|p| p.join(","))
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_text() {
        let cfg = RunConfig::from_key_values("# comment\nalpha = 1000\n\nomega=1.0\nsetting = probe-only\n").unwrap();
        let raw = cfg.raw_params();
        assert_eq!(raw.alpha, Some(1000.0));
        assert_eq!(raw.omega, Some(1.0));
        assert_eq!(cfg.setting(), DetuningSetting::ProbeOnly);
    }

    #[test]
    fn json_object_with_complex_field() {
        let cfg = RunConfig::from_json(r#"{"alpha": 300, "omega_p0": [0.9, 0.1], "ratios": [0.5, 1]}"#).unwrap();
        assert_eq!(cfg.complex("omega_p0"), Some(C64::new(0.9, 0.1)));
        assert_eq!(cfg.list("ratios"), Some(vec![0.5, 1.0]));
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        assert!(matches!(RunConfig::from_key_values("alpah = 3"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_key_values("alpha = many"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_key_values("xi_steps = 2.5"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_key_values("no equals sign"), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_json(r#"{"alpha": {"x": 1}}"#), Err(CliError::Usage(_))));
        assert!(matches!(RunConfig::from_json("[1, 2]"), Err(CliError::Usage(_))));
    }

    #[test]
    fn merge_overrides() {
        let mut a = RunConfig::from_key_values("alpha = 1\ndelta = 0.1").unwrap();
        let b = RunConfig::from_key_values("alpha = 2").unwrap();
        a.merge(&b);
        assert_eq!(a.real("alpha"), Some(2.0));
        assert_eq!(a.real("delta"), Some(0.1));
    }

    #[test]
    fn complex_forms() {
        assert_eq!(parse_complex("1.5"), Some(C64::new(1.5, 0.0)));
        assert_eq!(parse_complex(" 1 , -2 "), Some(C64::new(1.0, -2.0)));
        assert_eq!(parse_complex("1,2,3"), None);
    }
}
