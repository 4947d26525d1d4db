use std::collections::BTreeMap;
use std::path::Path;

use haarforge::matrix_engine::EnsembleConfig;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

/// Keys accepted in a JSON config file.
pub const CONFIG_KEYS: [&str; 8] = ["N", "m", "ell", "k", "theta", "seed", "samples", "suite"];

/// Suites built on the partition-algebra calculus, which need N >= 2k.
pub const PARTITION_SUITES: [&str; 1] = ["diagram"];

/// Ensemble parameters plus suite-level settings, defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub ensemble: EnsembleConfig,
    pub samples: Option<usize>,
    pub suite: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { ensemble: EnsembleConfig::default(), samples: None, suite: None }
    }
}

fn as_count(key: &str, v: &Value, bad: &mut Vec<String>) -> Option<usize> {
    match v.as_u64() {
        Some(x) => Some(x as usize),
        None => {
            bad.push(format!("{key} (expected a non-negative integer)"));
            None
        }
    }
}

/// Validates a parsed JSON object against the config schema.
pub fn config_from_value(v: &Value) -> Result<RunConfig, CliError> {
    let Some(obj) = v.as_object() else {
        return Err(CliError::Config("config must be a JSON object".into()));
    };
    let unknown: Vec<&str> = obj.keys().map(String::as_str).filter(|k| !CONFIG_KEYS.contains(k)).collect();
    if !unknown.is_empty() {
        return Err(CliError::Config(format!("unknown config keys: {}", unknown.join(", "))));
    }
    let mut cfg = RunConfig::default();
    let mut bad = Vec::new();
    let e = &mut cfg.ensemble;
    for (key, val) in obj {
        match key.as_str() {
            "N" => e.n = as_count(key, val, &mut bad).unwrap_or(e.n),
            "m" => e.m = as_count(key, val, &mut bad).unwrap_or(e.m),
            "ell" => e.ell = as_count(key, val, &mut bad).unwrap_or(e.ell),
            "k" => e.k = as_count(key, val, &mut bad).unwrap_or(e.k),
            "seed" => match val.as_u64() {
                Some(s) => e.seed = s,
                None => bad.push("seed (expected a non-negative integer)".into()),
            },
            "theta" => match val {
                Value::Null => e.theta = None,
                _ => match val.as_f64() {
                    Some(t) => e.theta = Some(t),
                    None => bad.push("theta (expected a number)".into()),
                },
            },
            "samples" => cfg.samples = as_count(key, val, &mut bad),
            "suite" => match val.as_str() {
                Some(s) => cfg.suite = Some(s.to_string()),
                None => bad.push("suite (expected a string)".into()),
            },
            _ => unreachable!("keys checked above"),
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Config(format!("invalid config values: {}", bad.join(", "))));
    }
    cfg.ensemble.validate().map_err(|err| CliError::Config(err.to_string()))?;
    if let Some(s) = &cfg.suite {
        check_stable_range(s, cfg.ensemble.n, cfg.ensemble.k)?;
    }
    Ok(cfg)
}

/// Reads and validates a JSON config file.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config_from_value(&v)
}

pub fn check_stable_range(suite: &str, n: usize, k: usize) -> Result<(), CliError> {
    if PARTITION_SUITES.contains(&suite) && n < 2 * k {
        return Err(CliError::Config(format!(
            "N={n} is below the stable range N >= 2k = {} required by the {suite} suite",
            2 * k
        )));
    }
    Ok(())
}

/// Parses "N=8,16,32;ell=1,2,4,8" into key -> values, rejecting keys outside `allowed`.
pub fn parse_grid(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, Vec<usize>>, CliError> {
    let mut out = BTreeMap::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, vals) = part
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("grid entry '{part}' is not of the form key=v1,v2")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(CliError::Usage(format!("grid key '{key}' not accepted here (allowed: {})", allowed.join(", "))));
        }
        let vals = vals
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("bad grid value '{v}' for {key}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if out.insert(key.to_string(), vals).is_some() {
            return Err(CliError::Usage(format!("grid key '{key}' given twice")));
        }
    }
    Ok(out)
}

/// The config as JSON with sorted keys, the input to the config hash.
pub fn canonical(v: &impl Serialize) -> Value {
    // serde_json maps are ordered by key, so this is canonical.
    serde_json::to_value(v).unwrap_or(Value::Object(Map::new()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_object_gives_defaults() {
        let c = config_from_value(&json!({})).unwrap();
        assert_eq!(c.ensemble, EnsembleConfig { n: 16, m: 2, ell: 4, k: 2, theta: None, seed: 0 });
    }

    #[test]
    fn explicit_theta_wins() {
        let c = config_from_value(&json!({"theta": 0.5, "m": 3})).unwrap();
        assert_eq!(c.ensemble.resolved_theta().unwrap(), 0.5);
        let c = config_from_value(&json!({"m": 3})).unwrap();
        assert_eq!(c.ensemble.resolved_theta().unwrap(), haarforge::theta_select::generator_angle(3).unwrap());
    }

    #[test]
    fn offending_keys_are_listed() {
        let err = config_from_value(&json!({"N": 4, "bogus": 1, "other": 2})).unwrap_err().to_string();
        assert!(err.contains("bogus") && err.contains("other"), "{err}");
        let err = config_from_value(&json!({"N": "four", "k": -1})).unwrap_err().to_string();
        assert!(err.contains("N") && err.contains("k"), "{err}");
    }

    #[test]
    fn stable_range_for_partition_suites() {
        let err = config_from_value(&json!({"suite": "diagram", "N": 3, "k": 2})).unwrap_err().to_string();
        assert!(err.contains("stable range"), "{err}");
        assert!(config_from_value(&json!({"suite": "diagram", "N": 4, "k": 2})).is_ok());
        assert!(config_from_value(&json!({"suite": "moments", "N": 3, "k": 2})).is_ok());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("N=8,16,32;ell=1,2,4,8", &["N", "ell"]).unwrap();
        assert_eq!(g["N"], vec![8, 16, 32]);
        assert_eq!(g["ell"], vec![1, 2, 4, 8]);
        assert!(parse_grid("m=2", &["N"]).is_err());
        assert!(parse_grid("N=a", &["N"]).is_err());
        assert!(parse_grid("N", &["N"]).is_err());
    }
}
