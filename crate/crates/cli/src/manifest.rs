//! `manifest.json`: config echo, input hash, per-stage results and timings.
//!
//! Layout (schema `hhdmft-manifest/1`):
//!
//! | key          | type              | content                                      |
//! |--------------|-------------------|----------------------------------------------|
//! | `schema`     | string            | always `hhdmft-manifest/1`                   |
//! | `command`    | string            | subcommand that produced the run             |
//! | `input_hash` | string, 64 hex    | SHA-256 of `blob <len>\0<config TOML>`, with  |
//! |              |                   | `output_dir` left empty                      |
//! | `config`     | object            | the resolved configuration, every default    |
//! | `results`    | object            | stage results keyed by stage name            |
//! | `artifacts`  | array of strings  | files written next to the manifest           |
//! | `timings_s`  | object of numbers | wall-clock seconds per stage                 |
//!
//! `timings_s` is the only part that differs between reruns of the same
//! configuration and seed.

use std::collections::BTreeMap;

use hhdmft_core::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SCHEMA: &str = "hhdmft-manifest/1";

pub const COMMANDS: [&str; 8] = [
    "ed", "vqe", "kvqa", "spectrum", "dmft", "trotter", "vha", "compare",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub input_hash: String,
    pub config: RunConfig,
    pub results: BTreeMap<String, Value>,
    pub artifacts: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            schema: SCHEMA.to_string(),
            command: command.to_string(),
            input_hash: input_hash(config),
            config: config.clone(),
            results: BTreeMap::new(),
            artifacts: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }
}

/// Hash of everything that determines the numbers; the output location is
/// not part of it.
pub fn input_hash(config: &RunConfig) -> String {
    let mut c = config.clone();
    c.output_dir = Default::default();
    content_hash(c.to_toml().as_bytes())
}

/// Git-style object hash: SHA-256 over `blob <len>\0` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn expect<'a>(v: &'a Value, key: &str) -> Result<&'a Value, String> {
    v.get(key).ok_or_else(|| format!("missing key `{key}`"))
}

/// Check a parsed manifest against the documented layout.
pub fn validate_manifest(v: &Value) -> Result<(), String> {
    let obj = v.as_object().ok_or("manifest must be an object")?;
    for key in obj.keys() {
        if ![
            "schema",
            "command",
            "input_hash",
            "config",
            "results",
            "artifacts",
            "timings_s",
        ]
        .contains(&key.as_str())
        {
            return Err(format!("unexpected key `{key}`"));
        }
    }
    if expect(v, "schema")?.as_str() != Some(SCHEMA) {
        return Err(format!("`schema` must be \"{SCHEMA}\""));
    }
    let command = expect(v, "command")?
        .as_str()
        .ok_or("`command` must be a string")?;
    if !COMMANDS.contains(&command) {
        return Err(format!("unknown command `{command}`"));
    }
    let hash = expect(v, "input_hash")?
        .as_str()
        .ok_or("`input_hash` must be a string")?;
    if hash.len() != 64 || !hash.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err("`input_hash` must be 64 hex digits".into());
    }
    let config: RunConfig = serde_json::from_value(expect(v, "config")?.clone())
        .map_err(|e| format!("`config` does not describe a run configuration: {e}"))?;
    if input_hash(&config) != hash {
        return Err("`input_hash` does not match `config`".into());
    }
    if !expect(v, "results")?.is_object() {
        return Err("`results` must be an object".into());
    }
    let artifacts = expect(v, "artifacts")?
        .as_array()
        .ok_or("`artifacts` must be an array")?;
    if !artifacts.iter().all(Value::is_string) {
        return Err("`artifacts` must hold file names".into());
    }
    let timings = expect(v, "timings_s")?
        .as_object()
        .ok_or("`timings_s` must be an object")?;
    if !timings.values().all(Value::is_number) {
        return Err("`timings_s` values must be numbers".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::to_json;
    use hhdmft_core::{parse_config, ModelParams, MuConvention};

    fn sample() -> Manifest {
        let cfg = RunConfig::for_model(&ModelParams::representative(), MuConvention::HalfFilling)
            .unwrap();
        let mut m = Manifest::new("ed", &cfg);
        m.results
            .insert("ed".into(), serde_json::json!({ "e0": -2.6238 }));
        m.artifacts.push("ed_poles.csv".into());
        m.timings_s.insert("ed".into(), 0.01);
        m
    }

    #[test]
    fn git_blob_hash() {
        assert_eq!(
            content_hash(b""),
            "473a0f4c3be8a93681a267e3b1e9a7dcda1185436fe141f7749120a303721813"
        );
    }

    #[test]
    fn written_manifest_validates_and_round_trips() {
        let m = sample();
        let text = to_json(&m);
        let v: Value = serde_json::from_str(&text).unwrap();
        validate_manifest(&v).unwrap();
        let back: Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(parse_config(&back.config.to_toml()).unwrap(), m.config);
    }

    #[test]
    fn schema_violations_are_reported() {
        let mut v: Value = serde_json::from_str(&to_json(&sample())).unwrap();
        v["input_hash"] = Value::String("abc".into());
        assert!(validate_manifest(&v).is_err());
        let mut v: Value = serde_json::from_str(&to_json(&sample())).unwrap();
        v["config"]["model"]["U"] = serde_json::json!(5.0);
        assert!(validate_manifest(&v).unwrap_err().contains("input_hash"));
        let mut v: Value = serde_json::from_str(&to_json(&sample())).unwrap();
        v["extra"] = Value::Null;
        assert!(validate_manifest(&v).is_err());
    }
}
