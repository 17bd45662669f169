#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn mbaf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbaf"))
        .args(args)
        .output()
        .expect("spawn mbaf")
}

pub fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Validation errors of `instance` against `schemas/<name>.schema.json`.
pub fn schema_errors(name: &str, instance: &Value) -> Vec<String> {
    let schema = read_json(&workspace_root().join(format!("schemas/{name}.schema.json")));
    let validator = jsonschema::validator_for(&schema).expect("schema compiles");
    validator
        .iter_errors(instance)
        .map(|e| format!("{e} at {}", e.instance_path))
        .collect()
}

/// The smoke config with `edit` applied, written under `dir`.
pub fn smoke_config(dir: &Path, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut cfg = read_json(&workspace_root().join("configs/smoke.json"));
    cfg["out_dir"] = Value::String(dir.join("out").to_string_lossy().into_owned());
    edit(&mut cfg);
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}
