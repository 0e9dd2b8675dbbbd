#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_record-edge"));
    c.env_remove("RECORD_EDGE_SEED");
    c
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn record-edge")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs with `--format json` and no output directory, returning the document.
pub fn run_json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = run(&all);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

pub fn schema(command: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{command}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Writes a synthetic results file drawn from `(a, sigma)` and returns its path.
pub fn simulate(dir: &Path, seed: u64, extra: &[&str]) -> PathBuf {
    let path = dir.join(format!("sim_{seed}.csv"));
    let seed = seed.to_string();
    let mut args = vec![
        "simulate",
        "--seed",
        &seed,
        "--output",
        path.to_str().unwrap(),
    ];
    args.extend(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    path
}

fn type_ok(v: &Value, t: &str) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "number" => v.is_number(),
        "integer" => v.is_i64() || v.is_u64(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

/// Checks the subset of JSON Schema used by the shipped schemas: `type`,
/// `const`, `enum`, `required`, `properties`, `items`, `additionalProperties`.
pub fn validate(v: &Value, schema: &Value, path: &str) -> Vec<String> {
    let mut errs = Vec::new();
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_ok(v, s),
            Value::Array(ts) => ts.iter().any(|t| type_ok(v, t.as_str().unwrap())),
            _ => true,
        };
        if !ok {
            errs.push(format!("{path}: expected type {t}, got {v}"));
            return errs;
        }
    }
    if let Some(c) = schema.get("const") {
        if v != c {
            errs.push(format!("{path}: expected {c}"));
        }
    }
    if let Some(Value::Array(options)) = schema.get("enum") {
        if !options.contains(v) {
            errs.push(format!("{path}: {v} not in {options:?}"));
        }
    }
    if let Value::Object(map) = v {
        if let Some(Value::Array(req)) = schema.get("required") {
            for k in req {
                if !map.contains_key(k.as_str().unwrap()) {
                    errs.push(format!("{path}: missing `{}`", k.as_str().unwrap()));
                }
            }
        }
        let props = schema.get("properties").and_then(Value::as_object);
        for (k, child) in map {
            let sub = props
                .and_then(|p| p.get(k))
                .or_else(|| schema.get("additionalProperties"));
            if let Some(sub) = sub.filter(|s| s.is_object()) {
                errs.extend(validate(child, sub, &format!("{path}.{k}")));
            }
        }
    }
    if let (Value::Array(items), Some(sub)) = (v, schema.get("items")) {
        for (i, child) in items.iter().enumerate() {
            errs.extend(validate(child, sub, &format!("{path}[{i}]")));
        }
    }
    errs
}

pub fn assert_valid(doc: &Value, command: &str) {
    let errs = validate(doc, &schema(command), "$");
    assert!(
        errs.is_empty(),
        "{command} report does not match its schema:\n{}",
        errs.join("\n")
    );
}
