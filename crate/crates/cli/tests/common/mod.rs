#![allow(dead_code)]

use std::path::Path;

use serde_json::{json, Value};
use sspe_tuner::RunConfig;

/// Merge `overrides` into a small single-agent config writing to `dir`.
pub fn config(dir: &Path, overrides: Value) -> RunConfig {
    let mut base = json!({
        "out_dir": dir,
        "env": { "horizon": 20 },
        "training": { "episodes": 2 },
        "evaluation": { "fps": [10, 60], "batches": 20 }
    });
    merge(&mut base, overrides);
    RunConfig::from_json(&base.to_string()).expect("test config is valid")
}

pub fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, o) => *b = o,
    }
}

pub fn noise_off() -> Value {
    json!({ "sim": { "cost_model": { "noise_enabled": false } } })
}
