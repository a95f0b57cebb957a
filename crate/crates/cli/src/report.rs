//! JSON report assembly. Every float is written with 17 significant digits
//! so reruns compare byte for byte.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Number, Value};

/// Rewrites every non-integer number as `{:.16e}`; non-finite values become null.
pub fn fix_numbers(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => match n.as_f64() {
            Some(x) if x.is_finite() => float(x),
            _ => Value::Null,
        },
        Value::Array(a) => Value::Array(a.into_iter().map(fix_numbers).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, fix_numbers(v))).collect())
        }
        other => other,
    }
}

pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Number::from_str(&format!("{x:.16e}"))
        .map(Value::Number)
        .unwrap_or(Value::Null)
}

pub fn to_value<T: Serialize>(t: &T) -> Value {
    fix_numbers(serde_json::to_value(t).expect("report types serialize"))
}

/// Top-level report `{input, settings, points, summary}` plus optional meta.
pub struct Report {
    pub input: Value,
    pub settings: Value,
    pub points: Vec<Value>,
    pub max_residuals: Map<String, Value>,
    pub verdicts: Map<String, Value>,
    pub extra: Map<String, Value>,
}

impl Report {
    pub fn new(input: Value, settings: Value) -> Self {
        Report {
            input,
            settings,
            points: Vec::new(),
            max_residuals: Map::new(),
            verdicts: Map::new(),
            extra: Map::new(),
        }
    }

    /// Tracks the running maximum of a residual.
    pub fn residual(&mut self, name: &str, value: f64) {
        let prev = self
            .max_residuals
            .get(name)
            .and_then(Value::as_f64)
            .unwrap_or(f64::NEG_INFINITY);
        if value > prev || !self.max_residuals.contains_key(name) {
            self.max_residuals.insert(name.to_string(), float(value));
        }
    }

    pub fn verdict(&mut self, name: &str, passed: bool) {
        self.verdicts.insert(name.to_string(), Value::Bool(passed));
    }

    pub fn all_passed(&self) -> bool {
        self.verdicts.values().all(|v| v.as_bool().unwrap_or(true))
    }

    pub fn into_json(self, meta: bool) -> Value {
        let mut top = Map::new();
        if meta {
            let secs = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let mut m = Map::new();
            m.insert("tool".into(), Value::String("soliton".into()));
            m.insert(
                "version".into(),
                Value::String(env!("CARGO_PKG_VERSION").into()),
            );
            m.insert("generated_unix".into(), Value::from(secs));
            top.insert("meta".into(), Value::Object(m));
        }
        top.insert("input".into(), self.input);
        top.insert("settings".into(), self.settings);
        top.insert("points".into(), Value::Array(self.points));
        let mut summary = Map::new();
        summary.insert("max_residuals".into(), Value::Object(self.max_residuals));
        summary.insert("verdicts".into(), Value::Object(self.verdicts));
        top.insert("summary".into(), Value::Object(summary));
        for (k, v) in self.extra {
            top.insert(k, v);
        }
        fix_numbers(Value::Object(top))
    }
}

/// Writes `value` to `path`, or to stdout when `path` is `None`.
pub fn emit(value: &Value, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(float(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(float(4.0).to_string(), "4.0000000000000000e+0");
        assert_eq!(float(f64::NAN), Value::Null);
        let v = fix_numbers(serde_json::json!({"a": [1, 2.5], "b": 3}));
        assert_eq!(v.to_string(), r#"{"a":[1,2.5000000000000000e+0],"b":3}"#);
    }
}
