//! Canonical reports: a key-sorted JSON tree rendered either as JSON or as
//! indented `key: value` text. Exact quantities are strings such as `3/4`.

use crjet_core::invariants::{Bounded, IdentityReport};
use crjet_core::scalar::{fmt_rational, CScalar, Rational};
use serde_json::{json, Map, Value};

pub const SCHEMA_VERSION: u64 = 1;

pub struct Report {
    pub command: String,
    pub result: Value,
    pub passed: bool,
}

impl Report {
    pub fn new(command: &str, result: Value, passed: bool) -> Self {
        Report { command: command.into(), result, passed }
    }

    fn tree(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "passed": self.passed,
            "result": self.result,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.tree()).expect("serializable");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Value::Object(map) = self.tree() {
            write_object(&mut out, &map, 0);
        }
        out
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            self.to_json()
        } else {
            self.to_text()
        }
    }
}

fn scalar_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("none".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) if s.is_empty() => Some("\"\"".into()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => Some(format!(
            "[{}]",
            items.iter().map(|i| scalar_text(i).expect("scalar")).collect::<Vec<_>>().join(", ")
        )),
        _ => None,
    }
}

fn write_object(out: &mut String, map: &Map<String, Value>, indent: usize) {
    for (k, v) in map {
        write_entry(out, k, v, indent);
    }
}

fn write_entry(out: &mut String, key: &str, v: &Value, indent: usize) {
    let pad = "  ".repeat(indent);
    if let Some(s) = scalar_text(v) {
        out.push_str(&format!("{pad}{key}: {s}\n"));
        return;
    }
    out.push_str(&format!("{pad}{key}:\n"));
    match v {
        Value::Object(map) => write_object(out, map, indent + 1),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                write_entry(out, &format!("[{i}]"), item, indent + 1);
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

pub fn rational(r: &Rational) -> Value {
    Value::String(fmt_rational(r))
}

pub fn scalar(c: &CScalar) -> Value {
    Value::String(c.to_string())
}

/// Finite values as numbers, the "not found up to k" marker as `∞@k`.
pub fn bounded(b: Bounded) -> Value {
    match b {
        Bounded::Finite(v) => json!(v),
        Bounded::Infinite { .. } => Value::String(b.to_string()),
    }
}

pub fn identity(r: &IdentityReport) -> Value {
    json!({
        "name": r.name,
        "checked": r.checked,
        "vacuous": r.vacuous,
        "note": r.note,
        "passed": r.passed(),
        "violations": r.violations,
    })
}

/// Tuples are written 1-based, as in the frame labels.
pub fn tuple(t: &[usize]) -> Value {
    json!(t.iter().map(|a| a + 1).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crjet_core::scalar::rat;

    #[test]
    fn text_is_sorted_and_indented() {
        let r = Report::new(
            "demo",
            json!({"z": 1, "a": {"list": [1, 2], "x": rational(&rat(-3, 4))}, "m": [{"k": bounded(Bounded::Infinite { bound: 6 })}]}),
            true,
        );
        assert_eq!(
            r.to_text(),
            "command: demo\npassed: true\nresult:\n  a:\n    list: [1, 2]\n    x: -3/4\n  m:\n    [0]:\n      k: ∞@6\n  z: 1\nschema_version: 1\n"
        );
        assert!(r.to_json().starts_with("{\n  \"command\": \"demo\""));
    }
}
