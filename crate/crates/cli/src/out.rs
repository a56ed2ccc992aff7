//! Canonical, reproducible text output.
//!
//! Every float is rendered with 17 significant digits (`{:.16e}`), enough to
//! round-trip any f64 exactly, and object keys are emitted in sorted order,
//! so identical results always serialize to identical bytes.

use hypercot::{Error, Result};
use ndarray::{Array1, Array2};
use serde_json::Value;

/// 17-significant-digit float, value-preserving under parse → format.
pub fn fmt_f64(v: f64) -> Result<String> {
    if !v.is_finite() {
        return Err(Error::Internal(format!(
            "non-finite value {v} cannot be serialized"
        )));
    }
    Ok(format!("{v:.16e}"))
}

fn write_value(v: &Value, indent: usize, out: &mut String) -> Result<()> {
    let pad = "  ".repeat(indent);
    let pad_in = "  ".repeat(indent + 1);
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| Error::Internal(format!("unrepresentable number {n}")))?;
                out.push_str(&fmt_f64(f)?);
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization cannot fail"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else if items.iter().all(|i| matches!(i, Value::Number(_))) {
                // numeric rows stay on one line for readable matrices
                out.push('[');
                for (k, item) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    write_value(item, 0, out)?;
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for (k, item) in items.iter().enumerate() {
                    out.push_str(&pad_in);
                    write_value(item, indent + 1, out)?;
                    if k + 1 < items.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
            } else {
                out.push_str("{\n");
                for (k, (key, item)) in map.iter().enumerate() {
                    out.push_str(&pad_in);
                    out.push_str(
                        &serde_json::to_string(key).expect("string serialization cannot fail"),
                    );
                    out.push_str(": ");
                    write_value(item, indent + 1, out)?;
                    if k + 1 < map.len() {
                        out.push(',');
                    }
                    out.push('\n');
                }
                out.push_str(&pad);
                out.push('}');
            }
        }
    }
    Ok(())
}

/// Render a JSON value canonically, with a trailing newline.
pub fn render(v: &Value) -> Result<String> {
    let mut out = String::new();
    write_value(v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn vec_value(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|&x| Value::from(x)).collect())
}

pub fn array1_value(v: &Array1<f64>) -> Value {
    Value::Array(v.iter().map(|&x| Value::from(x)).collect())
}

pub fn array2_value(m: &Array2<f64>) -> Value {
    Value::Array(
        m.outer_iter()
            .map(|row| Value::Array(row.iter().map(|&x| Value::from(x)).collect()))
            .collect(),
    )
}

pub fn labels_value(labels: &[String]) -> Value {
    Value::Array(labels.iter().map(|l| Value::from(l.as_str())).collect())
}
