//! Canonical JSON formatting.
//!
//! Every JSON document the framework writes goes through this writer so that
//! re-serializing an unchanged document is byte-identical: object keys are
//! sorted, floats are rounded to 12 significant digits and printed in their
//! shortest round-trip form, and indentation is fixed at two spaces.

use serde_json::Value;

/// Round a float to 12 significant decimal digits.
///
/// Rounding is idempotent: the nearest f64 to a 12-digit decimal rounds back
/// to the same decimal. `-0.0` normalizes to `0.0`.
pub fn canon_f64(x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Round every float leaf of a JSON value in place.
pub fn canonicalize(value: &mut Value) {
    match value {
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap();
                if let Some(canon) = serde_json::Number::from_f64(canon_f64(x)) {
                    *n = canon;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Serialize a JSON value canonically, with a trailing newline.
pub fn to_canonical_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, value: &Value, indent: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => write_number(out, n),
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("string encodes")),
        Value::Array(items) => write_array(out, items, indent),
        Value::Object(map) => write_object(out, map, indent),
    }
}

fn write_number(out: &mut String, n: &serde_json::Number) {
    if n.is_f64() {
        let x = canon_f64(n.as_f64().unwrap());
        match serde_json::Number::from_f64(x) {
            Some(canon) => out.push_str(&canon.to_string()),
            None => out.push_str("null"),
        }
    } else {
        out.push_str(&n.to_string());
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_array(out: &mut String, items: &[Value], indent: usize) {
    if items.is_empty() {
        out.push_str("[]");
        return;
    }
    // Arrays of scalars stay on one line; nested arrays get one row per line.
    if items.iter().all(is_scalar) {
        out.push('[');
        for (i, item) in items.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_value(out, item, indent);
        }
        out.push(']');
    } else {
        out.push_str("[\n");
        let inner = indent + 1;
        for (i, item) in items.iter().enumerate() {
            push_indent(out, inner);
            write_value(out, item, inner);
            if i + 1 < items.len() {
                out.push(',');
            }
            out.push('\n');
        }
        push_indent(out, indent);
        out.push(']');
    }
}

fn write_object(out: &mut String, map: &serde_json::Map<String, Value>, indent: usize) {
    if map.is_empty() {
        out.push_str("{}");
        return;
    }
    out.push_str("{\n");
    let inner = indent + 1;
    // serde_json's map is BTreeMap-backed, so iteration order is sorted.
    for (i, (key, item)) in map.iter().enumerate() {
        push_indent(out, inner);
        out.push_str(&serde_json::to_string(key).expect("key encodes"));
        out.push_str(": ");
        write_value(out, item, inner);
        if i + 1 < map.len() {
            out.push(',');
        }
        out.push('\n');
    }
    push_indent(out, indent);
    out.push('}');
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}
