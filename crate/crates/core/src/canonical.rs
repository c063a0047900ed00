//! Canonical JSON: sorted object keys, two-space indentation, floats printed
//! with exactly six decimals. Two runs over the same data produce the same
//! bytes, so outputs can be diffed directly.

use serde::Serialize;
use serde_json::Value;

pub fn to_canonical_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => {
            out.push_str(&serde_json::to_string(v).expect("scalar serializes"))
        }
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) if !n.is_f64() => out.push_str(&u.to_string()),
            (_, Some(i), _) if !n.is_f64() => out.push_str(&i.to_string()),
            (_, _, Some(f)) => {
                let s = format!("{f:.6}");
                // Avoid "-0.000000" for tiny negatives.
                if s.trim_start_matches('-').bytes().all(|b| b == b'0' || b == b'.') {
                    out.push_str("0.000000");
                } else {
                    out.push_str(&s);
                }
            }
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(depth + 1, out);
                write_value(item, depth + 1, out);
            }
            newline(depth, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(depth + 1, out);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(&map[k], depth + 1, out);
            }
            newline(depth, out);
            out.push('}');
        }
    }
}

fn newline(depth: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorts_keys_and_fixes_floats() {
        let v = json!({"b": 1.0, "a": [1, -2, 0.1234567], "c": {"z": null, "y": "s"}, "d": -1e-9});
        let s = to_canonical_json(&v).unwrap();
        let expected = "{\n  \"a\": [\n    1,\n    -2,\n    0.123457\n  ],\n  \"b\": 1.000000,\n  \"c\": {\n    \"y\": \"s\",\n    \"z\": null\n  },\n  \"d\": 0.000000\n}\n";
        assert_eq!(s, expected);
        let parsed: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(parsed["b"], json!(1.0));
    }

    #[test]
    fn empty_containers() {
        assert_eq!(to_canonical_json(&json!({"a": [], "b": {}})).unwrap(), "{\n  \"a\": [],\n  \"b\": {}\n}\n");
    }
}
