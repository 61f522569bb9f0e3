//! Canonical JSON: sorted keys and floats rounded to 6 significant digits.

use serde::Serialize;
use serde_json::{Number, Value};

/// Rounds `x` to 6 significant digits.
pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().expect("formatted float parses")
}

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig6(n.as_f64().expect("f64 number"));
            *v = Number::from_f64(x).map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Serializes `payload` canonically. `serde_json::Map` is ordered by key
/// unless the `preserve_order` feature is on, which this crate never enables.
pub fn to_canonical_bytes<T: Serialize>(payload: &T) -> Vec<u8> {
    let mut v = serde_json::to_value(payload).expect("payload serializes");
    canonicalize(&mut v);
    serde_json::to_vec(&v).expect("value serializes")
}
