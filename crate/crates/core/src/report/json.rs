//! Canonical JSON: sorted object keys, reals rounded to 12 significant
//! digits, undefined values as `null`.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::ReadinessReport;
use crate::stats::round_sig;

fn canonicalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            *v = n
                .as_f64()
                .and_then(round_sig)
                .and_then(serde_json::Number::from_f64)
                .map_or(Value::Null, Value::Number);
        }
        Value::Array(items) => items.iter_mut().for_each(canonicalize),
        Value::Object(map) => map.values_mut().for_each(canonicalize),
        _ => {}
    }
}

/// Serializes any value canonically. `serde_json::Map` is ordered by key, so
/// going through `Value` sorts every object.
pub fn canonical_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_value(value).expect("report types serialize to JSON");
    canonicalize(&mut v);
    let mut out = serde_json::to_vec_pretty(&v).expect("values serialize");
    out.push(b'\n');
    out
}

pub fn render_json(r: &ReadinessReport) -> Vec<u8> {
    canonical_json(r)
}

pub fn parse_report(bytes: &[u8]) -> Result<ReadinessReport, serde_json::Error> {
    parse(bytes)
}

pub(crate) fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, serde_json::Error> {
    serde_json::from_slice(bytes)
}
