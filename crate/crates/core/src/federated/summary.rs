//! Client-side evaluation and the [`ClientSummary`] transmitted to the coordinator.

use std::collections::BTreeMap;
use std::io;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::ser::Serialize;
use serde::{Deserialize, Serialize as SerializeDerive};

use super::{ReadinessFlag, PROTOCOL_VERSION};
use crate::config::EvalConfig;
use crate::dataset::Dataset;
use crate::engine::{evaluate_as, EngineError};
use crate::report::MetricResult;

/// The only artifact that leaves a client: aggregates and flags, never rows.
#[derive(Debug, Clone, PartialEq, SerializeDerive, Deserialize)]
pub struct ClientSummary {
    pub protocol_version: u32,
    pub run_id: String,
    pub client_id: String,
    pub schema_fingerprint: String,
    pub row_count: usize,
    pub metric_results: Vec<MetricResult>,
    pub class_counts: BTreeMap<String, usize>,
    pub flags: Vec<ReadinessFlag>,
    /// RFC 3339, UTC, millisecond precision.
    pub produced_at: String,
}

pub fn evaluate_local(d: &Dataset, cfg: &EvalConfig, client_id: &str) -> Result<ClientSummary, EngineError> {
    evaluate_local_at(d, cfg, client_id, Utc::now())
}

/// [`evaluate_local`] with an explicit timestamp, for reproducible summaries.
pub fn evaluate_local_at(
    d: &Dataset,
    cfg: &EvalConfig,
    client_id: &str,
    at: DateTime<Utc>,
) -> Result<ClientSummary, EngineError> {
    let ev = evaluate_as(d, cfg, client_id)?;
    let mut metric_results = ev.results;
    metric_results.iter_mut().for_each(MetricResult::canonicalize);
    Ok(ClientSummary {
        protocol_version: PROTOCOL_VERSION,
        run_id: ev.config.run_id.clone(),
        client_id: client_id.to_string(),
        schema_fingerprint: ev.fingerprint,
        row_count: ev.row_count,
        metric_results,
        class_counts: ev.class_counts,
        flags: ev.flags,
        produced_at: at.to_rfc3339_opts(SecondsFormat::Millis, true),
    })
}

/// Width every scalar JSON token is padded to on the wire.
const SCALAR_WIDTH: usize = 24;

/// Compact JSON where every number, boolean and null occupies exactly
/// [`SCALAR_WIDTH`] bytes (padded with trailing spaces). Counts that grow with
/// the dataset therefore never change the encoded size.
struct FixedWidth;

impl FixedWidth {
    fn pad<W: ?Sized + io::Write>(w: &mut W, token: &str) -> io::Result<()> {
        debug_assert!(token.len() <= SCALAR_WIDTH);
        write!(w, "{token:<SCALAR_WIDTH$}")
    }
}

macro_rules! fixed_int {
    ($($name:ident: $t:ty),*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W, v: $t) -> io::Result<()> {
            Self::pad(w, &v.to_string())
        })*
    };
}

impl serde_json::ser::Formatter for FixedWidth {
    fn write_null<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        Self::pad(w, "null")
    }

    fn write_bool<W: ?Sized + io::Write>(&mut self, w: &mut W, v: bool) -> io::Result<()> {
        Self::pad(w, if v { "true" } else { "false" })
    }

    fixed_int!(write_i8: i8, write_i16: i16, write_i32: i32, write_i64: i64,
        write_u8: u8, write_u16: u16, write_u32: u32, write_u64: u64);

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }

    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        // 17 significant digits round-trip every finite f64
        Self::pad(w, &format!("{v:.16e}"))
    }
}

impl ClientSummary {
    /// Fixed-width wire encoding. Any JSON parser reads it back.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedWidth);
        self.serialize(&mut ser).expect("summaries serialize to JSON");
        out
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    pub fn has_critical_flag(&self) -> bool {
        self.flags.iter().any(ReadinessFlag::is_critical)
    }
}
