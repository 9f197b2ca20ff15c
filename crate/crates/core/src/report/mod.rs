//! Pillar-organized readiness reports.
//!
//! Metric modules produce typed results; the engine flattens each into a
//! [`MetricResult`] (scalars, tables, chart payloads, notes). A
//! [`ReadinessReport`] groups those by pillar and renders to canonical JSON
//! ([`render_json`]) or a self-contained HTML page ([`render_html`]).

mod html;
mod json;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EvalConfig, MetricId};
use crate::federated::ReadinessFlag;
use crate::stats::round_sig;

pub use html::render_html;
pub use json::{canonical_json, parse_report, render_json};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportBuildError {
    #[error("metric `{0}` appears more than once")]
    DuplicateMetric(String),
}

/// Readiness pillars in their fixed report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pillar {
    DataQuality,
    UnderstandabilityUsability,
    StructureOrganization,
    Governance,
    ImpactOnAI,
    Fairness,
}

impl Pillar {
    pub const ALL: [Pillar; 6] = [
        Pillar::DataQuality,
        Pillar::UnderstandabilityUsability,
        Pillar::StructureOrganization,
        Pillar::Governance,
        Pillar::ImpactOnAI,
        Pillar::Fairness,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Pillar::DataQuality => "Data Quality",
            Pillar::UnderstandabilityUsability => "Understandability & Usability",
            Pillar::StructureOrganization => "Structure & Organization",
            Pillar::Governance => "Governance",
            Pillar::ImpactOnAI => "Impact on AI",
            Pillar::Fairness => "Fairness",
        }
    }

    /// Element-id suffix, e.g. `data-quality`.
    pub fn slug(self) -> &'static str {
        match self {
            Pillar::DataQuality => "data-quality",
            Pillar::UnderstandabilityUsability => "understandability-usability",
            Pillar::StructureOrganization => "structure-organization",
            Pillar::Governance => "governance",
            Pillar::ImpactOnAI => "impact-on-ai",
            Pillar::Fairness => "fairness",
        }
    }
}

impl fmt::Display for Pillar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricStatus {
    Ok,
    Undefined,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub label: String,
    pub cells: Vec<Option<TableValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<TableRow>,
}

impl Table {
    pub fn new<S: Into<String>>(name: impl Into<String>, columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            name: name.into(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn row(mut self, label: impl Into<String>, cells: Vec<Option<TableValue>>) -> Self {
        self.push(label, cells);
        self
    }

    pub fn push(&mut self, label: impl Into<String>, cells: Vec<Option<TableValue>>) {
        self.rows.push(TableRow {
            label: label.into(),
            cells,
        });
    }

    pub fn find(&self, label: &str) -> Option<&TableRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

pub fn num(v: impl Into<Option<f64>>) -> Option<TableValue> {
    v.into().filter(|x| x.is_finite()).map(TableValue::Number)
}

pub fn count(v: usize) -> Option<TableValue> {
    Some(TableValue::Number(v as f64))
}

pub fn text(v: impl Into<String>) -> Option<TableValue> {
    Some(TableValue::Text(v.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VizBin {
    pub lower: f64,
    pub upper: f64,
    /// `None` when the bin was suppressed.
    pub count: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VizPayload {
    Bar {
        title: String,
        labels: Vec<String>,
        values: Vec<Option<f64>>,
    },
    Histogram {
        title: String,
        bins: Vec<VizBin>,
    },
    Heatmap {
        title: String,
        labels: Vec<String>,
        grid: Vec<Vec<Option<f64>>>,
    },
}

impl VizPayload {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            VizPayload::Bar { labels, values, .. } if labels.len() != values.len() => Err(format!(
                "bar chart has {} labels and {} values",
                labels.len(),
                values.len()
            )),
            VizPayload::Heatmap { labels, grid, .. }
                if grid.len() != labels.len() || grid.iter().any(|r| r.len() != labels.len()) =>
            {
                Err("heatmap grid is not square over its labels".into())
            }
            _ => Ok(()),
        }
    }

    pub fn title(&self) -> &str {
        match self {
            VizPayload::Bar { title, .. } | VizPayload::Histogram { title, .. } | VizPayload::Heatmap { title, .. } => {
                title
            }
        }
    }
}

/// One metric's values, breakdowns and chart payloads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub metric_id: String,
    pub pillar: Pillar,
    pub status: MetricStatus,
    pub scalars: BTreeMap<String, Option<f64>>,
    pub tables: Vec<Table>,
    pub viz: Vec<VizPayload>,
    pub notes: Vec<String>,
}

impl MetricResult {
    pub fn new(metric_id: impl Into<String>, pillar: Pillar, status: MetricStatus) -> Self {
        MetricResult {
            metric_id: metric_id.into(),
            pillar,
            status,
            scalars: BTreeMap::new(),
            tables: Vec::new(),
            viz: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn ok(id: MetricId) -> Self {
        MetricResult::new(id.as_str(), id.pillar(), MetricStatus::Ok)
    }

    pub fn undefined(id: MetricId, why: impl Into<String>) -> Self {
        MetricResult::new(id.as_str(), id.pillar(), MetricStatus::Undefined).note(why)
    }

    pub fn error(id: MetricId, why: impl Into<String>) -> Self {
        MetricResult::new(id.as_str(), id.pillar(), MetricStatus::Error).note(why)
    }

    pub fn scalar(mut self, name: impl Into<String>, v: impl Into<Option<f64>>) -> Self {
        self.scalars.insert(name.into(), v.into().filter(|x| x.is_finite()));
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }

    pub fn chart(mut self, v: VizPayload) -> Self {
        self.viz.push(v);
        self
    }

    pub fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn get(&self, scalar: &str) -> Option<f64> {
        self.scalars.get(scalar).copied().flatten()
    }

    pub fn find_table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Rounds every real to 12 significant digits and drops non-finite values,
    /// so the result survives a JSON round trip unchanged.
    pub fn canonicalize(&mut self) {
        fn fix(v: &mut Option<f64>) {
            *v = v.and_then(round_sig);
        }
        fn fix_plain(v: &mut f64) {
            *v = round_sig(*v).unwrap_or(0.0);
        }
        self.scalars.values_mut().for_each(fix);
        for t in &mut self.tables {
            for r in &mut t.rows {
                for c in &mut r.cells {
                    if let Some(TableValue::Number(x)) = c {
                        match round_sig(*x) {
                            Some(v) => *x = v,
                            None => *c = None,
                        }
                    }
                }
            }
        }
        for v in &mut self.viz {
            match v {
                VizPayload::Bar { values, .. } => values.iter_mut().for_each(fix),
                VizPayload::Histogram { bins, .. } => {
                    for b in bins {
                        fix_plain(&mut b.lower);
                        fix_plain(&mut b.upper);
                        fix(&mut b.count);
                    }
                }
                VizPayload::Heatmap { grid, .. } => grid.iter_mut().flatten().for_each(fix),
            }
        }
        if self.status == MetricStatus::Undefined && self.notes.is_empty() {
            self.notes.push("value is undefined for this input".into());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PillarSection {
    pub pillar: Pillar,
    pub metrics: Vec<MetricResult>,
}

/// Per-client block of a federated report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientSection {
    pub client_id: String,
    pub row_count: usize,
    pub flags: Vec<ReadinessFlag>,
    pub sections: Vec<PillarSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadinessReport {
    pub report_version: u32,
    pub title: String,
    pub source_id: String,
    /// Left empty by the engine so equal inputs give byte-identical reports.
    pub created_at: Option<String>,
    pub config: EvalConfig,
    pub sections: Vec<PillarSection>,
    pub flags: Vec<ReadinessFlag>,
    pub clients: Vec<ClientSection>,
    pub notices: Vec<String>,
}

impl ReadinessReport {
    pub fn metrics(&self) -> impl Iterator<Item = &MetricResult> {
        self.sections.iter().flat_map(|s| s.metrics.iter())
    }

    pub fn metric(&self, id: &str) -> Option<&MetricResult> {
        self.metrics().find(|m| m.metric_id == id)
    }

    pub fn with_source_id(mut self, source_id: impl Into<String>) -> Self {
        self.source_id = source_id.into();
        self
    }

    pub fn has_critical_flag(&self) -> bool {
        self.flags.iter().any(ReadinessFlag::is_critical)
            || self.clients.iter().flat_map(|c| &c.flags).any(ReadinessFlag::is_critical)
    }
}

fn metric_order(id: &str) -> (usize, String) {
    let idx = id.parse::<MetricId>().map_or(usize::MAX, |m| m as usize);
    (idx, id.to_string())
}

/// Groups results by pillar in the fixed order. Pillars without results are
/// left out. Selected metrics with no result are recorded as errors.
pub fn group_by_pillar(results: Vec<MetricResult>) -> Vec<PillarSection> {
    let mut by_pillar: BTreeMap<Pillar, Vec<MetricResult>> = BTreeMap::new();
    for r in results {
        by_pillar.entry(r.pillar).or_default().push(r);
    }
    Pillar::ALL
        .into_iter()
        .filter_map(|p| {
            let mut metrics = by_pillar.remove(&p)?;
            metrics.sort_by_key(|m| metric_order(&m.metric_id));
            Some(PillarSection { pillar: p, metrics })
        })
        .collect()
}

pub fn build_report(
    results: Vec<MetricResult>,
    cfg: &EvalConfig,
    flags: Vec<ReadinessFlag>,
) -> Result<ReadinessReport, ReportBuildError> {
    let mut seen = BTreeSet::new();
    for r in &results {
        if !seen.insert(r.metric_id.clone()) {
            return Err(ReportBuildError::DuplicateMetric(r.metric_id.clone()));
        }
    }
    let mut results = results;
    for m in cfg.selected() {
        if !seen.contains(m.as_str()) {
            results.push(MetricResult::error(m, "MISSING: no result was produced for this metric"));
        }
    }
    for r in &mut results {
        r.canonicalize();
    }
    let mut flags = flags;
    flags.sort();
    Ok(ReadinessReport {
        report_version: REPORT_VERSION,
        title: "Data readiness report".into(),
        source_id: String::new(),
        created_at: None,
        config: cfg.clone(),
        sections: group_by_pillar(results),
        flags,
        clients: Vec::new(),
        notices: Vec::new(),
    })
}
