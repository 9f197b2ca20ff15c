//! Readiness flags raised from a client's metric results.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{EvalConfig, MetricId};
use crate::report::MetricResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagCode {
    SingleClass,
    ZeroVarianceFeature,
    HighMissingness,
    SmallSample,
    HighReidRisk,
}

impl FlagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagCode::SingleClass => "SINGLE_CLASS",
            FlagCode::ZeroVarianceFeature => "ZERO_VARIANCE_FEATURE",
            FlagCode::HighMissingness => "HIGH_MISSINGNESS",
            FlagCode::SmallSample => "SMALL_SAMPLE",
            FlagCode::HighReidRisk => "HIGH_REID_RISK",
        }
    }

    /// Conditions that make a client unusable for training are critical.
    pub fn severity(self) -> Severity {
        match self {
            FlagCode::SingleClass | FlagCode::ZeroVarianceFeature => Severity::Critical,
            _ => Severity::Warn,
        }
    }
}

impl fmt::Display for FlagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warn,
    Critical,
}

/// Field order drives the derived ordering: rosters sort by client, then code.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReadinessFlag {
    pub client_id: String,
    pub code: FlagCode,
    pub severity: Severity,
    pub column: Option<String>,
    pub evidence: String,
}

impl ReadinessFlag {
    pub fn new(
        code: FlagCode,
        client_id: impl Into<String>,
        column: Option<String>,
        evidence: impl Into<String>,
    ) -> Self {
        ReadinessFlag {
            client_id: client_id.into(),
            code,
            severity: code.severity(),
            column,
            evidence: evidence.into(),
        }
    }

    pub fn is_critical(&self) -> bool {
        self.severity == Severity::Critical
    }
}

fn find(results: &[MetricResult], id: MetricId) -> Option<&MetricResult> {
    results.iter().find(|r| r.metric_id == id.as_str())
}

/// Applies the flag rules to one client's results. A rule whose metric was
/// not run (or produced no value) is skipped.
///
/// Evidence strings carry no row counts so summaries stay a fixed size.
pub fn detect_flags(
    client_id: &str,
    row_count: usize,
    results: &[MetricResult],
    cfg: &EvalConfig,
) -> Vec<ReadinessFlag> {
    let t = &cfg.thresholds;
    let mut flags = Vec::new();

    if let Some(r) = find(results, MetricId::ClassImbalance) {
        if r.get("single_class") == Some(1.0) {
            flags.push(ReadinessFlag::new(
                FlagCode::SingleClass,
                client_id,
                cfg.roles.target.clone(),
                "target column has a single observed class",
            ));
        }
    }
    if let Some(table) = find(results, MetricId::Correlations).and_then(|r| r.find_table("zero_variance_features")) {
        for row in &table.rows {
            flags.push(ReadinessFlag::new(
                FlagCode::ZeroVarianceFeature,
                client_id,
                Some(row.label.clone()),
                "feature is constant; correlations with it are undefined",
            ));
        }
    }
    if let Some(overall) = find(results, MetricId::Completeness).and_then(|r| r.get("overall")) {
        if overall < t.min_completeness {
            flags.push(ReadinessFlag::new(
                FlagCode::HighMissingness,
                client_id,
                None,
                format!("completeness {overall:.4} below {:.4}", t.min_completeness),
            ));
        }
    }
    if row_count < t.min_rows {
        flags.push(ReadinessFlag::new(
            FlagCode::SmallSample,
            client_id,
            None,
            format!("fewer rows than the minimum of {}", t.min_rows),
        ));
    }
    if let Some(k) = find(results, MetricId::ReidRisk).and_then(|r| r.get("k_anonymity")) {
        if k < t.min_k_anonymity as f64 {
            let qis: Vec<&str> = cfg.roles.quasi_identifiers.iter().map(String::as_str).collect();
            flags.push(ReadinessFlag::new(
                FlagCode::HighReidRisk,
                client_id,
                Some(qis.join(",")),
                format!("k-anonymity below {}", t.min_k_anonymity),
            ));
        }
    }
    flags.sort();
    flags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Table;

    fn completeness(v: f64) -> MetricResult {
        MetricResult::ok(MetricId::Completeness).scalar("overall", v)
    }

    #[test]
    fn missingness_threshold_is_strict() {
        let cfg = EvalConfig::default();
        let flags = detect_flags("c", 100, &[completeness(0.79)], &cfg);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].code, FlagCode::HighMissingness);
        assert_eq!(flags[0].severity, Severity::Warn);
        assert!(detect_flags("c", 100, &[completeness(0.8)], &cfg).is_empty());
    }

    #[test]
    fn reid_and_small_sample() {
        let cfg = EvalConfig::default();
        let reid = MetricResult::ok(MetricId::ReidRisk).scalar("k_anonymity", 1.0);
        let flags = detect_flags("c", 10, &[reid], &cfg);
        let codes: Vec<FlagCode> = flags.iter().map(|f| f.code).collect();
        assert_eq!(codes, vec![FlagCode::SmallSample, FlagCode::HighReidRisk]);
    }

    #[test]
    fn critical_codes() {
        let cfg = EvalConfig::default();
        let results = vec![
            MetricResult::ok(MetricId::ClassImbalance).scalar("single_class", 1.0),
            MetricResult::ok(MetricId::Correlations)
                .table(Table::new("zero_variance_features", ["reason"]).row("f3", vec![])),
        ];
        let flags = detect_flags("h3", 100, &results, &cfg);
        assert_eq!(flags.len(), 2);
        assert!(flags.iter().all(ReadinessFlag::is_critical));
        assert_eq!(flags[1].column.as_deref(), Some("f3"));
    }

    #[test]
    fn missing_inputs_skip_rules() {
        assert!(detect_flags("c", 100, &[], &EvalConfig::default()).is_empty());
    }
}
