//! Coordinator-side merge of client summaries into a [`FederatedReport`].

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ClientSummary, ReadinessFlag, PROTOCOL_VERSION};
use crate::config::{EvalConfig, MetricId};
use crate::fairness::distribution_from_counts;
use crate::report::{
    count, group_by_pillar, num, ClientSection, MetricResult, MetricStatus, Pillar, ReadinessReport, Table,
    VizPayload, REPORT_VERSION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MergeError {
    #[error("no client summaries to merge")]
    Empty,
    #[error("summaries belong to different runs: {0:?}")]
    MixedRuns(BTreeSet<String>),
    #[error("summaries have different schema fingerprints")]
    MixedSchemas,
    #[error("client `{0}` submitted conflicting summaries")]
    DuplicateClient(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossClient {
    /// Rows are clients plus `pooled`; columns are class labels.
    pub class_distribution_table: Table,
    pub pooled_class_counts: BTreeMap<String, usize>,
    pub completeness_table: Table,
    /// Jensen-Shannon divergence (bits) of each client's labels from the pool.
    pub label_skew: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FederatedReport {
    pub report_version: u32,
    pub protocol_version: u32,
    pub run_id: String,
    pub config: EvalConfig,
    pub schema_fingerprint: String,
    pub per_client: BTreeMap<String, ClientSummary>,
    pub cross_client: CrossClient,
    pub flag_roster: Vec<ReadinessFlag>,
    /// Clients holding at least one critical flag.
    pub exclusion_candidates: Vec<String>,
    pub missing_clients: Vec<String>,
    pub notices: Vec<String>,
}

fn shares(counts: &BTreeMap<String, usize>, labels: &BTreeSet<&String>) -> Vec<f64> {
    let total: usize = counts.values().sum();
    labels
        .iter()
        .map(|l| counts.get(*l).copied().unwrap_or(0) as f64 / total as f64)
        .collect()
}

/// Jensen-Shannon divergence with base-2 logs, in `[0, 1]`.
pub fn jensen_shannon(p: &[f64], q: &[f64]) -> f64 {
    fn kl_to_mid(a: &[f64], m: &[f64]) -> f64 {
        a.iter()
            .zip(m)
            .filter(|(x, _)| **x > 0.0)
            .map(|(x, mid)| x * (x / mid).log2())
            .sum()
    }
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    (0.5 * kl_to_mid(p, &m) + 0.5 * kl_to_mid(q, &m)).clamp(0.0, 1.0)
}

pub fn merge_summaries(summaries: &[ClientSummary], cfg: &EvalConfig) -> Result<FederatedReport, MergeError> {
    let first = summaries.first().ok_or(MergeError::Empty)?;
    let runs: BTreeSet<String> = summaries.iter().map(|s| s.run_id.clone()).collect();
    if runs.len() > 1 {
        return Err(MergeError::MixedRuns(runs));
    }
    if summaries.iter().any(|s| s.schema_fingerprint != first.schema_fingerprint) {
        return Err(MergeError::MixedSchemas);
    }
    let mut per_client: BTreeMap<String, ClientSummary> = BTreeMap::new();
    for s in summaries {
        match per_client.get(&s.client_id) {
            Some(prev) if prev != s => return Err(MergeError::DuplicateClient(s.client_id.clone())),
            Some(_) => {}
            None => {
                per_client.insert(s.client_id.clone(), s.clone());
            }
        }
    }

    let mut pooled: BTreeMap<String, usize> = BTreeMap::new();
    for s in per_client.values() {
        for (label, n) in &s.class_counts {
            *pooled.entry(label.clone()).or_default() += n;
        }
    }
    let labels: BTreeSet<&String> = pooled.keys().collect();
    let mut class_table = Table::new("class_distribution", labels.iter().map(|l| l.as_str()));
    let mut label_skew = BTreeMap::new();
    let has_counts = |c: &BTreeMap<String, usize>| c.values().sum::<usize>() > 0;
    let pooled_shares = has_counts(&pooled).then(|| shares(&pooled, &labels));
    for (id, s) in &per_client {
        class_table.push(id.clone(), labels.iter().map(|l| count(s.class_counts.get(*l).copied().unwrap_or(0))).collect());
        if let Some(q) = &pooled_shares {
            if has_counts(&s.class_counts) {
                label_skew.insert(id.clone(), jensen_shannon(&shares(&s.class_counts, &labels), q));
            }
        }
    }
    class_table.push("pooled", labels.iter().map(|l| count(pooled[*l])).collect());

    let mut completeness_table = Table::new("completeness", ["overall", "rows"]);
    for (id, s) in &per_client {
        let overall = s
            .metric_results
            .iter()
            .find(|r| r.metric_id == MetricId::Completeness.as_str())
            .and_then(|r| r.get("overall"));
        completeness_table.push(id.clone(), vec![num(overall), count(s.row_count)]);
    }

    let mut flag_roster: Vec<ReadinessFlag> = per_client.values().flat_map(|s| s.flags.iter().cloned()).collect();
    flag_roster.sort();
    flag_roster.dedup();
    let exclusion_candidates: Vec<String> = per_client
        .values()
        .filter(|s| s.has_critical_flag())
        .map(|s| s.client_id.clone())
        .collect();

    Ok(FederatedReport {
        report_version: REPORT_VERSION,
        protocol_version: PROTOCOL_VERSION,
        run_id: first.run_id.clone(),
        config: cfg.clone(),
        schema_fingerprint: first.schema_fingerprint.clone(),
        per_client,
        cross_client: CrossClient {
            class_distribution_table: class_table,
            pooled_class_counts: pooled,
            completeness_table,
            label_skew,
        },
        flag_roster,
        exclusion_candidates,
        missing_clients: Vec::new(),
        notices: Vec::new(),
    })
}

impl FederatedReport {
    /// Pillar-organized view with one section per client, for HTML rendering.
    pub fn to_readiness_report(&self) -> ReadinessReport {
        let x = &self.cross_client;
        let skew_labels: Vec<String> = x.label_skew.keys().cloned().collect();
        let skew = MetricResult::new("label_skew", Pillar::Fairness, MetricStatus::Ok)
            .table(x.label_skew.iter().fold(Table::new("label_skew", ["jsd_bits"]), |t, (c, v)| {
                t.row(c.clone(), vec![num(*v)])
            }))
            .chart(VizPayload::Bar {
                title: "Label skew vs pooled distribution (Jensen-Shannon, bits)".into(),
                labels: skew_labels,
                values: x.label_skew.values().map(|v| Some(*v)).collect(),
            });
        let pooled = distribution_from_counts(x.pooled_class_counts.clone());
        let classes = MetricResult::new("pooled_class_distribution", Pillar::Fairness, MetricStatus::Ok)
            .scalar("imbalance_score", (!pooled.counts.is_empty()).then_some(pooled.imbalance_score))
            .table(x.class_distribution_table.clone())
            .chart(VizPayload::Bar {
                title: "Pooled class distribution".into(),
                labels: x.pooled_class_counts.keys().cloned().collect(),
                values: x.pooled_class_counts.values().map(|n| Some(*n as f64)).collect(),
            });
        let completeness = MetricResult::new("client_completeness", Pillar::DataQuality, MetricStatus::Ok)
            .table(x.completeness_table.clone());
        let mut cross = vec![completeness, skew, classes];
        cross.iter_mut().for_each(MetricResult::canonicalize);

        let mut notices = self.notices.clone();
        if !self.exclusion_candidates.is_empty() {
            notices.push(format!("Exclusion candidates: {}", self.exclusion_candidates.join(", ")));
        }
        ReadinessReport {
            report_version: self.report_version,
            title: format!("Federated readiness report: {}", self.run_id),
            source_id: self.run_id.clone(),
            created_at: None,
            config: self.config.clone(),
            sections: group_by_pillar(cross),
            flags: self.flag_roster.clone(),
            clients: self
                .per_client
                .values()
                .map(|s| ClientSection {
                    client_id: s.client_id.clone(),
                    row_count: s.row_count,
                    flags: s.flags.clone(),
                    sections: group_by_pillar(s.metric_results.clone()),
                })
                .collect(),
            notices,
        }
    }
}
