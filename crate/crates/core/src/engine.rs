//! Runs the selected metrics over a dataset and flattens each into a
//! [`MetricResult`].

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{ConfigError, EvalConfig, MetricId};
use crate::dataset::{schema_fingerprint, Column, ColumnKind, Dataset, DatasetError, FairItem, Principle};
use crate::fairness::{class_distribution, representation_rate, statistical_parity};
use crate::federated::{detect_flags, ReadinessFlag};
use crate::governance::{fair_score, reid_risk};
use crate::impact::{correlation_matrix, relevance_scores, zero_variance_features, ImpactError};
use crate::quality::{completeness, duplicate_fraction, outlier_rate, summary_stats, ModeValue};
use crate::report::{build_report, count, num, text, MetricResult, ReadinessReport, Table, VizBin, VizPayload};

/// Histogram bins below this count are blanked when suppression is on.
pub const SMALL_BIN_THRESHOLD: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("roles do not fit the dataset: {0}")]
    Schema(#[from] DatasetError),
    #[error("schema fingerprint {actual} does not match expected {expected}")]
    SchemaMismatch { expected: String, actual: String },
}

/// Everything one engine pass produces.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// The configuration after target detection and metric selection.
    pub config: EvalConfig,
    pub fingerprint: String,
    pub row_count: usize,
    pub results: Vec<MetricResult>,
    pub class_counts: BTreeMap<String, usize>,
    pub flags: Vec<ReadinessFlag>,
}

/// Evaluates `d`, attributing flags to its source id.
pub fn evaluate(d: &Dataset, cfg: &EvalConfig) -> Result<Evaluation, EngineError> {
    evaluate_as(d, cfg, d.source_id())
}

/// Evaluates `d`, attributing flags to `subject` (a client id in federated runs).
pub fn evaluate_as(d: &Dataset, cfg: &EvalConfig, subject: &str) -> Result<Evaluation, EngineError> {
    let cfg = cfg.resolve_for(d)?;
    let d = d.clone().with_roles(cfg.roles.clone())?;
    let fingerprint = schema_fingerprint(&d);
    if let Some(expected) = &cfg.expected_fingerprint {
        if *expected != fingerprint {
            return Err(EngineError::SchemaMismatch {
                expected: expected.clone(),
                actual: fingerprint,
            });
        }
    }

    let mut class_counts = BTreeMap::new();
    let mut results = Vec::new();
    for id in cfg.selected() {
        let mut r = run_metric(&d, &cfg, id, &mut class_counts);
        if cfg.suppress_small_bins {
            suppress_small_bins(&mut r);
        }
        results.push(r);
    }
    let flags = detect_flags(subject, d.row_count(), &results, &cfg);
    Ok(Evaluation {
        config: cfg,
        fingerprint,
        row_count: d.row_count(),
        results,
        class_counts,
        flags,
    })
}

/// Evaluates and assembles a single-dataset report.
pub fn inspect(d: &Dataset, cfg: &EvalConfig) -> Result<ReadinessReport, EngineError> {
    let ev = evaluate(d, cfg)?;
    let report = build_report(ev.results, &ev.config, ev.flags).expect("engine emits each metric once");
    Ok(report.with_source_id(d.source_id()))
}

fn suppress_small_bins(r: &mut MetricResult) {
    for v in &mut r.viz {
        if let VizPayload::Histogram { bins, .. } = v {
            for b in bins {
                if b.count.is_some_and(|c| c < SMALL_BIN_THRESHOLD) {
                    b.count = None;
                }
            }
        }
    }
}

fn target_column<'a>(d: &'a Dataset, cfg: &EvalConfig) -> Option<&'a Column> {
    cfg.roles.target.as_deref().and_then(|t| d.column(t))
}

fn run_metric(
    d: &Dataset,
    cfg: &EvalConfig,
    id: MetricId,
    class_counts: &mut BTreeMap<String, usize>,
) -> MetricResult {
    match id {
        MetricId::Completeness => completeness_result(d),
        MetricId::Duplicates => duplicates_result(d),
        MetricId::Outliers => outliers_result(d, cfg),
        MetricId::SummaryStats => summary_result(d, cfg),
        MetricId::FairScore => fair_result(d),
        MetricId::ReidRisk => reid_result(d, cfg),
        MetricId::Correlations => correlation_result(d),
        MetricId::FeatureRelevance => relevance_result(d, cfg),
        MetricId::ClassImbalance => imbalance_result(d, cfg, class_counts),
        MetricId::RepresentationRate => representation_result(d, cfg),
        MetricId::StatisticalParity => parity_result(d, cfg),
    }
}

fn completeness_result(d: &Dataset) -> MetricResult {
    let c = completeness(d);
    if c.undefined {
        return MetricResult::undefined(MetricId::Completeness, "dataset has no cells").scalar("overall", None);
    }
    let mut table = Table::new("per_column", ["completeness", "missing"]);
    for col in d.columns() {
        table.push(col.name(), vec![num(c.per_column[col.name()]), count(col.missing_count())]);
    }
    let labels: Vec<String> = d.columns().iter().map(|c| c.name().to_string()).collect();
    let values = labels.iter().map(|l| Some(c.per_column[l])).collect();
    MetricResult::ok(MetricId::Completeness)
        .scalar("overall", c.overall)
        .table(table)
        .chart(VizPayload::Bar {
            title: "Completeness by column".into(),
            labels,
            values,
        })
}

fn duplicates_result(d: &Dataset) -> MetricResult {
    match duplicate_fraction(d) {
        Ok(x) => MetricResult::ok(MetricId::Duplicates)
            .scalar("fraction", x.fraction)
            .scalar("duplicate_rows", x.duplicate_rows as f64)
            .scalar("distinct_rows", x.distinct_rows as f64),
        Err(e) => MetricResult::undefined(MetricId::Duplicates, e.to_string()).scalar("fraction", None),
    }
}

fn outliers_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let cols: Vec<&Column> = d.columns().iter().filter(|c| c.kind() == ColumnKind::Numeric).collect();
    if cols.is_empty() {
        return MetricResult::undefined(MetricId::Outliers, "no numeric columns");
    }
    let mut table = Table::new(
        "outliers",
        ["q1", "q3", "lower_fence", "upper_fence", "below", "above", "rate"],
    );
    let mut r = MetricResult::ok(MetricId::Outliers);
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for col in cols {
        match outlier_rate(col, cfg.thresholds.tukey_multiplier) {
            Ok(o) => {
                table.push(
                    col.name(),
                    vec![
                        num(o.q1),
                        num(o.q3),
                        num(o.lower_fence),
                        num(o.upper_fence),
                        count(o.below),
                        count(o.above),
                        num(o.rate),
                    ],
                );
                r = r.scalar(format!("rate:{}", col.name()), o.rate);
                values.push(Some(o.rate));
            }
            Err(e) => {
                table.push(col.name(), vec![None; 7]);
                r = r
                    .scalar(format!("rate:{}", col.name()), None)
                    .note(format!("{}: {e}", col.name()));
                values.push(None);
            }
        }
        labels.push(col.name().to_string());
    }
    r.table(table).chart(VizPayload::Bar {
        title: "Outlier rate by column".into(),
        labels,
        values,
    })
}

fn summary_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let mut table = Table::new(
        "summary",
        [
            "kind", "present", "missing", "mean", "median", "mode", "std_dev", "min", "max", "q1", "q3", "distinct",
        ],
    );
    let mut r = MetricResult::ok(MetricId::SummaryStats);
    for col in d.columns() {
        let s = summary_stats(col, cfg.thresholds.bins);
        let mode = match &s.mode {
            Some(ModeValue::Number(v)) => num(*v),
            Some(ModeValue::Label(l)) => text(l.clone()),
            None => None,
        };
        table.push(
            col.name(),
            vec![
                text(s.kind.to_string()),
                count(s.present_count),
                count(s.missing_count),
                num(s.mean),
                num(s.median),
                mode,
                num(s.std_dev),
                num(s.min),
                num(s.max),
                num(s.q1),
                num(s.q3),
                count(s.distinct_count),
            ],
        );
        if !s.histogram.is_empty() {
            r = r.chart(VizPayload::Histogram {
                title: format!("Histogram: {}", col.name()),
                bins: s
                    .histogram
                    .iter()
                    .map(|b| VizBin {
                        lower: b.lower,
                        upper: b.upper,
                        count: Some(b.count as f64),
                    })
                    .collect(),
            });
        } else if !s.categories.is_empty() {
            r = r.chart(VizPayload::Bar {
                title: format!("Categories: {}", col.name()),
                labels: s.categories.iter().map(|(l, _)| l.clone()).collect(),
                values: s.categories.iter().map(|(_, c)| Some(*c as f64)).collect(),
            });
        }
        if s.labels_withheld {
            r = r.note(format!("{}: category labels withheld (free text or high cardinality)", col.name()));
        }
    }
    r.table(table)
}

fn fair_result(d: &Dataset) -> MetricResult {
    let s = fair_score(d.descriptor());
    let mut r = MetricResult::ok(MetricId::FairScore).scalar("overall", s.overall);
    for p in Principle::ALL {
        r = r.scalar(format!("{p:?}"), s.per_principle[&p]);
    }
    let mut table = Table::new("checklist", ["principle", "satisfied", "description"]);
    for item in FairItem::ALL {
        let ok = s.satisfied_items.contains(&item);
        table.push(
            item.to_string(),
            vec![text(item.principle().name()), count(ok as usize), text(item.description())],
        );
    }
    let chart = VizPayload::Bar {
        title: "FAIR score by principle".into(),
        labels: Principle::ALL.iter().map(|p| p.name().to_string()).collect(),
        values: Principle::ALL.iter().map(|p| Some(s.per_principle[p])).collect(),
    };
    s.warnings.into_iter().fold(r.table(table).chart(chart), MetricResult::note)
}

/// Class-size buckets for the re-identification table. Fixed so the payload
/// size does not depend on the data.
const CLASS_SIZE_BUCKETS: [(usize, usize, &str); 6] = [
    (1, 1, "1"),
    (2, 2, "2"),
    (3, 4, "3-4"),
    (5, 9, "5-9"),
    (10, 19, "10-19"),
    (20, usize::MAX, "20+"),
];

fn reid_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let qis = &cfg.roles.quasi_identifiers;
    let risk = match reid_risk(d, qis) {
        Ok(r) => r,
        Err(e) => return MetricResult::error(MetricId::ReidRisk, e.to_string()),
    };
    let mut table = Table::new("class_sizes", ["classes", "records"]);
    let mut values = Vec::new();
    for (lo, hi, label) in CLASS_SIZE_BUCKETS {
        let (classes, records) = risk
            .class_size_histogram
            .range(lo..=hi)
            .fold((0, 0), |(c, n), (size, k)| (c + k, n + size * k));
        table.push(label, vec![count(classes), count(records)]);
        values.push(Some(records as f64));
    }
    let names: Vec<&str> = qis.iter().map(String::as_str).collect();
    MetricResult::ok(MetricId::ReidRisk)
        .scalar("k_anonymity", risk.k_anonymity as f64)
        .scalar("proportion_unique", risk.proportion_unique)
        .scalar("average_risk", risk.average_risk)
        .scalar("equivalence_classes", risk.equivalence_classes as f64)
        .table(table)
        .chart(VizPayload::Bar {
            title: "Records by equivalence-class size".into(),
            labels: CLASS_SIZE_BUCKETS.iter().map(|b| b.2.to_string()).collect(),
            values,
        })
        .note(format!("quasi-identifiers: {}", names.join(", ")))
}

fn zero_variance_table(names: &[String]) -> Table {
    names.iter().fold(Table::new("zero_variance_features", ["reason"]), |t, n| {
        t.row(n.clone(), vec![text("zero variance")])
    })
}

fn correlation_result(d: &Dataset) -> MetricResult {
    match correlation_matrix(d) {
        Ok(m) => {
            let mut corr = Table::new("correlation", m.features.clone());
            let mut pairs = Table::new("pair_counts", m.features.clone());
            for (i, f) in m.features.iter().enumerate() {
                corr.push(f.clone(), m.entries[i].iter().map(|v| num(*v)).collect());
                pairs.push(f.clone(), m.pair_counts[i].iter().map(|n| count(*n)).collect());
            }
            let mut r = MetricResult::ok(MetricId::Correlations)
                .chart(VizPayload::Heatmap {
                    title: "Feature correlation (Pearson)".into(),
                    labels: m.features.clone(),
                    grid: m.entries.clone(),
                })
                .table(corr)
                .table(pairs)
                .table(zero_variance_table(&m.undefined_features));
            for f in &m.undefined_features {
                r = r.note(format!("correlations with `{f}` are undefined: the feature has zero variance"));
            }
            r
        }
        Err(e @ ImpactError::TooFewNumericColumns(_)) => {
            let zero = zero_variance_features(d);
            MetricResult::undefined(MetricId::Correlations, e.to_string()).table(zero_variance_table(&zero))
        }
        Err(e) => MetricResult::error(MetricId::Correlations, e.to_string()),
    }
}

fn relevance_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let Some(target) = cfg.roles.target.as_deref() else {
        return MetricResult::error(MetricId::FeatureRelevance, "no target column");
    };
    match relevance_scores(d, target, cfg.thresholds.bins) {
        Ok(s) => {
            let mut table = Table::new("relevance", ["nmi", "rows"]);
            for (f, v) in &s.scores {
                table.push(f.clone(), vec![num(*v), count(s.effective_n.get(f).copied().unwrap_or(0))]);
            }
            let chart = VizPayload::Bar {
                title: format!("Feature relevance to `{target}` (normalized mutual information)"),
                labels: s.scores.keys().cloned().collect(),
                values: s.scores.values().copied().collect(),
            };
            let r = MetricResult::ok(MetricId::FeatureRelevance).table(table).chart(chart);
            s.reasons
                .iter()
                .fold(r, |r, (f, why)| r.note(format!("`{f}` relevance undefined: {why}")))
        }
        Err(e @ ImpactError::SingleClassTarget(_)) => {
            MetricResult::undefined(MetricId::FeatureRelevance, format!("SINGLE_CLASS_TARGET: {e}"))
        }
        Err(e) => MetricResult::error(MetricId::FeatureRelevance, e.to_string()),
    }
}

fn imbalance_result(d: &Dataset, cfg: &EvalConfig, class_counts: &mut BTreeMap<String, usize>) -> MetricResult {
    let Some(target) = target_column(d, cfg) else {
        return MetricResult::error(MetricId::ClassImbalance, "no target column");
    };
    match class_distribution(target) {
        Ok(c) => {
            let total: usize = c.counts.values().sum();
            let mut table = Table::new("class_counts", ["count", "share"]);
            for (label, n) in &c.counts {
                table.push(label.clone(), vec![count(*n), num(*n as f64 / total as f64)]);
            }
            *class_counts = c.counts.clone();
            MetricResult::ok(MetricId::ClassImbalance)
                .scalar("imbalance_score", c.imbalance_score)
                .scalar("imbalance_ratio", c.imbalance_ratio)
                .scalar("single_class", if c.single_class { 1.0 } else { 0.0 })
                .scalar("classes", c.counts.len() as f64)
                .table(table)
                .chart(VizPayload::Bar {
                    title: format!("Class distribution: {}", target.name()),
                    labels: c.counts.keys().cloned().collect(),
                    values: c.counts.values().map(|n| Some(*n as f64)).collect(),
                })
        }
        Err(e) => MetricResult::error(MetricId::ClassImbalance, e.to_string()),
    }
}

fn representation_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let mut r = MetricResult::ok(MetricId::RepresentationRate);
    for name in &cfg.roles.sensitive {
        let col = d.column(name).expect("roles validated against the dataset");
        match representation_rate(col) {
            Ok(rates) => {
                let table = rates.iter().fold(Table::new(format!("representation:{name}"), ["rate"]), |t, (g, v)| {
                    t.row(g.clone(), vec![num(*v)])
                });
                r = r.table(table).chart(VizPayload::Bar {
                    title: format!("Representation: {name}"),
                    labels: rates.keys().cloned().collect(),
                    values: rates.values().map(|v| Some(*v)).collect(),
                });
            }
            Err(e) => r = r.note(format!("{name}: {e}")),
        }
    }
    if r.tables.is_empty() {
        r.status = crate::report::MetricStatus::Error;
    }
    r
}

fn parity_result(d: &Dataset, cfg: &EvalConfig) -> MetricResult {
    let (Some(target), Some(positive)) = (target_column(d, cfg), cfg.roles.positive_label.as_deref()) else {
        return MetricResult::error(MetricId::StatisticalParity, "needs a target and a positive label");
    };
    let mut r = MetricResult::ok(MetricId::StatisticalParity);
    let mut max_spd: Option<f64> = None;
    for name in &cfg.roles.sensitive {
        let col = d.column(name).expect("roles validated against the dataset");
        match statistical_parity(target, positive, col) {
            Ok(p) => {
                let mut table = Table::new(format!("group_rates:{name}"), ["positive_rate", "rows"]);
                for (g, rate) in &p.group_rates {
                    table.push(g.clone(), vec![num(*rate), count(p.group_sizes[g])]);
                }
                max_spd = Some(max_spd.map_or(p.spd, |m| m.max(p.spd)));
                r = r
                    .scalar(format!("spd:{name}"), p.spd)
                    .table(table)
                    .chart(VizPayload::Bar {
                        title: format!("Positive rate by {name}"),
                        labels: p.group_rates.keys().cloned().collect(),
                        values: p.group_rates.values().map(|v| Some(*v)).collect(),
                    });
                for w in p.warnings {
                    r = r.note(format!("{name}: {w}"));
                }
            }
            Err(e) => r = r.scalar(format!("spd:{name}"), None).note(format!("{name}: {e}")),
        }
    }
    r = r.scalar("max_spd", max_spd);
    if max_spd.is_none() {
        r.status = crate::report::MetricStatus::Error;
    }
    r
}
