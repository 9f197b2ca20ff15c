//! Evaluation configuration: which metrics to run, column roles, thresholds.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ColumnKind, Dataset, RoleMap};
use crate::report::Pillar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("no metrics selected")]
    EmptySelection,
    #[error("threshold `{0}` must be positive")]
    NonPositiveThreshold(&'static str),
    #[error("metric `{metric}` needs a {role} role")]
    MissingRole { metric: MetricId, role: &'static str },
    #[error("statistical parity needs a positive_label for the target column")]
    MissingPositiveLabel,
    #[error("unknown metric id `{0}`")]
    UnknownMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Completeness,
    Duplicates,
    Outliers,
    SummaryStats,
    FairScore,
    ReidRisk,
    Correlations,
    FeatureRelevance,
    ClassImbalance,
    RepresentationRate,
    StatisticalParity,
}

impl MetricId {
    pub const ALL: [MetricId; 11] = [
        MetricId::Completeness,
        MetricId::Duplicates,
        MetricId::Outliers,
        MetricId::SummaryStats,
        MetricId::FairScore,
        MetricId::ReidRisk,
        MetricId::Correlations,
        MetricId::FeatureRelevance,
        MetricId::ClassImbalance,
        MetricId::RepresentationRate,
        MetricId::StatisticalParity,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Completeness => "completeness",
            MetricId::Duplicates => "duplicates",
            MetricId::Outliers => "outliers",
            MetricId::SummaryStats => "summary_stats",
            MetricId::FairScore => "fair_score",
            MetricId::ReidRisk => "reid_risk",
            MetricId::Correlations => "correlations",
            MetricId::FeatureRelevance => "feature_relevance",
            MetricId::ClassImbalance => "class_imbalance",
            MetricId::RepresentationRate => "representation_rate",
            MetricId::StatisticalParity => "statistical_parity",
        }
    }

    pub fn pillar(self) -> Pillar {
        match self {
            MetricId::Completeness | MetricId::Duplicates | MetricId::Outliers | MetricId::SummaryStats => {
                Pillar::DataQuality
            }
            MetricId::FairScore => Pillar::UnderstandabilityUsability,
            MetricId::ReidRisk => Pillar::Governance,
            MetricId::Correlations | MetricId::FeatureRelevance => Pillar::ImpactOnAI,
            MetricId::ClassImbalance | MetricId::RepresentationRate | MetricId::StatisticalParity => {
                Pillar::Fairness
            }
        }
    }

    /// Checks the roles this metric needs.
    pub fn check_roles(self, roles: &RoleMap) -> Result<(), ConfigError> {
        let missing = |role| Err(ConfigError::MissingRole { metric: self, role });
        match self {
            MetricId::FeatureRelevance | MetricId::ClassImbalance if roles.target.is_none() => missing("target"),
            MetricId::RepresentationRate if roles.sensitive.is_empty() => missing("sensitive"),
            MetricId::ReidRisk if roles.quasi_identifiers.is_empty() => missing("quasi_identifiers"),
            MetricId::StatisticalParity => {
                if roles.target.is_none() {
                    missing("target")
                } else if roles.sensitive.is_empty() {
                    missing("sensitive")
                } else if roles.positive_label.is_none() {
                    Err(ConfigError::MissingPositiveLabel)
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| ConfigError::UnknownMetric(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub min_completeness: f64,
    pub min_rows: usize,
    pub min_k_anonymity: usize,
    pub bins: usize,
    pub tukey_multiplier: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_completeness: 0.8,
            min_rows: 30,
            min_k_anonymity: 5,
            bins: 10,
            tukey_multiplier: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub run_id: String,
    /// `None` selects every metric whose roles are available.
    pub selected_metrics: Option<BTreeSet<MetricId>>,
    pub roles: RoleMap,
    pub thresholds: Thresholds,
    /// When set, datasets with a different schema fingerprint are rejected.
    pub expected_fingerprint: Option<String>,
    /// Blank out histogram bins with fewer than 5 members in client summaries.
    pub suppress_small_bins: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            run_id: "local".into(),
            selected_metrics: None,
            roles: RoleMap::default(),
            thresholds: Thresholds::default(),
            expected_fingerprint: None,
            suppress_small_bins: false,
        }
    }
}

/// Column names picked as the target when no target role is configured.
const TARGET_NAMES: [&str; 3] = ["target", "label", "class"];

impl EvalConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.thresholds;
        if t.min_completeness.is_nan() || t.min_completeness <= 0.0 {
            return Err(ConfigError::NonPositiveThreshold("min_completeness"));
        }
        if t.min_rows == 0 {
            return Err(ConfigError::NonPositiveThreshold("min_rows"));
        }
        if t.min_k_anonymity == 0 {
            return Err(ConfigError::NonPositiveThreshold("min_k_anonymity"));
        }
        if t.bins == 0 {
            return Err(ConfigError::NonPositiveThreshold("bins"));
        }
        if t.tukey_multiplier.is_nan() || t.tukey_multiplier <= 0.0 {
            return Err(ConfigError::NonPositiveThreshold("tukey_multiplier"));
        }
        if let Some(sel) = &self.selected_metrics {
            if sel.is_empty() {
                return Err(ConfigError::EmptySelection);
            }
            for m in sel {
                m.check_roles(&self.roles)?;
            }
        }
        Ok(())
    }

    /// Fills in defaults that depend on the dataset: an auto-detected target
    /// column and, when no selection was given, every applicable metric.
    pub fn resolve_for(&self, d: &Dataset) -> Result<EvalConfig, ConfigError> {
        let mut cfg = self.clone();
        if cfg.roles.target.is_none() {
            cfg.roles.target = d
                .columns()
                .iter()
                .filter(|c| c.kind() != ColumnKind::Text && !cfg.roles.quasi_identifiers.contains(c.name()))
                .find(|c| TARGET_NAMES.iter().any(|n| c.name().eq_ignore_ascii_case(n)))
                .map(|c| c.name().to_string());
        }
        cfg.validate()?;
        if cfg.selected_metrics.is_none() {
            let applicable: BTreeSet<MetricId> = MetricId::ALL
                .into_iter()
                .filter(|m| m.check_roles(&cfg.roles).is_ok())
                .collect();
            cfg.selected_metrics = Some(applicable);
        }
        Ok(cfg)
    }

    pub fn selected(&self) -> BTreeSet<MetricId> {
        self.selected_metrics.clone().unwrap_or_default()
    }
}
