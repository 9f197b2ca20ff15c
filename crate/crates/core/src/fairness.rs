//! Fairness pillar: class imbalance, representation rates and statistical parity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, Column};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FairnessError {
    #[error("target column `{0}` has no present values")]
    EmptyTarget(String),
    #[error("column `{0}` has no present values")]
    EmptyColumn(String),
    #[error("positive label `{label}` does not occur in target column `{column}`")]
    UnknownPositiveLabel { column: String, label: String },
    #[error("no row has both a target and a sensitive value")]
    NoOverlap,
    #[error("target and sensitive columns have different lengths")]
    Misaligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: BTreeMap<String, usize>,
    /// `1 - H(p) / ln K`; 0 is balanced, 1 is a single class.
    pub imbalance_score: f64,
    /// Largest over smallest class count; undefined for a single class.
    pub imbalance_ratio: Option<f64>,
    pub single_class: bool,
}

pub fn class_distribution(target: &Column) -> Result<ClassDistribution, FairnessError> {
    let counts = stats::count_by(target.present().map(Cell::label));
    if counts.is_empty() {
        return Err(FairnessError::EmptyTarget(target.name().to_string()));
    }
    Ok(distribution_from_counts(counts))
}

pub fn distribution_from_counts(counts: BTreeMap<String, usize>) -> ClassDistribution {
    let k = counts.len();
    let (imbalance_score, imbalance_ratio) = if k <= 1 {
        (1.0, None)
    } else {
        let h = stats::entropy(counts.values().copied());
        let score = (1.0 - h / (k as f64).ln()).clamp(0.0, 1.0);
        let max = *counts.values().max().expect("k >= 2");
        let min = *counts.values().min().expect("k >= 2");
        (score, Some(max as f64 / min as f64))
    };
    ClassDistribution {
        single_class: k == 1,
        counts,
        imbalance_score,
        imbalance_ratio,
    }
}

/// Fraction of present cells per group.
pub fn representation_rate(sensitive: &Column) -> Result<BTreeMap<String, f64>, FairnessError> {
    let counts = stats::count_by(sensitive.present().map(Cell::label));
    let n: usize = counts.values().sum();
    if n == 0 {
        return Err(FairnessError::EmptyColumn(sensitive.name().to_string()));
    }
    Ok(counts.into_iter().map(|(g, c)| (g, c as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityResult {
    /// P(target = positive | sensitive = g) over pairwise-complete rows.
    pub group_rates: BTreeMap<String, f64>,
    /// Max minus min group rate.
    pub spd: f64,
    pub representation: BTreeMap<String, f64>,
    /// Included row count per group.
    pub group_sizes: BTreeMap<String, usize>,
    /// Groups present in the sensitive column but with no complete rows.
    pub omitted_groups: Vec<String>,
    pub warnings: Vec<String>,
}

pub fn statistical_parity(
    target: &Column,
    positive_label: &str,
    sensitive: &Column,
) -> Result<ParityResult, FairnessError> {
    if target.len() != sensitive.len() {
        return Err(FairnessError::Misaligned);
    }
    let positive = target
        .parse_label(positive_label)
        .filter(|key| target.present().any(|c| &c.key() == key))
        .ok_or_else(|| FairnessError::UnknownPositiveLabel {
            column: target.name().to_string(),
            label: positive_label.to_string(),
        })?;
    let representation = representation_rate(sensitive)?;

    let mut totals: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (t, s) in target.cells().iter().zip(sensitive.cells()) {
        if let (Some(t), Some(s)) = (t, s) {
            let e = totals.entry(s.label()).or_default();
            e.0 += 1;
            if t.key() == positive {
                e.1 += 1;
            }
        }
    }
    if totals.is_empty() {
        return Err(FairnessError::NoOverlap);
    }
    let group_rates: BTreeMap<String, f64> = totals
        .iter()
        .map(|(g, &(n, pos))| (g.clone(), pos as f64 / n as f64))
        .collect();
    let max = group_rates.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = group_rates.values().copied().fold(f64::INFINITY, f64::min);

    let observed: BTreeSet<&String> = representation.keys().collect();
    let omitted_groups: Vec<String> = observed
        .into_iter()
        .filter(|g| !totals.contains_key(*g))
        .cloned()
        .collect();
    let mut warnings = Vec::new();
    if !omitted_groups.is_empty() {
        warnings.push(format!(
            "groups without complete rows omitted: {}",
            omitted_groups.join(", ")
        ));
    }
    if group_rates.len() == 1 {
        warnings.push("only one sensitive group has complete rows; parity gap is trivially 0".into());
    }
    Ok(ParityResult {
        spd: max - min,
        group_sizes: totals.into_iter().map(|(g, (n, _))| (g, n)).collect(),
        group_rates,
        representation,
        omitted_groups,
        warnings,
    })
}
