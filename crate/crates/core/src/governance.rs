//! Governance and Understandability & Usability pillars.
//!
//! Re-identification risk uses the prosecutor model: every record in an
//! equivalence class of size `s` has risk `1/s`. Classes are exact matches on
//! the quasi-identifier tuple, with missing cells equal to each other.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{CellKey, Column, Dataset, FairItem, MetadataDescriptor, Principle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovernanceError {
    #[error("no quasi-identifiers given")]
    NoQuasiIdentifiers,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("dataset has no rows")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReidRisk {
    pub k_anonymity: usize,
    pub proportion_unique: f64,
    pub average_risk: f64,
    /// Equivalence-class size -> number of classes of that size.
    pub class_size_histogram: BTreeMap<usize, usize>,
    pub equivalence_classes: usize,
}

pub fn reid_risk(d: &Dataset, quasi_identifiers: &BTreeSet<String>) -> Result<ReidRisk, GovernanceError> {
    if quasi_identifiers.is_empty() {
        return Err(GovernanceError::NoQuasiIdentifiers);
    }
    let cols = quasi_identifiers
        .iter()
        .map(|q| d.column(q).ok_or_else(|| GovernanceError::UnknownColumn(q.clone())))
        .collect::<Result<Vec<&Column>, _>>()?;
    let n = d.row_count();
    if n == 0 {
        return Err(GovernanceError::EmptyDataset);
    }

    let mut classes: HashMap<Vec<Option<CellKey>>, usize> = HashMap::new();
    for row in 0..n {
        *classes.entry(d.row_key(row, &cols)).or_default() += 1;
    }
    let mut class_size_histogram = BTreeMap::new();
    for &size in classes.values() {
        *class_size_histogram.entry(size).or_insert(0) += 1;
    }
    let k_anonymity = *class_size_histogram.keys().next().expect("n >= 1");
    let uniques = class_size_histogram.get(&1).copied().unwrap_or(0);
    // each class of size s contributes s records at risk 1/s, i.e. 1 in total
    let average_risk = classes.len() as f64 / n as f64;
    Ok(ReidRisk {
        k_anonymity,
        proportion_unique: uniques as f64 / n as f64,
        average_risk,
        class_size_histogram,
        equivalence_classes: classes.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairScore {
    pub per_principle: BTreeMap<Principle, f64>,
    pub overall: f64,
    pub satisfied_items: Vec<FairItem>,
    pub missing_items: Vec<FairItem>,
    pub warnings: Vec<String>,
}

fn non_empty(s: &Option<String>) -> bool {
    s.as_deref().is_some_and(|s| !s.trim().is_empty())
}

/// Whether a checklist item is satisfied by the descriptor.
pub fn item_satisfied(d: &MetadataDescriptor, item: FairItem) -> bool {
    let auto = match item {
        FairItem::F1 => non_empty(&d.identifier),
        FairItem::A1 => non_empty(&d.access_protocol),
        FairItem::R1 => non_empty(&d.license),
        FairItem::R2 => non_empty(&d.provenance),
        _ => false,
    };
    auto || d.checklist.get(&item).copied().unwrap_or(false)
}

pub fn fair_score(descriptor: Option<&MetadataDescriptor>) -> FairScore {
    let mut warnings = Vec::new();
    let empty = MetadataDescriptor::default();
    let d = descriptor.unwrap_or_else(|| {
        warnings.push("no metadata descriptor supplied; every FAIR item is unsatisfied".into());
        &empty
    });
    let (satisfied_items, missing_items): (Vec<FairItem>, Vec<FairItem>) =
        FairItem::ALL.into_iter().partition(|i| item_satisfied(d, *i));
    let per_principle: BTreeMap<Principle, f64> = Principle::ALL
        .into_iter()
        .map(|p| {
            let hit = satisfied_items.iter().filter(|i| i.principle() == p).count();
            (p, hit as f64 / 3.0)
        })
        .collect();
    let overall = per_principle.values().sum::<f64>() / 4.0;
    FairScore {
        per_principle,
        overall,
        satisfied_items,
        missing_items,
        warnings,
    }
}
