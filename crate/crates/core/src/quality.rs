//! Data Quality pillar: completeness, duplicates, outliers, summary statistics.
//!
//! Every function here only measures. Nothing imputes, drops or repairs cells.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, CellKey, Column, ColumnKind, Dataset};
use crate::stats;

/// Categorical columns with more distinct values than this report counts only.
pub const MAX_REPORTED_CATEGORIES: usize = 50;

pub const DEFAULT_TUKEY_MULTIPLIER: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QualityError {
    #[error("dataset has no rows")]
    EmptyDataset,
    /// Not a failure: the metric does not apply to this column.
    #[error("not applicable: {0}")]
    Undefined(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completeness {
    pub overall: f64,
    pub per_column: BTreeMap<String, f64>,
    /// Set when the dataset has no cells and `overall` is a convention.
    pub undefined: bool,
}

pub fn completeness(d: &Dataset) -> Completeness {
    let rows = d.row_count();
    let per_column = d
        .columns()
        .iter()
        .map(|c| {
            let v = if rows == 0 {
                1.0
            } else {
                1.0 - c.missing_count() as f64 / rows as f64
            };
            (c.name().to_string(), v)
        })
        .collect();
    let cells = rows * d.column_count();
    let missing: usize = d.columns().iter().map(Column::missing_count).sum();
    let (overall, undefined) = if cells == 0 {
        (1.0, true)
    } else {
        (1.0 - missing as f64 / cells as f64, false)
    };
    Completeness {
        overall,
        per_column,
        undefined,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Duplicates {
    pub fraction: f64,
    pub duplicate_rows: usize,
    pub distinct_rows: usize,
}

/// Exact full-row duplicates; missing cells compare equal.
pub fn duplicate_fraction(d: &Dataset) -> Result<Duplicates, QualityError> {
    let n = d.row_count();
    if n == 0 {
        return Err(QualityError::EmptyDataset);
    }
    let cols: Vec<&Column> = d.columns().iter().collect();
    let distinct: HashSet<Vec<Option<CellKey>>> = (0..n).map(|r| d.row_key(r, &cols)).collect();
    let distinct_rows = distinct.len();
    Ok(Duplicates {
        fraction: (n - distinct_rows) as f64 / n as f64,
        duplicate_rows: n - distinct_rows,
        distinct_rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierStats {
    pub q1: f64,
    pub q3: f64,
    pub lower_fence: f64,
    pub upper_fence: f64,
    pub below: usize,
    pub within: usize,
    pub above: usize,
    pub rate: f64,
}

/// Tukey-fence outlier rate over the present values of a numeric column.
pub fn outlier_rate(col: &Column, multiplier: f64) -> Result<OutlierStats, QualityError> {
    if col.kind() != ColumnKind::Numeric {
        return Err(QualityError::Undefined(format!("`{}` is not numeric", col.name())));
    }
    let values = stats::sorted(&col.numeric_values());
    if values.len() < 4 {
        return Err(QualityError::Undefined(format!(
            "`{}` has {} present values, need at least 4",
            col.name(),
            values.len()
        )));
    }
    let q1 = stats::quantile_sorted(&values, 0.25).expect("non-empty");
    let q3 = stats::quantile_sorted(&values, 0.75).expect("non-empty");
    let iqr = q3 - q1;
    let lower_fence = q1 - multiplier * iqr;
    let upper_fence = q3 + multiplier * iqr;
    let below = values.iter().filter(|v| **v < lower_fence).count();
    let above = values.iter().filter(|v| **v > upper_fence).count();
    let within = values.len() - below - above;
    Ok(OutlierStats {
        q1,
        q3,
        lower_fence,
        upper_fence,
        below,
        within,
        above,
        rate: (below + above) as f64 / values.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeValue {
    Number(f64),
    Label(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub kind: ColumnKind,
    pub present_count: usize,
    pub missing_count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub mode: Option<ModeValue>,
    pub std_dev: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub distinct_count: usize,
    /// Equal-width bins for numeric columns.
    pub histogram: Vec<HistogramBin>,
    /// Category counts for non-numeric columns, sorted by label.
    pub categories: Vec<(String, usize)>,
    /// True when category labels were withheld (text or high-cardinality column).
    pub labels_withheld: bool,
}

pub fn summary_stats(col: &Column, bins: usize) -> SummaryStats {
    let bins = bins.max(1);
    let mut s = SummaryStats {
        kind: col.kind(),
        present_count: col.present_count(),
        missing_count: col.missing_count(),
        mean: None,
        median: None,
        mode: None,
        std_dev: None,
        min: None,
        max: None,
        q1: None,
        q3: None,
        distinct_count: 0,
        histogram: Vec::new(),
        categories: Vec::new(),
        labels_withheld: false,
    };

    if col.kind() == ColumnKind::Numeric {
        let values = col.numeric_values();
        let sorted = stats::sorted(&values);
        let counts = stats::count_by(values.iter().map(|v| Cell::Num(*v).key()));
        s.distinct_count = counts.len();
        s.mean = stats::mean(&values);
        s.std_dev = stats::sample_std(&values);
        s.median = stats::quantile_sorted(&sorted, 0.5);
        s.q1 = stats::quantile_sorted(&sorted, 0.25);
        s.q3 = stats::quantile_sorted(&sorted, 0.75);
        s.min = sorted.first().copied();
        s.max = sorted.last().copied();
        // most frequent, ties to the smallest value
        s.mode = sorted
            .iter()
            .map(|v| (counts[&Cell::Num(*v).key()], *v))
            .fold(None, |best: Option<(usize, f64)>, (c, v)| match best {
                Some((bc, _)) if bc >= c => best,
                _ => Some((c, v)),
            })
            .map(|(_, v)| ModeValue::Number(v));
        if let (Some(min), Some(max)) = (s.min, s.max) {
            let nbins = if min == max { 1 } else { bins };
            let width = (max - min) / nbins as f64;
            let mut counts = vec![0usize; nbins];
            for v in &values {
                counts[stats::bin_index(*v, min, max, nbins)] += 1;
            }
            s.histogram = counts
                .into_iter()
                .enumerate()
                .map(|(i, count)| HistogramBin {
                    lower: min + width * i as f64,
                    upper: if i + 1 == nbins { max } else { min + width * (i + 1) as f64 },
                    count,
                })
                .collect();
        }
    } else {
        let counts = stats::count_by(col.present().map(Cell::label));
        s.distinct_count = counts.len();
        if col.kind() == ColumnKind::Text || counts.len() > MAX_REPORTED_CATEGORIES {
            s.labels_withheld = true;
        } else {
            // BTreeMap iteration is lexicographic, so `>` keeps the first label on ties
            let mut best: Option<(&String, usize)> = None;
            for (label, &c) in &counts {
                if best.is_none_or(|(_, bc)| c > bc) {
                    best = Some((label, c));
                }
            }
            s.mode = best.map(|(l, _)| ModeValue::Label(l.clone()));
            s.categories = counts.into_iter().collect();
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityResult {
    pub completeness_overall: f64,
    pub completeness_per_column: BTreeMap<String, f64>,
    pub duplicate_fraction: Option<f64>,
    pub outlier_rate_per_column: BTreeMap<String, Option<f64>>,
    pub summary_per_column: BTreeMap<String, SummaryStats>,
}

/// All Data Quality metrics for a dataset in one pass.
pub fn assess(d: &Dataset, bins: usize, multiplier: f64) -> QualityResult {
    let c = completeness(d);
    QualityResult {
        completeness_overall: c.overall,
        completeness_per_column: c.per_column,
        duplicate_fraction: duplicate_fraction(d).ok().map(|x| x.fraction),
        outlier_rate_per_column: d
            .columns()
            .iter()
            .filter(|col| col.kind() == ColumnKind::Numeric)
            .map(|col| (col.name().to_string(), outlier_rate(col, multiplier).ok().map(|o| o.rate)))
            .collect(),
        summary_per_column: d
            .columns()
            .iter()
            .map(|col| (col.name().to_string(), summary_stats(col, bins)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(name: &str, v: &[f64]) -> Column {
        Column::numeric(name, v.iter().map(|x| Some(*x)).collect()).unwrap()
    }

    fn ds(cols: Vec<Column>) -> Dataset {
        Dataset::new("t", cols).unwrap()
    }

    #[test]
    fn completeness_counts_missing() {
        let d = ds(vec![num("a", &[1.0, 2.0, 3.0, 4.0])]);
        let c = completeness(&d);
        assert_eq!(c.overall, 1.0);
        assert_eq!(c.per_column["a"], 1.0);

        let a = Column::numeric("a", vec![Some(1.0), None, Some(3.0), Some(4.0)]).unwrap();
        let b = Column::categorical::<&str>("b", &[None, None, None, None]);
        let c = completeness(&ds(vec![a, b]));
        assert_eq!(c.per_column["a"], 0.75);
        assert_eq!(c.per_column["b"], 0.0);
        assert_eq!(c.overall, 1.0 - 5.0 / 8.0);
        assert!(!c.undefined);
    }

    #[test]
    fn completeness_of_empty_dataset_is_conventional() {
        let d = ds(vec![Column::numeric("a", vec![]).unwrap()]);
        let c = completeness(&d);
        assert_eq!(c.overall, 1.0);
        assert!(c.undefined);
    }

    #[test]
    fn duplicates() {
        let d = ds(vec![num("a", &[1.0, 2.0, 3.0, 4.0])]);
        assert_eq!(duplicate_fraction(&d).unwrap().fraction, 0.0);
        let d = ds(vec![num("a", &[1.0, 2.0, 1.0, 4.0])]);
        assert_eq!(duplicate_fraction(&d).unwrap().fraction, 0.25);
        let d = ds(vec![num("a", &[7.0; 5])]);
        assert_eq!(duplicate_fraction(&d).unwrap().fraction, 4.0 / 5.0);
        let d = ds(vec![Column::numeric("a", vec![None, None, Some(1.0)]).unwrap()]);
        assert_eq!(duplicate_fraction(&d).unwrap().duplicate_rows, 1);
        let d = ds(vec![Column::numeric("a", vec![]).unwrap()]);
        assert_eq!(duplicate_fraction(&d), Err(QualityError::EmptyDataset));
    }

    #[test]
    fn tukey_fences() {
        let o = outlier_rate(&num("a", &[1.0, 2.0, 3.0, 4.0, 100.0]), 1.5).unwrap();
        assert_eq!((o.q1, o.q3), (2.0, 4.0));
        assert_eq!((o.lower_fence, o.upper_fence), (-1.0, 7.0));
        assert_eq!(o.rate, 0.2);
        assert_eq!(o.above, 1);

        let o = outlier_rate(&num("a", &[5.0; 6]), 1.5).unwrap();
        assert_eq!((o.lower_fence, o.upper_fence), (5.0, 5.0));
        assert_eq!(o.rate, 0.0);

        let o = outlier_rate(&num("a", &[1.0, 2.0, 3.0, 4.0]), 1.5).unwrap();
        assert_eq!(o.rate, 0.0);
    }

    #[test]
    fn outliers_undefined_for_short_or_categorical() {
        assert!(matches!(
            outlier_rate(&num("a", &[1.0, 2.0, 3.0]), 1.5),
            Err(QualityError::Undefined(_))
        ));
        let c = Column::categorical("c", &[Some("a"); 5]);
        assert!(matches!(outlier_rate(&c, 1.5), Err(QualityError::Undefined(_))));
    }

    #[test]
    fn summary_numeric() {
        let s = summary_stats(&num("a", &[1.0, 2.0, 2.0, 3.0]), 10);
        assert_eq!(s.mean, Some(2.0));
        assert_eq!(s.median, Some(2.0));
        assert_eq!(s.mode, Some(ModeValue::Number(2.0)));
        assert_eq!(s.distinct_count, 3);

        let s = summary_stats(&num("a", &[1.0, 2.0, 3.0, 4.0]), 10);
        assert_eq!(s.median, Some(2.5));
        assert_eq!(s.mode, Some(ModeValue::Number(1.0)));
        assert_eq!(s.histogram.len(), 10);
        assert_eq!(s.histogram.iter().map(|b| b.count).sum::<usize>(), 4);
        assert_eq!(s.histogram[9].upper, 4.0);

        let s = summary_stats(&num("a", &[0.0; 4]), 10);
        assert_eq!(s.std_dev, Some(0.0));
        assert_eq!(s.histogram.len(), 1);
        assert_eq!(s.histogram[0].count, 4);
    }

    #[test]
    fn summary_categorical() {
        let c = Column::categorical("c", &[Some("b"), Some("a"), Some("b"), Some("a"), None]);
        let s = summary_stats(&c, 10);
        assert_eq!(s.mode, Some(ModeValue::Label("a".into())));
        assert_eq!(s.distinct_count, 2);
        assert_eq!(s.categories, vec![("a".into(), 2), ("b".into(), 2)]);
        assert_eq!(s.mean, None);
        assert!(s.histogram.is_empty());
        assert_eq!(s.missing_count, 1);
    }

    #[test]
    fn summary_withholds_high_cardinality_labels() {
        let ids: Vec<Option<String>> = (0..60).map(|i| Some(format!("id{i}"))).collect();
        let c = Column::categorical("id", &ids);
        let s = summary_stats(&c, 10);
        assert!(s.labels_withheld);
        assert!(s.categories.is_empty());
        assert_eq!(s.mode, None);
        assert_eq!(s.distinct_count, 60);
    }

    #[test]
    fn assess_collects_everything() {
        let d = ds(vec![num("a", &[1.0, 2.0, 3.0, 4.0, 100.0])]);
        let q = assess(&d, 10, 1.5);
        assert_eq!(q.outlier_rate_per_column["a"], Some(0.2));
        assert_eq!(q.duplicate_fraction, Some(0.0));
        assert_eq!(q.summary_per_column["a"].max, Some(100.0));
    }
}
