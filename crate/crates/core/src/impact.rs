//! Impact on AI pillar: feature correlations and feature-to-target relevance.
//!
//! Degenerate inputs never turn into NaN. A zero-variance feature yields
//! `None` entries and is listed explicitly so the caller can flag it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Cell, CellKey, Column, ColumnKind, Dataset};
use crate::stats;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImpactError {
    #[error("correlation needs at least 2 numeric feature columns, found {0}")]
    TooFewNumericColumns(usize),
    #[error("target column `{0}` has a single observed class")]
    SingleClassTarget(String),
    #[error("target column `{0}` has no present values")]
    EmptyOverlap(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub features: Vec<String>,
    /// Pearson coefficients; `None` where undefined.
    pub entries: Vec<Vec<Option<f64>>>,
    /// Pairwise-complete row count behind each entry.
    pub pair_counts: Vec<Vec<usize>>,
    /// Features whose present values are all equal.
    pub undefined_features: Vec<String>,
}

/// Numeric columns other than the target, in dataset order.
pub fn numeric_features(d: &Dataset) -> Vec<&Column> {
    let target = d.roles().target.as_deref();
    d.columns()
        .iter()
        .filter(|c| c.kind() == ColumnKind::Numeric && Some(c.name()) != target)
        .collect()
}

fn is_constant(values: impl IntoIterator<Item = f64>) -> bool {
    let mut it = values.into_iter();
    match it.next() {
        None => true,
        Some(first) => it.all(|v| v == first),
    }
}

/// Numeric features with zero variance over their present values.
pub fn zero_variance_features(d: &Dataset) -> Vec<String> {
    numeric_features(d)
        .into_iter()
        .filter(|c| is_constant(c.numeric_values()))
        .map(|c| c.name().to_string())
        .collect()
}

fn pearson(x: &Column, y: &Column) -> (Option<f64>, usize) {
    let pairs: Vec<(f64, f64)> = x
        .cells()
        .iter()
        .zip(y.cells())
        .filter_map(|(a, b)| Some((a.as_ref()?.as_f64()?, b.as_ref()?.as_f64()?)))
        .collect();
    let n = pairs.len();
    if n < 2 || is_constant(pairs.iter().map(|p| p.0)) || is_constant(pairs.iter().map(|p| p.1)) {
        return (None, n);
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    (r.is_finite().then(|| r.clamp(-1.0, 1.0)), n)
}

pub fn correlation_matrix(d: &Dataset) -> Result<CorrelationMatrix, ImpactError> {
    let features = numeric_features(d);
    if features.len() < 2 {
        return Err(ImpactError::TooFewNumericColumns(features.len()));
    }
    let k = features.len();
    let mut entries = vec![vec![None; k]; k];
    let mut pair_counts = vec![vec![0; k]; k];
    for i in 0..k {
        let own = features[i].numeric_values();
        pair_counts[i][i] = own.len();
        entries[i][i] = (own.len() >= 2 && !is_constant(own)).then_some(1.0);
        for j in (i + 1)..k {
            let (r, n) = pearson(features[i], features[j]);
            entries[i][j] = r;
            entries[j][i] = r;
            pair_counts[i][j] = n;
            pair_counts[j][i] = n;
        }
    }
    Ok(CorrelationMatrix {
        features: features.iter().map(|c| c.name().to_string()).collect(),
        entries,
        pair_counts,
        undefined_features: zero_variance_features(d),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScores {
    pub target: String,
    pub bins: usize,
    /// Normalized mutual information with the target, in `[0, 1]`.
    pub scores: BTreeMap<String, Option<f64>>,
    /// Why a score is undefined.
    pub reasons: BTreeMap<String, String>,
    /// Pairwise-complete rows used per feature.
    pub effective_n: BTreeMap<String, usize>,
}

/// `I(X;Y) / min(H(X), H(Y))` from joint counts; `None` when either entropy is 0.
pub fn normalized_mutual_information<X, Y>(pairs: &[(X, Y)]) -> Option<f64>
where
    X: std::hash::Hash + Eq + Clone,
    Y: std::hash::Hash + Eq + Clone,
{
    let mut joint: HashMap<(X, Y), usize> = HashMap::new();
    let mut xs: HashMap<X, usize> = HashMap::new();
    let mut ys: HashMap<Y, usize> = HashMap::new();
    for (x, y) in pairs {
        *joint.entry((x.clone(), y.clone())).or_default() += 1;
        *xs.entry(x.clone()).or_default() += 1;
        *ys.entry(y.clone()).or_default() += 1;
    }
    let hx = stats::entropy(xs.into_values());
    let hy = stats::entropy(ys.into_values());
    let hxy = stats::entropy(joint.into_values());
    let denom = hx.min(hy);
    if denom <= 0.0 {
        return None;
    }
    let mi = (hx + hy - hxy).max(0.0);
    Some((mi / denom).clamp(0.0, 1.0))
}

#[derive(Clone, PartialEq, Eq, Hash)]
enum Discrete {
    Bin(usize),
    Key(CellKey),
}

pub fn relevance_scores(d: &Dataset, target: &str, bins: usize) -> Result<RelevanceScores, ImpactError> {
    let bins = bins.max(1);
    let tcol = d
        .column(target)
        .ok_or_else(|| ImpactError::UnknownColumn(target.to_string()))?;
    let classes = stats::count_by(tcol.present().map(Cell::key));
    match classes.len() {
        0 => return Err(ImpactError::EmptyOverlap(target.to_string())),
        1 => return Err(ImpactError::SingleClassTarget(target.to_string())),
        _ => {}
    }

    let mut out = RelevanceScores {
        target: target.to_string(),
        bins,
        scores: BTreeMap::new(),
        reasons: BTreeMap::new(),
        effective_n: BTreeMap::new(),
    };
    for col in d.columns().iter().filter(|c| c.name() != target) {
        let name = col.name().to_string();
        let rows: Vec<(&Cell, CellKey)> = col
            .cells()
            .iter()
            .zip(tcol.cells())
            .filter_map(|(x, y)| Some((x.as_ref()?, y.as_ref()?.key())))
            .collect();
        out.effective_n.insert(name.clone(), rows.len());

        let reason = if col.kind() == ColumnKind::Text {
            Some("free-text column")
        } else if rows.is_empty() {
            Some("no rows with both feature and target present")
        } else {
            None
        };
        if let Some(r) = reason {
            out.scores.insert(name.clone(), None);
            out.reasons.insert(name, r.to_string());
            continue;
        }

        let pairs: Vec<(Discrete, CellKey)> = if col.kind() == ColumnKind::Numeric {
            let xs: Vec<f64> = rows.iter().filter_map(|(x, _)| x.as_f64()).collect();
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if min == max {
                out.scores.insert(name.clone(), None);
                out.reasons.insert(name, "zero variance over complete rows".into());
                continue;
            }
            rows.iter()
                .zip(&xs)
                .map(|((_, y), x)| (Discrete::Bin(stats::bin_index(*x, min, max, bins)), y.clone()))
                .collect()
        } else {
            rows.iter().map(|(x, y)| (Discrete::Key(x.key()), y.clone())).collect()
        };
        let score = normalized_mutual_information(&pairs);
        if score.is_none() {
            out.reasons
                .insert(name.clone(), "feature or target constant over complete rows".into());
        }
        out.scores.insert(name, score);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::RoleMap;

    fn num(name: &str, v: &[f64]) -> Column {
        Column::numeric(name, v.iter().map(|x| Some(*x)).collect()).unwrap()
    }

    #[test]
    fn identity_affine_and_sign() {
        let x = [1.0, 2.0, 4.0, 3.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let z: Vec<f64> = x.iter().map(|v| -v).collect();
        let d = Dataset::new("t", vec![num("x", &x), num("y", &y), num("z", &z)]).unwrap();
        let m = correlation_matrix(&d).unwrap();
        assert_eq!(m.entries[0][0], Some(1.0));
        assert!((m.entries[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert!((m.entries[0][2].unwrap() + 1.0).abs() < 1e-12);
        assert!(m.undefined_features.is_empty());
    }

    #[test]
    fn all_zero_feature_is_undefined() {
        let d = Dataset::new(
            "t",
            vec![num("a", &[1.0, 2.0, 3.0]), num("zero", &[0.0, 0.0, 0.0]), num("b", &[3.0, 1.0, 2.0])],
        )
        .unwrap();
        let m = correlation_matrix(&d).unwrap();
        assert_eq!(m.undefined_features, vec!["zero".to_string()]);
        for i in 0..3 {
            assert_eq!(m.entries[1][i], None);
            assert_eq!(m.entries[i][1], None);
        }
        assert!(m.entries[0][2].is_some());
    }

    #[test]
    fn pairwise_complete_rows() {
        let a = Column::numeric("a", vec![Some(1.0), Some(2.0), None, Some(4.0)]).unwrap();
        let b = Column::numeric("b", vec![Some(2.0), Some(4.0), Some(5.0), None]).unwrap();
        let d = Dataset::new("t", vec![a, b]).unwrap();
        let m = correlation_matrix(&d).unwrap();
        assert_eq!(m.pair_counts[0][1], 2);
        assert!((m.entries[0][1].unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(m.pair_counts[0][0], 3);
    }

    #[test]
    fn needs_two_numeric_features_excluding_target() {
        let d = Dataset::new("t", vec![num("a", &[1.0, 2.0]), num("y", &[0.0, 1.0])])
            .unwrap()
            .with_roles(RoleMap {
                target: Some("y".into()),
                ..Default::default()
            })
            .unwrap();
        assert_eq!(correlation_matrix(&d), Err(ImpactError::TooFewNumericColumns(1)));
    }

    #[test]
    fn nmi_examples() {
        let y = ["0", "1", "0", "1"];
        let same: Vec<(&str, &str)> = y.iter().map(|v| (*v, *v)).collect();
        assert_eq!(normalized_mutual_information(&same), Some(1.0));

        let constant: Vec<(&str, &str)> = y.iter().map(|v| ("c", *v)).collect();
        assert_eq!(normalized_mutual_information(&constant), None);

        // joint counts {(0,0):4,(0,1):1,(1,0):1,(1,1):4}; frozen from brute-force entropy
        let mut pairs = Vec::new();
        for (x, y, n) in [(0, 0, 4), (0, 1, 1), (1, 0, 1), (1, 1, 4)] {
            pairs.extend(std::iter::repeat_n((x, y), n));
        }
        let nmi = normalized_mutual_information(&pairs).unwrap();
        assert!((nmi - 0.2780719051126378).abs() < 1e-12);
    }

    #[test]
    fn relevance_over_dataset() {
        let y = Column::categorical("y", &[Some("a"), Some("b"), Some("a"), Some("b"), Some("a"), Some("b")]);
        let same = num("same", &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let flat = num("flat", &[3.0; 6]);
        let noise = Column::categorical("noise", &[Some("p"), Some("p"), Some("q"), Some("q"), None, None]);
        let d = Dataset::new("t", vec![same, flat, noise, y]).unwrap();
        let r = relevance_scores(&d, "y", 10).unwrap();
        assert_eq!(r.scores["same"], Some(1.0));
        assert_eq!(r.scores["flat"], None);
        assert!(r.reasons["flat"].contains("zero variance"));
        assert_eq!(r.scores["noise"], Some(0.0));
        assert_eq!(r.effective_n["noise"], 4);
        assert_eq!(r.bins, 10);
    }

    #[test]
    fn relevance_single_class_target() {
        let y = Column::categorical("y", &[Some("a"), Some("a")]);
        let d = Dataset::new("t", vec![num("x", &[1.0, 2.0]), y]).unwrap();
        assert_eq!(relevance_scores(&d, "y", 10), Err(ImpactError::SingleClassTarget("y".into())));
        let y = Column::categorical::<&str>("y", &[None, None]);
        let d = Dataset::new("t", vec![num("x", &[1.0, 2.0]), y]).unwrap();
        assert!(matches!(relevance_scores(&d, "y", 10), Err(ImpactError::EmptyOverlap(_))));
    }
}
