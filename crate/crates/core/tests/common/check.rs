//! Compares library metrics on one random table against the oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;
use readiness_core::fairness::{class_distribution, representation_rate, statistical_parity};
use readiness_core::governance::reid_risk;
use readiness_core::impact::{correlation_matrix, relevance_scores, ImpactError};
use readiness_core::quality::{completeness, duplicate_fraction, outlier_rate};
use readiness_core::{parse_csv, Dataset, ParseOptions};

use super::oracle::{self, RawTable};

pub const TOL: f64 = 1e-9;

fn close(what: &str, got: Option<f64>, want: Option<f64>) -> Result<(), String> {
    match (got, want) {
        (None, None) => Ok(()),
        (Some(a), Some(b)) if (a - b).abs() <= TOL => Ok(()),
        _ => Err(format!("{what}: got {got:?}, oracle {want:?}")),
    }
}

fn exact<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, oracle {want:?}"))
    }
}

pub fn parse(t: &RawTable) -> Dataset {
    parse_csv(t.to_csv().as_bytes(), "random.csv", &ParseOptions::default()).expect("generated CSV parses")
}

/// Checks every quality, fairness, governance and impact metric on `t`.
/// `rng` picks the role columns.
pub fn check_table(t: &RawTable, rng: &mut impl Rng) -> Result<(), String> {
    let d = parse(t);
    let k = t.names.len();

    close("completeness", Some(completeness(&d).overall), Some(oracle::completeness(t)))?;
    let dup = duplicate_fraction(&d).map_err(|e| e.to_string())?;
    let (want_dup, want_frac) = oracle::duplicates(t);
    exact("duplicate rows", dup.duplicate_rows, want_dup)?;
    close("duplicate fraction", Some(dup.fraction), Some(want_frac))?;

    for j in 0..k {
        if t.is_numeric(j) {
            let got = outlier_rate(&d.columns()[j], 1.5).ok().map(|o| o.rate);
            close(&format!("outlier rate c{j}"), got, oracle::outlier_rate(t, j, 1.5))?;
        }
    }

    // re-identification over a random non-empty QI subset
    let mut qis: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
    if qis.is_empty() {
        qis.push(rng.random_range(0..k));
    }
    let names: BTreeSet<String> = qis.iter().map(|&j| t.names[j].clone()).collect();
    let got = reid_risk(&d, &names).map_err(|e| e.to_string())?;
    let want = oracle::reid(t, &qis);
    exact("k-anonymity", got.k_anonymity, want.k)?;
    exact("equivalence classes", got.equivalence_classes, want.classes)?;
    close("proportion unique", Some(got.proportion_unique), Some(want.proportion_unique))?;
    close("average risk", Some(got.average_risk), Some(want.average_risk))?;

    // fairness: random target and sensitive columns
    let target = rng.random_range(0..k);
    let tcol = &d.columns()[target];
    if tcol.present_count() > 0 {
        let got = class_distribution(tcol).map_err(|e| e.to_string())?;
        let (want_counts, want_score) = oracle::imbalance(t, target);
        let mut counts: Vec<usize> = got.counts.values().copied().collect();
        counts.sort_unstable();
        exact("class counts", counts, want_counts.clone())?;
        exact("single class", got.single_class, want_counts.len() == 1)?;
        close("imbalance score", Some(got.imbalance_score), Some(want_score))?;

        let sensitive = rng.random_range(0..k);
        let scol = &d.columns()[sensitive];
        if scol.present_count() > 0 {
            let mut rates: Vec<f64> = representation_rate(scol).map_err(|e| e.to_string())?.into_values().collect();
            rates.sort_by(f64::total_cmp);
            let want = oracle::representation(t, sensitive);
            exact("group count", rates.len(), want.len())?;
            for (a, b) in rates.iter().zip(&want) {
                close("representation", Some(*a), Some(*b))?;
            }
            let positive = t.rows.iter().find_map(|r| r[target].clone()).expect("target has a value");
            let got = statistical_parity(tcol, &positive, scol).ok().map(|p| p.spd);
            close("statistical parity", got, oracle::spd(t, target, &positive, sensitive))?;
        }

        // relevance against this target
        let bins = rng.random_range(1..=10);
        match relevance_scores(&d, &t.names[target], bins) {
            Ok(s) => {
                for j in (0..k).filter(|&j| j != target) {
                    let got = s.scores[&t.names[j]];
                    close(&format!("nmi c{j} bins={bins}"), got, oracle::nmi(t, j, target, bins))?;
                }
            }
            Err(ImpactError::SingleClassTarget(_)) => exact("single-class target", oracle::distinct(t, target), 1)?,
            Err(e) => return Err(format!("relevance failed: {e}")),
        }
    }

    // correlations over all numeric columns (no target role on `d`)
    let numeric: Vec<usize> = (0..k).filter(|&j| t.is_numeric(j)).collect();
    match correlation_matrix(&d) {
        Ok(m) => {
            exact("correlation features", m.features.len(), numeric.len())?;
            for (a, &ja) in numeric.iter().enumerate() {
                for (b, &jb) in numeric.iter().enumerate() {
                    let want = if a == b {
                        oracle::self_correlation(t, ja)
                    } else {
                        oracle::pearson(t, ja, jb)
                    };
                    close(&format!("corr c{ja},c{jb}"), m.entries[a][b], want)?;
                }
            }
        }
        Err(ImpactError::TooFewNumericColumns(n)) => exact("numeric columns", n, numeric.len())?,
        Err(e) => return Err(e.to_string()),
    }
    Ok(())
}
