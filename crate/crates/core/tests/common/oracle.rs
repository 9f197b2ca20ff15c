//! Brute-force reference implementations over raw string tables.
//!
//! Everything here works from the generated CSV text, not from the library's
//! column types, so it checks parsing, typing and the metric code together.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;

pub const PALETTE: [&str; 4] = ["red", "green", "blue", "teal"];

#[derive(Debug, Clone)]
pub struct RawTable {
    pub names: Vec<String>,
    /// `rows[i][j]`, `None` for a missing cell.
    pub rows: Vec<Vec<Option<String>>>,
}

impl RawTable {
    pub fn to_csv(&self) -> String {
        let mut s = self.names.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<&str> = r.iter().map(|c| c.as_deref().unwrap_or("")).collect();
            let line = cells.join(",");
            // a blank line is skipped by CSV readers, so quote a lone empty field
            s.push_str(if line.is_empty() { "\"\"" } else { &line });
            s.push('\n');
        }
        s
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn col(&self, j: usize) -> Vec<Option<&str>> {
        self.rows.iter().map(|r| r[j].as_deref()).collect()
    }

    /// A column is numeric when it has a present cell and every present
    /// cell parses as a finite number.
    pub fn is_numeric(&self, j: usize) -> bool {
        let present: Vec<&str> = self.col(j).into_iter().flatten().collect();
        !present.is_empty() && present.iter().all(|s| s.parse::<f64>().is_ok_and(f64::is_finite))
    }

    pub fn index(&self, name: &str) -> usize {
        self.names.iter().position(|n| n == name).unwrap()
    }
}

/// Random table: 1..=50 rows, 1..=6 columns. Numeric columns hold small
/// integers or one-decimal values (sometimes constant); categorical columns
/// draw from [`PALETTE`]. Roughly 10% of cells are missing.
pub fn random_table(rng: &mut impl Rng) -> RawTable {
    let n = rng.random_range(1..=50);
    let k = rng.random_range(1..=6);
    let mut cols: Vec<Vec<Option<String>>> = Vec::new();
    for _ in 0..k {
        let missing_rate = if rng.random_bool(0.3) { 0.0 } else { 0.1 };
        let col: Vec<Option<String>> = match rng.random_range(0..4) {
            0 => {
                let c = rng.random_range(-3..4);
                (0..n).map(|_| Some(c.to_string())).collect()
            }
            1 => (0..n)
                .map(|_| Some(format!("{:.1}", rng.random_range(-50..50) as f64 / 10.0)))
                .collect(),
            2 => (0..n).map(|_| Some(rng.random_range(0..5).to_string())).collect(),
            _ => {
                let alphabet = &PALETTE[..rng.random_range(1..=4)];
                (0..n).map(|_| Some(alphabet.choose(rng).unwrap().to_string())).collect()
            }
        };
        cols.push(
            col.into_iter()
                .map(|c| if rng.random_bool(missing_rate) { None } else { c })
                .collect(),
        );
    }
    RawTable {
        names: (0..k).map(|j| format!("c{j}")).collect(),
        rows: (0..n).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect(),
    }
}

/// Cell identity: numbers by value, everything else by text.
fn norm(table: &RawTable, j: usize, cell: Option<&str>) -> Option<String> {
    let numeric = table.is_numeric(j);
    cell.map(|s| {
        if numeric {
            let v: f64 = s.parse().unwrap();
            format!("n{}", if v == 0.0 { 0.0 } else { v })
        } else {
            format!("s{s}")
        }
    })
}

fn row_key(t: &RawTable, i: usize, cols: &[usize]) -> Vec<Option<String>> {
    cols.iter().map(|&j| norm(t, j, t.rows[i][j].as_deref())).collect()
}

pub fn completeness(t: &RawTable) -> f64 {
    let total = t.n() * t.names.len();
    let present = t.rows.iter().flatten().filter(|c| c.is_some()).count();
    present as f64 / total as f64
}

/// `(duplicate_rows, fraction)`: rows equal to some earlier row.
pub fn duplicates(t: &RawTable) -> (usize, f64) {
    let all: Vec<usize> = (0..t.names.len()).collect();
    let dup = (0..t.n())
        .filter(|&i| (0..i).any(|j| row_key(t, i, &all) == row_key(t, j, &all)))
        .count();
    (dup, dup as f64 / t.n() as f64)
}

pub struct Reid {
    pub k: usize,
    pub proportion_unique: f64,
    pub average_risk: f64,
    pub classes: usize,
}

pub fn reid(t: &RawTable, qis: &[usize]) -> Reid {
    let n = t.n();
    let sizes: Vec<usize> = (0..n)
        .map(|i| (0..n).filter(|&j| row_key(t, i, qis) == row_key(t, j, qis)).count())
        .collect();
    let distinct: BTreeSet<Vec<Option<String>>> = (0..n).map(|i| row_key(t, i, qis)).collect();
    Reid {
        k: *sizes.iter().min().unwrap(),
        proportion_unique: sizes.iter().filter(|&&s| s == 1).count() as f64 / n as f64,
        average_risk: sizes.iter().map(|&s| 1.0 / s as f64).sum::<f64>() / n as f64,
        classes: distinct.len(),
    }
}

fn counts_of(t: &RawTable, j: usize) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for c in t.col(j) {
        if let Some(k) = norm(t, j, c) {
            *m.entry(k).or_insert(0) += 1;
        }
    }
    m
}

/// Sorted class counts and `1 - H/ln K` (1 for a single class).
pub fn imbalance(t: &RawTable, j: usize) -> (Vec<usize>, f64) {
    let counts = counts_of(t, j);
    let mut v: Vec<usize> = counts.values().copied().collect();
    v.sort_unstable();
    let n: usize = v.iter().sum();
    let score = if v.len() <= 1 {
        1.0
    } else {
        let h: f64 = v
            .iter()
            .map(|&c| {
                let p = c as f64 / n as f64;
                -p * p.ln()
            })
            .sum();
        1.0 - h / (v.len() as f64).ln()
    };
    (v, score)
}

/// Sorted group shares among present cells.
pub fn representation(t: &RawTable, j: usize) -> Vec<f64> {
    let counts = counts_of(t, j);
    let n: usize = counts.values().sum();
    let mut v: Vec<f64> = counts.values().map(|&c| c as f64 / n as f64).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Max minus min positive rate over groups, using rows where both cells exist.
pub fn spd(t: &RawTable, target: usize, positive: &str, sensitive: usize) -> Option<f64> {
    let pos = norm(t, target, Some(positive));
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in &t.rows {
        if let (Some(y), Some(g)) = (r[target].as_deref(), r[sensitive].as_deref()) {
            let e = groups.entry(norm(t, sensitive, Some(g)).unwrap()).or_default();
            e.0 += 1;
            e.1 += (norm(t, target, Some(y)) == pos) as usize;
        }
    }
    let rates: Vec<f64> = groups.values().map(|&(n, p)| p as f64 / n as f64).collect();
    if rates.is_empty() {
        return None;
    }
    let max = rates.iter().copied().fold(f64::MIN, f64::max);
    let min = rates.iter().copied().fold(f64::MAX, f64::min);
    Some(max - min)
}

fn numbers(t: &RawTable, j: usize) -> Vec<Option<f64>> {
    t.col(j).into_iter().map(|c| c.map(|s| s.parse().unwrap())).collect()
}

/// Pearson over pairwise-complete rows via sample covariance / sample sds.
pub fn pearson(t: &RawTable, a: usize, b: usize) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = numbers(t, a)
        .into_iter()
        .zip(numbers(t, b))
        .filter_map(|(x, y)| Some((x?, y?)))
        .collect();
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let constant = |f: fn(&(f64, f64)) -> f64| pairs.iter().all(|p| f(p) == f(&pairs[0]));
    if constant(|p| p.0) || constant(|p| p.1) {
        return None;
    }
    let nf = n as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let cov = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / (nf - 1.0);
    let sx = (pairs.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    let sy = (pairs.iter().map(|p| (p.1 - my).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt();
    Some(cov / (sx * sy))
}

/// Diagonal entry: 1 for a nonconstant column with at least two values.
pub fn self_correlation(t: &RawTable, a: usize) -> Option<f64> {
    let v: Vec<f64> = numbers(t, a).into_iter().flatten().collect();
    (v.len() >= 2 && v.iter().any(|x| *x != v[0])).then_some(1.0)
}

fn entropy_of<K: Ord>(items: impl IntoIterator<Item = K>) -> f64 {
    let mut m: BTreeMap<K, usize> = BTreeMap::new();
    let mut n = 0usize;
    for k in items {
        *m.entry(k).or_insert(0) += 1;
        n += 1;
    }
    m.values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum()
}

/// NMI via `I = H(X) + H(Y) - H(X,Y)` over pairwise-complete rows.
/// Numeric features are cut into `bins` equal-width bins over their complete
/// rows. `None` when either marginal entropy is zero.
pub fn nmi(t: &RawTable, feature: usize, target: usize, bins: usize) -> Option<f64> {
    let rows: Vec<(&str, String)> = t
        .rows
        .iter()
        .filter_map(|r| Some((r[feature].as_deref()?, norm(t, target, r[target].as_deref())?)))
        .collect();
    if rows.is_empty() {
        return None;
    }
    let xs: Vec<String> = if t.is_numeric(feature) {
        let v: Vec<f64> = rows.iter().map(|r| r.0.parse().unwrap()).collect();
        let lo = v.iter().copied().fold(f64::MAX, f64::min);
        let hi = v.iter().copied().fold(f64::MIN, f64::max);
        if lo == hi {
            return None;
        }
        v.iter()
            .map(|x| {
                let b = (((x - lo) / (hi - lo)) * bins as f64).floor() as usize;
                b.min(bins - 1).to_string()
            })
            .collect()
    } else {
        rows.iter().map(|r| r.0.to_string()).collect()
    };
    let ys: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    let hx = entropy_of(xs.iter());
    let hy = entropy_of(ys.iter());
    let hxy = entropy_of(xs.iter().zip(ys.iter()));
    let denom = hx.min(hy);
    (denom > 0.0).then(|| (hx + hy - hxy) / denom)
}

/// Number of distinct present values of column `j`.
pub fn distinct(t: &RawTable, j: usize) -> usize {
    counts_of(t, j).len()
}

/// Tukey rate with `(n-1)p` interpolated quartiles; needs 4 present values.
pub fn outlier_rate(t: &RawTable, j: usize, k: f64) -> Option<f64> {
    let mut v: Vec<f64> = numbers(t, j).into_iter().flatten().collect();
    if v.len() < 4 {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    let (q1, q3) = (q(0.25), q(0.75));
    let iqr = q3 - q1;
    let out = v.iter().filter(|x| **x < q1 - k * iqr || **x > q3 + k * iqr).count();
    Some(out as f64 / v.len() as f64)
}
