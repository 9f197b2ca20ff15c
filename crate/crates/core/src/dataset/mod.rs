//! Typed columnar datasets with column roles.
//!
//! A [`Dataset`] is immutable once built. Cells are trimmed and matched
//! against the missing-token set at parse time, so every metric sees the same
//! canonical view: absent cells are `None`, numeric cells are finite `f64`.

mod csv_io;
mod descriptor;

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use csv_io::{parse_csv, write_csv, ParseOptions};
pub use descriptor::{FairItem, MetadataDescriptor, Principle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("input is empty")]
    EmptyInput,
    #[error("malformed CSV at row {row}{}: {message}", .column.map(|c| format!(", column {c}")).unwrap_or_default())]
    MalformedCsv {
        /// 1-based physical record number, header included.
        row: usize,
        column: Option<usize>,
        message: String,
    },
    #[error("duplicate column name `{0}`")]
    DuplicateHeader(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{column}` has {got} cells, expected {expected}")]
    RaggedColumns {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("column `{column}` row {row}: {reason}")]
    InvalidCell {
        column: String,
        row: usize,
        reason: String,
    },
    #[error("target column `{0}` cannot also be a quasi-identifier")]
    TargetIsQuasiIdentifier(String),
    #[error("invalid metadata descriptor: {0}")]
    InvalidDescriptor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Boolean,
    Text,
}

impl ColumnKind {
    fn tag(self) -> u8 {
        match self {
            ColumnKind::Numeric => 1,
            ColumnKind::Categorical => 2,
            ColumnKind::Boolean => 3,
            ColumnKind::Text => 4,
        }
    }
}

impl fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Boolean => "boolean",
            ColumnKind::Text => "text",
        };
        f.write_str(s)
    }
}

/// A present cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Bool(bool),
    Str(String),
}

/// Hashable identity of a cell, used for grouping and duplicate detection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CellKey {
    Num(u64),
    Bool(bool),
    Str(String),
}

impl Cell {
    pub fn key(&self) -> CellKey {
        match self {
            // -0.0 and 0.0 are the same observation
            Cell::Num(v) => CellKey::Num(if *v == 0.0 { 0.0f64.to_bits() } else { v.to_bits() }),
            Cell::Bool(b) => CellKey::Bool(*b),
            Cell::Str(s) => CellKey::Str(s.clone()),
        }
    }

    /// Text form used for labels and CSV output. Parsing the label back with
    /// the same column kind yields the same cell.
    pub fn label(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Bool(b) => b.to_string(),
            Cell::Str(s) => s.clone(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            Cell::Str(_) => None,
        }
    }
}

fn format_number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

pub(crate) fn parse_finite(s: &str) -> Option<f64> {
    // Rust accepts "inf"/"nan" spellings; those are never numeric here.
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Infers a column kind from trimmed, already missing-filtered cells.
///
/// Numeric wins when every present cell is a finite real, so `0`/`1` columns
/// stay numeric. Boolean needs at least one `true`/`false` spelling. A single
/// non-conforming cell demotes the column to categorical. Text is never
/// inferred.
pub fn infer_kind<S: AsRef<str>>(cells: &[Option<S>]) -> ColumnKind {
    let present: Vec<&str> = cells.iter().flatten().map(AsRef::as_ref).collect();
    if present.is_empty() {
        return ColumnKind::Categorical;
    }
    if present.iter().all(|c| parse_finite(c).is_some()) {
        return ColumnKind::Numeric;
    }
    let mut distinct = HashSet::new();
    for c in &present {
        if parse_bool(c).is_none() {
            return ColumnKind::Categorical;
        }
        distinct.insert(c.to_ascii_lowercase());
    }
    if distinct.len() <= 2 {
        ColumnKind::Boolean
    } else {
        ColumnKind::Categorical
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    kind: ColumnKind,
    cells: Vec<Option<Cell>>,
    missing_count: usize,
}

impl Column {
    /// Builds a column, checking that every present cell matches `kind`.
    pub fn new(
        name: impl Into<String>,
        kind: ColumnKind,
        cells: Vec<Option<Cell>>,
    ) -> Result<Self, DatasetError> {
        let name = name.into();
        for (row, cell) in cells.iter().enumerate() {
            let ok = match (kind, cell) {
                (_, None) => true,
                (ColumnKind::Numeric, Some(Cell::Num(v))) => v.is_finite(),
                (ColumnKind::Boolean, Some(Cell::Bool(_))) => true,
                (ColumnKind::Categorical | ColumnKind::Text, Some(Cell::Str(_))) => true,
                _ => false,
            };
            if !ok {
                return Err(DatasetError::InvalidCell {
                    column: name,
                    row,
                    reason: format!("cell {cell:?} does not fit a {kind} column"),
                });
            }
        }
        let missing_count = cells.iter().filter(|c| c.is_none()).count();
        Ok(Column {
            name,
            kind,
            cells,
            missing_count,
        })
    }

    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Result<Self, DatasetError> {
        Column::new(name, ColumnKind::Numeric, values.into_iter().map(|v| v.map(Cell::Num)).collect())
    }

    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, values: &[Option<S>]) -> Self {
        let cells = values
            .iter()
            .map(|v| v.as_ref().map(|s| Cell::Str(s.as_ref().to_string())))
            .collect();
        Column::new(name, ColumnKind::Categorical, cells).expect("string cells fit a categorical column")
    }

    /// Converts canonical text cells (trimmed, missing already removed) into
    /// a typed column, inferring the kind unless one is forced.
    pub fn from_text(
        name: impl Into<String>,
        cells: Vec<Option<String>>,
        forced: Option<ColumnKind>,
    ) -> Result<Self, DatasetError> {
        let name = name.into();
        let kind = forced.unwrap_or_else(|| infer_kind(&cells));
        let mut typed = Vec::with_capacity(cells.len());
        for (row, cell) in cells.into_iter().enumerate() {
            let value = match cell {
                None => None,
                Some(text) => Some(match kind {
                    ColumnKind::Numeric => Cell::Num(parse_finite(&text).ok_or_else(|| {
                        DatasetError::InvalidCell {
                            column: name.clone(),
                            row,
                            reason: format!("`{text}` is not a finite number"),
                        }
                    })?),
                    ColumnKind::Boolean => Cell::Bool(parse_bool(&text).ok_or_else(|| {
                        DatasetError::InvalidCell {
                            column: name.clone(),
                            row,
                            reason: format!("`{text}` is not a boolean"),
                        }
                    })?),
                    ColumnKind::Categorical | ColumnKind::Text => Cell::Str(text),
                }),
            };
            typed.push(value);
        }
        Column::new(name, kind, typed)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn cells(&self) -> &[Option<Cell>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn missing_count(&self) -> usize {
        self.missing_count
    }

    pub fn present_count(&self) -> usize {
        self.cells.len() - self.missing_count
    }

    pub fn present(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().flatten()
    }

    /// Present values of a numeric column, in row order. Empty for other kinds.
    pub fn numeric_values(&self) -> Vec<f64> {
        if self.kind != ColumnKind::Numeric {
            return Vec::new();
        }
        self.present().filter_map(Cell::as_f64).collect()
    }

    /// Parses a user-supplied label into this column's cell space.
    pub fn parse_label(&self, label: &str) -> Option<CellKey> {
        let label = label.trim();
        match self.kind {
            ColumnKind::Numeric => parse_finite(label).map(|v| Cell::Num(v).key()),
            ColumnKind::Boolean => parse_bool(label).map(|b| Cell::Bool(b).key()),
            ColumnKind::Categorical | ColumnKind::Text => Some(CellKey::Str(label.to_string())),
        }
    }
}

/// Column role assignments.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoleMap {
    pub target: Option<String>,
    /// Required when statistical parity is requested.
    pub positive_label: Option<String>,
    pub sensitive: BTreeSet<String>,
    pub quasi_identifiers: BTreeSet<String>,
}

impl RoleMap {
    pub fn validate(&self, dataset: &Dataset) -> Result<(), DatasetError> {
        let names = self
            .target
            .iter()
            .chain(self.sensitive.iter())
            .chain(self.quasi_identifiers.iter());
        for name in names {
            if dataset.column(name).is_none() {
                return Err(DatasetError::UnknownColumn(name.clone()));
            }
        }
        if let Some(t) = &self.target {
            if self.quasi_identifiers.contains(t) {
                return Err(DatasetError::TargetIsQuasiIdentifier(t.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    row_count: usize,
    roles: RoleMap,
    source_id: String,
    descriptor: Option<MetadataDescriptor>,
}

impl Dataset {
    pub fn new(source_id: impl Into<String>, columns: Vec<Column>) -> Result<Self, DatasetError> {
        let row_count = columns.first().map_or(0, Column::len);
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name()) {
                return Err(DatasetError::DuplicateHeader(c.name().to_string()));
            }
            if c.len() != row_count {
                return Err(DatasetError::RaggedColumns {
                    column: c.name().to_string(),
                    expected: row_count,
                    got: c.len(),
                });
            }
        }
        Ok(Dataset {
            columns,
            row_count,
            roles: RoleMap::default(),
            source_id: source_id.into(),
            descriptor: None,
        })
    }

    pub fn with_roles(mut self, roles: RoleMap) -> Result<Self, DatasetError> {
        roles.validate(&self)?;
        self.roles = roles;
        Ok(self)
    }

    pub fn with_descriptor(mut self, descriptor: Option<MetadataDescriptor>) -> Self {
        self.descriptor = descriptor;
        self
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn column_count(&self) -> usize {
        self.columns.len()
    }

    pub fn roles(&self) -> &RoleMap {
        &self.roles
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn descriptor(&self) -> Option<&MetadataDescriptor> {
        self.descriptor.as_ref()
    }

    /// Row `i` as grouping keys over the given columns; missing cells are `None`
    /// and compare equal to each other.
    pub(crate) fn row_key(&self, row: usize, columns: &[&Column]) -> Vec<Option<CellKey>> {
        columns
            .iter()
            .map(|c| c.cells()[row].as_ref().map(Cell::key))
            .collect()
    }

    pub fn schema(&self) -> Vec<ColumnSchema> {
        self.columns
            .iter()
            .map(|c| ColumnSchema {
                name: c.name().to_string(),
                kind: c.kind(),
                missing_count: c.missing_count(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub missing_count: usize,
}

/// Deterministic digest over ordered `(name, kind)` pairs and the role map.
pub fn schema_fingerprint(d: &Dataset) -> String {
    fn put(h: &mut Sha256, s: &str) {
        h.update((s.len() as u64).to_be_bytes());
        h.update(s.as_bytes());
    }
    fn put_opt(h: &mut Sha256, s: Option<&String>) {
        match s {
            Some(s) => {
                h.update([1u8]);
                put(h, s);
            }
            None => h.update([0u8]),
        }
    }
    let mut h = Sha256::new();
    h.update(b"readiness-schema-v1");
    h.update((d.columns.len() as u64).to_be_bytes());
    for c in &d.columns {
        put(&mut h, c.name());
        h.update([c.kind().tag()]);
    }
    let roles = &d.roles;
    put_opt(&mut h, roles.target.as_ref());
    put_opt(&mut h, roles.positive_label.as_ref());
    for set in [&roles.sensitive, &roles.quasi_identifiers] {
        h.update((set.len() as u64).to_be_bytes());
        for name in set {
            put(&mut h, name);
        }
    }
    hex::encode(h.finalize())
}
