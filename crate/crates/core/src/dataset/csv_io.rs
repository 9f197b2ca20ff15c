use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Cell, Column, ColumnKind, Dataset, DatasetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseOptions {
    pub delimiter: u8,
    pub has_header: bool,
    /// Matched case-insensitively after trimming.
    pub missing_tokens: Vec<String>,
    /// Forces a kind for named columns; the only way to get a `Text` column.
    pub kind_overrides: BTreeMap<String, ColumnKind>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            delimiter: b',',
            has_header: true,
            missing_tokens: ["", "NA", "NaN", "null"].iter().map(|s| s.to_string()).collect(),
            kind_overrides: BTreeMap::new(),
        }
    }
}

impl ParseOptions {
    fn is_missing(&self, cell: &str) -> bool {
        self.missing_tokens.iter().any(|t| t.trim().eq_ignore_ascii_case(cell))
    }
}

/// Finds the record (1-based) where an unterminated quoted field starts.
fn unbalanced_quote(text: &str, delimiter: u8) -> Option<usize> {
    let bytes = text.as_bytes();
    let mut record = 1;
    let mut in_quotes = false;
    let mut opened_at = 0;
    let mut at_field_start = true;
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        if in_quotes {
            if b == b'"' {
                if bytes.get(i + 1) == Some(&b'"') {
                    i += 1;
                } else {
                    in_quotes = false;
                }
            }
        } else if b == b'"' && at_field_start {
            in_quotes = true;
            opened_at = record;
        } else if b == b'\n' {
            record += 1;
            at_field_start = true;
            i += 1;
            continue;
        }
        at_field_start = !in_quotes && (b == delimiter || (b == b'\r'));
        i += 1;
    }
    in_quotes.then_some(opened_at)
}

/// Parses RFC 4180 CSV into a typed [`Dataset`].
pub fn parse_csv(
    bytes: &[u8],
    source_id: &str,
    options: &ParseOptions,
) -> Result<Dataset, DatasetError> {
    let text = std::str::from_utf8(bytes).map_err(|e| DatasetError::MalformedCsv {
        row: 1 + bytes[..e.valid_up_to()].iter().filter(|b| **b == b'\n').count(),
        column: None,
        message: "input is not valid UTF-8".into(),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(DatasetError::EmptyInput);
    }
    if let Some(row) = unbalanced_quote(text, options.delimiter) {
        return Err(DatasetError::MalformedCsv {
            row,
            column: None,
            message: "unbalanced quotes".into(),
        });
    }

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DatasetError::MalformedCsv {
            row: e.position().map_or(i + 1, |p| p.record() as usize + 1),
            column: None,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    let mut records = records.into_iter();

    let (names, first_data): (Vec<String>, Option<csv::StringRecord>) = if options.has_header {
        let header = records.next().ok_or(DatasetError::EmptyInput)?;
        (header.iter().map(|h| h.trim().to_string()).collect(), None)
    } else {
        let first = records.next().ok_or(DatasetError::EmptyInput)?;
        ((0..first.len()).map(|i| format!("column_{i}")).collect(), Some(first))
    };
    let mut seen = HashSet::new();
    for n in &names {
        if !seen.insert(n.as_str()) {
            return Err(DatasetError::DuplicateHeader(n.clone()));
        }
    }

    let width = names.len();
    let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); width];
    let header_rows = usize::from(options.has_header);
    for (i, rec) in first_data.into_iter().chain(records).enumerate() {
        if rec.len() != width {
            return Err(DatasetError::MalformedCsv {
                row: i + 1 + header_rows,
                column: Some(rec.len().min(width) + 1),
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (col, field) in rec.iter().enumerate() {
            let t = field.trim();
            raw[col].push((!options.is_missing(t)).then(|| t.to_string()));
        }
    }

    let columns = names
        .into_iter()
        .zip(raw)
        .map(|(name, cells)| {
            let forced = options.kind_overrides.get(&name).copied();
            Column::from_text(name, cells, forced)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(source_id, columns)
}

/// Writes a dataset back to CSV. Missing cells use the first missing token.
///
/// The reader skips blank lines, so a one-column row holding only a missing
/// cell must not come out empty; the csv writer quotes it as `""`.
pub fn write_csv(d: &Dataset, options: &ParseOptions) -> String {
    let missing = options.missing_tokens.first().cloned().unwrap_or_default();
    let mut w = csv::WriterBuilder::new()
        .delimiter(options.delimiter)
        .from_writer(Vec::new());
    let write = |w: &mut csv::Writer<Vec<u8>>, rec: Vec<String>| {
        w.write_record(&rec).expect("writing to memory cannot fail");
    };
    if options.has_header {
        write(&mut w, d.columns().iter().map(|c| c.name().to_string()).collect());
    }
    for row in 0..d.row_count() {
        let rec = d
            .columns()
            .iter()
            .map(|c| c.cells()[row].as_ref().map_or_else(|| missing.clone(), Cell::label))
            .collect();
        write(&mut w, rec);
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<Dataset, DatasetError> {
        parse_csv(s.as_bytes(), "test", &ParseOptions::default())
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let d = parse("a,b\n1,x\n2,y\n").unwrap();
        assert_eq!(d.row_count(), 2);
        assert_eq!(d.column("a").unwrap().kind(), ColumnKind::Numeric);
        assert_eq!(d.column("b").unwrap().kind(), ColumnKind::Categorical);
    }

    #[test]
    fn missing_tokens_are_absent() {
        let d = parse("a\n1\nNA\n3\n").unwrap();
        let a = d.column("a").unwrap();
        assert_eq!(a.missing_count(), 1);
        assert_eq!(a.kind(), ColumnKind::Numeric);

        let d = parse("a,b\n na ,1\nNULL,\nnan,2\n x ,3\n").unwrap();
        let a = d.column("a").unwrap();
        assert_eq!(a.missing_count(), 3);
        assert_eq!(a.cells()[3], Some(Cell::Str("x".into())));
        assert_eq!(d.column("b").unwrap().missing_count(), 1);
    }

    #[test]
    fn mixed_cells_become_categorical() {
        let d = parse("v\n1\n2.5\nabc\n").unwrap();
        assert_eq!(d.column("v").unwrap().kind(), ColumnKind::Categorical);
    }

    #[test]
    fn ragged_row_reports_position() {
        let err = parse("a,b\n1,2\n3\n").unwrap_err();
        assert_eq!(
            err,
            DatasetError::MalformedCsv {
                row: 3,
                column: Some(2),
                message: "expected 2 fields, found 1".into()
            }
        );
    }

    #[test]
    fn unbalanced_quotes_rejected() {
        let err = parse("a,b\n1,\"open\n2,3\n").unwrap_err();
        assert!(
            matches!(err, DatasetError::MalformedCsv { row: 2, ref message, .. } if message == "unbalanced quotes")
        );
        // escaped quotes and embedded newlines are fine
        let d = parse("a,b\n1,\"say \"\"hi\"\"\"\n2,\"multi\nline\"\n").unwrap();
        assert_eq!(d.column("b").unwrap().cells()[0], Some(Cell::Str("say \"hi\"".into())));
        assert_eq!(d.row_count(), 2);
    }

    #[test]
    fn empty_and_duplicate_header() {
        assert_eq!(parse(""), Err(DatasetError::EmptyInput));
        assert_eq!(parse("  \n\n"), Err(DatasetError::EmptyInput));
        assert_eq!(parse("a,a\n1,2\n"), Err(DatasetError::DuplicateHeader("a".into())));
    }

    #[test]
    fn header_only_gives_zero_rows() {
        let d = parse("a,b\n").unwrap();
        assert_eq!(d.row_count(), 0);
        assert_eq!(d.column_count(), 2);
    }

    #[test]
    fn headerless_and_custom_delimiter() {
        let opts = ParseOptions {
            delimiter: b';',
            has_header: false,
            ..Default::default()
        };
        let d = parse_csv(b"1;x\n2;y\n", "t", &opts).unwrap();
        assert_eq!(d.row_count(), 2);
        assert_eq!(d.columns()[0].name(), "column_0");
        let text = write_csv(&d, &opts);
        assert_eq!(text, "1;x\n2;y\n");
    }

    #[test]
    fn kind_override_forces_text_or_fails() {
        let mut opts = ParseOptions::default();
        opts.kind_overrides.insert("id".into(), ColumnKind::Text);
        let d = parse_csv(b"id\n1\n2\n", "t", &opts).unwrap();
        assert_eq!(d.column("id").unwrap().kind(), ColumnKind::Text);

        let mut opts = ParseOptions::default();
        opts.kind_overrides.insert("id".into(), ColumnKind::Numeric);
        let err = parse_csv(b"id\n1\nx\n", "t", &opts).unwrap_err();
        assert!(matches!(err, DatasetError::InvalidCell { row: 1, .. }));
    }

    #[test]
    fn rejects_invalid_utf8() {
        let err = parse_csv(b"a\n\xff\n", "t", &ParseOptions::default()).unwrap_err();
        assert!(matches!(err, DatasetError::MalformedCsv { row: 2, .. }));
    }

    #[test]
    fn strips_bom() {
        let d = parse("\u{feff}a\n1\n").unwrap();
        assert_eq!(d.columns()[0].name(), "a");
    }

    #[test]
    fn single_column_missing_cell_round_trips() {
        let d = parse("a\n1\n\"\"\n3\n").unwrap();
        assert_eq!(d.row_count(), 3);
        let text = write_csv(&d, &ParseOptions::default());
        assert_eq!(text, "a\n1\n\"\"\n3\n");
        assert_eq!(parse(&text).unwrap(), d);
    }
}
