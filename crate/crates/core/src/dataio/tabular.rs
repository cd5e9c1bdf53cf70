use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Text,
    Number,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
        }
    }

    pub fn text(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Text)
    }

    pub fn number(name: impl Into<String>) -> Self {
        Self::new(name, ColumnKind::Number)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Number(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }

    fn fits(&self, kind: ColumnKind) -> bool {
        matches!(
            (self, kind),
            (Cell::Missing, _) | (Cell::Number(_), ColumnKind::Number) | (Cell::Text(_), ColumnKind::Text)
        )
    }
}

/// Empty fields and the literals `NA` / `N/A` (any case) are missing.
pub fn is_missing_token(raw: &str) -> bool {
    let t = raw.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("n/a")
}

/// Named-column table with one kind per column.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularFrame {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
}

impl TabularFrame {
    pub fn new(columns: Vec<Column>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Dimension {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        if let Some((cell, col)) = row
            .iter()
            .zip(&self.columns)
            .find(|(cell, col)| !cell.fits(col.kind))
        {
            return Err(Error::data(format!(
                "cell {cell:?} does not fit {:?} column {:?}",
                col.kind, col.name
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::data(format!("unknown column {name:?}")))
    }

    /// Index of `name`, which must be of `kind`.
    pub fn typed_column(&self, name: &str, kind: ColumnKind) -> Result<usize> {
        let idx = self.column_index(name)?;
        if self.columns[idx].kind != kind {
            return Err(Error::data(format!(
                "column {name:?} is {:?}, expected {kind:?}",
                self.columns[idx].kind
            )));
        }
        Ok(idx)
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    /// All cells of one column, top to bottom.
    pub fn column_cells(&self, col: usize) -> impl Iterator<Item = &Cell> + '_ {
        self.rows.iter().map(move |r| &r[col])
    }

    /// Replaces column `col` with a new definition and cells.
    pub(crate) fn replace_column(&mut self, col: usize, column: Column, cells: Vec<Cell>) -> Result<()> {
        if cells.len() != self.rows.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                got: cells.len(),
            });
        }
        if let Some(bad) = cells.iter().find(|c| !c.fits(column.kind)) {
            return Err(Error::data(format!("cell {bad:?} does not fit {:?}", column.kind)));
        }
        for (row, cell) in self.rows.iter_mut().zip(cells) {
            row[col] = cell;
        }
        self.columns[col] = column;
        Ok(())
    }

    /// Keeps rows whose index satisfies `keep`, preserving order.
    pub(crate) fn retain_rows(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .enumerate()
                .filter(|(i, _)| keep(*i))
                .map(|(_, r)| r.clone())
                .collect(),
        }
    }
}

/// Reads CSV with a header row; output columns follow `schema` order.
pub fn parse_tabular<R: Read>(reader: R, schema: &[Column]) -> Result<TabularFrame> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = csv.headers()?.clone();
    let by_name: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();
    let absent: Vec<&str> = schema
        .iter()
        .filter(|c| !by_name.contains_key(c.name.as_str()))
        .map(|c| c.name.as_str())
        .collect();
    if !absent.is_empty() {
        return Err(Error::data(format!("header is missing columns: {}", absent.join(", "))));
    }
    let positions: Vec<usize> = schema.iter().map(|c| by_name[c.name.as_str()]).collect();

    let mut frame = TabularFrame::new(schema.to_vec());
    for record in csv.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let mut row = Vec::with_capacity(schema.len());
        for (col, &pos) in schema.iter().zip(&positions) {
            let raw = record.get(pos).unwrap_or("");
            let cell = if is_missing_token(raw) {
                Cell::Missing
            } else {
                match col.kind {
                    ColumnKind::Text => Cell::Text(raw.to_owned()),
                    ColumnKind::Number => match raw.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => Cell::Number(v),
                        _ => {
                            return Err(Error::Parse {
                                line,
                                column: Some(pos + 1),
                                message: format!("{:?} is not a number (column {:?})", raw, col.name),
                            })
                        }
                    },
                }
            };
            row.push(cell);
        }
        frame.rows.push(row);
    }
    Ok(frame)
}

pub fn write_tabular<W: Write>(frame: &TabularFrame, out: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(frame.columns.iter().map(|c| c.name.as_str()))?;
    for row in &frame.rows {
        csv.write_record(row.iter().map(|cell| match cell {
            Cell::Number(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }))?;
    }
    csv.flush()?;
    Ok(())
}

fn parse_currency(raw: &str) -> Option<f64> {
    let mut s = raw.trim();
    let code_len = s.bytes().take_while(u8::is_ascii_alphabetic).count();
    if (1..=3).contains(&code_len) {
        s = s[code_len..].trim_start();
    }
    let cleaned: String = s.chars().filter(|&c| c != '$' && c != ',').collect();
    cleaned.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Converts text columns such as `"$1,234"` or `"ITL 45,000"` to numbers.
///
/// Strips `$`, `,`, surrounding spaces and a leading 1–3 letter currency code.
/// Cells that still fail to parse become missing.
pub fn clean_currency(frame: &TabularFrame, columns: &[&str]) -> Result<TabularFrame> {
    let mut out = frame.clone();
    for name in columns {
        let idx = frame.typed_column(name, ColumnKind::Text)?;
        let cells = frame
            .column_cells(idx)
            .map(|cell| match cell.as_text().and_then(parse_currency) {
                Some(v) => Cell::Number(v),
                None => Cell::Missing,
            })
            .collect();
        out.replace_column(idx, Column::number(*name), cells)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema_ab() -> Vec<Column> {
        vec![Column::number("a"), Column::text("b")]
    }

    #[test]
    fn quoted_comma() {
        let frame = parse_tabular("a,b\n1,\"x,y\"\n".as_bytes(), &schema_ab()).unwrap();
        assert_eq!(frame.rows(), &[vec![Cell::Number(1.0), Cell::Text("x,y".into())]]);
    }

    #[test]
    fn doubled_quotes() {
        let frame = parse_tabular("a,b\n1,\"say \"\"hi\"\"\"\n".as_bytes(), &schema_ab()).unwrap();
        assert_eq!(frame.cell(0, 1), &Cell::Text("say \"hi\"".into()));
    }

    #[test]
    fn empty_number_is_missing() {
        let frame = parse_tabular("a,b\n,x\n".as_bytes(), &schema_ab()).unwrap();
        assert_eq!(frame.cell(0, 0), &Cell::Missing);
    }

    #[test]
    fn na_sentinels() {
        let text = "a,b\n1,NA\n2,n/a\n3,na\n";
        let frame = parse_tabular(text.as_bytes(), &schema_ab()).unwrap();
        assert_eq!(frame.len(), 3);
        assert!(frame.column_cells(1).all(Cell::is_missing));
    }

    #[test]
    fn columns_matched_by_name() {
        let frame = parse_tabular("b,extra,a\nx,z,4\n".as_bytes(), &schema_ab()).unwrap();
        assert_eq!(frame.rows(), &[vec![Cell::Number(4.0), Cell::Text("x".into())]]);
    }

    #[test]
    fn absent_columns_listed() {
        let schema = vec![Column::number("a"), Column::text("b"), Column::text("c")];
        let err = parse_tabular("a\n1\n".as_bytes(), &schema).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("b, c"), "{msg}");
    }

    #[test]
    fn bad_number_is_parse_error() {
        let err = parse_tabular("a,b\n1,x\nzz,y\n".as_bytes(), &schema_ab()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: Some(1), .. }), "{err:?}");
    }

    #[test]
    fn currency_rules() {
        assert_eq!(parse_currency("$1,234"), Some(1234.0));
        assert_eq!(parse_currency("ITL 45,000"), Some(45000.0));
        assert_eq!(parse_currency(" EUR12.5 "), Some(12.5));
        assert_eq!(parse_currency("n/a"), None);
        assert_eq!(parse_currency("ABCD 5"), None);
    }

    #[test]
    fn clean_currency_converts_kind() {
        let schema = vec![Column::text("budget")];
        let frame = parse_tabular("budget\n\"$1,234\"\n\"ITL 45,000\"\nNA\nabc\n".as_bytes(), &schema).unwrap();
        let cleaned = clean_currency(&frame, &["budget"]).unwrap();
        assert_eq!(cleaned.columns()[0].kind, ColumnKind::Number);
        let cells: Vec<&Cell> = cleaned.column_cells(0).collect();
        assert_eq!(cells, [&Cell::Number(1234.0), &Cell::Number(45000.0), &Cell::Missing, &Cell::Missing]);
    }

    #[test]
    fn clean_currency_unknown_column() {
        let frame = TabularFrame::new(vec![Column::text("a")]);
        assert!(clean_currency(&frame, &["b"]).is_err());
    }

    #[test]
    fn write_then_parse() {
        let mut frame = TabularFrame::new(schema_ab());
        frame.push_row(vec![Cell::Number(1.5), Cell::Text("a,\"b\"".into())]).unwrap();
        frame.push_row(vec![Cell::Missing, Cell::Missing]).unwrap();
        let mut buf = Vec::new();
        write_tabular(&frame, &mut buf).unwrap();
        assert_eq!(parse_tabular(buf.as_slice(), &schema_ab()).unwrap(), frame);
    }

    #[test]
    fn push_row_checks_kinds() {
        let mut frame = TabularFrame::new(schema_ab());
        assert!(frame.push_row(vec![Cell::Text("x".into()), Cell::Missing]).is_err());
        assert!(frame.push_row(vec![Cell::Missing]).is_err());
    }
}
