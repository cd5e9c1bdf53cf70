use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major labeled dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseDataset {
    features: Array2<f64>,
    labels: Vec<f64>,
}

/// How the first field of a dense record maps onto the stored label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMap {
    /// Labels are written as `0` / `1`.
    ZeroOne,
    /// Labels are written as `-1` / `+1`; −1 is stored as 0.
    PlusMinusOne,
    /// Any finite real target, stored as-is.
    Continuous,
}

impl DenseDataset {
    pub fn new(features: Array2<f64>, labels: Vec<f64>) -> Result<Self> {
        if features.ncols() == 0 {
            return Err(Error::data("dataset must have at least one feature"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::Dimension {
                expected: features.nrows(),
                got: labels.len(),
            });
        }
        Ok(Self { features, labels })
    }

    /// Rows of equal length, one label each.
    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<f64>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Dimension {
                expected: width,
                got: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let features = Array2::from_shape_vec((rows.len(), width), flat)
            .map_err(|e| Error::data(e.to_string()))?;
        Self::new(features, labels)
    }

    pub fn empty(num_features: usize) -> Self {
        Self {
            features: Array2::zeros((0, num_features)),
            labels: Vec::new(),
        }
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// True when every label is exactly 0.0 or 1.0.
    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&y| y == 0.0 || y == 1.0)
    }

    pub fn require_binary(&self) -> Result<()> {
        match self.labels.iter().position(|&y| y != 0.0 && y != 1.0) {
            None => Ok(()),
            Some(i) => Err(Error::data(format!(
                "row {i} has non-binary label {}",
                self.labels[i]
            ))),
        }
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn concat(parts: &[DenseDataset]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::data("cannot concatenate zero datasets"))?;
        let width = first.num_features();
        let mut values = Vec::with_capacity(parts.iter().map(|p| p.features.len()).sum());
        let mut labels = Vec::new();
        for part in parts {
            if part.num_features() != width {
                return Err(Error::Dimension {
                    expected: width,
                    got: part.num_features(),
                });
            }
            values.extend(part.features.iter().copied());
            labels.extend_from_slice(&part.labels);
        }
        let features = Array2::from_shape_vec((labels.len(), width), values)
            .map_err(|e| Error::data(e.to_string()))?;
        Self::new(features, labels)
    }
}

fn map_label(raw: f64, map: LabelMap, line: usize) -> Result<f64> {
    let bad = || Error::Parse {
        line,
        column: Some(1),
        message: format!("label {raw} outside the {map:?} alphabet"),
    };
    match map {
        LabelMap::ZeroOne if raw == 0.0 || raw == 1.0 => Ok(raw),
        LabelMap::PlusMinusOne if raw == -1.0 => Ok(0.0),
        LabelMap::PlusMinusOne if raw == 1.0 => Ok(1.0),
        LabelMap::Continuous if raw.is_finite() => Ok(raw),
        _ => Err(bad()),
    }
}

/// Streams `label,f1,...,fF` records into a [`DenseDataset`].
///
/// Memory use is proportional to the parsed output; one line buffer is reused
/// for the whole stream. Blank lines are skipped.
pub fn parse_dense<R: BufRead>(
    mut reader: R,
    num_features: usize,
    label_map: LabelMap,
) -> Result<DenseDataset> {
    if num_features == 0 {
        return Err(Error::config("num_features must be positive"));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let start = values.len();
        let mut fields = 0;
        for (col, field) in line.split(',').enumerate() {
            fields += 1;
            if fields > num_features + 1 {
                continue;
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                column: Some(col + 1),
                message: format!("non-numeric field {field:?}"),
            })?;
            if col == 0 {
                labels.push(map_label(v, label_map, line_no)?);
            } else {
                values.push(v);
            }
        }
        if fields != num_features + 1 {
            values.truncate(start);
            return Err(Error::Parse {
                line: line_no,
                column: None,
                message: format!("expected {} fields, found {fields}", num_features + 1),
            });
        }
    }
    let features = Array2::from_shape_vec((labels.len(), num_features), values)
        .map_err(|e| Error::data(e.to_string()))?;
    DenseDataset::new(features, labels)
}

/// Writes one record per line. Features use shortest round-trip formatting,
/// so [`parse_dense`] recovers them bit-exactly.
pub fn write_dense<W: Write>(ds: &DenseDataset, mut out: W, label_map: LabelMap) -> Result<()> {
    let mut line = String::new();
    for (i, row) in ds.features.rows().into_iter().enumerate() {
        use std::fmt::Write as _;
        line.clear();
        let y = ds.labels[i];
        match label_map {
            LabelMap::ZeroOne => line.push_str(if y == 1.0 { "1" } else { "0" }),
            LabelMap::PlusMinusOne => line.push_str(if y == 1.0 { "1" } else { "-1" }),
            LabelMap::Continuous => write!(line, "{y:?}").unwrap(),
        }
        for v in row {
            write!(line, ",{v:?}").unwrap();
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_dense_file(
    path: impl AsRef<Path>,
    num_features: usize,
    label_map: LabelMap,
) -> Result<DenseDataset> {
    let file = File::open(path.as_ref())?;
    parse_dense(BufReader::new(file), num_features, label_map)
}

/// Feature count of the first non-blank record (field count minus the label).
pub fn sniff_num_features(path: impl AsRef<Path>) -> Result<usize> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            return match line.split(',').count() {
                n if n >= 2 => Ok(n - 1),
                _ => Err(Error::Parse {
                    line: 1,
                    column: None,
                    message: "record has no feature fields".into(),
                }),
            };
        }
    }
    Err(Error::data(format!("{} holds no records", path.as_ref().display())))
}

pub fn write_dense_file(
    ds: &DenseDataset,
    path: impl AsRef<Path>,
    label_map: LabelMap,
) -> Result<()> {
    let file = File::create(path.as_ref())?;
    write_dense(ds, BufWriter::new(file), label_map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str, f: usize, map: LabelMap) -> Result<DenseDataset> {
        parse_dense(text.as_bytes(), f, map)
    }

    #[test]
    fn all_zero_record() {
        let mut line = String::from("1");
        for _ in 0..2000 {
            line.push_str(",0");
        }
        let ds = parse(&line, 2000, LabelMap::ZeroOne).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.labels(), &[1.0]);
        assert!(ds.row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn plus_minus_one_maps_to_zero_one() {
        let ds = parse("-1,0.5,-0.25\n+1,1,2\n", 2, LabelMap::PlusMinusOne).unwrap();
        assert_eq!(ds.labels(), &[0.0, 1.0]);
        assert_eq!(ds.row(0).to_vec(), vec![0.5, -0.25]);
    }

    #[test]
    fn malformed_line_is_named() {
        let mut text = String::new();
        for i in 1..=12 {
            if i == 7 {
                text.push_str("1,0.5\n");
            } else {
                text.push_str("0,0.5,1.5\n");
            }
        }
        match parse(&text, 2, LabelMap::ZeroOne) {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(column, None);
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_reports_line_and_column() {
        match parse("0,1,2\n1,x,2\n", 2, LabelMap::ZeroOne) {
            Err(Error::Parse { line: 2, column: Some(2), .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_outside_alphabet() {
        assert!(matches!(
            parse("2,1,2\n", 2, LabelMap::ZeroOne),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse("0,1,2\n", 2, LabelMap::PlusMinusOne),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn too_many_fields() {
        assert!(parse("0,1,2,3\n", 2, LabelMap::ZeroOne).is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            rows in prop::collection::vec(
                (any::<bool>(), prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO, 3)),
                1..20,
            )
        ) {
            let labels: Vec<f64> = rows.iter().map(|(b, _)| if *b { 1.0 } else { 0.0 }).collect();
            let values: Vec<f64> = rows.iter().flat_map(|(_, f)| f.iter().copied()).collect();
            let ds = DenseDataset::new(Array2::from_shape_vec((rows.len(), 3), values).unwrap(), labels).unwrap();
            for map in [LabelMap::ZeroOne, LabelMap::PlusMinusOne, LabelMap::Continuous] {
                let mut buf = Vec::new();
                write_dense(&ds, &mut buf, map).unwrap();
                let back = parse_dense(buf.as_slice(), 3, map).unwrap();
                prop_assert_eq!(back.labels(), ds.labels());
                for (a, b) in back.features().iter().zip(ds.features().iter()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
