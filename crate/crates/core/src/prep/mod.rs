//! Data preparation: imputation, SPAM filtering, undersampling, augmentation.

mod augment;
mod impute;
mod ring;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

pub use augment::{
    augment, AugmentReport, BackTranslator, IdentityTransport, Paraphraser, SynonymAugmenter,
    TranslationRequest, TranslationResponse, Transport,
};
pub use impute::{impute_apply, impute_fit, ImputePlan, DEFAULT_CONTEXT_COLUMNS};
pub use ring::{ring_quotas, ring_undersample, RingConfig, RingPoint};

use crate::dataio::{Cell, Column, ColumnKind, TabularFrame};
use crate::error::{Error, Result};
use crate::textfeat::tokenize;

/// Drops exact duplicates (after trim + lowercase) of an earlier row and rows
/// with fewer than `min_tokens` tokens. Missing text counts as zero tokens.
pub fn dedupe_spam(frame: &TabularFrame, text_column: &str, min_tokens: usize) -> Result<TabularFrame> {
    let col = frame.typed_column(text_column, ColumnKind::Text)?;
    let mut seen = HashSet::new();
    let keep: Vec<bool> = frame
        .column_cells(col)
        .map(|cell| {
            let text = cell.as_text().unwrap_or("");
            let key = text.trim().to_lowercase();
            tokenize(text).len() >= min_tokens && seen.insert(key)
        })
        .collect();
    Ok(frame.retain_rows(|i| keep[i]))
}

/// Min-max scales a numeric column to [0, 1]; missing cells stay missing.
pub fn normalize_year(frame: &TabularFrame, column: &str) -> Result<TabularFrame> {
    let col = frame.typed_column(column, ColumnKind::Number)?;
    let present: Vec<f64> = frame.column_cells(col).filter_map(Cell::as_number).collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if present.is_empty() || hi <= lo {
        return Err(Error::data(format!("column {column:?} needs at least two distinct values")));
    }
    let cells = frame
        .column_cells(col)
        .map(|c| match c.as_number() {
            Some(x) => Cell::Number((x - lo) / (hi - lo)),
            None => Cell::Missing,
        })
        .collect();
    let mut out = frame.clone();
    out.replace_column(col, Column::number(column), cells)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassReport<L> {
    /// Descending by count; equal counts keep label order.
    pub counts: Vec<(L, usize)>,
    pub total: usize,
}

pub fn class_report<L: Ord + Clone>(labels: &[L]) -> ClassReport<L> {
    let mut map: BTreeMap<&L, usize> = BTreeMap::new();
    for l in labels {
        *map.entry(l).or_default() += 1;
    }
    let mut counts: Vec<(L, usize)> = map.into_iter().map(|(l, c)| (l.clone(), c)).collect();
    counts.sort_by_key(|c| std::cmp::Reverse(c.1));
    ClassReport {
        counts,
        total: labels.len(),
    }
}

impl<L: std::fmt::Display> ClassReport<L> {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("class,count,percent\n");
        for (l, c) in &self.counts {
            let pct = 100.0 * *c as f64 / self.total as f64;
            s.push_str(&format!("{l},{c},{pct:.2}\n"));
        }
        s.push_str(&format!("total,{},100.00\n", self.total));
        s
    }
}
