use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataio::{Cell, Column, ColumnKind, TabularFrame};
use crate::error::{Error, Result};

pub const DEFAULT_CONTEXT_COLUMNS: [&str; 4] = ["director", "writer", "genre", "actors"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputePlan {
    pub target_column: String,
    pub context_columns: Vec<String>,
    /// Per context column: value → mean target over rows carrying that value.
    pub group_means: Vec<BTreeMap<String, f64>>,
    pub global_mean: f64,
}

/// Context cells are comma-separated lists; blanks are dropped.
fn values(cell: &Cell) -> Vec<String> {
    cell.as_text()
        .map(|s| {
            s.split(',')
                .map(str::trim)
                .filter(|v| !v.is_empty())
                .map(str::to_owned)
                .collect()
        })
        .unwrap_or_default()
}

fn column_indices(frame: &TabularFrame, target: &str, context: &[&str]) -> Result<(usize, Vec<usize>)> {
    let t = frame.typed_column(target, ColumnKind::Number)?;
    let c = context
        .iter()
        .map(|name| frame.typed_column(name, ColumnKind::Text))
        .collect::<Result<_>>()?;
    Ok((t, c))
}

pub fn impute_fit(frame: &TabularFrame, target: &str, context: &[&str]) -> Result<ImputePlan> {
    let (t, ctx) = column_indices(frame, target, context)?;
    let mut sums: Vec<BTreeMap<String, (f64, usize)>> = vec![BTreeMap::new(); ctx.len()];
    let (mut total, mut count) = (0.0, 0usize);
    for row in frame.rows() {
        let Some(y) = row[t].as_number() else { continue };
        total += y;
        count += 1;
        for (level, &c) in ctx.iter().enumerate() {
            for v in values(&row[c]) {
                let e = sums[level].entry(v).or_default();
                e.0 += y;
                e.1 += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::data(format!("every value of {target:?} is missing")));
    }
    Ok(ImputePlan {
        target_column: target.to_owned(),
        context_columns: context.iter().map(|s| s.to_string()).collect(),
        group_means: sums
            .into_iter()
            .map(|m| m.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
            .collect(),
        global_mean: total / count as f64,
    })
}

impl ImputePlan {
    /// Fill value for one row's context cells: the first level with any known
    /// value gives the mean of its known per-value means.
    fn fill(&self, context: &[&Cell]) -> f64 {
        for (level, cell) in context.iter().enumerate() {
            let known: Vec<f64> = values(cell)
                .iter()
                .filter_map(|v| self.group_means[level].get(v).copied())
                .collect();
            if !known.is_empty() {
                return known.iter().sum::<f64>() / known.len() as f64;
            }
        }
        self.global_mean
    }
}

pub fn impute_apply(frame: &TabularFrame, plan: &ImputePlan) -> Result<TabularFrame> {
    let context: Vec<&str> = plan.context_columns.iter().map(String::as_str).collect();
    let (t, ctx) = column_indices(frame, &plan.target_column, &context)?;
    let cells = frame
        .rows()
        .iter()
        .map(|row| match row[t].as_number() {
            Some(y) => Cell::Number(y),
            None => Cell::Number(plan.fill(&ctx.iter().map(|&c| &row[c]).collect::<Vec<_>>())),
        })
        .collect();
    let mut out = frame.clone();
    out.replace_column(t, Column::number(&plan.target_column), cells)?;
    Ok(out)
}
