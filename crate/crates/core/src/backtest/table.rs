use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::complexity::{display_category, render_table};

use super::{mean_std, BacktestReport, CellStatus};

const COLUMN_ORDER: [(&str, &str); 12] = [
    ("all", "All"),
    ("none", "None"),
    ("cpi_only", "CPI"),
    ("llm_selected", "LLM"),
    ("climate", "Climate"),
    ("geopolitical", "Geopolitical"),
    ("manufacturing", "Manufact."),
    ("human_selected", "Human"),
    ("economic", "Economic"),
    ("cfpr", "CFPR"),
    ("future_cfpr", "Future + CFPR"),
    ("future", "Future"),
];

/// Header label for a context column.
pub fn context_label(context: &str) -> String {
    COLUMN_ORDER
        .iter()
        .find(|(id, _)| *id == context)
        .map(|(_, label)| label.to_string())
        .unwrap_or_else(|| context.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextCell {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Mean ± std of MAPE per (category, context), pooled over windows and
/// models.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTable {
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<ContextCell>>)>,
}

impl ContextTable {
    pub fn build(report: &BacktestReport) -> Self {
        let mut pooled: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
        let mut contexts = BTreeSet::new();
        let mut targets = BTreeSet::new();
        for c in &report.cells {
            targets.insert(c.key.target.as_str());
            contexts.insert(c.context.as_str());
            if let (CellStatus::Ok, Some(m)) = (c.status, c.mape) {
                pooled.entry((&c.key.target, &c.context)).or_default().push(m);
            }
        }
        let mut columns: Vec<String> = COLUMN_ORDER
            .iter()
            .filter(|(id, _)| contexts.contains(id))
            .map(|(id, _)| id.to_string())
            .collect();
        columns.extend(
            contexts
                .iter()
                .filter(|c| !COLUMN_ORDER.iter().any(|(id, _)| id == *c))
                .map(|c| c.to_string()),
        );
        let rows = targets
            .into_iter()
            .map(|t| {
                let cells = columns
                    .iter()
                    .map(|c| {
                        let xs = pooled.get(&(t, c.as_str()))?;
                        let (mean, std) = mean_std(xs)?;
                        Some(ContextCell {
                            mean,
                            std,
                            n: xs.len(),
                        })
                    })
                    .collect();
                (t.to_string(), cells)
            })
            .collect();
        ContextTable { columns, rows }
    }

    /// Indices of the lowest-mean cells in a row (several on exact ties).
    pub fn best(&self, row: usize) -> Vec<usize> {
        let cells = &self.rows[row].1;
        let low = cells
            .iter()
            .flatten()
            .map(|c| c.mean)
            .fold(f64::INFINITY, f64::min);
        cells
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some_and(|c| c.mean == low))
            .map(|(i, _)| i)
            .collect()
    }

    /// Plain-text matrix; the best cell per row is wrapped in `**`.
    pub fn to_text(&self) -> String {
        let mut rows = vec![std::iter::once("Category".to_string())
            .chain(self.columns.iter().map(|c| context_label(c)))
            .collect::<Vec<_>>()];
        for (i, (target, cells)) in self.rows.iter().enumerate() {
            let best = self.best(i);
            let mut row = vec![display_category(target)];
            for (j, c) in cells.iter().enumerate() {
                row.push(match c {
                    Some(c) if best.contains(&j) => format!("**{:.3} ± {:.2}**", c.mean, c.std),
                    Some(c) => format!("{:.3} ± {:.2}", c.mean, c.std),
                    None => "-".into(),
                });
            }
            rows.push(row);
        }
        render_table(&rows)
    }

    /// Long-form CSV: one row per (category, context) with a `best` flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,context,mean,std,n,best\n");
        for (i, (target, cells)) in self.rows.iter().enumerate() {
            let best = self.best(i);
            for (j, c) in cells.iter().enumerate() {
                if let Some(c) = c {
                    let _ = writeln!(
                        out,
                        "{target},{},{:?},{:?},{},{}",
                        self.columns[j],
                        c.mean,
                        c.std,
                        c.n,
                        best.contains(&j)
                    );
                }
            }
        }
        out
    }
}
