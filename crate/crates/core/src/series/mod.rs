//! Monthly series, datasets and window slicing.

mod csv;
mod month;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use self::csv::{ingest_csv, read_csv, write_csv, CsvSchema};
pub use self::month::Month;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Regressor,
}

impl Role {
    /// `target_*` names are targets; everything else is a regressor.
    pub fn infer(name: &str) -> Role {
        if name.starts_with("target_") {
            Role::Target
        } else {
            Role::Regressor
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SeriesId {
    name: String,
    role: Role,
}

impl SeriesId {
    pub fn new(name: impl Into<String>, role: Role) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(Error::Input("series name must be non-empty".into()));
        }
        Ok(SeriesId { name, role })
    }

    pub fn target(name: impl Into<String>) -> Result<Self> {
        SeriesId::new(name, Role::Target)
    }

    pub fn regressor(name: impl Into<String>) -> Result<Self> {
        SeriesId::new(name, Role::Regressor)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn is_target(&self) -> bool {
        self.role == Role::Target
    }
}

impl fmt::Display for SeriesId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// A gapless monthly sequence; `values[i]` belongs to `start + i` months.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlySeries {
    id: SeriesId,
    start: Month,
    values: Vec<f64>,
    text: Option<Vec<String>>,
    unit: String,
}

impl MonthlySeries {
    pub fn new(id: SeriesId, start: Month, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input(format!("series `{id}` is empty")));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "series `{id}` has a non-finite value at {}",
                start.add_months(i as i64)
            )));
        }
        Ok(MonthlySeries {
            id,
            start,
            values,
            text: None,
            unit: String::new(),
        })
    }

    /// Keeps the source decimal text of every value for exact re-serialization.
    pub(crate) fn with_text(mut self, text: Vec<String>) -> Self {
        debug_assert_eq!(text.len(), self.values.len());
        self.text = Some(text);
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn id(&self) -> &SeriesId {
        &self.id
    }

    pub fn name(&self) -> &str {
        self.id.name()
    }

    pub fn start(&self) -> Month {
        self.start
    }

    pub fn end(&self) -> Month {
        self.start.add_months(self.values.len() as i64 - 1)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn covers(&self, from: Month, to: Month) -> bool {
        from <= to && self.start <= from && to <= self.end()
    }

    pub fn value_at(&self, month: Month) -> Option<f64> {
        let idx = month.months_since(self.start);
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }

    /// Decimal text for the value at `month`: the ingested text when
    /// available, otherwise a shortest round-trip rendering.
    pub fn text_at(&self, month: Month) -> Option<String> {
        let idx = month.months_since(self.start);
        if idx < 0 || idx as usize >= self.values.len() {
            return None;
        }
        let idx = idx as usize;
        Some(match &self.text {
            Some(text) => text[idx].clone(),
            None => format_decimal(self.values[idx]),
        })
    }

    /// Values over the inclusive range `from..=to`.
    pub fn range(&self, from: Month, to: Month) -> Result<&[f64]> {
        if !self.covers(from, to) {
            return Err(Error::coverage(self.name(), from, to));
        }
        let lo = from.months_since(self.start) as usize;
        let hi = to.months_since(self.start) as usize;
        Ok(&self.values[lo..=hi])
    }
}

/// Shortest decimal text that parses back to the same `f64`, always with a
/// fractional part for integral values (`99.0`, not `99`).
pub fn format_decimal(v: f64) -> String {
    format!("{v:?}")
}

/// Immutable collection of series keyed by name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    series: BTreeMap<String, MonthlySeries>,
}

impl Dataset {
    pub fn new(series: impl IntoIterator<Item = MonthlySeries>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for s in series {
            let name = s.name().to_string();
            if map.insert(name.clone(), s).is_some() {
                return Err(Error::Input(format!("duplicate series `{name}`")));
            }
        }
        Ok(Dataset { series: map })
    }

    /// Union of two datasets; series names must not overlap.
    pub fn merge(self, other: Dataset) -> Result<Self> {
        Dataset::new(self.series.into_values().chain(other.series.into_values()))
    }

    pub fn get(&self, name: &str) -> Option<&MonthlySeries> {
        self.series.get(name)
    }

    pub fn require(&self, name: &str) -> Result<&MonthlySeries> {
        self.get(name)
            .ok_or_else(|| Error::Input(format!("series `{name}` not in dataset")))
    }

    /// Series in name order.
    pub fn iter(&self) -> impl Iterator<Item = &MonthlySeries> {
        self.series.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &SeriesId> {
        self.series.values().map(|s| s.id())
    }

    pub fn targets(&self) -> impl Iterator<Item = &SeriesId> {
        self.ids().filter(|id| id.is_target())
    }

    pub fn regressors(&self) -> impl Iterator<Item = &SeriesId> {
        self.ids().filter(|id| !id.is_target())
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Overall `[min start, max end]` over all series.
    pub fn coverage(&self) -> Option<(Month, Month)> {
        let start = self.iter().map(|s| s.start()).min()?;
        let end = self.iter().map(|s| s.end()).max()?;
        Some((start, end))
    }
}

/// A forecast window: `context_len` observed months ending at `origin`,
/// followed by `horizon` months to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WindowSpec {
    pub origin: Month,
    pub context_len: usize,
    pub horizon: usize,
}

impl WindowSpec {
    pub fn new(origin: Month, context_len: usize, horizon: usize) -> Result<Self> {
        if context_len == 0 || horizon == 0 {
            return Err(Error::Input(
                "context_len and horizon must both be at least 1".into(),
            ));
        }
        Ok(WindowSpec {
            origin,
            context_len,
            horizon,
        })
    }

    pub fn context_start(&self) -> Month {
        self.origin.add_months(1 - self.context_len as i64)
    }

    pub fn first_target(&self) -> Month {
        self.origin.succ()
    }

    pub fn last_target(&self) -> Month {
        self.origin.add_months(self.horizon as i64)
    }

    pub fn target_months(&self) -> Vec<Month> {
        (1..=self.horizon as i64)
            .map(|k| self.origin.add_months(k))
            .collect()
    }
}

/// Context values for several series aligned on the same months.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMatrix {
    pub start: Month,
    pub ids: Vec<SeriesId>,
    pub rows: Vec<Vec<f64>>,
}

impl ContextMatrix {
    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.ids
            .iter()
            .position(|id| id.name() == name)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn months(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }
}

/// Rows in id-name order, columns `origin - context_len + 1 ..= origin`.
pub fn slice_context<'a>(
    dataset: &Dataset,
    ids: impl IntoIterator<Item = &'a SeriesId>,
    window: &WindowSpec,
) -> Result<ContextMatrix> {
    let mut ids: Vec<SeriesId> = ids.into_iter().cloned().collect();
    ids.sort_by(|a, b| a.name().cmp(b.name()));
    ids.dedup_by(|a, b| a.name() == b.name());
    let from = window.context_start();
    let rows = ids
        .iter()
        .map(|id| {
            let series = dataset
                .get(id.name())
                .ok_or_else(|| Error::coverage(id.name(), from, window.origin))?;
            series.range(from, window.origin).map(<[f64]>::to_vec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ContextMatrix {
        start: from,
        ids,
        rows,
    })
}

/// The `horizon` observed values following `origin`.
pub fn ground_truth(dataset: &Dataset, id: &SeriesId, window: &WindowSpec) -> Result<Vec<f64>> {
    let (from, to) = (window.first_target(), window.last_target());
    let series = dataset
        .get(id.name())
        .ok_or_else(|| Error::coverage(id.name(), from, to))?;
    series.range(from, to).map(<[f64]>::to_vec)
}
