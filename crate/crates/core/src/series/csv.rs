use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Month, MonthlySeries, Role, SeriesId};
use crate::error::{Error, Result};

/// Column layout of a wide monthly CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvSchema {
    pub date_column: String,
    /// Columns to load; `None` loads every non-date column.
    pub value_columns: Option<Vec<String>>,
    /// Role overrides; columns not listed use the name-prefix rule.
    pub roles: BTreeMap<String, Role>,
    pub units: BTreeMap<String, String>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            date_column: "REF_DATE".to_string(),
            value_columns: None,
            roles: BTreeMap::new(),
            units: BTreeMap::new(),
        }
    }
}

pub fn ingest_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

struct Column {
    name: String,
    index: usize,
    start: Option<Month>,
    /// Month after the last value seen, while the run is unbroken.
    next: Option<Month>,
    /// First month of a blank run after the series started.
    blank_from: Option<Month>,
    values: Vec<f64>,
    text: Vec<String>,
}

/// Reads a wide CSV: one date column plus one column per series. Blank cells
/// are allowed before a series starts and after it ends, never in between.
pub fn read_csv(reader: impl Read, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse {
            row: 1,
            column: String::new(),
            reason: e.to_string(),
        })?
        .clone();
    let date_idx = headers
        .iter()
        .position(|h| h == schema.date_column)
        .ok_or_else(|| Error::Parse {
            row: 1,
            column: schema.date_column.clone(),
            reason: "date column not found in header".into(),
        })?;

    let wanted: Vec<String> = match &schema.value_columns {
        Some(cols) => cols.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != date_idx)
            .map(|(_, h)| h.to_string())
            .collect(),
    };
    let mut columns = wanted
        .into_iter()
        .map(|name| {
            let index = headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Parse {
                    row: 1,
                    column: name.clone(),
                    reason: "column not found in header".into(),
                })?;
            Ok(Column {
                name,
                index,
                start: None,
                next: None,
                blank_from: None,
                values: Vec::new(),
                text: Vec::new(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut previous: Option<Month> = None;
    for (i, record) in rdr.records().enumerate() {
        // 1-based file line; the header is line 1.
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            reason: e.to_string(),
        })?;
        let date_text = record.get(date_idx).unwrap_or("");
        let date = Month::parse_date(date_text).map_err(|_| Error::Parse {
            row,
            column: schema.date_column.clone(),
            reason: format!("expected YYYY-MM-DD, got `{date_text}`"),
        })?;
        if let Some(prev) = previous {
            if date == prev {
                return Err(Error::DuplicateDate { row, date });
            }
            if date < prev {
                return Err(Error::OutOfOrder {
                    row,
                    date,
                    previous: prev,
                });
            }
        }
        previous = Some(date);

        for col in &mut columns {
            let cell = record.get(col.index).unwrap_or("");
            if cell.is_empty() {
                if col.start.is_some() && col.blank_from.is_none() {
                    col.blank_from = col.next;
                }
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: col.name.clone(),
                reason: format!("`{cell}` is not a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: col.name.clone(),
                    reason: format!("`{cell}` is not finite"),
                });
            }
            match col.next {
                None => col.start = Some(date),
                Some(expected) => {
                    if let Some(missing) = col.blank_from.filter(|m| *m < date) {
                        return Err(Error::Gap {
                            series: col.name.clone(),
                            missing,
                        });
                    }
                    if date != expected {
                        return Err(Error::Gap {
                            series: col.name.clone(),
                            missing: expected,
                        });
                    }
                }
            }
            col.blank_from = None;
            col.next = Some(date.succ());
            col.values.push(value);
            col.text.push(cell.to_string());
        }
    }

    let series = columns
        .into_iter()
        .map(|col| {
            let start = col.start.ok_or_else(|| Error::Parse {
                row: 1,
                column: col.name.clone(),
                reason: "column has no values".into(),
            })?;
            let role = schema
                .roles
                .get(&col.name)
                .copied()
                .unwrap_or_else(|| Role::infer(&col.name));
            let unit = schema.units.get(&col.name).cloned().unwrap_or_default();
            let id = SeriesId::new(col.name, role)?;
            Ok(MonthlySeries::new(id, start, col.values)?
                .with_text(col.text)
                .with_unit(unit))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(series)
}

/// Writes the dataset as a wide CSV, series in name order, blank cells
/// outside each series' coverage.
pub fn write_csv(dataset: &Dataset, mut out: impl Write) -> std::io::Result<()> {
    let Some((start, end)) = dataset.coverage() else {
        return writeln!(out, "REF_DATE");
    };
    let mut header = String::from("REF_DATE");
    for s in dataset.iter() {
        header.push(',');
        header.push_str(s.name());
    }
    writeln!(out, "{header}")?;
    let mut month = start;
    while month <= end {
        let mut line = month.ref_date();
        for s in dataset.iter() {
            line.push(',');
            if let Some(text) = s.text_at(month) {
                line.push_str(&text);
            }
        }
        writeln!(out, "{line}")?;
        month = month.succ();
    }
    Ok(())
}
