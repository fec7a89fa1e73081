use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::catalog::Descriptions;
use crate::error::{Error, Result};
use crate::models::Forecast;
use crate::series::{Dataset, Month};

/// Which optional context blocks a prompt carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptVariant {
    /// Add the target's human-selected regressors as history columns.
    pub include_exogenous: bool,
    /// Append other models' forecasts for the same dates.
    pub include_future_forecasts: bool,
    /// Append the text of the latest prior food price report.
    pub include_cfpr: bool,
    pub context_len: usize,
}

impl Default for PromptVariant {
    fn default() -> Self {
        PromptVariant {
            include_exogenous: false,
            include_future_forecasts: false,
            include_cfpr: false,
            context_len: 75,
        }
    }
}

impl PromptVariant {
    /// Context-table column the variant reports under.
    pub fn label(&self) -> &'static str {
        match (self.include_exogenous, self.include_future_forecasts, self.include_cfpr) {
            (false, false, false) => "none",
            (true, false, false) => "human_selected",
            (false, true, false) => "future",
            (false, false, true) => "cfpr",
            (false, true, true) => "future_cfpr",
            (true, true, false) => "human_selected_future",
            (true, false, true) => "human_selected_cfpr",
            (true, true, true) => "human_selected_future_cfpr",
        }
    }
}

/// Forecast from another model, shown to the LLM as a labeled block.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureBlock {
    pub source: String,
    pub forecast: Forecast,
}

/// Fully materialized prompt contents.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptInput {
    pub target: String,
    /// `(name, description)` in history column order, target first.
    pub descriptions: Vec<(String, String)>,
    /// Column names after `REF_DATE`; the target is last.
    pub columns: Vec<String>,
    pub rows: Vec<(Month, Vec<String>)>,
    pub future: Vec<FutureBlock>,
    pub cfpr: Option<String>,
    pub target_dates: Vec<Month>,
}

/// One forecasting request for a prompt: history up to `origin` of the target
/// and `exogenous` (in column order), plus optional extra blocks.
#[derive(Debug, Clone)]
pub struct ForecastTask<'a> {
    pub dataset: &'a Dataset,
    pub target: &'a str,
    pub exogenous: Vec<String>,
    pub origin: Month,
    pub horizon: usize,
    pub future: Vec<FutureBlock>,
    pub cfpr: Option<String>,
}

pub fn render_prompt(task: &ForecastTask<'_>, variant: &PromptVariant, descriptions: &Descriptions) -> Result<String> {
    Ok(render(&prompt_input(task, variant, descriptions)?))
}

pub fn prompt_input(task: &ForecastTask<'_>, variant: &PromptVariant, descriptions: &Descriptions) -> Result<PromptInput> {
    if variant.context_len == 0 || task.horizon == 0 {
        return Err(Error::Prompt("context length and horizon must be at least 1".into()));
    }
    let mut columns: Vec<String> = if variant.include_exogenous {
        task.exogenous.clone()
    } else {
        Vec::new()
    };
    columns.push(task.target.to_string());

    let mut described = Vec::new();
    for name in std::iter::once(task.target).chain(columns[..columns.len() - 1].iter().map(String::as_str)) {
        let text = descriptions
            .get(name)
            .ok_or_else(|| Error::Prompt(format!("no description for `{name}`")))?;
        described.push((name.to_string(), text.clone()));
    }

    let from = task.origin.add_months(1 - variant.context_len as i64);
    let series = columns
        .iter()
        .map(|c| {
            let s = task.dataset.require(c)?;
            if !s.covers(from, task.origin) {
                return Err(Error::coverage(c, from, task.origin));
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = (0..variant.context_len as i64)
        .map(|k| {
            let m = from.add_months(k);
            (m, series.iter().map(|s| s.text_at(m).expect("covered")).collect())
        })
        .collect();

    let target_dates: Vec<Month> = (1..=task.horizon as i64).map(|k| task.origin.add_months(k)).collect();
    let future = if variant.include_future_forecasts {
        if task.future.is_empty() {
            return Err(Error::Prompt("future-forecast variant needs at least one forecast".into()));
        }
        for b in &task.future {
            if b.forecast.months() != target_dates {
                return Err(Error::Prompt(format!(
                    "forecast from `{}` does not cover the requested dates",
                    b.source
                )));
            }
        }
        task.future.clone()
    } else {
        Vec::new()
    };
    let cfpr = if variant.include_cfpr {
        Some(
            task.cfpr
                .clone()
                .ok_or_else(|| Error::Prompt("report variant needs report text".into()))?,
        )
    } else {
        None
    };
    Ok(PromptInput {
        target: task.target.to_string(),
        descriptions: described,
        columns,
        rows,
        future,
        cfpr,
        target_dates,
    })
}

/// Renders the prompt text. Identical inputs give identical bytes.
pub fn render(input: &PromptInput) -> String {
    let t = &input.target;
    let mut out = String::new();
    let _ = write!(
        out,
        "Task Description:\n\n\
         I have a time series forecasting task for you. Please forecast the {t} variable described below. \
         Please do not use Python and just directly predict the output.\n\n\
         Variable Descriptions:\n"
    );
    for (name, text) in &input.descriptions {
        let _ = writeln!(out, "- {name}: {text}");
    }
    let _ = write!(
        out,
        "\nThe historical time series for the {t} variable is shown below:\n\n<history>\nREF_DATE,{}\n",
        input.columns.join(",")
    );
    for (month, values) in &input.rows {
        let _ = writeln!(out, "{},{}", month.ref_date(), values.join(","));
    }
    out.push_str("</history>\n");

    if !input.future.is_empty() {
        let _ = write!(
            out,
            "\nForecasts of the {t} variable from other models for the same REF_DATEs are shown below:\n"
        );
        for block in &input.future {
            let _ = write!(out, "\n<future_forecast model=\"{}\">\nREF_DATE,{t}\n", block.source);
            for (m, v) in block.forecast.months().iter().zip(&block.forecast.mean) {
                let _ = writeln!(out, "{},{v:.3}", m.ref_date());
            }
            out.push_str("</future_forecast>\n");
        }
    }
    if let Some(text) = &input.cfpr {
        let _ = write!(
            out,
            "\nThe most recent Canada's Food Price Report is included below for context:\n\n<report>\n{}\n</report>\n",
            text.trim_end()
        );
    }

    let _ = write!(out, "\nPlease predict the {t} value at the REF_DATEs below:\n\n<target_dates>\n");
    for m in &input.target_dates {
        let _ = writeln!(out, "{}", m.ref_date());
    }
    let _ = write!(
        out,
        "</target_dates>\n\n\
         Return the forecast in (REF_DATE, {t}) format between <forecast> and </forecast> tags. \
         Do not include any other information (e.g., comments) in the forecast.\n\n\
         Example format:\n<forecast>\n"
    );
    for (i, m) in input.target_dates.iter().enumerate() {
        let _ = writeln!(out, "{}, v{}", m.ref_date(), i + 1);
    }
    out.push_str("</forecast>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedForecast {
    pub rows: Vec<(Month, f64)>,
}

impl ParsedForecast {
    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|(_, v)| *v).collect()
    }
}

/// Reads the first `<forecast>` block of a reply and checks that its dates
/// are exactly `expected`, in order.
pub fn parse_forecast(response: &str, expected: &[Month]) -> Result<ParsedForecast> {
    let open = response.find("<forecast>").ok_or(Error::MissingBlock)?;
    let body = &response[open + "<forecast>".len()..];
    let close = body.find("</forecast>").ok_or(Error::MissingBlock)?;
    let mut rows = Vec::new();
    for line in body[..close].lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (date, value) = line
            .split_once(',')
            .ok_or_else(|| Error::ValueParse(line.to_string()))?;
        let month = Month::parse_date(date).map_err(|_| Error::ValueParse(line.to_string()))?;
        let value: f64 = value
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| Error::ValueParse(line.to_string()))?;
        rows.push((month, value));
    }
    if !rows.iter().map(|(m, _)| m).eq(expected) {
        return Err(Error::DateMismatch {
            expected: expected.iter().map(|m| m.ref_date()).collect(),
            got: rows.iter().map(|(m, _)| m.ref_date()).collect(),
        });
    }
    Ok(ParsedForecast { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dates(n: usize) -> Vec<Month> {
        let start = Month::new(2023, 6).unwrap();
        (1..=n as i64).map(|k| start.add_months(k)).collect()
    }

    fn block(rows: &[(Month, f64)]) -> String {
        let mut s = String::from("<forecast>\n");
        for (m, v) in rows {
            s.push_str(&format!("{}, {v:?}\n", m.ref_date()));
        }
        s + "</forecast>"
    }

    #[test]
    fn parses_block_inside_prose() {
        let d = dates(12);
        let rows: Vec<(Month, f64)> = d.iter().enumerate().map(|(i, m)| (*m, 180.0 + i as f64)).collect();
        let plain = parse_forecast(&block(&rows), &d).unwrap();
        assert_eq!(plain.rows, rows);
        let chatty = format!("Sure! Here is my forecast:\n\n  {}  \n\nLet me know.", block(&rows));
        assert_eq!(parse_forecast(&chatty, &d).unwrap(), plain);
    }

    #[test]
    fn contract_errors() {
        let d = dates(12);
        let rows: Vec<(Month, f64)> = d.iter().map(|m| (*m, 1.0)).collect();
        assert!(matches!(parse_forecast("no tags here", &d), Err(Error::MissingBlock)));
        assert!(matches!(parse_forecast("<forecast>\n2023-07-01, 1", &d), Err(Error::MissingBlock)));
        assert!(matches!(
            parse_forecast(&block(&rows[..11]), &d),
            Err(Error::DateMismatch { got, .. }) if got.len() == 11
        ));
        let mut swapped = rows.clone();
        swapped.swap(0, 1);
        assert!(matches!(parse_forecast(&block(&swapped), &d), Err(Error::DateMismatch { .. })));
        let bad = block(&rows).replace("2023-09-01, 1.0", "2023-09-01, about 3");
        assert!(matches!(parse_forecast(&bad, &d), Err(Error::ValueParse(l)) if l.contains("about")));
        assert!(matches!(
            parse_forecast(&block(&rows).replace("2023-09-01, 1.0", "2023-09-01, NaN"), &d),
            Err(Error::ValueParse(_))
        ));
    }

    #[test]
    fn labels() {
        let mut v = PromptVariant::default();
        assert_eq!(v.label(), "none");
        v.include_future_forecasts = true;
        v.include_cfpr = true;
        assert_eq!(v.label(), "future_cfpr");
    }

    proptest! {
        #[test]
        fn example_format_round_trips(values in prop::collection::vec(-1e6f64..1e6, 1..24)) {
            let d = dates(values.len());
            let rows: Vec<(Month, f64)> = d.iter().copied().zip(values).collect();
            prop_assert_eq!(parse_forecast(&block(&rows), &d).unwrap().rows, rows);
        }
    }
}
