use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use crate::backtest::{CellForecast, CellTask, Forecaster};
use crate::catalog::Descriptions;
use crate::error::{Error, Result};
use crate::groups::GroupManifest;
use crate::models::Forecast;
use crate::series::Month;

use super::{parse_forecast, render_prompt, FutureBlock, LlmClient, PromptVariant};

/// Direct-prompt forecaster for the backtest engine.
pub struct LlmForecaster {
    pub client: Arc<LlmClient>,
    pub variant: PromptVariant,
    pub descriptions: Descriptions,
    /// Per-target regressors for the exogenous variant, in column order.
    pub exogenous: Option<GroupManifest>,
    /// Models whose forecasts feed the future-forecast blocks.
    pub future_sources: Vec<(String, Arc<dyn Forecaster>)>,
    /// Report text keyed by report year.
    pub reports: BTreeMap<i32, String>,
}

impl LlmForecaster {
    pub fn new(client: Arc<LlmClient>, variant: PromptVariant, descriptions: Descriptions) -> Self {
        LlmForecaster {
            client,
            variant,
            descriptions,
            exogenous: None,
            future_sources: Vec::new(),
            reports: BTreeMap::new(),
        }
    }

    /// Latest report published by `origin`; the report for year Y comes out
    /// in December of Y-1.
    pub fn report_for(&self, origin: Month) -> Option<&String> {
        let year = origin.add_months(1).year();
        self.reports.range(..=year).next_back().map(|(_, text)| text)
    }

    pub fn prompt(&self, task: &CellTask<'_>) -> Result<String> {
        let exogenous = match (&self.exogenous, self.variant.include_exogenous) {
            (Some(m), true) => m.declared_for(task.target.name())?,
            (None, true) => return Err(Error::Prompt("exogenous variant needs a regressor manifest".into())),
            _ => Vec::new(),
        };
        let mut future = Vec::new();
        if self.variant.include_future_forecasts {
            for (source, f) in &self.future_sources {
                future.push(FutureBlock {
                    source: source.clone(),
                    forecast: f.forecast(task)?.forecast,
                });
            }
        }
        let cfpr = if self.variant.include_cfpr {
            Some(
                self.report_for(task.window.origin)
                    .cloned()
                    .ok_or_else(|| Error::Prompt(format!("no report published by {}", task.window.origin)))?,
            )
        } else {
            None
        };
        render_prompt(
            &super::ForecastTask {
                dataset: task.dataset,
                target: task.target.name(),
                exogenous,
                origin: task.window.origin,
                horizon: task.window.horizon,
                future,
                cfpr,
            },
            &self.variant,
            &self.descriptions,
        )
    }
}

impl Forecaster for LlmForecaster {
    fn context_len(&self) -> Option<usize> {
        Some(self.variant.context_len)
    }

    fn context_label(&self, _grouping: &str) -> String {
        self.variant.label().to_string()
    }

    fn forecast(&self, task: &CellTask<'_>) -> Result<CellForecast> {
        let prompt = self.prompt(task)?;
        let completion = self.client.complete(&prompt)?;
        let dates = task.window.target_months();
        let parsed = match parse_forecast(&completion.text, &dates) {
            Ok(p) => p,
            Err(e) => {
                let transcript = self
                    .client
                    .mark_unparseable(&prompt, &e.to_string())?
                    .or(completion.transcript);
                return Err(Error::Provider {
                    message: format!("unusable reply: {e}"),
                    transcript,
                });
            }
        };
        let mut out = CellForecast::new(Forecast::new(task.window.origin, parsed.values())?);
        out.description = Some(format!("{} [{}]", self.client.model(), self.variant.label()));
        Ok(out)
    }
}

/// Reads `<year>.txt` report texts from `dir`.
pub fn load_reports(dir: impl AsRef<Path>) -> Result<BTreeMap<i32, String>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        if let Some(year) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            out.insert(year, std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?);
        }
    }
    Ok(out)
}
