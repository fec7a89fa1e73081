//! Rolling-origin evaluation.

mod engine;
mod store;
mod table;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Forecast;
use crate::series::Month;

pub use engine::{
    run_backtest, CellForecast, CellTask, Forecaster, Registry, RunOptions, RunOutcome,
    StatForecaster,
};
pub use store::CellStore;
pub use table::{context_label, ContextTable};

/// Mean absolute percentage error as a fraction.
pub fn mape(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Input(format!(
            "length mismatch: {} actual vs {} predicted",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Input("cannot score an empty forecast".into()));
    }
    if let Some(index) = actual.iter().position(|y| *y == 0.0) {
        return Err(Error::ZeroDenominator { index });
    }
    let total: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(y, p)| ((y - p) / y).abs())
        .sum();
    Ok(total / actual.len() as f64)
}

fn default_origins() -> Vec<Month> {
    (2017..=2022).map(Month::december).collect()
}

fn default_horizon() -> usize {
    18
}

fn default_context() -> usize {
    36
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestPlan {
    pub targets: Vec<String>,
    pub models: Vec<String>,
    #[serde(default = "default_groupings")]
    pub groupings: Vec<String>,
    #[serde(default = "default_origins")]
    pub origins: Vec<Month>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Context length for models that do not declare their own.
    #[serde(default = "default_context")]
    pub context_len: usize,
    #[serde(default)]
    pub quantile_levels: Vec<f64>,
}

fn default_groupings() -> Vec<String> {
    vec!["none".into()]
}

impl BacktestPlan {
    pub fn new(targets: Vec<String>, models: Vec<String>, groupings: Vec<String>) -> Self {
        BacktestPlan {
            targets,
            models,
            groupings,
            origins: default_origins(),
            horizon: default_horizon(),
            context_len: default_context(),
            quantile_levels: Vec::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn cell_count(&self) -> usize {
        self.targets.len() * self.models.len() * self.groupings.len() * self.origins.len()
    }

    /// Every cell key in canonical order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut keys = Vec::with_capacity(self.cell_count());
        for target in &self.targets {
            for model in &self.models {
                for grouping in &self.groupings {
                    for origin in &self.origins {
                        keys.push(CellKey {
                            target: target.clone(),
                            model: model.clone(),
                            grouping: grouping.clone(),
                            origin: *origin,
                        });
                    }
                }
            }
        }
        keys.sort();
        keys
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub target: String,
    pub model: String,
    pub grouping: String,
    pub origin: Month,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    #[serde(flatten)]
    pub key: CellKey,
    /// Table column this cell contributes to: the grouping, or a model's
    /// own context label.
    pub context: String,
    pub status: CellStatus,
    pub mape: Option<f64>,
    pub actual: Vec<f64>,
    pub forecast: Option<Forecast>,
    pub fitted_model: Option<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub error: Option<String>,
    #[serde(default)]
    pub nondeterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub target: String,
    pub model: String,
    pub grouping: String,
    pub mean: Option<f64>,
    /// Sample standard deviation over windows; 0 for a single window.
    pub std: Option<f64>,
    pub n_windows: usize,
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<Aggregate>,
}

pub(crate) fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

impl BacktestReport {
    pub fn from_cells(mut cells: Vec<CellRecord>) -> Self {
        cells.sort_by(|a, b| a.key.cmp(&b.key));
        let mut groups: BTreeMap<(String, String, String), (Vec<f64>, usize)> = BTreeMap::new();
        for c in &cells {
            let entry = groups
                .entry((c.key.target.clone(), c.key.model.clone(), c.key.grouping.clone()))
                .or_default();
            match (c.status, c.mape) {
                (CellStatus::Ok, Some(m)) => entry.0.push(m),
                _ => entry.1 += 1,
            }
        }
        let aggregates = groups
            .into_iter()
            .map(|((target, model, grouping), (mapes, n_failed))| {
                let stats = mean_std(&mapes);
                Aggregate {
                    target,
                    model,
                    grouping,
                    mean: stats.map(|s| s.0),
                    std: stats.map(|s| s.1),
                    n_windows: mapes.len(),
                    n_failed,
                }
            })
            .collect();
        BacktestReport { cells, aggregates }
    }

    pub fn failed_cells(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count()
    }

    pub fn aggregate(&self, target: &str, model: &str, grouping: &str) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.target == target && a.model == model && a.grouping == grouping)
    }

    pub fn cells_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record([
            "target", "model", "grouping", "origin", "context", "status", "mape",
            "fitted_model", "error",
        ])
        .map_err(io)?;
        for c in &self.cells {
            let status = match c.status {
                CellStatus::Ok => "ok",
                CellStatus::Failed => "failed",
            };
            w.write_record([
                c.key.target.as_str(),
                &c.key.model,
                &c.key.grouping,
                &c.key.origin.ref_date(),
                &c.context,
                status,
                &c.mape.map(|m| format!("{m:?}")).unwrap_or_default(),
                c.fitted_model.as_deref().unwrap_or(""),
                c.error.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        finish(w)
    }

    pub fn aggregates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record([
            "target", "model", "grouping", "mean", "std", "n_windows", "n_failed",
        ])
        .map_err(io)?;
        for a in &self.aggregates {
            let f = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
            w.write_record([
                a.target.as_str(),
                &a.model,
                &a.grouping,
                &f(a.mean),
                &f(a.std),
                &a.n_windows.to_string(),
                &a.n_failed.to_string(),
            ])
            .map_err(io)?;
        }
        finish(w)
    }

    /// Writes `cells.csv` and `aggregates.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, text) in [
            ("cells.csv", self.cells_csv()?),
            ("aggregates.csv", self.aggregates_csv()?),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Input(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(format!("csv: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedModel {
    pub rank: usize,
    pub model: String,
    pub grouping: String,
    pub mean: f64,
    pub std: f64,
}

/// Aggregates for `target` ordered by mean MAPE, then std, then model and
/// grouping names. Aggregates without any successful window are left out.
pub fn rank_models(report: &BacktestReport, target: &str) -> Vec<RankedModel> {
    let mut rows: Vec<RankedModel> = report
        .aggregates
        .iter()
        .filter(|a| a.target == target)
        .filter_map(|a| {
            Some(RankedModel {
                rank: 0,
                model: a.model.clone(),
                grouping: a.grouping.clone(),
                mean: a.mean?,
                std: a.std?,
            })
        })
        .collect();
    rows.sort_by(|a, b| {
        a.mean
            .total_cmp(&b.mean)
            .then(a.std.total_cmp(&b.std))
            .then_with(|| a.model.cmp(&b.model))
            .then_with(|| a.grouping.cmp(&b.grouping))
    });
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    rows
}
