use std::collections::BTreeMap;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::backtest::{CellForecast, CellTask, Forecaster};
use crate::error::Result;

use super::{AdapterPool, AdapterRequest, Objective, SeriesPayload};

/// Backtest model served by an adapter pool under `model`.
pub struct AdapterForecaster {
    pub pool: Arc<AdapterPool>,
    pub model: String,
    pub objective: Objective,
    pub seed: u64,
    pub options: BTreeMap<String, serde_json::Value>,
}

impl AdapterForecaster {
    pub fn new(pool: Arc<AdapterPool>, model: impl Into<String>, objective: Objective) -> Self {
        AdapterForecaster {
            pool,
            model: model.into(),
            objective,
            seed: 0,
            options: BTreeMap::new(),
        }
    }

    /// Builds the wire request for one cell. Global requests also carry
    /// every sibling target not already among the regressors.
    pub fn request(&self, task: &CellTask<'_>) -> Result<AdapterRequest> {
        let from = task.window.context_start();
        let to = task.window.origin;
        let payload = |name: &str| -> Result<SeriesPayload> {
            Ok(SeriesPayload {
                id: name.to_string(),
                start: from,
                values: task.dataset.require(name)?.range(from, to)?.to_vec(),
            })
        };
        let mut names: Vec<&str> = task.regressors.iter().map(|r| r.name()).collect();
        if self.objective == Objective::Global {
            let mut siblings: Vec<&str> = task
                .dataset
                .targets()
                .map(|t| t.name())
                .filter(|n| *n != task.target.name() && !names.contains(n))
                .collect();
            siblings.sort();
            names.extend(siblings);
        }
        Ok(AdapterRequest {
            model: self.model.clone(),
            objective: self.objective,
            group: task.grouping.to_string(),
            target: payload(task.target.name())?,
            regressors: names.into_iter().map(payload).collect::<Result<_>>()?,
            context_len: task.window.context_len,
            horizon: task.window.horizon,
            quantile_levels: task.quantile_levels.to_vec(),
            seed: cell_seed(self.seed, task),
            options: self.options.clone(),
        })
    }
}

fn cell_seed(base: u64, task: &CellTask<'_>) -> u64 {
    let mut h = Sha256::new();
    h.update(format!("{base}|{}|{}|{}", task.target.name(), task.grouping, task.window.origin));
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

impl Forecaster for AdapterForecaster {
    fn forecast(&self, task: &CellTask<'_>) -> Result<CellForecast> {
        let request = self.request(task)?;
        let (forecast, meta) = self.pool.with_client(|c| c.fit_predict(&request, self.pool.timeout()))?;
        let mut out = CellForecast::new(forecast);
        out.description = Some(
            meta.get("fitted_model")
                .and_then(|v| v.as_str())
                .map(|m| format!("{} ({m})", self.model))
                .unwrap_or_else(|| self.model.clone()),
        );
        out.nondeterministic = meta.get("deterministic").and_then(|v| v.as_bool()) == Some(false);
        if let Some(warnings) = meta.get("warnings").and_then(|v| v.as_array()) {
            out.warnings = warnings.iter().filter_map(|w| w.as_str().map(String::from)).collect();
        }
        Ok(out)
    }
}
