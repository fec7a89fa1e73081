//! Equal-weight ensembles of backtested models and final forecasts.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{mape, mean_std, rank_models, BacktestReport, CellStatus, CellTask, Registry};
use crate::error::{Error, Result};
use crate::groups::{GroupName, ManifestSet};
use crate::models::{Forecast, QuantileBand};
use crate::series::{Dataset, Month, MonthlySeries, WindowSpec};

pub const DEFAULT_POOL: usize = 10;
pub const MAX_MEMBERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MemberRef {
    pub model: String,
    pub grouping: String,
}

impl fmt::Display for MemberRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model, self.grouping)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combiner {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub target: String,
    pub members: Vec<MemberRef>,
    #[serde(default)]
    pub combiner: Combiner,
}

impl EnsembleSpec {
    pub fn new(target: impl Into<String>, mut members: Vec<MemberRef>) -> Result<Self> {
        members.sort();
        let before = members.len();
        members.dedup();
        if members.len() != before {
            return Err(Error::Input("ensemble members must be distinct".into()));
        }
        if !(1..=MAX_MEMBERS).contains(&members.len()) {
            return Err(Error::Input(format!("ensembles have 1 to {MAX_MEMBERS} members")));
        }
        Ok(EnsembleSpec {
            target: target.into(),
            members,
            combiner: Combiner::Mean,
        })
    }

    pub fn label(&self) -> String {
        self.members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" + ")
    }
}

/// Pointwise mean of the members' means, and of every quantile level all
/// members carry.
pub fn combine(forecasts: &[&Forecast]) -> Result<Forecast> {
    let first = forecasts
        .first()
        .ok_or_else(|| Error::Input("nothing to combine".into()))?;
    for f in forecasts {
        if f.origin != first.origin || f.horizon() != first.horizon() {
            return Err(Error::Input(format!(
                "cannot combine {} steps from {} with {} steps from {}",
                f.horizon(),
                f.origin,
                first.horizon(),
                first.origin
            )));
        }
    }
    let n = forecasts.len() as f64;
    let average = |paths: Vec<&[f64]>| -> Vec<f64> {
        (0..first.horizon())
            .map(|t| paths.iter().map(|p| p[t]).sum::<f64>() / n)
            .collect()
    };
    let mean = average(forecasts.iter().map(|f| f.mean.as_slice()).collect());
    let bands = first
        .quantiles
        .iter()
        .filter_map(|b| {
            let paths: Option<Vec<&[f64]>> = forecasts.iter().map(|f| f.band(b.level)).collect();
            Some(QuantileBand {
                level: b.level,
                values: average(paths?),
            })
        })
        .collect();
    Forecast::new(first.origin, mean)?.with_quantiles(bands)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateScore {
    pub members: Vec<MemberRef>,
    /// Mean over windows of the combined forecast's MAPE.
    pub mape: f64,
    pub std: f64,
    pub per_window: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSearch {
    pub target: String,
    pub pool: Vec<MemberRef>,
    pub windows: Vec<Month>,
    /// Every evaluated subset, best first.
    pub candidates: Vec<CandidateScore>,
    pub warnings: Vec<String>,
}

impl EnsembleSearch {
    pub fn best(&self) -> &CandidateScore {
        &self.candidates[0]
    }

    pub fn spec(&self) -> EnsembleSpec {
        EnsembleSpec {
            target: self.target.clone(),
            members: self.best().members.clone(),
            combiner: Combiner::Mean,
        }
    }

    pub fn candidates_csv(&self) -> String {
        let mut out = String::from("rank,members,size,mape,std\n");
        for (i, c) in self.candidates.iter().enumerate() {
            let names: Vec<String> = c.members.iter().map(|m| m.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{:?},{:?}\n",
                i + 1,
                names.join(" + "),
                c.members.len(),
                c.mape,
                c.std
            ));
        }
        out
    }
}

fn subsets(n: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    fn grow(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..n {
            cur.push(i);
            out.push(cur.clone());
            if cur.len() < max {
                grow(i + 1, n, max, cur, out);
            }
            cur.pop();
        }
    }
    grow(0, n, max, &mut Vec::new(), &mut out);
    out
}

/// Scores every 1–3 member subset of the `pool_size` best models for
/// `target` by re-combining their stored forecasts window by window.
pub fn search_ensemble(report: &BacktestReport, target: &str, pool_size: usize) -> Result<EnsembleSearch> {
    let ranked = rank_models(report, target);
    if ranked.is_empty() {
        return Err(Error::State(format!("no successful backtest results for `{target}`")));
    }
    let mut warnings = Vec::new();
    if ranked.len() < pool_size {
        warnings.push(format!(
            "only {} models available for `{target}`, pool shrinks from {pool_size}",
            ranked.len()
        ));
    }
    let pool: Vec<MemberRef> = ranked
        .iter()
        .take(pool_size)
        .map(|r| MemberRef {
            model: r.model.clone(),
            grouping: r.grouping.clone(),
        })
        .collect();

    let mut paths: BTreeMap<(&MemberRef, Month), &Forecast> = BTreeMap::new();
    let mut actuals: BTreeMap<Month, &[f64]> = BTreeMap::new();
    let mut windows: Option<BTreeSet<Month>> = None;
    for m in &pool {
        let mut mine = BTreeSet::new();
        for c in report
            .cells
            .iter()
            .filter(|c| c.key.target == target && c.key.model == m.model && c.key.grouping == m.grouping)
            .filter(|c| c.status == CellStatus::Ok)
        {
            let f = c.forecast.as_ref().ok_or_else(|| {
                Error::State(format!(
                    "cell {m} at {} has no stored forecast; rerun the backtest with forecasts kept",
                    c.key.origin
                ))
            })?;
            paths.insert((m, c.key.origin), f);
            actuals.insert(c.key.origin, &c.actual);
            mine.insert(c.key.origin);
        }
        windows = Some(match windows {
            None => mine,
            Some(w) => w.intersection(&mine).copied().collect(),
        });
    }
    let windows: Vec<Month> = windows.unwrap_or_default().into_iter().collect();
    if windows.is_empty() {
        return Err(Error::State(format!("pool models for `{target}` share no successful window")));
    }
    let all_windows: BTreeSet<Month> = report
        .cells
        .iter()
        .filter(|c| c.key.target == target)
        .map(|c| c.key.origin)
        .collect();
    if windows.len() < all_windows.len() {
        warnings.push(format!(
            "scoring on {} of {} windows where every pool model succeeded",
            windows.len(),
            all_windows.len()
        ));
    }

    let mut candidates = subsets(pool.len(), MAX_MEMBERS)
        .par_iter()
        .map(|idx| {
            let members: Vec<&MemberRef> = idx.iter().map(|&i| &pool[i]).collect();
            let per_window = windows
                .iter()
                .map(|w| {
                    let fs: Vec<&Forecast> = members.iter().map(|m| paths[&(*m, *w)]).collect();
                    mape(actuals[w], &combine(&fs)?.mean)
                })
                .collect::<Result<Vec<f64>>>()?;
            let (mean, std) = mean_std(&per_window).expect("windows are non-empty");
            let mut members: Vec<MemberRef> = members.into_iter().cloned().collect();
            members.sort();
            Ok(CandidateScore {
                members,
                mape: mean,
                std,
                per_window,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.sort_by(|a, b| {
        a.mape
            .total_cmp(&b.mape)
            .then(a.members.len().cmp(&b.members.len()))
            .then_with(|| a.members.cmp(&b.members))
    });
    Ok(EnsembleSearch {
        target: target.to_string(),
        pool,
        windows,
        candidates,
        warnings,
    })
}

/// Percent change of the `year` mean over the `year - 1` mean, preferring
/// actual values and falling back to the forecast month by month.
pub fn yoy_change(forecast: &Forecast, history: &MonthlySeries, year: i32) -> Result<f64> {
    let predicted: BTreeMap<Month, f64> = forecast.months().into_iter().zip(forecast.mean.iter().copied()).collect();
    let year_mean = |y: i32| -> Result<f64> {
        let mut sum = 0.0;
        for month in 1..=12 {
            let m = Month::new(y, month)?;
            sum += history
                .value_at(m)
                .or_else(|| predicted.get(&m).copied())
                .ok_or_else(|| Error::coverage(history.name(), Month::new(y, 1).expect("valid"), Month::december(y)))?;
        }
        Ok(sum / 12.0)
    };
    let prev = year_mean(year - 1)?;
    if prev == 0.0 {
        return Err(Error::ZeroDenominator { index: 0 });
    }
    Ok(100.0 * year_mean(year)? / prev - 100.0)
}

/// Refits every member at `origin` on all data and combines the results.
#[allow(clippy::too_many_arguments)]
pub fn forecast_ensemble(
    spec: &EnsembleSpec,
    dataset: &Dataset,
    manifests: &ManifestSet,
    registry: &Registry,
    origin: Month,
    horizon: usize,
    context_len: usize,
    quantile_levels: &[f64],
) -> Result<Forecast> {
    let target = dataset.require(&spec.target)?.id().clone();
    let mut forecasts = Vec::new();
    for m in &spec.members {
        let f = registry
            .get(&m.model)
            .ok_or_else(|| Error::Config(format!("unknown model `{}`", m.model)))?;
        let regressors = manifests.get(&m.grouping.parse::<GroupName>()?)?.resolve(dataset, &target)?;
        let task = CellTask {
            dataset,
            target: &target,
            grouping: &m.grouping,
            regressors: &regressors,
            window: WindowSpec::new(origin, f.context_len().unwrap_or(context_len), horizon)?,
            quantile_levels,
        };
        forecasts.push(f.forecast(&task)?.forecast);
    }
    combine(&forecasts.iter().collect::<Vec<_>>())
}
