use std::collections::{BTreeMap, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::groups::{GroupName, ManifestSet};
use crate::models::{fit_with_quantiles, Family, Forecast, ForecasterSpec};
use crate::series::{ground_truth, Dataset, SeriesId, WindowSpec};

use super::{mape, BacktestPlan, BacktestReport, CellKey, CellRecord, CellStatus, CellStore};

/// Everything a forecaster sees for one cell.
#[derive(Debug, Clone)]
pub struct CellTask<'a> {
    pub dataset: &'a Dataset,
    pub target: &'a SeriesId,
    pub grouping: &'a str,
    /// Resolved grouping members, sorted by name.
    pub regressors: &'a [SeriesId],
    pub window: WindowSpec,
    pub quantile_levels: &'a [f64],
}

impl CellTask<'_> {
    pub fn target_context(&self) -> Result<&[f64]> {
        self.dataset
            .require(self.target.name())?
            .range(self.window.context_start(), self.window.origin)
    }
}

#[derive(Debug, Clone)]
pub struct CellForecast {
    pub forecast: Forecast,
    pub description: Option<String>,
    pub warnings: Vec<String>,
    pub nondeterministic: bool,
}

impl CellForecast {
    pub fn new(forecast: Forecast) -> Self {
        CellForecast {
            forecast,
            description: None,
            warnings: Vec::new(),
            nondeterministic: false,
        }
    }
}

pub trait Forecaster: Send + Sync {
    /// Overrides the plan's context length.
    fn context_len(&self) -> Option<usize> {
        None
    }

    /// Column this model's cells feed in the context table.
    fn context_label(&self, grouping: &str) -> String {
        grouping.to_string()
    }

    fn forecast(&self, task: &CellTask<'_>) -> Result<CellForecast>;
}

/// In-process statistical model; regressors are ignored.
#[derive(Debug, Clone)]
pub struct StatForecaster {
    pub spec: ForecasterSpec,
}

impl Forecaster for StatForecaster {
    fn forecast(&self, task: &CellTask<'_>) -> Result<CellForecast> {
        let fitted = fit_with_quantiles(
            &self.spec,
            task.target_context()?,
            task.window.origin,
            task.window.horizon,
            task.quantile_levels,
        )?;
        Ok(CellForecast {
            forecast: fitted.forecast,
            description: Some(fitted.model),
            warnings: fitted.warnings,
            nondeterministic: false,
        })
    }
}

#[derive(Clone, Default)]
pub struct Registry {
    entries: BTreeMap<String, Arc<dyn Forecaster>>,
}

impl Registry {
    pub fn new() -> Self {
        Registry::default()
    }

    /// Registry holding the four statistical families under their own names.
    pub fn with_stat_models() -> Self {
        let mut r = Registry::new();
        for family in Family::ALL {
            r.register(
                family.as_str(),
                StatForecaster {
                    spec: ForecasterSpec::new(family),
                },
            );
        }
        r
    }

    pub fn register(&mut self, name: impl Into<String>, forecaster: impl Forecaster + 'static) {
        self.entries.insert(name.into(), Arc::new(forecaster));
    }

    pub fn register_arc(&mut self, name: impl Into<String>, forecaster: Arc<dyn Forecaster>) {
        self.entries.insert(name.into(), forecaster);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Forecaster>> {
        self.entries.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub jobs: usize,
    /// Stop after computing this many new cells; used to checkpoint long runs.
    pub max_new_cells: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            jobs: 1,
            max_new_cells: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Report over every cell completed so far.
    pub report: BacktestReport,
    pub computed: usize,
    pub reused: usize,
    /// Cells left for a later run.
    pub pending: usize,
}

impl RunOutcome {
    pub fn is_complete(&self) -> bool {
        self.pending == 0
    }
}

struct Prepared<'a> {
    plan: &'a BacktestPlan,
    dataset: &'a Dataset,
    registry: &'a Registry,
    targets: HashMap<&'a str, &'a SeriesId>,
    regressors: HashMap<(&'a str, &'a str), Vec<SeriesId>>,
}

fn prepare<'a>(
    plan: &'a BacktestPlan,
    dataset: &'a Dataset,
    manifests: &ManifestSet,
    registry: &'a Registry,
) -> Result<Prepared<'a>> {
    if plan.horizon == 0 || plan.context_len == 0 {
        return Err(Error::Config("horizon and context_len must be at least 1".into()));
    }
    for (what, list) in [
        ("targets", &plan.targets),
        ("models", &plan.models),
        ("groupings", &plan.groupings),
    ] {
        if list.is_empty() {
            return Err(Error::Config(format!("plan lists no {what}")));
        }
        let mut seen = list.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != list.len() {
            return Err(Error::Config(format!("plan repeats an entry in {what}")));
        }
    }
    if plan.origins.is_empty() {
        return Err(Error::Config("plan lists no origins".into()));
    }

    let mut context_lens = vec![plan.context_len];
    for m in &plan.models {
        let f = registry
            .get(m)
            .ok_or_else(|| Error::Config(format!("unknown model `{m}`")))?;
        context_lens.extend(f.context_len());
    }
    let longest = context_lens.into_iter().max().unwrap_or(plan.context_len);

    let mut targets = HashMap::new();
    for t in &plan.targets {
        let series = dataset.require(t)?;
        if !series.id().is_target() {
            return Err(Error::Config(format!("`{t}` is not a target series")));
        }
        for origin in &plan.origins {
            let window = WindowSpec::new(*origin, longest, plan.horizon)?;
            ground_truth(dataset, series.id(), &window)?;
            series.range(window.context_start(), window.origin)?;
        }
        targets.insert(t.as_str(), series.id());
    }

    let mut regressors = HashMap::new();
    for g in &plan.groupings {
        let manifest = manifests.get(&g.parse::<GroupName>()?)?;
        for t in &plan.targets {
            let resolved = manifest.resolve(dataset, targets[t.as_str()])?;
            regressors.insert((t.as_str(), g.as_str()), resolved);
        }
    }
    Ok(Prepared {
        plan,
        dataset,
        registry,
        targets,
        regressors,
    })
}

impl Prepared<'_> {
    fn run_cell(&self, key: &CellKey) -> CellRecord {
        let forecaster = &self.registry.get(&key.model).expect("validated model");
        let mut record = CellRecord {
            key: key.clone(),
            context: forecaster.context_label(&key.grouping),
            status: CellStatus::Failed,
            mape: None,
            actual: Vec::new(),
            forecast: None,
            fitted_model: None,
            warnings: Vec::new(),
            error: None,
            nondeterministic: false,
        };
        let outcome = catch_unwind(AssertUnwindSafe(|| self.attempt(key, forecaster.as_ref(), &mut record)));
        match outcome {
            Ok(Ok(())) => {}
            Ok(Err(e)) => record.error = Some(e.to_string()),
            Err(panic) => {
                let msg = panic
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "forecaster panicked".into());
                record.error = Some(format!("panic: {msg}"));
            }
        }
        if record.error.is_some() {
            record.status = CellStatus::Failed;
            record.mape = None;
        }
        record
    }

    fn attempt(&self, key: &CellKey, forecaster: &dyn Forecaster, record: &mut CellRecord) -> Result<()> {
        let target = self.targets[key.target.as_str()];
        let context_len = forecaster.context_len().unwrap_or(self.plan.context_len);
        let window = WindowSpec::new(key.origin, context_len, self.plan.horizon)?;
        record.actual = ground_truth(self.dataset, target, &window)?;
        let task = CellTask {
            dataset: self.dataset,
            target,
            grouping: &key.grouping,
            regressors: &self.regressors[&(key.target.as_str(), key.grouping.as_str())],
            window,
            quantile_levels: &self.plan.quantile_levels,
        };
        let out = forecaster.forecast(&task)?;
        record.fitted_model = out.description;
        record.warnings = out.warnings;
        record.nondeterministic = out.nondeterministic;
        if out.forecast.origin != key.origin || out.forecast.horizon() != self.plan.horizon {
            return Err(Error::Input(format!(
                "forecast covers {} steps from {}, expected {} from {}",
                out.forecast.horizon(),
                out.forecast.origin,
                self.plan.horizon,
                key.origin
            )));
        }
        let score = mape(&record.actual, &out.forecast.mean);
        record.forecast = Some(out.forecast);
        record.mape = Some(score?);
        record.status = CellStatus::Ok;
        Ok(())
    }
}

/// Attempts every pending cell of `plan` once. With a store, finished cells
/// are persisted as they complete and reused on later runs.
pub fn run_backtest(
    plan: &BacktestPlan,
    dataset: &Dataset,
    manifests: &ManifestSet,
    registry: &Registry,
    store: Option<&CellStore>,
    options: &RunOptions,
) -> Result<RunOutcome> {
    let prepared = prepare(plan, dataset, manifests, registry)?;
    let keys = plan.cells();

    let mut done = Vec::new();
    let mut pending = Vec::new();
    for key in keys {
        match store.map(|s| s.load(&key)).transpose()?.flatten() {
            Some(record) => done.push(record),
            None => pending.push(key),
        }
    }
    let reused = done.len();
    let budget = options.max_new_cells.unwrap_or(pending.len()).min(pending.len());
    let (now, later) = pending.split_at(budget);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let fresh: Vec<Result<CellRecord>> = pool.install(|| {
        now.par_iter()
            .map(|key| {
                let record = prepared.run_cell(key);
                if let Some(s) = store {
                    s.save(&record)?;
                }
                if let Some(e) = &record.error {
                    log::warn!("{} {} {} {}: {e}", key.target, key.model, key.grouping, key.origin);
                }
                Ok(record)
            })
            .collect()
    });
    let computed = fresh.len();
    for r in fresh {
        done.push(r?);
    }
    Ok(RunOutcome {
        report: BacktestReport::from_cells(done),
        computed,
        reused,
        pending: later.len(),
    })
}
