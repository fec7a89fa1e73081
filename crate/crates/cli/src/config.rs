use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use foodcast_core::adapter::{AdapterForecaster, AdapterPool, Objective};
use foodcast_core::backtest::{BacktestPlan, Forecaster, Registry};
use foodcast_core::catalog::{self, Descriptions, Variable};
use foodcast_core::complexity::ComplexityConfig;
use foodcast_core::groups::{GroupName, ManifestSet};
use foodcast_core::llm::{load_reports, LlmClient, LlmForecaster, LlmProviderConfig, PromptVariant, ProviderKind, TranscriptStore};
use foodcast_core::series::{ingest_csv, CsvSchema, Dataset, Month};
use foodcast_core::synthetic::synthetic_dataset;
use serde::{Deserialize, Serialize};

/// One experiment: data, groupings, plan, and model back ends.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub manifests: Option<PathBuf>,
    pub variables: Option<PathBuf>,
    pub descriptions: Option<PathBuf>,
    pub plan: Option<BacktestPlan>,
    pub adapter: Option<AdapterConfig>,
    pub llm: Option<LlmConfig>,
    pub complexity: ComplexityConfig,
    pub curation: CurationConfig,
    pub ensemble: EnsembleConfig,
    pub forecast: ForecastConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Wide CSV; the seeded synthetic dataset is used when absent.
    pub path: Option<PathBuf>,
    pub schema: CsvSchema,
    pub seed: u64,
    pub start: Month,
    pub end: Month,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            path: None,
            schema: CsvSchema::default(),
            seed: 7,
            start: Month::new(1986, 1).expect("valid"),
            end: Month::new(2024, 12).expect("valid"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterModel {
    /// Name used in plans.
    pub name: String,
    /// Name sent to the adapter; defaults to `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default = "local")]
    pub objective: Objective,
}

fn local() -> Objective {
    Objective::Local
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub command: Option<String>,
    pub timeout_secs: u64,
    pub seed: u64,
    pub models: Vec<AdapterModel>,
    pub options: BTreeMap<String, toml::Value>,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            command: None,
            timeout_secs: 600,
            seed: 0,
            models: Vec::new(),
            options: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmVariantConfig {
    pub name: String,
    #[serde(default)]
    pub include_exogenous: bool,
    #[serde(default)]
    pub include_future_forecasts: bool,
    #[serde(default)]
    pub include_cfpr: bool,
    #[serde(default = "llm_context")]
    pub context_len: usize,
    /// Registered models whose forecasts go into the future blocks.
    #[serde(default)]
    pub future_sources: Vec<String>,
}

fn llm_context() -> usize {
    75
}

impl LlmVariantConfig {
    pub fn variant(&self) -> PromptVariant {
        PromptVariant {
            include_exogenous: self.include_exogenous,
            include_future_forecasts: self.include_future_forecasts,
            include_cfpr: self.include_cfpr,
            context_len: self.context_len,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub provider: LlmProviderConfig,
    pub cache: PathBuf,
    pub replay_only: bool,
    /// Directory of `<year>.txt` report texts.
    pub reports_dir: Option<PathBuf>,
    pub variants: Vec<LlmVariantConfig>,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            provider: LlmProviderConfig::default(),
            cache: PathBuf::from("llm-cache"),
            replay_only: false,
            reports_dir: None,
            variants: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurationConfig {
    pub threshold: u8,
    pub rule: foodcast_core::curation::ConsensusRule,
}

impl Default for CurationConfig {
    fn default() -> Self {
        CurationConfig {
            threshold: 7,
            rule: Default::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub pool_size: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            pool_size: foodcast_core::ensemble::DEFAULT_POOL,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Last observed month; defaults to the end of the dataset.
    pub origin: Option<Month>,
    /// Year whose change over the previous year is projected.
    pub year: Option<i32>,
    pub quantile_levels: Vec<f64>,
}

/// Command-line overrides shared by several subcommands.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub adapter: Option<String>,
    pub llm_provider: Option<ProviderKind>,
    pub llm_cache: Option<PathBuf>,
    pub replay_only: bool,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text)
            .map_err(|e| foodcast_core::Error::Config(format!("{}: {e}", path.display())))?;
        cfg.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            self.run_dir.as_mut(),
            self.dataset.path.as_mut(),
            self.manifests.as_mut(),
            self.variables.as_mut(),
            self.descriptions.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        if let Some(llm) = &mut self.llm {
            fix(&mut llm.cache);
            if let Some(p) = &mut llm.reports_dir {
                fix(p);
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.llm_provider.is_some() || o.llm_cache.is_some() || o.replay_only {
            let llm = self.llm.get_or_insert_with(LlmConfig::default);
            if let Some(p) = o.llm_provider {
                llm.provider.provider = p;
            }
            if let Some(c) = &o.llm_cache {
                llm.cache = c.clone();
            }
            llm.replay_only |= o.replay_only;
        }
        let env = std::env::var("ADAPTER_CMD").ok().filter(|s| !s.trim().is_empty());
        if let Some(cmd) = o.adapter.clone().or(env) {
            self.adapter.get_or_insert_with(AdapterConfig::default).command = Some(cmd);
        }
    }

    pub fn dataset(&self) -> Result<Dataset> {
        Ok(match &self.dataset.path {
            Some(p) => ingest_csv(p, &self.dataset.schema)?,
            None => synthetic_dataset(self.dataset.seed, self.dataset.start, self.dataset.end)?,
        })
    }

    pub fn manifests(&self) -> Result<ManifestSet> {
        Ok(match &self.manifests {
            Some(p) => ManifestSet::load(p)?,
            None => ManifestSet::bundled(),
        })
    }

    pub fn variables(&self) -> Result<Vec<Variable>> {
        Ok(match &self.variables {
            Some(p) => catalog::load_variables(p)?,
            None => catalog::bundled_variables(),
        })
    }

    pub fn descriptions(&self) -> Result<Descriptions> {
        Ok(match &self.descriptions {
            Some(p) => catalog::load_descriptions(p)?,
            None => catalog::bundled_descriptions(),
        })
    }

    pub fn llm_client(&self) -> Result<LlmClient> {
        let llm = self.llm.clone().unwrap_or_default();
        let store = TranscriptStore::open(&llm.cache)?;
        Ok(LlmClient::from_config(&llm.provider)?
            .with_store(store)
            .replay_only(llm.replay_only || llm.provider.provider == ProviderKind::RecordedFixture))
    }

    /// Statistical models plus every configured adapter model and LLM variant.
    pub fn registry(&self, manifests: &ManifestSet) -> Result<Registry> {
        let mut registry = Registry::with_stat_models();
        if let Some(a) = &self.adapter {
            if !a.models.is_empty() {
                let Some(command) = a.command.clone() else {
                    bail!(foodcast_core::Error::Config(
                        "adapter models are configured but no adapter command is set (use --adapter or ADAPTER_CMD)".into()
                    ));
                };
                let pool = Arc::new(AdapterPool::process(command, Duration::from_secs(a.timeout_secs)));
                let options: BTreeMap<String, serde_json::Value> = a
                    .options
                    .iter()
                    .map(|(k, v)| Ok((k.clone(), serde_json::to_value(v)?)))
                    .collect::<Result<_>>()?;
                for m in &a.models {
                    let mut f = AdapterForecaster::new(pool.clone(), m.model.clone().unwrap_or_else(|| m.name.clone()), m.objective);
                    f.seed = a.seed;
                    f.options = options.clone();
                    registry.register(m.name.clone(), f);
                }
            }
        }
        if let Some(llm) = &self.llm {
            if !llm.variants.is_empty() {
                let client = Arc::new(self.llm_client()?);
                let descriptions = self.descriptions()?;
                let reports = match &llm.reports_dir {
                    Some(d) => load_reports(d)?,
                    None => BTreeMap::new(),
                };
                let human = manifests.get(&GroupName::HumanSelected).ok();
                for v in &llm.variants {
                    let mut f = LlmForecaster::new(client.clone(), v.variant(), descriptions.clone());
                    f.exogenous = human.clone();
                    f.reports = reports.clone();
                    for s in &v.future_sources {
                        let source: Arc<dyn Forecaster> = registry
                            .get(s)
                            .cloned()
                            .ok_or_else(|| foodcast_core::Error::Config(format!("unknown future source `{s}`")))?;
                        f.future_sources.push((s.clone(), source));
                    }
                    registry.register(v.name.clone(), f);
                }
            }
        }
        Ok(registry)
    }
}
