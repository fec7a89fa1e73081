mod commands;
mod config;
mod rundir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use foodcast_core::curation::ConsensusRule;
use foodcast_core::llm::ProviderKind;
use foodcast_core::series::Month;

use crate::config::Overrides;

#[derive(Parser, Debug)]
#[command(name = "foodcast", version, about = "Monthly food price forecasting experiments", arg_required_else_help = true)]
struct Cli {
    /// Worker threads for backtests and ensemble search.
    #[arg(long, short = 'j', global = true, default_value_t = 1)]
    jobs: usize,
    /// Log more (repeatable).
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Output directory; overrides `run_dir` in the config.
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Adapter command; overrides ADAPTER_CMD and the config.
    #[arg(long)]
    adapter: Option<String>,
    #[arg(long, value_enum)]
    llm_provider: Option<ProviderArg>,
    /// Transcript cache directory.
    #[arg(long)]
    llm_cache: Option<PathBuf>,
    /// Serve LLM calls from the cache only.
    #[arg(long)]
    replay_only: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            adapter: self.adapter.clone(),
            llm_provider: self.llm_provider.map(Into::into),
            llm_cache: self.llm_cache.clone(),
            replay_only: self.replay_only,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ProviderArg {
    RecordedFixture,
    HttpEndpoint,
}

impl From<ProviderArg> for ProviderKind {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::RecordedFixture => ProviderKind::RecordedFixture,
            ProviderArg::HttpEndpoint => ProviderKind::HttpEndpoint,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum RuleArg {
    Any,
    Mean,
}

impl From<RuleArg> for ConsensusRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Any => ConsensusRule::Any,
            RuleArg::Mean => ConsensusRule::Mean,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a wide CSV (or generate the synthetic dataset) and write it normalized.
    Ingest {
        #[command(flatten)]
        common: Common,
        #[arg(long, conflicts_with = "synthetic")]
        input: Option<PathBuf>,
        #[arg(long)]
        synthetic: bool,
        #[arg(long, requires = "synthetic")]
        seed: Option<u64>,
    },
    /// Rate candidate variables with LLM personas and build the llm_selected grouping.
    Curate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        rule: Option<RuleArg>,
        #[arg(long)]
        threshold: Option<u8>,
    },
    /// Run a rolling-origin backtest.
    Backtest {
        #[command(flatten)]
        common: Common,
        /// Plan file; overrides `[plan]` in the config.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Exit 1 when any cell failed.
        #[arg(long)]
        strict: bool,
        /// Stop after this many new cells; rerun to continue.
        #[arg(long)]
        max_new_cells: Option<usize>,
    },
    /// Rank target series by forecasting complexity.
    Complexity {
        #[command(flatten)]
        common: Common,
        /// Wide CSV to analyse instead of the configured dataset.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Search 1-3 member ensembles over a finished backtest.
    Ensemble {
        /// Backtest run directory.
        #[arg(long, visible_alias = "report")]
        run: PathBuf,
        #[arg(long)]
        target: Vec<String>,
        #[arg(long)]
        pool: Option<usize>,
    },
    /// Refit the selected ensembles on all data and project year-over-year change.
    Forecast {
        /// Run directory holding `ensemble.toml`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        origin: Option<Month>,
        #[arg(long)]
        year: Option<i32>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        adapter: Option<String>,
    },
    /// Rebuild tables from a run directory's stored cells.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
    /// Serve the adapter protocol on stdin/stdout with canned models.
    #[command(hide = true)]
    FakeAdapter {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(code) => code,
        Err(e) => {
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    if !msg.is_empty() {
                        msg.push_str(": ");
                    }
                    msg.push_str(&cause);
                }
            }
            eprintln!("error: {msg}");
            let validation = e
                .chain()
                .any(|c| c.downcast_ref::<foodcast_core::Error>().is_some_and(|e| e.is_validation()));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
