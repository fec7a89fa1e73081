use std::fmt::Write as _;
use std::io::{BufReader, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use foodcast_core::adapter::{serve, FakeAdapter};
use foodcast_core::backtest::{rank_models, run_backtest, BacktestPlan, BacktestReport, CellStore, ContextTable, RunOptions};
use foodcast_core::complexity::{display_category, ComplexityReport};
use foodcast_core::curation::{curate, Persona};
use foodcast_core::ensemble::{forecast_ensemble, search_ensemble, yoy_change, EnsembleSpec};
use foodcast_core::groups::ManifestSet;
use foodcast_core::series::{write_csv, Dataset, Month};
use foodcast_core::Error;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::rundir::RunDir;
use crate::{Cli, Command, Common};

pub fn run(cli: Cli) -> Result<ExitCode> {
    let jobs = cli.jobs;
    match cli.command {
        Command::Ingest { common, input, synthetic, seed } => ingest(&common, input, synthetic, seed),
        Command::Curate { common, rule, threshold } => {
            let mut cfg = load(&common)?;
            if let Some(r) = rule {
                cfg.curation.rule = r.into();
            }
            if let Some(t) = threshold {
                cfg.curation.threshold = t;
            }
            curate_cmd(&common, cfg)
        }
        Command::Backtest { common, plan, strict, max_new_cells } => {
            let mut cfg = load(&common)?;
            if let Some(p) = plan {
                cfg.plan = Some(BacktestPlan::load(p)?);
            }
            backtest(&common, cfg, jobs, strict, max_new_cells)
        }
        Command::Complexity { common, dataset } => {
            let mut cfg = load(&common)?;
            if let Some(d) = dataset {
                cfg.dataset.path = Some(d);
            }
            complexity(&common, cfg)
        }
        Command::Ensemble { run, target, pool } => ensemble(&run, &target, pool, jobs),
        Command::Forecast { run, origin, year, horizon, adapter } => forecast(&run, origin, year, horizon, adapter),
        Command::Report { run } => report(&run),
        Command::FakeAdapter { config } => fake_adapter(config),
    }
}

fn load(common: &Common) -> Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.apply(&common.overrides());
    Ok(cfg)
}

fn run_dir(common: &Common, cfg: &Config, command: &str) -> Result<RunDir> {
    let path = common
        .run_dir
        .clone()
        .or_else(|| cfg.run_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(command));
    RunDir::create(path, cfg, command)
}

fn dataset_csv(dataset: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(dataset, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

fn ingest(common: &Common, input: Option<PathBuf>, synthetic: bool, seed: Option<u64>) -> Result<ExitCode> {
    let mut cfg = load(common)?;
    if let Some(p) = input {
        cfg.dataset.path = Some(p);
    } else if synthetic {
        cfg.dataset.path = None;
        if let Some(s) = seed {
            cfg.dataset.seed = s;
        }
    }
    let dataset = cfg.dataset()?;
    let run = run_dir(common, &cfg, "ingest")?;
    run.write("dataset.csv", &dataset_csv(&dataset)?)?;
    let mut summary = String::from("series,role,start,end,months\n");
    for s in dataset.iter() {
        let role = if s.id().is_target() { "target" } else { "regressor" };
        let _ = writeln!(summary, "{},{role},{},{},{}", s.name(), s.start(), s.end(), s.len());
    }
    run.write("summary.csv", &summary)?;
    let targets = dataset.targets().count();
    match dataset.coverage() {
        Some((from, to)) => println!(
            "{} series ({targets} targets), common coverage {from}..{to}",
            dataset.len()
        ),
        None => println!("{} series ({targets} targets)", dataset.len()),
    }
    println!("wrote {}", run.path.display());
    Ok(ExitCode::SUCCESS)
}

fn curate_cmd(common: &Common, cfg: Config) -> Result<ExitCode> {
    let variables = cfg.variables()?;
    let mut manifests = cfg.manifests()?;
    let client = cfg.llm_client()?;
    let run = run_dir(common, &cfg, "curate")?;
    let outcome = curate(&client, &Persona::ALL, &variables, cfg.curation.threshold, cfg.curation.rule)?;
    run.write("curation/sheets.json", &format!("{}\n", serde_json::to_string_pretty(&outcome.sheets)?))?;
    run.write("curation/selection.csv", &outcome.selection.log_csv())?;
    manifests.insert(outcome.selection.manifest.clone())?;
    run.write("manifests.toml", &manifests.to_toml())?;
    let selected = outcome.selection.selected();
    println!("selected {} of {} variables:", selected.len(), variables.len());
    for v in selected {
        println!("  {v}");
    }
    println!("wrote {}", run.path.display());
    Ok(ExitCode::SUCCESS)
}

fn write_tables(run: &RunDir, report: &BacktestReport) -> Result<String> {
    report.write(&run.path)?;
    let table = ContextTable::build(report);
    let text = table.to_text();
    run.write("context_table.txt", &text)?;
    run.write("context_table.csv", &table.to_csv())?;
    let mut ranking = String::from("target,rank,model,grouping,mean,std\n");
    let targets: std::collections::BTreeSet<&str> = report.cells.iter().map(|c| c.key.target.as_str()).collect();
    for t in targets {
        for r in rank_models(report, t) {
            let _ = writeln!(ranking, "{t},{},{},{},{:?},{:?}", r.rank, r.model, r.grouping, r.mean, r.std);
        }
    }
    run.write("ranking.csv", &ranking)?;
    Ok(text)
}

fn backtest(common: &Common, cfg: Config, jobs: usize, strict: bool, max_new_cells: Option<usize>) -> Result<ExitCode> {
    let plan = cfg
        .plan
        .clone()
        .ok_or_else(|| Error::Config("no plan given (use --plan or a [plan] section)".into()))?;
    let dataset = cfg.dataset()?;
    let manifests = cfg.manifests()?;
    let registry = cfg.registry(&manifests)?;
    let run = run_dir(common, &cfg, "backtest")?;
    let store = CellStore::open(run.file("cells"))?;
    let outcome = run_backtest(
        &plan,
        &dataset,
        &manifests,
        &registry,
        Some(&store),
        &RunOptions { jobs, max_new_cells },
    )?;
    let text = write_tables(&run, &outcome.report)?;
    print!("{text}");
    let failed = outcome.report.failed_cells();
    println!(
        "{} cells: {} computed, {} reused, {} failed, {} pending",
        plan.cell_count(),
        outcome.computed,
        outcome.reused,
        failed,
        outcome.pending
    );
    if outcome.pending > 0 {
        println!("rerun the same command to continue");
    }
    println!("wrote {}", run.path.display());
    Ok(if strict && failed > 0 { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn load_report(run: &RunDir) -> Result<BacktestReport> {
    let dir = run.file("cells");
    anyhow::ensure!(dir.is_dir(), Error::Config(format!("no stored cells under {}", dir.display())));
    Ok(BacktestReport::from_cells(CellStore::open(dir)?.load_all()?))
}

fn report(path: &Path) -> Result<ExitCode> {
    let run = RunDir::open(path)?;
    let report = load_report(&run)?;
    print!("{}", write_tables(&run, &report)?);
    println!("{} cells, {} failed", report.cells.len(), report.failed_cells());
    Ok(ExitCode::SUCCESS)
}

fn complexity(common: &Common, cfg: Config) -> Result<ExitCode> {
    let dataset = cfg.dataset()?;
    let targets: Vec<_> = dataset.iter().filter(|s| s.id().is_target()).collect();
    anyhow::ensure!(!targets.is_empty(), Error::Input("dataset has no target series".into()));
    let report = ComplexityReport::build(targets, cfg.complexity.clone())?;
    let run = run_dir(common, &cfg, "complexity")?;
    let text = report.to_text();
    run.write("complexity.txt", &text)?;
    run.write("complexity.csv", &report.to_csv())?;
    run.write("complexity_windows.csv", &report.windows_csv())?;
    print!("{text}");
    println!("wrote {}", run.path.display());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleFile {
    ensembles: Vec<EnsembleSpec>,
}

fn ensemble(path: &Path, targets: &[String], pool: Option<usize>, jobs: usize) -> Result<ExitCode> {
    let run = RunDir::open(path)?;
    let cfg = run.config()?;
    let report = load_report(&run)?;
    let pool = pool.unwrap_or(cfg.ensemble.pool_size);
    let targets: Vec<String> = if targets.is_empty() {
        let set: std::collections::BTreeSet<&str> = report.cells.iter().map(|c| c.key.target.as_str()).collect();
        set.into_iter().map(String::from).collect()
    } else {
        targets.to_vec()
    };
    let threads = rayon_pool(jobs)?;
    let mut specs = Vec::new();
    for t in &targets {
        let search = threads.install(|| search_ensemble(&report, t, pool))?;
        for w in &search.warnings {
            log::warn!("{t}: {w}");
        }
        run.write(&format!("ensemble/{t}_candidates.csv"), &search.candidates_csv())?;
        let best = search.best();
        println!(
            "{:<16} {:>4} candidates  best {}  MAPE {:.4} ± {:.4}",
            display_category(t),
            search.candidates.len(),
            search.spec().label(),
            best.mape,
            best.std
        );
        specs.push(search.spec());
    }
    run.write("ensemble.toml", &toml::to_string(&EnsembleFile { ensembles: specs })?)?;
    println!("wrote {}", run.file("ensemble.toml").display());
    Ok(ExitCode::SUCCESS)
}

fn rayon_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

fn forecast(path: &Path, origin: Option<Month>, year: Option<i32>, horizon: Option<usize>, adapter: Option<String>) -> Result<ExitCode> {
    let run = RunDir::open(path)?;
    let mut cfg = run.config()?;
    cfg.apply(&crate::config::Overrides {
        adapter,
        ..Default::default()
    });
    let file = run.file("ensemble.toml");
    let text = std::fs::read_to_string(&file)
        .map_err(|_| Error::Config(format!("{} not found; run `foodcast ensemble` first", file.display())))?;
    let specs: EnsembleFile = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", file.display())))?;
    let dataset = cfg.dataset()?;
    let manifests: ManifestSet = cfg.manifests()?;
    let registry = cfg.registry(&manifests)?;
    let context_len = cfg.plan.as_ref().map(|p| p.context_len).unwrap_or(36);
    let levels = if cfg.forecast.quantile_levels.is_empty() {
        cfg.plan.as_ref().map(|p| p.quantile_levels.clone()).unwrap_or_default()
    } else {
        cfg.forecast.quantile_levels.clone()
    };

    let mut summary = String::from("category,ensemble,origin,year,yoy_pct\n");
    let mut lines = Vec::new();
    for spec in &specs.ensembles {
        let history = dataset.require(&spec.target)?;
        let origin = origin.or(cfg.forecast.origin).unwrap_or(history.end());
        let year = year.or(cfg.forecast.year).unwrap_or(origin.year() + 1);
        let to_december = (Month::december(year).ordinal() - origin.ordinal()).max(1) as usize;
        let horizon = horizon.unwrap_or(to_december);
        let fc = forecast_ensemble(spec, &dataset, &manifests, &registry, origin, horizon, context_len, &levels)?;
        let mut csv = String::from("month,mean");
        for q in &fc.quantiles {
            let _ = write!(csv, ",q{}", q.level);
        }
        csv.push('\n');
        for (i, m) in fc.months().into_iter().enumerate() {
            let _ = write!(csv, "{m},{:?}", fc.mean[i]);
            for q in &fc.quantiles {
                let _ = write!(csv, ",{:?}", q.values[i]);
            }
            csv.push('\n');
        }
        run.write(&format!("forecast/{}.csv", spec.target), &csv)?;
        let yoy = yoy_change(&fc, history, year)?;
        let _ = writeln!(summary, "{},{},{origin},{year},{yoy:?}", spec.target, spec.label());
        lines.push((display_category(&spec.target), yoy, year, spec.label()));
    }
    run.write("forecast/summary.csv", &summary)?;
    lines.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (name, yoy, year, label) in lines {
        println!("{name:<16} {year} {yoy:+6.2}%  {label}");
    }
    println!("wrote {}", run.file("forecast").display());
    Ok(ExitCode::SUCCESS)
}

fn fake_adapter(config: Option<PathBuf>) -> Result<ExitCode> {
    let adapter = match config {
        Some(p) => {
            let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            FakeAdapter::from_toml(&text)?
        }
        None => FakeAdapter::default(),
    };
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    serve(&adapter, BufReader::new(stdin.lock()), &mut stdout)?;
    stdout.flush()?;
    Ok(ExitCode::SUCCESS)
}
