use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use foodcast_core::backtest::{run_backtest, BacktestPlan, CellStore, CellTask, Forecaster, Registry, RunOptions, StatForecaster};
use foodcast_core::catalog::bundled_descriptions;
use foodcast_core::groups::{GroupName, ManifestSet};
use foodcast_core::llm::{
    parse_forecast, prompt_input, render, render_prompt, ForecastTask, FutureBlock, HttpEndpoint, LlmClient,
    LlmForecaster, LlmProviderConfig, PromptVariant, Provider, ProviderKind, TranscriptStore,
};
use foodcast_core::models::{fit_predict, Family, ForecasterSpec};
use foodcast_core::series::{read_csv, CsvSchema, Dataset, Month, SeriesId, WindowSpec};
use foodcast_core::synthetic::synthetic_dataset;
use foodcast_core::{Error, Result};
use proptest::prelude::*;

const GOLDEN: &str = include_str!("fixtures/golden_meat_prompt.txt");

fn golden_rows() -> Dataset {
    read_csv(&include_bytes!("fixtures/golden_meat.csv")[..], &CsvSchema::default()).unwrap()
}

fn exogenous_meat() -> Vec<String> {
    ManifestSet::bundled()
        .get(&GroupName::HumanSelected)
        .unwrap()
        .declared_for("target_meat")
        .unwrap()
}

fn synthetic() -> Dataset {
    synthetic_dataset(5, Month::new(1986, 1).unwrap(), Month::new(2024, 12).unwrap()).unwrap()
}

#[test]
fn golden_meat_prompt() {
    let data = golden_rows();
    let task = ForecastTask {
        dataset: &data,
        target: "target_meat",
        exogenous: exogenous_meat(),
        origin: Month::new(1986, 12).unwrap(),
        horizon: 12,
        future: Vec::new(),
        cfpr: None,
    };
    let variant = PromptVariant {
        include_exogenous: true,
        context_len: 12,
        ..PromptVariant::default()
    };
    let mut input = prompt_input(&task, &variant, &bundled_descriptions()).unwrap();
    // The fixture pairs a 1986 history excerpt with mid-2023 dates.
    let july = Month::new(2023, 7).unwrap();
    input.target_dates = (0..12).map(|k| july.add_months(k)).collect();
    assert_eq!(render(&input), GOLDEN);

    let natural = render_prompt(&task, &variant, &bundled_descriptions()).unwrap();
    let history = |s: &str| s[s.find("<history>").unwrap()..s.find("</history>").unwrap()].to_string();
    assert_eq!(history(&natural), history(GOLDEN));
    assert!(natural.contains("<target_dates>\n1987-01-01\n"));
}

#[test]
fn horizon_one_has_one_date() {
    let data = synthetic();
    let task = ForecastTask {
        dataset: &data,
        target: "target_meat",
        exogenous: Vec::new(),
        origin: Month::new(2020, 12).unwrap(),
        horizon: 1,
        future: Vec::new(),
        cfpr: None,
    };
    let p = render_prompt(&task, &PromptVariant::default(), &bundled_descriptions()).unwrap();
    assert!(p.contains("<target_dates>\n2021-01-01\n</target_dates>"));
    let history = &p[p.find("<history>").unwrap()..p.find("</history>").unwrap()];
    assert_eq!(history.lines().count(), 2 + 75);
    assert!(!p.contains("exogenous_"));
}

#[test]
fn future_blocks_and_report() {
    let data = synthetic();
    let origin = Month::new(2020, 12).unwrap();
    let context = data.require("target_meat").unwrap().range(origin.add_months(-74), origin).unwrap();
    let mut future = Vec::new();
    for family in [Family::SeasonalNaive, Family::AutoEts] {
        future.push(FutureBlock {
            source: family.to_string(),
            forecast: fit_predict(&ForecasterSpec::new(family), context, origin, 18).unwrap(),
        });
    }
    let task = ForecastTask {
        dataset: &data,
        target: "target_meat",
        exogenous: Vec::new(),
        origin,
        horizon: 18,
        future,
        cfpr: Some("Food prices are expected to rise 2.5 to 4.5 percent.".into()),
    };
    let variant = PromptVariant {
        include_future_forecasts: true,
        include_cfpr: true,
        ..PromptVariant::default()
    };
    let p = render_prompt(&task, &variant, &bundled_descriptions()).unwrap();
    assert_eq!(p.matches("<future_forecast model=").count(), 2);
    for source in ["seasonal_naive", "auto_ets"] {
        let open = format!("<future_forecast model=\"{source}\">\n");
        let start = p.find(&open).unwrap() + open.len();
        let block = &p[start..start + p[start..].find("</future_forecast>").unwrap()];
        assert_eq!(block.lines().count(), 1 + 18, "{source}");
    }
    assert!(p.find("<report>").unwrap() < p.find("<target_dates>").unwrap());
    assert!(p.find("</future_forecast>").unwrap() < p.find("<target_dates>").unwrap());

    let bare = ForecastTask { future: Vec::new(), cfpr: None, ..task.clone() };
    assert!(matches!(render_prompt(&bare, &variant, &bundled_descriptions()), Err(Error::Prompt(_))));
}

#[test]
fn prompt_preconditions() {
    let data = synthetic();
    let mut task = ForecastTask {
        dataset: &data,
        target: "target_meat",
        exogenous: vec!["exogenous_epu_canada".into()],
        origin: Month::new(2020, 12).unwrap(),
        horizon: 12,
        future: Vec::new(),
        cfpr: None,
    };
    let with_exo = PromptVariant { include_exogenous: true, ..PromptVariant::default() };
    let mut descriptions = bundled_descriptions();
    descriptions.remove("exogenous_epu_canada");
    assert!(matches!(render_prompt(&task, &with_exo, &descriptions), Err(Error::Prompt(_))));
    task.origin = Month::new(1988, 12).unwrap();
    assert!(matches!(
        render_prompt(&task, &PromptVariant::default(), &descriptions),
        Err(Error::Coverage { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn prompt_bytes_follow_every_included_value(offset in 0usize..75, delta in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0], exo in any::<bool>()) {
        let origin = Month::new(2021, 12).unwrap();
        let month = origin.add_months(-(offset as i64));
        let base = synthetic();
        let column = if exo { "exogenous_excaus" } else { "target_meat" };
        let changed = Dataset::new(base.iter().map(|s| {
            if s.name() != column {
                return s.clone();
            }
            let mut values = s.values().to_vec();
            values[month.months_since(s.start()) as usize] += delta;
            foodcast_core::series::MonthlySeries::new(s.id().clone(), s.start(), values).unwrap()
        })).unwrap();
        let variant = PromptVariant { include_exogenous: true, ..PromptVariant::default() };
        let render_for = |d: &Dataset| {
            render_prompt(&ForecastTask {
                dataset: d,
                target: "target_meat",
                exogenous: exogenous_meat(),
                origin,
                horizon: 18,
                future: Vec::new(),
                cfpr: None,
            }, &variant, &bundled_descriptions()).unwrap()
        };
        prop_assert_eq!(render_for(&base), render_for(&base));
        prop_assert_ne!(render_for(&base), render_for(&changed));
    }
}

/// Answers with a seasonal-naive continuation read off the prompt's history.
struct SeasonalEcho {
    calls: AtomicUsize,
}

impl Provider for SeasonalEcho {
    fn name(&self) -> &str {
        "seasonal_echo"
    }

    fn complete(&self, _model: &str, prompt: &str) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let history = &prompt[prompt.find("<history>").unwrap()..prompt.find("</history>").unwrap()];
        let last: Vec<&str> = history.lines().skip(2).map(|l| l.rsplit(',').next().unwrap()).collect();
        let dates = &prompt[prompt.find("<target_dates>").unwrap() + 15..prompt.find("</target_dates>").unwrap()];
        let mut out = String::from("Here you go.\n<forecast>\n");
        for (i, d) in dates.lines().enumerate() {
            out.push_str(&format!("{d}, {}\n", last[last.len() - 12 + i % 12]));
        }
        Ok(out + "</forecast>\n")
    }
}

struct Forbidden;

impl Provider for Forbidden {
    fn name(&self) -> &str {
        "forbidden"
    }

    fn complete(&self, _: &str, _: &str) -> Result<String> {
        panic!("replay must not reach the provider");
    }
}

struct Canned(String);

impl Provider for Canned {
    fn name(&self) -> &str {
        "canned"
    }

    fn complete(&self, _: &str, _: &str) -> Result<String> {
        Ok(self.0.clone())
    }
}

fn plan(models: &[&str]) -> BacktestPlan {
    BacktestPlan::new(
        vec!["target_meat".into(), "target_vegetables".into()],
        models.iter().map(|s| s.to_string()).collect(),
        vec!["none".into()],
    )
}

#[test]
fn seasonal_echo_matches_seasonal_naive_and_replays() {
    let data = synthetic();
    let cache = tempfile::tempdir().unwrap();
    let live = Arc::new(
        LlmClient::new(Box::new(SeasonalEcho { calls: AtomicUsize::new(0) }), "echo-model")
            .with_store(TranscriptStore::open(cache.path()).unwrap()),
    );
    let mut registry = Registry::with_stat_models();
    registry.register("llm", LlmForecaster::new(live, PromptVariant::default(), bundled_descriptions()));
    let out = run_backtest(&plan(&["llm", "seasonal_naive"]), &data, &ManifestSet::bundled(), &registry, None, &RunOptions::default()).unwrap();
    for c in out.report.cells.iter().filter(|c| c.key.model == "llm") {
        let twin = out.report.cells.iter().find(|o| o.key.model == "seasonal_naive" && o.key.target == c.key.target && o.key.origin == c.key.origin).unwrap();
        assert_eq!(c.forecast.as_ref().unwrap().mean, twin.forecast.as_ref().unwrap().mean);
        assert_eq!(c.mape, twin.mape);
    }
    assert_eq!(std::fs::read_dir(cache.path()).unwrap().count(), 12);

    let replay = || {
        let client = LlmClient::new(Box::new(Forbidden), "echo-model")
            .with_store(TranscriptStore::open(cache.path()).unwrap())
            .replay_only(true);
        let mut r = Registry::new();
        r.register("llm", LlmForecaster::new(Arc::new(client), PromptVariant::default(), bundled_descriptions()));
        run_backtest(&plan(&["llm"]), &data, &ManifestSet::bundled(), &r, None, &RunOptions::default()).unwrap()
    };
    let (a, b) = (replay(), replay());
    assert_eq!(a.report.failed_cells(), 0);
    assert_eq!(a.report.cells_csv().unwrap(), b.report.cells_csv().unwrap());
    let llm_live: Vec<_> = out.report.cells.iter().filter(|c| c.key.model == "llm").map(|c| c.forecast.clone()).collect();
    assert_eq!(a.report.cells.iter().map(|c| c.forecast.clone()).collect::<Vec<_>>(), llm_live);
}

#[test]
fn replay_miss_is_a_provider_error() {
    let dir = tempfile::tempdir().unwrap();
    let client = LlmClient::new(Box::new(Forbidden), "m")
        .with_store(TranscriptStore::open(dir.path()).unwrap())
        .replay_only(true);
    assert!(matches!(client.complete("hello"), Err(Error::Provider { .. })));
}

#[test]
fn malformed_reply_keeps_transcript() {
    let data = synthetic();
    let dir = tempfile::tempdir().unwrap();
    let client = LlmClient::new(Box::new(Canned("I cannot forecast prices.".into())), "m")
        .with_store(TranscriptStore::open(dir.path().join("llm")).unwrap());
    let f = LlmForecaster::new(Arc::new(client), PromptVariant::default(), bundled_descriptions());
    let target = SeriesId::target("target_meat").unwrap();
    let task = CellTask {
        dataset: &data,
        target: &target,
        grouping: "none",
        regressors: &[],
        window: WindowSpec::new(Month::new(2019, 12).unwrap(), 75, 18).unwrap(),
        quantile_levels: &[],
    };
    match f.forecast(&task) {
        Err(Error::Provider { transcript: Some(path), message }) => {
            assert!(message.contains("forecast"));
            let text = std::fs::read_to_string(path).unwrap();
            assert!(text.contains("I cannot forecast prices.") && text.contains("parse_error"));
        }
        other => panic!("{other:?}"),
    }

    let mut registry = Registry::new();
    registry.register("llm", f);
    let store = CellStore::open(dir.path().join("cells")).unwrap();
    let out = run_backtest(&plan(&["llm"]), &data, &ManifestSet::bundled(), &registry, Some(&store), &RunOptions::default()).unwrap();
    assert_eq!(out.report.failed_cells(), 12);
    assert!(out.report.cells[0].error.as_deref().unwrap().contains("transcript"));
}

#[test]
fn variants_feed_their_own_columns() {
    let data = synthetic();
    let client = Arc::new(LlmClient::new(Box::new(SeasonalEcho { calls: AtomicUsize::new(0) }), "m"));
    let mut future = LlmForecaster::new(
        client.clone(),
        PromptVariant { include_future_forecasts: true, include_cfpr: true, ..PromptVariant::default() },
        bundled_descriptions(),
    );
    future.future_sources.push(("seasonal_naive".into(), Arc::new(StatForecaster { spec: ForecasterSpec::new(Family::SeasonalNaive) })));
    future.reports.insert(2018, "report 2018".into());
    future.reports.insert(2021, "report 2021".into());
    assert_eq!(future.report_for(Month::new(2017, 12).unwrap()).unwrap(), "report 2018");
    assert_eq!(future.report_for(Month::new(2020, 12).unwrap()).unwrap(), "report 2021");
    assert_eq!(future.report_for(Month::new(2020, 11).unwrap()).unwrap(), "report 2018");
    assert!(future.report_for(Month::new(2016, 12).unwrap()).is_none());

    let mut exo = LlmForecaster::new(client, PromptVariant { include_exogenous: true, ..PromptVariant::default() }, bundled_descriptions());
    exo.exogenous = Some(ManifestSet::bundled().get(&GroupName::HumanSelected).unwrap());
    let mut registry = Registry::new();
    registry.register("llm_future", future);
    registry.register("llm_exo", exo);
    let out = run_backtest(&plan(&["llm_future", "llm_exo"]), &data, &ManifestSet::bundled(), &registry, None, &RunOptions::default()).unwrap();
    assert_eq!(out.report.failed_cells(), 0);
    let contexts: std::collections::BTreeSet<_> = out.report.cells.iter().map(|c| c.context.as_str()).collect();
    assert_eq!(contexts.into_iter().collect::<Vec<_>>(), vec!["future_cfpr", "human_selected"]);
}

#[test]
fn retries_then_gives_up() {
    struct Flaky(Mutex<u32>);
    impl Provider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn complete(&self, _: &str, _: &str) -> Result<String> {
            let mut n = self.0.lock().unwrap();
            *n += 1;
            if *n < 3 {
                Err(Error::Provider { message: "503".into(), transcript: None })
            } else {
                Ok("<forecast>\n</forecast>".into())
            }
        }
    }
    assert!(LlmClient::new(Box::new(Flaky(Mutex::new(0))), "m").with_retries(2).complete("p").is_ok());
    assert!(matches!(
        LlmClient::new(Box::new(Flaky(Mutex::new(0))), "m").with_retries(1).complete("p"),
        Err(Error::Provider { .. })
    ));
}

#[test]
fn http_endpoint_speaks_chat_completions() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (mut stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut len = 0;
        let mut auth = String::new();
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let lower = line.to_ascii_lowercase();
            if let Some(v) = lower.strip_prefix("content-length:") {
                len = v.trim().parse().unwrap();
            }
            if lower.starts_with("authorization:") {
                auth = line.trim().to_string();
            }
            if line == "\r\n" {
                break;
            }
        }
        let mut body = vec![0; len];
        reader.read_exact(&mut body).unwrap();
        let reply = r#"{"choices":[{"message":{"role":"assistant","content":"<forecast>\n2021-01-01, 5.5\n</forecast>"}}]}"#;
        write!(stream, "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}", reply.len()).unwrap();
        (String::from_utf8(body).unwrap(), auth)
    });
    std::env::set_var("FOODCAST_TEST_TOKEN", "sekrit");
    let config = LlmProviderConfig {
        provider: ProviderKind::HttpEndpoint,
        model: "test-model".into(),
        base_url: format!("http://{addr}/v1"),
        token_env: "FOODCAST_TEST_TOKEN".into(),
        max_retries: 0,
        ..LlmProviderConfig::default()
    };
    let endpoint = HttpEndpoint::new(&config).unwrap();
    let text = endpoint.complete("test-model", "predict please").unwrap();
    let parsed = parse_forecast(&text, &[Month::new(2021, 1).unwrap()]).unwrap();
    assert_eq!(parsed.values(), vec![5.5]);
    let (body, auth) = server.join().unwrap();
    let body: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(body["temperature"], 0);
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["messages"][0]["content"], "predict please");
    assert_eq!(auth, "authorization: Bearer sekrit");
}
