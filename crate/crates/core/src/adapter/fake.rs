use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::models::{fit_with_quantiles, Family, ForecasterSpec};

use super::{protocol, AdapterRequest, AdapterResponse, Frame, RequestBody, ResponseBody, Transport, KNOWN_MODELS};

/// What the fake does for one advertised model name.
#[derive(Debug, Clone, PartialEq)]
pub enum FakeBehavior {
    /// Runs the in-process statistical model on the target payload.
    Echo(Family),
    /// Echo with seeded multiplicative noise of the given scale.
    Noisy(Family, f64),
    /// Replies with a `fit_failed` error.
    Fail,
    /// Never replies.
    Hang,
    /// Replies with a line that is not JSON.
    Garbage,
    /// Replies with the first half of a valid frame.
    Truncated,
    /// Exits without replying.
    Crash,
}

impl FromStr for FakeBehavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let bad = || Error::Config(format!("unknown fake behavior `{s}`"));
        Ok(match words.as_slice() {
            ["echo", family] => FakeBehavior::Echo(family.parse()?),
            ["noisy", family, scale] => FakeBehavior::Noisy(family.parse()?, scale.parse().map_err(|_| bad())?),
            ["fail"] => FakeBehavior::Fail,
            ["hang"] => FakeBehavior::Hang,
            ["garbage"] => FakeBehavior::Garbage,
            ["truncated"] => FakeBehavior::Truncated,
            ["crash"] => FakeBehavior::Crash,
            _ => return Err(bad()),
        })
    }
}

enum Reply {
    Line(String),
    Silent,
    Exit,
}

/// In-process stand-in for a sidecar. It speaks the wire protocol exactly,
/// so clients exercise the same framing code as with a real process.
#[derive(Debug, Clone, PartialEq)]
pub struct FakeAdapter {
    pub models: BTreeMap<String, FakeBehavior>,
}

impl Default for FakeAdapter {
    fn default() -> Self {
        let behaviors = [
            ("chronos", FakeBehavior::Echo(Family::Naive)),
            ("deepar", FakeBehavior::Noisy(Family::SeasonalNaive, 0.01)),
            ("dlinear", FakeBehavior::Echo(Family::Naive)),
            ("patchtst", FakeBehavior::Echo(Family::AutoEts)),
            ("simple_feedforward", FakeBehavior::Echo(Family::SeasonalNaive)),
            ("tft", FakeBehavior::Echo(Family::AutoEts)),
        ];
        debug_assert!(behaviors.iter().map(|(n, _)| *n).eq(KNOWN_MODELS));
        FakeAdapter {
            models: behaviors.into_iter().map(|(n, b)| (n.to_string(), b)).collect(),
        }
    }
}

#[derive(Deserialize)]
struct FakeConfig {
    models: BTreeMap<String, String>,
}

impl FakeAdapter {
    pub fn new(models: impl IntoIterator<Item = (impl Into<String>, FakeBehavior)>) -> Self {
        FakeAdapter {
            models: models.into_iter().map(|(n, b)| (n.into(), b)).collect(),
        }
    }

    /// `[models]` table of `name = "behavior"` entries.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: FakeConfig = toml::from_str(text).map_err(|e| Error::Config(format!("fake adapter config: {e}")))?;
        let models = cfg
            .models
            .into_iter()
            .map(|(n, b)| Ok((n, b.parse()?)))
            .collect::<Result<_>>()?;
        Ok(FakeAdapter { models })
    }

    fn handle(&self, line: &str) -> Reply {
        let frame = match Frame::<RequestBody>::decode(line) {
            Ok(f) => f,
            Err(e) => {
                let seq = serde_json::from_str::<serde_json::Value>(line)
                    .ok()
                    .and_then(|v| v.get("seq")?.as_u64())
                    .unwrap_or(0);
                return Reply::Line(
                    Frame::new(
                        seq,
                        ResponseBody::Error {
                            error_code: "bad_frame".into(),
                            message: e.to_string(),
                        },
                    )
                    .encode(),
                );
            }
        };
        let seq = frame.seq;
        let body = match frame.body {
            RequestBody::Shutdown => return Reply::Exit,
            RequestBody::Handshake { .. } => ResponseBody::Handshake {
                version: super::PROTOCOL_VERSION.to_string(),
                models: self.models.keys().cloned().collect(),
            },
            RequestBody::FitPredict { request } => {
                let response = match self.models.get(&request.model) {
                    None => AdapterResponse::error("unknown_model", format!("no model `{}`", request.model)),
                    Some(FakeBehavior::Hang) => return Reply::Silent,
                    Some(FakeBehavior::Crash) => return Reply::Exit,
                    Some(FakeBehavior::Garbage) => return Reply::Line("<<garbage>>".into()),
                    Some(FakeBehavior::Truncated) => {
                        let full = Frame::new(seq, ResponseBody::Result {
                            response: AdapterResponse::error("x", "y"),
                        })
                        .encode();
                        return Reply::Line(full[..full.len() / 2].to_string());
                    }
                    Some(FakeBehavior::Fail) => AdapterResponse::error("fit_failed", "configured to fail"),
                    Some(FakeBehavior::Echo(family)) => echo(&request, *family, 0.0),
                    Some(FakeBehavior::Noisy(family, scale)) => echo(&request, *family, *scale),
                };
                ResponseBody::Result { response }
            }
        };
        Reply::Line(Frame::new(seq, body).encode())
    }
}

fn echo(request: &AdapterRequest, family: Family, scale: f64) -> AdapterResponse {
    let fitted = match fit_with_quantiles(
        &ForecasterSpec::new(family),
        &request.target.values,
        request.origin(),
        request.horizon,
        &request.quantile_levels,
    ) {
        Ok(f) => f,
        Err(e) => return AdapterResponse::error("fit_failed", e.to_string()),
    };
    let mut forecast = fitted.forecast;
    if scale > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(request.seed);
        for t in 0..forecast.mean.len() {
            let shift = forecast.mean[t] * scale * rng.sample::<f64, _>(StandardNormal);
            forecast.mean[t] += shift;
            for band in &mut forecast.quantiles {
                band.values[t] += shift;
            }
        }
    }
    let mut meta = serde_json::Map::new();
    meta.insert("fake".into(), true.into());
    meta.insert("fitted_model".into(), fitted.model.into());
    meta.insert("deterministic".into(), true.into());
    meta.insert("ignored_regressors".into(), request.regressors.len().into());
    AdapterResponse::Ok {
        forecast,
        model_meta: meta,
    }
}

/// [`Transport`] that hands each line straight to a [`FakeAdapter`].
/// A hanging model times out immediately instead of blocking.
pub struct FakeTransport {
    adapter: FakeAdapter,
    outbox: VecDeque<String>,
    exited: bool,
}

impl FakeTransport {
    pub fn new(adapter: FakeAdapter) -> Self {
        FakeTransport {
            adapter,
            outbox: VecDeque::new(),
            exited: false,
        }
    }
}

impl Transport for FakeTransport {
    fn send(&mut self, line: &str) -> Result<()> {
        if self.exited {
            return Err(protocol(line, "adapter exited"));
        }
        match self.adapter.handle(line) {
            Reply::Line(l) => self.outbox.push_back(l),
            Reply::Silent => {}
            Reply::Exit => self.exited = true,
        }
        Ok(())
    }

    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.outbox.pop_front() {
            Some(l) => Ok(l),
            None if self.exited => Err(protocol("", "adapter exited")),
            None => Err(Error::Timeout(timeout)),
        }
    }
}

/// Serves the protocol over a line stream until shutdown, crash or EOF.
pub fn serve(adapter: &FakeAdapter, input: impl BufRead, mut output: impl Write) -> Result<()> {
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<stdin>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        match adapter.handle(&line) {
            Reply::Line(l) => {
                writeln!(output, "{l}")
                    .and_then(|_| output.flush())
                    .map_err(|e| Error::io("<stdout>", e))?;
            }
            Reply::Silent => std::thread::sleep(Duration::from_secs(3600)),
            Reply::Exit => return Ok(()),
        }
    }
    Ok(())
}
