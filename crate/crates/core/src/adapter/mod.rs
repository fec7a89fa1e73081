//! Line-delimited JSON protocol for out-of-process forecasters.
//!
//! Every frame is one UTF-8 line `{"v":1,"seq":N,"kind":...}`. The harness
//! opens with a handshake, then issues one `fit_predict` at a time; replies
//! echo the request's `seq`.

mod client;
mod fake;
mod forecaster;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Forecast;
use crate::series::Month;

pub use client::{call_adapter, AdapterClient, AdapterPool, ProcessTransport, Transport};
pub use fake::{serve, FakeAdapter, FakeBehavior, FakeTransport};
pub use forecaster::AdapterForecaster;

pub const PROTOCOL_VERSION: u32 = 1;

/// Model names a full sidecar is expected to advertise.
pub const KNOWN_MODELS: [&str; 6] = ["chronos", "deepar", "dlinear", "patchtst", "simple_feedforward", "tft"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// One model per target, fitted on its own history.
    Local,
    /// One model across the target, its regressors and sibling targets.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPayload {
    pub id: String,
    pub start: Month,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub model: String,
    pub objective: Objective,
    pub group: String,
    pub target: SeriesPayload,
    #[serde(default)]
    pub regressors: Vec<SeriesPayload>,
    pub context_len: usize,
    pub horizon: usize,
    #[serde(default)]
    pub quantile_levels: Vec<f64>,
    pub seed: u64,
    /// Passed through to the sidecar untouched.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<String, serde_json::Value>,
}

impl AdapterRequest {
    pub fn origin(&self) -> Month {
        self.target.start.add_months(self.context_len as i64 - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.context_len == 0 {
            return Err(Error::Input("horizon and context_len must be at least 1".into()));
        }
        if self.objective == Objective::Local && self.group == "none" && !self.regressors.is_empty() {
            return Err(Error::Input("a local request without a group carries no regressors".into()));
        }
        for s in std::iter::once(&self.target).chain(&self.regressors) {
            if s.start != self.target.start || s.values.len() != self.context_len {
                return Err(Error::Input(format!(
                    "`{}` does not cover the {}-month context from {}",
                    s.id, self.context_len, self.target.start
                )));
            }
            if s.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Input(format!("`{}` has non-finite values", s.id)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AdapterResponse {
    Ok {
        forecast: Forecast,
        #[serde(default)]
        model_meta: serde_json::Map<String, serde_json::Value>,
    },
    Error {
        error_code: String,
        message: String,
    },
}

impl AdapterResponse {
    pub fn error(code: impl Into<String>, message: impl Into<String>) -> Self {
        AdapterResponse::Error {
            error_code: code.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestBody {
    Handshake { version: String },
    FitPredict { request: AdapterRequest },
    Shutdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResponseBody {
    Handshake { version: String, models: Vec<String> },
    Result { response: AdapterResponse },
    Error { error_code: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame<T> {
    pub v: u32,
    pub seq: u64,
    #[serde(flatten)]
    pub body: T,
}

impl<T: Serialize> Frame<T> {
    pub fn new(seq: u64, body: T) -> Self {
        Frame {
            v: PROTOCOL_VERSION,
            seq,
            body,
        }
    }

    /// One line, without the trailing newline.
    pub fn encode(&self) -> String {
        serde_json::to_string(self).expect("frames serialize")
    }
}

impl<T: for<'de> Deserialize<'de>> Frame<T> {
    pub fn decode(line: &str) -> Result<Self> {
        let line = line.trim_end_matches(['\n', '\r']);
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| protocol(line, e))?;
        match value.get("v").and_then(|v| v.as_u64()) {
            Some(v) if v == PROTOCOL_VERSION as u64 => {}
            Some(v) => return Err(protocol(line, format!("unsupported protocol version {v}"))),
            None => return Err(protocol(line, "missing version field")),
        }
        serde_json::from_value(value).map_err(|e| protocol(line, e))
    }
}

pub(crate) fn protocol(frame: &str, reason: impl ToString) -> Error {
    let mut frame = frame.to_string();
    if frame.len() > 200 {
        let mut cut = 200;
        while !frame.is_char_boundary(cut) {
            cut -= 1;
        }
        frame.truncate(cut);
        frame.push('…');
    }
    Error::Protocol {
        frame,
        reason: reason.to_string(),
    }
}
