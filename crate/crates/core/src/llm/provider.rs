use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A chat-completion backend. Calls are always made at temperature 0.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, model: &str, prompt: &str) -> Result<String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Answers only from stored transcripts.
    RecordedFixture,
    /// OpenAI-compatible `/chat/completions` endpoint.
    HttpEndpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmProviderConfig {
    pub provider: ProviderKind,
    pub model: String,
    pub base_url: String,
    /// Environment variable holding the bearer token.
    pub token_env: String,
    pub max_retries: u32,
    /// Minimum spacing between live calls.
    pub min_interval_ms: u64,
    pub timeout_secs: u64,
}

impl Default for LlmProviderConfig {
    fn default() -> Self {
        LlmProviderConfig {
            provider: ProviderKind::RecordedFixture,
            model: "gpt-4o".into(),
            base_url: "https://api.openai.com/v1".into(),
            token_env: "LLM_API_KEY".into(),
            max_retries: 3,
            min_interval_ms: 0,
            timeout_secs: 120,
        }
    }
}

/// Provider that refuses every live call.
#[derive(Debug, Clone, Default)]
pub struct RecordedFixture;

impl Provider for RecordedFixture {
    fn name(&self) -> &str {
        "recorded_fixture"
    }

    fn complete(&self, _model: &str, _prompt: &str) -> Result<String> {
        Err(Error::Provider {
            message: "no recorded transcript for this prompt".into(),
            transcript: None,
        })
    }
}

pub struct HttpEndpoint {
    url: String,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpEndpoint {
    pub fn new(config: &LlmProviderConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| Error::Config(format!("http client: {e}")))?;
        Ok(HttpEndpoint {
            url: format!("{}/chat/completions", config.base_url.trim_end_matches('/')),
            token: std::env::var(&config.token_env).ok(),
            client,
        })
    }
}

impl Provider for HttpEndpoint {
    fn name(&self) -> &str {
        "http_endpoint"
    }

    fn complete(&self, model: &str, prompt: &str) -> Result<String> {
        let body = serde_json::json!({
            "model": model,
            "temperature": 0,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.client.post(&self.url).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let fail = |message: String| Error::Provider {
            message,
            transcript: None,
        };
        let resp = req.send().map_err(|e| fail(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| fail(e.to_string()))?;
        if !status.is_success() {
            return Err(fail(format!("HTTP {status}: {}", text.chars().take(300).collect::<String>())));
        }
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| fail(format!("bad JSON reply: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| fail("reply has no message content".into()))
    }
}

pub fn build_provider(config: &LlmProviderConfig) -> Result<Box<dyn Provider>> {
    Ok(match config.provider {
        ProviderKind::RecordedFixture => Box::new(RecordedFixture),
        ProviderKind::HttpEndpoint => Box::new(HttpEndpoint::new(config)?),
    })
}

/// Audit record of one prompt and its reply, stored as `{prompt_hash}.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub prompt_hash: String,
    pub provider: String,
    pub model: String,
    pub temperature: f64,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

/// Content hash of a request: model name and prompt text.
pub fn prompt_hash(model: &str, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

/// Per-hash transcript files; concurrent writers never share a file.
#[derive(Debug, Clone)]
pub struct TranscriptStore {
    dir: PathBuf,
}

impl TranscriptStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(TranscriptStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.dir.join(format!("{hash}.json"))
    }

    pub fn load(&self, hash: &str) -> Result<Option<Transcript>> {
        let path = self.path_for(hash);
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, t: &Transcript) -> Result<PathBuf> {
        let path = self.path_for(&t.prompt_hash);
        let tmp = self.dir.join(format!(".{}.{:?}.tmp", t.prompt_hash, std::thread::current().id()));
        let mut bytes = serde_json::to_vec_pretty(t)?;
        bytes.push(b'\n');
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub text: String,
    pub transcript: Option<PathBuf>,
    pub cached: bool,
}

/// Cached, rate-limited, retrying front end to a provider.
pub struct LlmClient {
    provider: Box<dyn Provider>,
    model: String,
    store: Option<TranscriptStore>,
    replay_only: bool,
    max_retries: u32,
    min_interval: Duration,
    last_call: Mutex<Option<Instant>>,
}

impl LlmClient {
    pub fn new(provider: Box<dyn Provider>, model: impl Into<String>) -> Self {
        LlmClient {
            provider,
            model: model.into(),
            store: None,
            replay_only: false,
            max_retries: 0,
            min_interval: Duration::ZERO,
            last_call: Mutex::new(None),
        }
    }

    pub fn from_config(config: &LlmProviderConfig) -> Result<Self> {
        let mut c = LlmClient::new(build_provider(config)?, config.model.clone());
        c.max_retries = config.max_retries;
        c.min_interval = Duration::from_millis(config.min_interval_ms);
        c.replay_only = config.provider == ProviderKind::RecordedFixture;
        Ok(c)
    }

    pub fn with_store(mut self, store: TranscriptStore) -> Self {
        self.store = Some(store);
        self
    }

    /// Serve only from stored transcripts; the provider is never called.
    pub fn replay_only(mut self, on: bool) -> Self {
        self.replay_only = on;
        self
    }

    pub fn with_retries(mut self, n: u32) -> Self {
        self.max_retries = n;
        self
    }

    pub fn with_min_interval(mut self, d: Duration) -> Self {
        self.min_interval = d;
        self
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn store(&self) -> Option<&TranscriptStore> {
        self.store.as_ref()
    }

    pub fn complete(&self, prompt: &str) -> Result<Completion> {
        let hash = prompt_hash(&self.model, prompt);
        if let Some(store) = &self.store {
            if let Some(t) = store.load(&hash)? {
                return Ok(Completion {
                    text: t.response,
                    transcript: Some(store.path_for(&hash)),
                    cached: true,
                });
            }
        }
        if self.replay_only {
            return Err(Error::Provider {
                message: format!("prompt {hash} is not in the transcript cache (replay only)"),
                transcript: None,
            });
        }
        let mut attempt = 0;
        let text = loop {
            self.pace();
            match self.provider.complete(&self.model, prompt) {
                Ok(text) => break text,
                Err(e) if attempt < self.max_retries => {
                    attempt += 1;
                    log::warn!("{} call failed (attempt {attempt}): {e}", self.provider.name());
                    std::thread::sleep(Duration::from_millis(200 * (1 << attempt.min(6))));
                }
                Err(e) => {
                    return Err(Error::Provider {
                        message: format!("{} after {} attempts", e, attempt + 1),
                        transcript: None,
                    })
                }
            }
        };
        let transcript = match &self.store {
            Some(store) => Some(store.save(&Transcript {
                prompt_hash: hash,
                provider: self.provider.name().to_string(),
                model: self.model.clone(),
                temperature: 0.0,
                prompt: prompt.to_string(),
                response: text.clone(),
                parse_error: None,
            })?),
            None => None,
        };
        Ok(Completion {
            text,
            transcript,
            cached: false,
        })
    }

    /// Notes a parse failure on the stored transcript.
    pub fn mark_unparseable(&self, prompt: &str, reason: &str) -> Result<Option<PathBuf>> {
        let Some(store) = &self.store else { return Ok(None) };
        let hash = prompt_hash(&self.model, prompt);
        match store.load(&hash)? {
            Some(mut t) => {
                t.parse_error = Some(reason.to_string());
                store.save(&t).map(Some)
            }
            None => Ok(None),
        }
    }

    fn pace(&self) {
        if self.min_interval.is_zero() {
            return;
        }
        let mut last = self.last_call.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let wait = self.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }
}
