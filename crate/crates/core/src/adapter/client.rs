use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::models::Forecast;

use super::{protocol, AdapterRequest, AdapterResponse, Frame, RequestBody, ResponseBody, PROTOCOL_VERSION};

/// A bidirectional line channel to one adapter.
pub trait Transport: Send {
    fn send(&mut self, line: &str) -> Result<()>;

    /// Next line from the adapter, without its newline.
    fn recv(&mut self, timeout: Duration) -> Result<String>;
}

/// Adapter running as a child process speaking over stdin/stdout.
pub struct ProcessTransport {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl ProcessTransport {
    /// Launches `command`, split with POSIX shell quoting rules.
    pub fn spawn(command: &str) -> Result<Self> {
        let argv = shlex::split(command)
            .filter(|a| !a.is_empty())
            .ok_or_else(|| Error::Config(format!("cannot parse adapter command `{command}`")))?;
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::io(&argv[0], e))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ProcessTransport { child, stdin, lines })
    }
}

impl Transport for ProcessTransport {
    fn send(&mut self, line: &str) -> Result<()> {
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| protocol(line, format!("adapter input closed: {e}")))
    }

    fn recv(&mut self, timeout: Duration) -> Result<String> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(protocol("", format!("reading adapter output: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                Err(protocol(
                    "",
                    match status {
                        Some(s) => format!("adapter exited ({s})"),
                        None => "adapter closed its output".into(),
                    },
                ))
            }
        }
    }
}

impl Drop for ProcessTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Protocol session over one transport. Not shareable across threads.
pub struct AdapterClient {
    transport: Box<dyn Transport>,
    seq: u64,
    version: String,
    models: Vec<String>,
    broken: bool,
}

impl AdapterClient {
    /// Performs the version handshake.
    pub fn connect(transport: impl Transport + 'static, timeout: Duration) -> Result<Self> {
        let mut client = AdapterClient {
            transport: Box::new(transport),
            seq: 0,
            version: String::new(),
            models: Vec::new(),
            broken: false,
        };
        let expected = PROTOCOL_VERSION.to_string();
        match client.exchange(
            RequestBody::Handshake {
                version: expected.clone(),
            },
            timeout,
        )? {
            ResponseBody::Handshake { version, models } if version == expected => {
                client.version = version;
                client.models = models;
                Ok(client)
            }
            ResponseBody::Handshake { version, .. } => Err(protocol(
                "",
                format!("adapter speaks version {version}, expected {expected}"),
            )),
            ResponseBody::Error { error_code, message } => Err(Error::Remote {
                code: error_code,
                message,
            }),
            other => Err(protocol(&format!("{other:?}"), "expected a handshake reply")),
        }
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    /// True once the session can no longer be trusted to stay in sync.
    pub fn is_broken(&self) -> bool {
        self.broken
    }

    fn exchange(&mut self, body: RequestBody, timeout: Duration) -> Result<ResponseBody> {
        if self.broken {
            return Err(protocol("", "session is out of sync"));
        }
        let result = self.exchange_inner(body, timeout);
        if let Err(Error::Timeout(_) | Error::Protocol { .. }) = &result {
            self.broken = true;
        }
        result
    }

    fn exchange_inner(&mut self, body: RequestBody, timeout: Duration) -> Result<ResponseBody> {
        self.seq += 1;
        let seq = self.seq;
        self.transport.send(&Frame::new(seq, body).encode())?;
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(Error::Timeout(timeout));
            }
            let line = self.transport.recv(left)?;
            let frame = Frame::<ResponseBody>::decode(&line)?;
            if frame.seq < seq {
                log::warn!("dropping stale adapter reply {}", frame.seq);
                continue;
            }
            if frame.seq > seq {
                return Err(protocol(&line, format!("reply to {} while waiting for {seq}", frame.seq)));
            }
            return Ok(frame.body);
        }
    }

    pub fn call(&mut self, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse> {
        request.validate()?;
        match self.exchange(
            RequestBody::FitPredict {
                request: request.clone(),
            },
            timeout,
        )? {
            ResponseBody::Result { response } => Ok(response),
            ResponseBody::Error { error_code, message } => Err(Error::Remote {
                code: error_code,
                message,
            }),
            other => {
                self.broken = true;
                Err(protocol(&format!("{other:?}"), "expected a result"))
            }
        }
    }

    /// Calls the adapter and checks the reply against the request: origin,
    /// horizon, requested quantile levels and band monotonicity.
    pub fn fit_predict(
        &mut self,
        request: &AdapterRequest,
        timeout: Duration,
    ) -> Result<(Forecast, serde_json::Map<String, serde_json::Value>)> {
        match self.call(request, timeout)? {
            AdapterResponse::Ok { forecast, model_meta } => {
                let frame = || format!("{forecast:?}");
                if forecast.origin != request.origin() || forecast.horizon() != request.horizon {
                    return Err(protocol(
                        &frame(),
                        format!(
                            "forecast covers {} steps from {}, expected {} from {}",
                            forecast.horizon(),
                            forecast.origin,
                            request.horizon,
                            request.origin()
                        ),
                    ));
                }
                for level in &request.quantile_levels {
                    if forecast.band(*level).is_none() {
                        return Err(protocol(&frame(), format!("missing quantile {level}")));
                    }
                }
                let checked = Forecast::new(forecast.origin, forecast.mean.clone())
                    .and_then(|f| f.with_quantiles(forecast.quantiles.clone()))
                    .map_err(|e| protocol(&frame(), e))?;
                Ok((checked, model_meta))
            }
            AdapterResponse::Error { error_code, message } => Err(Error::Remote {
                code: error_code,
                message,
            }),
        }
    }

    /// Asks the adapter to exit; errors are ignored.
    pub fn shutdown(mut self) {
        self.seq += 1;
        let _ = self.transport.send(&Frame::new(self.seq, RequestBody::Shutdown).encode());
    }
}

pub fn call_adapter(client: &mut AdapterClient, request: &AdapterRequest, timeout: Duration) -> Result<AdapterResponse> {
    client.call(request, timeout)
}

type Connector = dyn Fn() -> Result<AdapterClient> + Send + Sync;

/// Idle sessions handed out one per worker. Sessions that time out or lose
/// framing are dropped, which kills their process, and replaced on demand.
pub struct AdapterPool {
    connect: Box<Connector>,
    idle: Mutex<Vec<AdapterClient>>,
    timeout: Duration,
}

impl AdapterPool {
    pub fn new(connect: impl Fn() -> Result<AdapterClient> + Send + Sync + 'static, timeout: Duration) -> Self {
        AdapterPool {
            connect: Box::new(connect),
            idle: Mutex::new(Vec::new()),
            timeout,
        }
    }

    /// Pool of child processes launched from `command`.
    pub fn process(command: impl Into<String>, timeout: Duration) -> Self {
        let command = command.into();
        AdapterPool::new(
            move || AdapterClient::connect(ProcessTransport::spawn(&command)?, timeout),
            timeout,
        )
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn with_client<T>(&self, f: impl FnOnce(&mut AdapterClient) -> Result<T>) -> Result<T> {
        let pooled = self.idle.lock().unwrap_or_else(|e| e.into_inner()).pop();
        let mut client = match pooled {
            Some(c) => c,
            None => (self.connect)()?,
        };
        let out = f(&mut client);
        if !client.is_broken() {
            self.idle.lock().unwrap_or_else(|e| e.into_inner()).push(client);
        }
        out
    }

    /// Models advertised by a (possibly fresh) session.
    pub fn models(&self) -> Result<Vec<String>> {
        self.with_client(|c| Ok(c.models().to_vec()))
    }
}
