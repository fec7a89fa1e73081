use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::json;

use crate::config::Config;

/// Output directory of one command. Everything but `metadata.json` is a
/// pure function of the inputs.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(path: PathBuf, config: &Config, command: &str) -> Result<Self> {
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let run = RunDir { path };
        run.write("config.toml", &toml::to_string(config).context("serializing config")?)?;
        let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = json!({
            "command": command,
            "argv": std::env::args().collect::<Vec<_>>(),
            "version": env!("CARGO_PKG_VERSION"),
            "started_unix": started,
        });
        run.write("metadata.json", &format!("{}\n", serde_json::to_string_pretty(&meta)?))?;
        Ok(run)
    }

    pub fn open(path: &Path) -> Result<Self> {
        anyhow::ensure!(path.is_dir(), foodcast_core::Error::Config(format!("no run directory at {}", path.display())));
        Ok(RunDir { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<PathBuf> {
        let p = self.file(name);
        if let Some(parent) = p.parent() {
            std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }

    /// The config this run was made with.
    pub fn config(&self) -> Result<Config> {
        let p = self.file("config.toml");
        let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
        Ok(toml::from_str(&text).map_err(|e| foodcast_core::Error::Config(format!("{}: {e}", p.display())))?)
    }
}
