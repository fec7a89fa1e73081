use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

use super::{CellKey, CellRecord};

/// One JSON file per completed cell. Files are written atomically, so a
/// killed run leaves only whole records behind.
#[derive(Debug, Clone)]
pub struct CellStore {
    dir: PathBuf,
}

impl CellStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(CellStore { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &CellKey) -> PathBuf {
        let readable: String = format!("{}__{}__{}__{}", key.target, key.model, key.grouping, key.origin)
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '-' })
            .collect();
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(key).unwrap_or_default());
        let digest = hex::encode(h.finalize());
        self.dir.join(format!("{readable}-{}.json", &digest[..8]))
    }

    pub fn load(&self, key: &CellKey) -> Result<Option<CellRecord>> {
        let path = self.path_for(key);
        match std::fs::read(&path) {
            Ok(bytes) => Ok(Some(serde_json::from_slice(&bytes)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn save(&self, record: &CellRecord) -> Result<()> {
        let path = self.path_for(&record.key);
        let tmp = path.with_extension("json.tmp");
        let mut bytes = serde_json::to_vec_pretty(record)?;
        bytes.push(b'\n');
        std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Every stored record, in key order.
    pub fn load_all(&self) -> Result<Vec<CellRecord>> {
        let entries = std::fs::read_dir(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&self.dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("json") {
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                out.push(serde_json::from_slice::<CellRecord>(&bytes)?);
            }
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }
}
