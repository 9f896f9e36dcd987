use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde_json::{json, Value};

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or(""),
        std::process::id()
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Output directory of one command invocation plus its `record.json`.
pub struct Run {
    pub dir: PathBuf,
    started: Instant,
    record: Value,
}

impl Run {
    /// Creates `<runs_dir>/<id>`. Without an explicit id one is derived from
    /// the command name and the clock; an existing directory is never reused.
    pub fn create(runs_dir: &Path, command: &str, id: Option<&str>) -> Result<Self> {
        fs::create_dir_all(runs_dir).with_context(|| format!("creating {}", runs_dir.display()))?;
        let explicit = id;
        let base = match id {
            Some(id) => id.to_string(),
            None => {
                let secs = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                format!("{command}-{secs}")
            }
        };
        for n in 0.. {
            let id = if n == 0 { base.clone() } else { format!("{base}-{n}") };
            let dir = runs_dir.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => {
                    log::info!("run directory {}", dir.display());
                    return Ok(Self {
                        record: json!({ "run_id": id, "command": command }),
                        dir,
                        started: Instant::now(),
                    });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists && explicit.is_none() => {}
                Err(e) => return Err(e).with_context(|| format!("creating run directory {}", dir.display())),
            }
        }
        unreachable!()
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.record[key] = value;
    }

    pub fn push(&mut self, key: &str, value: Value) {
        match self.record.get_mut(key).and_then(Value::as_array_mut) {
            Some(list) => list.push(value),
            None => self.record[key] = json!([value]),
        }
    }

    /// Writes `record.json` with the elapsed wall time.
    pub fn finish(mut self) -> Result<PathBuf> {
        self.record["wall_seconds"] = json!(self.started.elapsed().as_secs_f64());
        let path = self.path("record.json");
        write_atomic(&path, serde_json::to_string_pretty(&self.record)? + "\n")?;
        Ok(self.dir)
    }
}
