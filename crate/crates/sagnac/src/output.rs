//! Run directories and file emission.
//!
//! Each invocation writes into `<out>/<run id>/`, where the run id is
//! `<command>-<seed>-<fnv64 of the normalized config>`. Files are written to
//! a temporary name and renamed, so concurrent identical runs never leave a
//! torn file. Wall-clock timestamps go only into `meta.json`.

use std::fs;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fnv::FnvHasher;
use serde::Serialize;

use crate::config::ConfigFile;
use crate::error::{Error, Result};

pub fn config_hash(config: &ConfigFile) -> u64 {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    let mut h = FnvHasher::default();
    h.write(&bytes);
    h.finish()
}

pub fn run_id(command: &str, seed: u64, config: &ConfigFile) -> String {
    format!("{command}-{seed}-{:016x}", config_hash(config))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug)]
pub struct RunDir {
    pub id: String,
    pub dir: PathBuf,
    pub format: Format,
    files: Vec<String>,
    started: f64,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

impl RunDir {
    pub fn create(out: &Path, id: String, format: Format) -> Result<Self> {
        let dir = out.join(&id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RunDir {
            id,
            dir,
            format,
            files: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let target = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.{}.tmp", std::process::id()));
        fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &target).map_err(|e| Error::io(&target, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes the sidecar; call last.
    pub fn finish(mut self, command: &str, seed: u64, config_path: Option<&Path>) -> Result<PathBuf> {
        #[derive(Serialize)]
        struct Meta<'a> {
            run_id: &'a str,
            command: &'a str,
            seed: u64,
            format: Format,
            config_path: Option<String>,
            version: &'a str,
            files: &'a [String],
            started_unix_s: f64,
            finished_unix_s: f64,
        }
        let files = std::mem::take(&mut self.files);
        let id = self.id.clone();
        let meta = Meta {
            run_id: &id,
            command,
            seed,
            format: self.format,
            config_path: config_path.map(|p| p.display().to_string()),
            version: env!("CARGO_PKG_VERSION"),
            files: &files,
            started_unix_s: self.started,
            finished_unix_s: unix_now(),
        };
        self.write_json("meta.json", &meta)?;
        Ok(self.dir)
    }
}

/// Flattens a serializable value into `key=value` lines; nested objects use
/// dotted keys and arrays are written inline as JSON.
pub fn key_value_block<T: Serialize>(value: &T) -> String {
    fn walk(prefix: &str, v: &serde_json::Value, out: &mut String) {
        match v {
            serde_json::Value::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                    walk(&key, v, out);
                }
            }
            serde_json::Value::String(s) => out.push_str(&format!("{prefix}={s}\n")),
            other => out.push_str(&format!("{prefix}={other}\n")),
        }
    }
    let mut out = String::new();
    walk("", &serde_json::to_value(value).expect("report serializes"), &mut out);
    out
}
