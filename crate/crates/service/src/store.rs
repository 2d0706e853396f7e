//! On-disk session records.
//!
//! Each session owns `sessions/<id>/` under the data directory, holding
//! `meta.json` (mode, corpus and the full effective config) and
//! `events.jsonl`, one line per accepted mutation. Lines are flushed to disk
//! before the request that produced them is acknowledged, so a session can be
//! rebuilt from the directory alone.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use persum_core::adaptive::Event;
use persum_core::config::EngineConfig;
use persum_core::prefs::Winner;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Adaptive,
    Sumrecom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub schema_version: u32,
    pub session_id: Uuid,
    pub mode: Mode,
    pub corpus_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub config: EngineConfig,
}

/// One answer in a preference session's log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceEvent {
    pub round: usize,
    pub winner: Winner,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(data_dir: &Path) -> Self {
        Self {
            root: data_dir.join("sessions"),
        }
    }

    fn dir(&self, id: Uuid) -> PathBuf {
        self.root.join(id.to_string())
    }

    pub fn exists(&self, id: Uuid) -> bool {
        self.dir(id).join("meta.json").is_file()
    }

    pub fn create(&self, meta: &SessionMeta) -> std::io::Result<()> {
        let dir = self.dir(meta.session_id);
        fs::create_dir_all(&dir)?;
        File::create(dir.join("events.jsonl"))?.sync_all()?;
        // Written last: a directory without meta.json is an unfinished create.
        let tmp = dir.join("meta.json.tmp");
        let mut f = File::create(&tmp)?;
        f.write_all(serde_json::to_string_pretty(meta)?.as_bytes())?;
        f.sync_all()?;
        fs::rename(tmp, dir.join("meta.json"))
    }

    pub fn meta(&self, id: Uuid) -> std::io::Result<SessionMeta> {
        let text = fs::read_to_string(self.dir(id).join("meta.json"))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Appends the records as JSON lines and syncs the file.
    pub fn append<T: Serialize>(&self, id: Uuid, records: &[T]) -> std::io::Result<()> {
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r)?);
            buf.push('\n');
        }
        let mut f = OpenOptions::new().append(true).open(self.dir(id).join("events.jsonl"))?;
        f.write_all(buf.as_bytes())?;
        f.sync_data()
    }

    pub fn read<T: for<'de> Deserialize<'de>>(&self, id: Uuid) -> std::io::Result<Vec<T>> {
        let f = File::open(self.dir(id).join("events.jsonl"))?;
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                out.push(serde_json::from_str(&line)?);
            }
        }
        Ok(out)
    }

    pub fn adaptive_events(&self, id: Uuid) -> std::io::Result<Vec<Event>> {
        self.read(id)
    }

    pub fn preferences(&self, id: Uuid) -> std::io::Result<Vec<PreferenceEvent>> {
        self.read(id)
    }
}
