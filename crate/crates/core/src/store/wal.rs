//! Append-only commit log. One JSON line per committed transaction.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::record::{Id, Kind, Record};
use crate::time::Timestamp;
use super::StoreError;

pub(crate) const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub(crate) enum WalOp {
    Put { record: Arc<Record> },
    Delete { kind: Kind, id: Id },
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WalEntry {
    pub schema: u32,
    pub tx: u64,
    pub at: Timestamp,
    pub next_id: u64,
    pub ops: Vec<WalOp>,
}

#[derive(Debug)]
pub(crate) struct Wal {
    file: File,
    path: PathBuf,
    sync: bool,
    len: u64,
}

impl Wal {
    /// Opens (creating if needed) the log and returns every intact entry.
    /// A torn final line left by a crash mid-append is truncated away.
    pub fn open(path: &Path, sync: bool) -> Result<(Wal, Vec<WalEntry>), StoreError> {
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)
            .map_err(|e| StoreError::io(path, e))?;
        let mut entries = Vec::new();
        let mut good_len: u64 = 0;
        let mut reader = BufReader::new(&mut file);
        let mut line = String::new();
        let mut torn = false;
        loop {
            line.clear();
            let n = reader
                .read_line(&mut line)
                .map_err(|e| StoreError::io(path, e))?;
            if n == 0 {
                break;
            }
            if torn {
                return Err(StoreError::Corrupt(format!(
                    "{}: unreadable entry before offset {}",
                    path.display(),
                    good_len
                )));
            }
            let complete = line.ends_with('\n');
            match serde_json::from_str::<WalEntry>(line.trim_end()) {
                Ok(entry) if complete => {
                    if entry.schema != SCHEMA_VERSION {
                        return Err(StoreError::Corrupt(format!(
                            "unsupported log schema {}",
                            entry.schema
                        )));
                    }
                    entries.push(entry);
                    good_len += n as u64;
                }
                _ => torn = true,
            }
        }
        drop(reader);
        if torn {
            tracing::warn!(path = %path.display(), offset = good_len, "truncating torn log tail");
            file.set_len(good_len).map_err(|e| StoreError::io(path, e))?;
            file.seek(SeekFrom::End(0))
                .map_err(|e| StoreError::io(path, e))?;
        }
        Ok((
            Wal {
                file,
                path: path.to_owned(),
                sync,
                len: good_len,
            },
            entries,
        ))
    }

    pub fn append(&mut self, entry: &WalEntry) -> Result<(), StoreError> {
        let mut line = serde_json::to_vec(entry)
            .map_err(|e| StoreError::Corrupt(format!("unserializable entry: {e}")))?;
        line.push(b'\n');
        let res: io::Result<()> = self.file.write_all(&line).and_then(|()| {
            if self.sync {
                self.file.sync_data()
            } else {
                Ok(())
            }
        });
        match res {
            Ok(()) => {
                self.len += line.len() as u64;
                Ok(())
            }
            Err(e) => {
                // Drop any partial line so later appends stay parseable.
                let _ = self.file.set_len(self.len);
                Err(StoreError::io(&self.path, e))
            }
        }
    }
}
