//! Content-addressed blob storage keyed by SHA-256.
//!
//! On disk a blob lives at `<dir>/<first two hex chars>/<remaining hex>`.
//! Writes go to a temporary file and are renamed into place, so a blob path
//! either holds the full content or does not exist.

use std::collections::HashMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::Mutex;
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug)]
enum Backend {
    Fs(PathBuf),
    Memory(Mutex<HashMap<String, Arc<[u8]>>>),
}

#[derive(Debug)]
pub struct BlobStore {
    backend: Backend,
    digest_locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

const REF_PREFIX: &str = "sha256:";

impl BlobStore {
    pub fn on_disk(dir: &Path) -> io::Result<BlobStore> {
        std::fs::create_dir_all(dir)?;
        Ok(BlobStore {
            backend: Backend::Fs(dir.to_owned()),
            digest_locks: Mutex::new(HashMap::new()),
        })
    }

    pub fn in_memory() -> BlobStore {
        BlobStore {
            backend: Backend::Memory(Mutex::new(HashMap::new())),
            digest_locks: Mutex::new(HashMap::new()),
        }
    }

    fn path_for(dir: &Path, digest: &str) -> PathBuf {
        dir.join(&digest[..2]).join(&digest[2..])
    }

    fn digest_of(blob_ref: &str) -> Option<&str> {
        let d = blob_ref.strip_prefix(REF_PREFIX)?;
        (d.len() == 64 && d.bytes().all(|b| b.is_ascii_hexdigit())).then_some(d)
    }

    /// Stores `bytes` (a no-op if already present) and returns `(blob_ref, sha256)`.
    pub fn put(&self, bytes: &[u8]) -> io::Result<(String, String)> {
        let digest = sha256_hex(bytes);
        let lock = self
            .digest_locks
            .lock()
            .entry(digest.clone())
            .or_default()
            .clone();
        let _guard = lock.lock();
        match &self.backend {
            Backend::Fs(dir) => {
                let path = Self::path_for(dir, &digest);
                if !path.exists() {
                    let parent = path.parent().expect("blob path has a parent");
                    std::fs::create_dir_all(parent)?;
                    let tmp = parent.join(format!(".{}.tmp", &digest[2..]));
                    let mut f = std::fs::File::create(&tmp)?;
                    f.write_all(bytes)?;
                    f.sync_all()?;
                    std::fs::rename(&tmp, &path)?;
                }
            }
            Backend::Memory(map) => {
                map.lock()
                    .entry(digest.clone())
                    .or_insert_with(|| Arc::from(bytes));
            }
        }
        Ok((format!("{REF_PREFIX}{digest}"), digest))
    }

    pub fn get(&self, blob_ref: &str) -> io::Result<Vec<u8>> {
        let digest = Self::digest_of(blob_ref)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "malformed blob ref"))?;
        match &self.backend {
            Backend::Fs(dir) => std::fs::read(Self::path_for(dir, digest)),
            Backend::Memory(map) => map
                .lock()
                .get(digest)
                .map(|b| b.to_vec())
                .ok_or_else(|| io::Error::new(io::ErrorKind::NotFound, "blob missing")),
        }
    }

    pub fn blob_count(&self) -> usize {
        match &self.backend {
            Backend::Fs(dir) => walk_count(dir),
            Backend::Memory(map) => map.lock().len(),
        }
    }
}

fn walk_count(dir: &Path) -> usize {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return 0;
    };
    entries
        .flatten()
        .map(|e| {
            let p = e.path();
            if p.is_dir() {
                walk_count(&p)
            } else if p
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| !n.starts_with('.'))
            {
                1
            } else {
                0
            }
        })
        .sum()
}
