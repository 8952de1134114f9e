//! Embedded transactional store.
//!
//! Committed state is an immutable snapshot built from persistent maps, so
//! readers clone an `Arc` and never wait on writers. Write transactions run
//! one at a time against a private copy of the latest snapshot, which makes
//! every committed history serial. Unique keys are checked as writes happen;
//! references are checked when the transaction commits. A commit is durable
//! once its log line is on disk.

mod query;
mod record;
mod wal;

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde_json::Value;

pub use query::{Order, Query};
pub use record::{Entity, Id, Kind, Record, Reference, Stored, UniqueKey};

use crate::time::{Clock, Timestamp};
use record::DumpLine;
use wal::{Wal, WalEntry, WalOp, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{kind} {id} not found")]
    NotFound { kind: Kind, id: Id },
    #[error("unique key {key_name} already taken")]
    ConstraintViolation { key_name: String },
    #[error("{missing_ref} refers to a missing entity")]
    ReferentialViolation { missing_ref: String },
    #[error("{kind} has no field {field}")]
    UnknownField { kind: Kind, field: String },
    #[error("version conflict on {kind} {id}")]
    Conflict { kind: Kind, id: Id },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("data directory {0} is locked by another process")]
    Locked(PathBuf),
    #[error("corrupt store: {0}")]
    Corrupt(String),
}

impl StoreError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        StoreError::Io {
            path: path.to_owned(),
            source,
        }
    }
}

type Slot = (Kind, String, String);

#[doc(hidden)]
#[derive(Debug, Clone, Default)]
pub struct State {
    records: im::HashMap<Kind, im::OrdMap<Id, Arc<Record>>>,
    unique: im::HashMap<Slot, Id>,
    referrers: im::HashMap<(Kind, Id), im::OrdSet<(Kind, Id)>>,
    next_id: u64,
    tx: u64,
    committed_at: Option<Timestamp>,
}

impl State {
    fn record(&self, kind: Kind, id: &Id) -> Option<&Arc<Record>> {
        self.records.get(&kind).and_then(|m| m.get(id))
    }

    fn unindex(&mut self, old: &Record) {
        for key in &old.keys {
            self.unique
                .remove(&(old.kind, key.name.clone(), key.value.clone()));
        }
        for r in &old.refs {
            let target = (r.kind, r.id.clone());
            if let Some(set) = self.referrers.get_mut(&target) {
                set.remove(&(old.kind, old.id.clone()));
                if set.is_empty() {
                    self.referrers.remove(&target);
                }
            }
        }
    }

    fn apply_put(&mut self, record: Arc<Record>) {
        if let Some(old) = self.record(record.kind, &record.id).cloned() {
            self.unindex(&old);
        }
        for key in &record.keys {
            self.unique.insert(
                (record.kind, key.name.clone(), key.value.clone()),
                record.id.clone(),
            );
        }
        for r in &record.refs {
            self.referrers
                .entry((r.kind, r.id.clone()))
                .or_default()
                .insert((record.kind, record.id.clone()));
        }
        self.records
            .entry(record.kind)
            .or_default()
            .insert(record.id.clone(), record);
    }

    fn apply_delete(&mut self, kind: Kind, id: &Id) {
        if let Some(old) = self.record(kind, id).cloned() {
            self.unindex(&old);
            if let Some(m) = self.records.get_mut(&kind) {
                m.remove(id);
            }
        }
    }

    fn apply(&mut self, entry: &WalEntry) {
        for op in &entry.ops {
            match op {
                WalOp::Put { record } => self.apply_put(record.clone()),
                WalOp::Delete { kind, id } => self.apply_delete(*kind, id),
            }
        }
        self.next_id = entry.next_id;
        self.tx = entry.tx;
        self.committed_at = Some(entry.at);
    }

    fn query_records(&self, kind: Kind, q: &Query) -> Result<Vec<&Record>, StoreError> {
        q.validate(kind)?;
        let rows: Vec<&Record> = match self.records.get(&kind) {
            Some(m) => m.values().map(|r| r.as_ref()).filter(|r| q.matches(r)).collect(),
            None => Vec::new(),
        };
        Ok(q.arrange(rows))
    }
}

/// Read access shared by snapshots and open transactions.
pub trait Read {
    #[doc(hidden)]
    fn state(&self) -> &State;

    fn get<E: Entity>(&self, id: &Id) -> Result<Stored<E>, StoreError> {
        match self.state().record(E::KIND, id) {
            Some(r) => Stored::decode(r),
            None => Err(StoreError::NotFound {
                kind: E::KIND,
                id: id.clone(),
            }),
        }
    }

    fn get_record(&self, kind: Kind, id: &Id) -> Option<Arc<Record>> {
        self.state().record(kind, id).cloned()
    }

    fn query<E: Entity>(&self, q: &Query) -> Result<Vec<Stored<E>>, StoreError> {
        let state = self.state();
        let rows = state.query_records(E::KIND, q)?;
        rows.into_iter()
            .map(|r| Stored::decode(state.record(r.kind, &r.id).expect("row from state")))
            .collect()
    }

    fn query_records(&self, kind: Kind, q: &Query) -> Result<Vec<Record>, StoreError> {
        Ok(self
            .state()
            .query_records(kind, q)?
            .into_iter()
            .cloned()
            .collect())
    }

    fn count(&self, kind: Kind, q: &Query) -> Result<usize, StoreError> {
        Ok(self.state().query_records(kind, q)?.len())
    }

    fn find_unique<E: Entity>(&self, key_name: &str, value: &str) -> Option<Stored<E>> {
        let state = self.state();
        let id = state
            .unique
            .get(&(E::KIND, key_name.to_owned(), value.to_owned()))?;
        state.record(E::KIND, id).and_then(|r| Stored::decode(r).ok())
    }

    fn exists(&self, kind: Kind, id: &Id) -> bool {
        self.state().record(kind, id).is_some()
    }
}

/// An immutable view of the store at one commit.
pub struct Snapshot {
    state: Arc<State>,
}

impl Snapshot {
    fn new(state: Arc<State>) -> Self {
        Snapshot { state }
    }

    /// Number of committed transactions visible in this snapshot.
    pub fn tx_count(&self) -> u64 {
        self.state.tx
    }

    /// Time of the last commit visible in this snapshot.
    pub fn committed_at(&self) -> Option<Timestamp> {
        self.state.committed_at
    }
}

impl Read for Snapshot {
    fn state(&self) -> &State {
        &self.state
    }
}

/// A write transaction. Created by [`Store::atomically`].
pub struct Tx {
    state: State,
    ops: Vec<WalOp>,
    now: Timestamp,
}

impl Read for Tx {
    fn state(&self) -> &State {
        &self.state
    }
}

impl Tx {
    fn new(state: State, now: Timestamp) -> Tx {
        Tx {
            state,
            ops: Vec::new(),
            now,
        }
    }

    /// The commit timestamp used for every write in this transaction.
    pub fn now(&self) -> Timestamp {
        self.now
    }

    fn check_unique(&self, kind: Kind, id: &Id, keys: &[UniqueKey]) -> Result<(), StoreError> {
        for key in keys {
            if let Some(holder) = self
                .state
                .unique
                .get(&(kind, key.name.clone(), key.value.clone()))
            {
                if holder != id {
                    return Err(StoreError::ConstraintViolation {
                        key_name: key.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn write<E: Entity>(&mut self, id: Id, entity: &E, previous: Option<&Record>) -> Result<u64, StoreError> {
        let keys = entity.unique_keys();
        self.check_unique(E::KIND, &id, &keys)?;
        let body = serde_json::to_value(entity)
            .map_err(|e| StoreError::Corrupt(format!("unserializable {}: {e}", E::KIND)))?;
        let record = Arc::new(Record {
            kind: E::KIND,
            id,
            version: previous.map_or(1, |p| p.version + 1),
            created_at: previous.map_or(self.now, |p| p.created_at),
            updated_at: self.now,
            body,
            keys,
            refs: entity.references(),
        });
        let version = record.version;
        self.state.apply_put(record.clone());
        self.ops.push(WalOp::Put { record });
        Ok(version)
    }

    pub fn insert<E: Entity>(&mut self, entity: &E) -> Result<Id, StoreError> {
        self.state.next_id += 1;
        let id = Id::allocate(E::KIND, self.state.next_id);
        self.write(id.clone(), entity, None)?;
        Ok(id)
    }

    /// Replaces the body of an existing record, returning its new version.
    pub fn update<E: Entity>(&mut self, id: &Id, entity: &E) -> Result<u64, StoreError> {
        let previous = self.state.record(E::KIND, id).cloned().ok_or_else(|| {
            StoreError::NotFound {
                kind: E::KIND,
                id: id.clone(),
            }
        })?;
        self.write(id.clone(), entity, Some(&previous))
    }

    /// Like [`Tx::update`] but aborts with `Conflict` unless the stored
    /// version is still `expected_version`.
    pub fn update_if<E: Entity>(&mut self, id: &Id, expected_version: u64, entity: &E) -> Result<u64, StoreError> {
        match self.state.record(E::KIND, id) {
            Some(r) if r.version != expected_version => Err(StoreError::Conflict {
                kind: E::KIND,
                id: id.clone(),
            }),
            _ => self.update(id, entity),
        }
    }

    pub fn delete(&mut self, kind: Kind, id: &Id) -> Result<(), StoreError> {
        if self.state.record(kind, id).is_none() {
            return Err(StoreError::NotFound {
                kind,
                id: id.clone(),
            });
        }
        self.state.apply_delete(kind, id);
        self.ops.push(WalOp::Delete {
            kind,
            id: id.clone(),
        });
        Ok(())
    }

    fn check_references(&self) -> Result<(), StoreError> {
        for op in &self.ops {
            match op {
                WalOp::Put { record } => {
                    // Only the final version of each record matters.
                    let Some(current) = self.state.record(record.kind, &record.id) else {
                        continue;
                    };
                    for r in &current.refs {
                        if self.state.record(r.kind, &r.id).is_none() {
                            return Err(StoreError::ReferentialViolation {
                                missing_ref: r.field.clone(),
                            });
                        }
                    }
                }
                WalOp::Delete { kind, id } => {
                    if let Some(holders) = self.state.referrers.get(&(*kind, id.clone())) {
                        if let Some((holder_kind, _)) = holders.iter().next() {
                            return Err(StoreError::ReferentialViolation {
                                missing_ref: format!("{holder_kind} -> {kind}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
struct Writer {
    wal: Option<Wal>,
    _lock: Option<File>,
}

struct Inner {
    committed: RwLock<Arc<State>>,
    writer: Mutex<Writer>,
    clock: Arc<dyn Clock>,
    dir: Option<PathBuf>,
}

/// Handle to the store. Cheap to clone; all clones share state.
#[derive(Clone)]
pub struct Store {
    inner: Arc<Inner>,
}

#[derive(Debug, Clone, Copy)]
pub struct StoreOptions {
    /// fsync the log on every commit.
    pub sync: bool,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions { sync: true }
    }
}

impl Store {
    pub fn in_memory(clock: Arc<dyn Clock>) -> Store {
        Store {
            inner: Arc::new(Inner {
                committed: RwLock::new(Arc::new(State::default())),
                writer: Mutex::new(Writer {
                    wal: None,
                    _lock: None,
                }),
                clock,
                dir: None,
            }),
        }
    }

    /// Opens or creates a store under `dir`, replaying its log.
    pub fn open(dir: &Path, clock: Arc<dyn Clock>, options: StoreOptions) -> Result<Store, StoreError> {
        std::fs::create_dir_all(dir).map_err(|e| StoreError::io(dir, e))?;
        let lock_path = dir.join("LOCK");
        let lock = File::create(&lock_path).map_err(|e| StoreError::io(&lock_path, e))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(std::fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(dir.to_owned())),
            Err(std::fs::TryLockError::Error(e)) => return Err(StoreError::io(&lock_path, e)),
        }
        let (wal, entries) = Wal::open(&dir.join("wal.log"), options.sync)?;
        let mut state = State::default();
        for entry in &entries {
            state.apply(entry);
        }
        tracing::debug!(dir = %dir.display(), transactions = entries.len(), "store opened");
        Ok(Store {
            inner: Arc::new(Inner {
                committed: RwLock::new(Arc::new(state)),
                writer: Mutex::new(Writer {
                    wal: Some(wal),
                    _lock: Some(lock),
                }),
                clock,
                dir: Some(dir.to_owned()),
            }),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.inner.dir.as_deref()
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.inner.clock
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::new(self.inner.committed.read().clone())
    }

    /// Runs `f` as one serializable transaction. If `f` returns an error, or a
    /// reference check or the log append fails, nothing becomes visible.
    pub fn atomically<T, E>(&self, f: impl FnOnce(&mut Tx) -> Result<T, E>) -> Result<T, E>
    where
        E: From<StoreError>,
    {
        let mut writer = self.inner.writer.lock();
        let base = (**self.inner.committed.read()).clone();
        let mut tx = Tx::new(base, self.inner.clock.now());
        let out = f(&mut tx)?;
        if tx.ops.is_empty() {
            return Ok(out);
        }
        tx.check_references()?;
        tx.state.tx += 1;
        tx.state.committed_at = Some(tx.now);
        let entry = WalEntry {
            schema: SCHEMA_VERSION,
            tx: tx.state.tx,
            at: tx.now,
            next_id: tx.state.next_id,
            ops: std::mem::take(&mut tx.ops),
        };
        if let Some(wal) = writer.wal.as_mut() {
            wal.append(&entry)?;
        }
        *self.inner.committed.write() = Arc::new(tx.state);
        Ok(out)
    }

    pub fn get<E: Entity>(&self, id: &Id) -> Result<Stored<E>, StoreError> {
        self.snapshot().get(id)
    }

    pub fn insert<E: Entity>(&self, entity: &E) -> Result<Id, StoreError> {
        self.atomically(|tx| tx.insert(entity))
    }

    pub fn update<E: Entity>(&self, id: &Id, entity: &E) -> Result<u64, StoreError> {
        self.atomically(|tx| tx.update(id, entity))
    }

    pub fn query<E: Entity>(&self, q: &Query) -> Result<Vec<Stored<E>>, StoreError> {
        self.snapshot().query(q)
    }

    /// Writes every committed record as one canonical JSON line, grouped by
    /// kind and ordered by id. Returns the number of lines.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<usize> {
        let snap = self.snapshot();
        let mut n = 0;
        for kind in Kind::ALL {
            let Some(records) = snap.state.records.get(kind) else {
                continue;
            };
            for record in records.values() {
                let line = DumpLine {
                    schema: SCHEMA_VERSION,
                    kind: record.kind,
                    id: &record.id,
                    version: record.version,
                    created_at: record.created_at,
                    updated_at: record.updated_at,
                    body: &record.body,
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
                n += 1;
            }
        }
        out.flush()?;
        Ok(n)
    }

    pub fn dump_string(&self) -> String {
        let mut buf = Vec::new();
        self.dump(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }
}

/// Reads a field of a raw record body, mostly for diagnostics and tests.
pub fn body_field<'a>(record: &'a Record, field: &str) -> Option<&'a Value> {
    record.body.get(field)
}
