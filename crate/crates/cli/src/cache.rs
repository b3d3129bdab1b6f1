//! Content-addressed artifact cache with single-flight builds.
//!
//! Keys are SHA-256 digests of the operation kind and its canonical JSON
//! parameters (geometry included). Finished artifacts live in memory and, when
//! a directory is configured, on disk; a key therefore always maps to the same
//! bytes, warm or cold.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use cusp_atlas::export::{to_json_bytes, SCHEMA};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Failure, OpResult};

pub const CACHE_ENV: &str = "CUSP_ATLAS_CACHE";

/// Sidecar written next to every artifact on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    /// `mesh`, `cusps`, `contour`, `trace`, `plan`, ...
    pub kind: String,
    pub file: PathBuf,
    pub schema: String,
    pub created_unix: u64,
    pub bytes: usize,
}

/// Build progress handed to a builder; fractions in `[0, 1]`.
pub type Progress<'a> = &'a (dyn Fn(f64) + Sync);
pub type Builder = Box<dyn FnOnce(Progress) -> OpResult<Vec<u8>> + Send>;

#[derive(Debug, Clone)]
pub enum Poll {
    Ready(Arc<Vec<u8>>),
    Building(f64),
    Failed(Failure),
}

#[derive(Debug, Clone)]
enum State {
    Building(f64),
    Ready(Arc<Vec<u8>>),
    Failed(Failure),
}

#[derive(Debug)]
struct Slot {
    state: Mutex<State>,
    done: Condvar,
}

impl Slot {
    fn set_progress(&self, f: f64) {
        let mut st = self.state.lock().unwrap();
        if let State::Building(p) = &mut *st {
            *p = p.max(f.clamp(0.0, 1.0));
        }
    }

    fn poll(&self) -> Poll {
        match &*self.state.lock().unwrap() {
            State::Building(p) => Poll::Building(*p),
            State::Ready(b) => Poll::Ready(b.clone()),
            State::Failed(e) => Poll::Failed(e.clone()),
        }
    }

    fn wait(&self) -> OpResult<Arc<Vec<u8>>> {
        let mut st = self.state.lock().unwrap();
        loop {
            match &*st {
                State::Building(_) => st = self.done.wait(st).unwrap(),
                State::Ready(b) => return Ok(b.clone()),
                State::Failed(e) => return Err(e.clone()),
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<String, Arc<Slot>>>,
}

impl Cache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Cache { dir, slots: Mutex::new(HashMap::new()) }
    }

    /// Disk-backed when `CUSP_ATLAS_CACHE` names a directory, memory-only otherwise.
    pub fn from_env() -> Self {
        Cache::new(std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn key<P: Serialize>(kind: &str, params: &P) -> String {
        let mut h = Sha256::new();
        h.update(kind.as_bytes());
        h.update(b"\n");
        h.update(to_json_bytes(params).expect("cache parameters serialize"));
        hex::encode(h.finalize())
    }

    fn file(&self, kind: &str, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{kind}-{key}")))
    }

    /// Returns the slot for `key` and whether the caller must build it.
    fn claim(&self, kind: &str, key: &str) -> (Arc<Slot>, bool) {
        let mut slots = self.slots.lock().unwrap();
        if let Some(s) = slots.get(key) {
            return (s.clone(), false);
        }
        let on_disk = self.file(kind, key).and_then(|p| std::fs::read(p).ok());
        let fresh = on_disk.is_none();
        let state = match on_disk {
            Some(b) => State::Ready(Arc::new(b)),
            None => State::Building(0.0),
        };
        let slot = Arc::new(Slot { state: Mutex::new(state), done: Condvar::new() });
        slots.insert(key.to_string(), slot.clone());
        (slot, fresh)
    }

    fn run(&self, kind: &str, key: &str, slot: &Slot, build: Builder) {
        let out = build(&|f| slot.set_progress(f));
        let state = match out {
            Ok(bytes) => {
                self.persist(kind, key, &bytes);
                State::Ready(Arc::new(bytes))
            }
            Err(e) => State::Failed(e),
        };
        *slot.state.lock().unwrap() = state;
        slot.done.notify_all();
    }

    fn persist(&self, kind: &str, key: &str, bytes: &[u8]) {
        let Some(path) = self.file(kind, key) else { return };
        // best effort: a read-only cache directory only costs recomputation
        let _ = (|| -> std::io::Result<()> {
            std::fs::create_dir_all(path.parent().unwrap())?;
            let tmp = path.with_extension(format!("tmp{}", std::process::id()));
            std::fs::write(&tmp, bytes)?;
            std::fs::rename(&tmp, &path)?;
            let entry = CacheEntry {
                key: key.into(),
                kind: kind.into(),
                file: path.clone(),
                schema: SCHEMA.into(),
                created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
                bytes: bytes.len(),
            };
            std::fs::write(path.with_extension("meta.json"), serde_json::to_vec_pretty(&entry)?)
        })();
    }

    /// Blocks until the artifact exists; concurrent callers with the same key
    /// share one build, run on the first caller's thread.
    pub fn get(&self, kind: &str, key: &str, build: Builder) -> OpResult<Arc<Vec<u8>>> {
        let (slot, fresh) = self.claim(kind, key);
        if fresh {
            self.run(kind, key, &slot, build);
        }
        slot.wait()
    }

    /// Non-blocking: starts the build on a background thread if nobody has.
    pub fn poll(self: &Arc<Self>, kind: &str, key: &str, build: Builder) -> Poll {
        let (slot, fresh) = self.claim(kind, key);
        if fresh {
            let (me, kind, key, s) = (self.clone(), kind.to_string(), key.to_string(), slot.clone());
            std::thread::spawn(move || me.run(&kind, &key, &s, build));
        }
        slot.poll()
    }

    /// Seeds a finished artifact, e.g. the sibling output of a shared build.
    pub fn insert(&self, kind: &str, key: &str, bytes: Vec<u8>) {
        let (slot, fresh) = self.claim(kind, key);
        if fresh {
            self.persist(kind, key, &bytes);
            *slot.state.lock().unwrap() = State::Ready(Arc::new(bytes));
            slot.done.notify_all();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn keys_depend_on_kind_and_parameters() {
        let a = Cache::key("cusps", &17.0);
        assert_eq!(a, Cache::key("cusps", &17.0));
        assert_ne!(a, Cache::key("cusps", &17.5));
        assert_ne!(a, Cache::key("mesh", &17.0));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn concurrent_gets_share_one_build() {
        let cache = Arc::new(Cache::new(None));
        let runs = Arc::new(AtomicUsize::new(0));
        let handles: Vec<_> = (0..8)
            .map(|_| {
                let (c, r) = (cache.clone(), runs.clone());
                std::thread::spawn(move || {
                    c.get(
                        "k",
                        "key",
                        Box::new(move |_| {
                            r.fetch_add(1, Ordering::SeqCst);
                            std::thread::sleep(std::time::Duration::from_millis(50));
                            Ok(b"artifact".to_vec())
                        }),
                    )
                    .unwrap()
                })
            })
            .collect();
        for h in handles {
            assert_eq!(&**h.join().unwrap(), b"artifact");
        }
        assert_eq!(runs.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn disk_copy_is_served_after_restart() {
        let dir = tempfile::tempdir().unwrap();
        let first = Cache::new(Some(dir.path().into()));
        first.get("k", "abc", Box::new(|_| Ok(b"one".to_vec()))).unwrap();
        let second = Cache::new(Some(dir.path().into()));
        let got = second.get("k", "abc", Box::new(|_| panic!("must not rebuild"))).unwrap();
        assert_eq!(&**got, b"one");
        assert!(dir.path().join("k-abc.meta.json").is_file());
    }

    #[test]
    fn failures_are_reported_not_stored_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::new(Some(dir.path().into()));
        let e = c.get("k", "bad", Box::new(|_| Err(Failure::Usage("no".into())))).unwrap_err();
        assert_eq!(e, Failure::Usage("no".into()));
        assert!(!dir.path().join("k-bad").exists());
    }

    #[test]
    fn poll_reports_progress_then_ready() {
        let cache = Arc::new(Cache::new(None));
        let gate = Arc::new((Mutex::new(false), Condvar::new()));
        let g2 = gate.clone();
        let first = cache.poll(
            "k",
            "slow",
            Box::new(move |p| {
                p(0.5);
                let (m, cv) = &*g2;
                let mut open = m.lock().unwrap();
                while !*open {
                    open = cv.wait(open).unwrap();
                }
                Ok(b"done".to_vec())
            }),
        );
        assert!(matches!(first, Poll::Building(_)));
        {
            let (m, cv) = &*gate;
            *m.lock().unwrap() = true;
            cv.notify_all();
        }
        let got = cache.get("k", "slow", Box::new(|_| unreachable!())).unwrap();
        assert_eq!(&**got, b"done");
    }
}
