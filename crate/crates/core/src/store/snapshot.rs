use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwapOption;

use super::{read_documents, KbError, KnowledgeBase};

/// Holds the currently published snapshot. Readers take an `Arc` and keep
/// using it for the whole request; reloads build a new snapshot off to the
/// side and publish it with one atomic swap.
#[derive(Debug)]
pub struct SnapshotStore {
    current: ArcSwapOption<KnowledgeBase>,
    source: Option<PathBuf>,
    last_version: AtomicU64,
    reload: Mutex<()>,
}

impl SnapshotStore {
    /// A store with nothing published yet, reloading from `dir`.
    pub fn unloaded(dir: impl Into<PathBuf>) -> Self {
        Self {
            current: ArcSwapOption::empty(),
            source: Some(dir.into()),
            last_version: AtomicU64::new(0),
            reload: Mutex::new(()),
        }
    }

    /// A store publishing `kb` with no directory to reload from.
    pub fn fixed(kb: KnowledgeBase) -> Self {
        let version = kb.version();
        Self {
            current: ArcSwapOption::from_pointee(kb),
            source: None,
            last_version: AtomicU64::new(version),
            reload: Mutex::new(()),
        }
    }

    /// Loads `dir` now and keeps it as the reload source.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, KbError> {
        let store = Self::unloaded(dir);
        store.reload()?;
        Ok(store)
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    /// The published snapshot, if any load has completed.
    pub fn load(&self) -> Option<Arc<KnowledgeBase>> {
        self.current.load_full()
    }

    pub fn version(&self) -> Option<u64> {
        self.current.load().as_ref().map(|kb| kb.version())
    }

    /// Reads and validates the source directory, then publishes it under
    /// the next version. On failure the old snapshot stays live.
    pub fn reload(&self) -> Result<u64, KbError> {
        let dir = self.source.as_deref().ok_or(KbError::NoSource)?;
        let _guard = self.reload.lock().unwrap_or_else(|e| e.into_inner());
        let docs = read_documents(dir)?;
        let version = self.last_version.load(Ordering::SeqCst) + 1;
        let kb = KnowledgeBase::from_documents(docs, version)?;
        self.last_version.store(version, Ordering::SeqCst);
        self.current.store(Some(Arc::new(kb)));
        Ok(version)
    }

    /// Publishes an already built snapshot under the next version.
    pub fn publish(&self, kb: KnowledgeBase) -> u64 {
        let _guard = self.reload.lock().unwrap_or_else(|e| e.into_inner());
        let version = self.last_version.load(Ordering::SeqCst) + 1;
        self.last_version.store(version, Ordering::SeqCst);
        self.current.store(Some(Arc::new(kb.with_version(version))));
        version
    }
}
