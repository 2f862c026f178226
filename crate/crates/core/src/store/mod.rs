//! Loading, validating, indexing and publishing knowledge-base snapshots.

mod index;
mod io;
mod snapshot;
mod stats;

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::path::PathBuf;

use thiserror::Error;

use crate::model::{KbDocuments, KnowledgeModel, Violation};

pub use index::{build_mention_index, fold_char, MentionIndex, MentionKind, MentionTarget, TrieMatch};
pub use io::{load_kb, read_documents, write_documents, KB_FILES};
pub use snapshot::SnapshotStore;
pub use stats::{
    compute_stats, regulation_compression, resolution_rate, ExactRatio, KbStats, SessionRecord, StatsError,
};

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}:{column}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("knowledge base has {} violation(s)", .0.len())]
    Validation(Vec<Violation>),
    #[error("no knowledge base directory configured")]
    NoSource,
}

/// An immutable, validated and indexed knowledge-base snapshot.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    model: KnowledgeModel,
    mentions: MentionIndex,
    version: u64,
}

impl KnowledgeBase {
    pub fn from_documents(docs: KbDocuments, version: u64) -> Result<Self, KbError> {
        let model = KnowledgeModel::new(docs).map_err(KbError::Validation)?;
        Ok(Self::from_model(model, version))
    }

    pub fn from_model(model: KnowledgeModel, version: u64) -> Self {
        let mentions = build_mention_index(&model);
        Self {
            model,
            mentions,
            version,
        }
    }

    pub fn empty() -> Self {
        Self::from_model(
            KnowledgeModel::new(KbDocuments::default()).expect("empty documents are valid"),
            0,
        )
    }

    pub fn model(&self) -> &KnowledgeModel {
        &self.model
    }

    pub fn mentions(&self) -> &MentionIndex {
        &self.mentions
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    /// Same content under a new version tag.
    pub fn with_version(mut self, version: u64) -> Self {
        self.version = version;
        self
    }

    /// Content hash of the documents; the version tag is excluded.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self.model.documents()).expect("documents serialize");
        let mut hasher = DefaultHasher::new();
        json.hash(&mut hasher);
        hasher.finish()
    }

    /// Structural equality that ignores the version tag.
    pub fn same_content(&self, other: &KnowledgeBase) -> bool {
        self.model.documents() == other.model.documents()
    }
}

impl Deref for KnowledgeBase {
    type Target = KnowledgeModel;

    fn deref(&self) -> &KnowledgeModel {
        &self.model
    }
}
