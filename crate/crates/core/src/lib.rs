//! Knowledge-base question answering over an extended ontology with
//! hierarchical properties, key-value documents and compound value types.

pub mod dialog;
pub mod graph;
pub mod model;
pub mod ranking;
pub mod reasoning;
pub mod store;
pub mod templates;
pub mod understanding;

pub use dialog::{AskRequest, AskResponse, Engine, EngineConfig, Status};
pub use model::{KbDocuments, KnowledgeModel, PropertyChain};
pub use ranking::RankWeights;
pub use store::{load_kb, KnowledgeBase, SnapshotStore};
