//! Character trie over entity names, aliases and condition-column literals.

use std::collections::HashMap;

use serde::Serialize;

use crate::model::{EntityId, KnowledgeModel, SchemaId, ValueDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    EntityMention,
    ConstraintLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MentionTarget {
    Entity {
        entity_id: EntityId,
    },
    Literal {
        value: String,
        schema_id: SchemaId,
        column: String,
    },
}

impl MentionTarget {
    pub fn kind(&self) -> MentionKind {
        match self {
            MentionTarget::Entity { .. } => MentionKind::EntityMention,
            MentionTarget::Literal { .. } => MentionKind::ConstraintLiteral,
        }
    }

    pub fn entity_id(&self) -> Option<&EntityId> {
        match self {
            MentionTarget::Entity { entity_id } => Some(entity_id),
            MentionTarget::Literal { .. } => None,
        }
    }
}

/// Case folding used for both insertion and lookup. Characters whose
/// lowercase form is not a single scalar are kept as-is so byte spans
/// always map back onto the original text.
pub fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

#[derive(Debug, Clone, Default)]
struct Node {
    children: HashMap<char, usize>,
    targets: Vec<MentionTarget>,
}

/// A trie match: byte span in the searched text plus the stored targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrieMatch<'a> {
    pub start: usize,
    pub end: usize,
    pub targets: &'a [MentionTarget],
}

#[derive(Debug, Clone)]
pub struct MentionIndex {
    nodes: Vec<Node>,
    keys: usize,
}

impl Default for MentionIndex {
    fn default() -> Self {
        Self {
            nodes: vec![Node::default()],
            keys: 0,
        }
    }
}

impl MentionIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of distinct (folded) mention strings.
    pub fn len(&self) -> usize {
        self.keys
    }

    pub fn is_empty(&self) -> bool {
        self.keys == 0
    }

    /// Adds `target` under `mention`. Empty mentions are ignored and a
    /// repeated (mention, target) pair is stored once.
    pub fn insert(&mut self, mention: &str, target: MentionTarget) {
        if mention.is_empty() {
            return;
        }
        let mut node = 0;
        for c in mention.chars().map(fold_char) {
            node = match self.nodes[node].children.get(&c) {
                Some(&next) => next,
                None => {
                    self.nodes.push(Node::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(c, next);
                    next
                }
            };
        }
        let targets = &mut self.nodes[node].targets;
        if targets.is_empty() {
            self.keys += 1;
        }
        if !targets.contains(&target) {
            targets.push(target);
        }
    }

    /// Exact lookup of a whole string.
    pub fn get(&self, mention: &str) -> Option<&[MentionTarget]> {
        let mut node = 0;
        for c in mention.chars().map(fold_char) {
            node = *self.nodes[node].children.get(&c)?;
        }
        let targets = &self.nodes[node].targets;
        (!targets.is_empty()).then_some(targets.as_slice())
    }

    /// Longest stored mention starting at byte offset `start`.
    pub fn longest_match_at<'a>(&'a self, text: &str, start: usize) -> Option<TrieMatch<'a>> {
        let mut node = 0;
        let mut best = None;
        for (offset, c) in text[start..].char_indices() {
            match self.nodes[node].children.get(&fold_char(c)) {
                Some(&next) => node = next,
                None => break,
            }
            if !self.nodes[node].targets.is_empty() {
                best = Some(TrieMatch {
                    start,
                    end: start + offset + c.len_utf8(),
                    targets: &self.nodes[node].targets,
                });
            }
        }
        best
    }

    /// Greedy leftmost-longest, non-overlapping scan of `text`.
    pub fn find_all<'a>(&'a self, text: &str) -> Vec<TrieMatch<'a>> {
        let mut out = Vec::new();
        let mut pos = 0;
        while pos < text.len() {
            match self.longest_match_at(text, pos) {
                Some(m) => {
                    pos = m.end;
                    out.push(m);
                }
                None => {
                    pos += text[pos..].chars().next().map_or(1, char::len_utf8);
                }
            }
        }
        out
    }
}

/// Index every entity name and alias, then every distinct text literal of
/// every CVT condition column. Entity-ref cells are covered by the entity
/// names they point at.
pub fn build_mention_index(model: &KnowledgeModel) -> MentionIndex {
    let mut index = MentionIndex::new();
    for entity in model.entities() {
        for form in entity.surface_forms() {
            index.insert(
                form,
                MentionTarget::Entity {
                    entity_id: entity.id.clone(),
                },
            );
        }
    }
    for value in model.values() {
        let crate::model::Value::CvtTable { schema_id, rows } = &value.value else {
            continue;
        };
        let Some(schema) = model.schema(schema_id.as_str()) else {
            continue;
        };
        for column in schema.condition_columns() {
            if column.value_domain != ValueDomain::Text {
                continue;
            }
            for row in rows {
                if let Some(text) = row.get(&column.column_name).and_then(|c| c.as_text()) {
                    index.insert(
                        text,
                        MentionTarget::Literal {
                            value: text.to_owned(),
                            schema_id: schema_id.clone(),
                            column: column.column_name.clone(),
                        },
                    );
                }
            }
        }
    }
    index
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entity(id: &str) -> MentionTarget {
        MentionTarget::Entity { entity_id: id.into() }
    }

    #[test]
    fn longest_match_wins() {
        let mut index = MentionIndex::new();
        index.insert("双十", entity("a"));
        index.insert("双十一", entity("b"));
        let found = index.find_all("怎么参加双十一");
        assert_eq!(found.len(), 1);
        assert_eq!(&"怎么参加双十一"[found[0].start..found[0].end], "双十一");
        assert_eq!(found[0].targets, &[entity("b")]);
    }

    #[test]
    fn case_insensitive_for_latin() {
        let mut index = MentionIndex::new();
        index.insert("Store-Bao", entity("s"));
        assert!(index.get("store-bao").is_some());
        let found = index.find_all("what is STORE-BAO?");
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].start, 8);
    }

    #[test]
    fn duplicates_keep_insertion_order() {
        let mut index = MentionIndex::new();
        index.insert("618", entity("x"));
        index.insert("618", entity("y"));
        index.insert("618", entity("x"));
        assert_eq!(index.get("618").unwrap(), &[entity("x"), entity("y")]);
        assert_eq!(index.len(), 1);
    }

    #[test]
    fn empty_index_matches_nothing() {
        let index = MentionIndex::new();
        assert!(index.is_empty());
        assert!(index.find_all("anything 任何").is_empty());
        assert!(index.get("").is_none());
    }

    #[test]
    fn prefix_is_not_a_key() {
        let mut index = MentionIndex::new();
        index.insert("淘抢购", entity("t"));
        assert!(index.get("淘抢").is_none());
        assert!(index.find_all("淘抢").is_empty());
    }
}
