//! Entity recognition over the mention trie, entity masking, and property
//! classification of the masked question.

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{EntityId, KnowledgeModel, PropertyChain};
use crate::store::{fold_char, KnowledgeBase, MentionTarget};

/// Replaces every entity mention in a masked question.
pub const MASK_TOKEN: &str = "<E>";

/// Score added when a property name on the chain appears verbatim.
pub const KEYWORD_BONUS: f64 = 0.5;

// Private-use scalar standing in for the mask token inside n-gram profiles.
const MASK_CHAR: char = '\u{E000}';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnderstandingError {
    #[error("mention `{surface}` does not match the question at bytes {start}..{end}")]
    SpanMismatch { surface: String, start: usize, end: usize },
    #[error("no candidate properties to classify against")]
    NoCandidates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mention {
    pub surface: String,
    pub byte_span: (usize, usize),
    pub targets: Vec<MentionTarget>,
}

impl Mention {
    pub fn is_entity(&self) -> bool {
        self.targets.iter().any(|t| t.entity_id().is_some())
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = &EntityId> {
        self.targets.iter().filter_map(MentionTarget::entity_id)
    }

    pub fn overlaps(&self, start: usize, end: usize) -> bool {
        self.byte_span.0 < end && start < self.byte_span.1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MaskedQuestion {
    pub text: String,
    /// Indices into the mention list, in text order, of the masked mentions.
    pub mention_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyScore {
    pub property_chain: PropertyChain,
    pub score: f64,
}

/// Greedy leftmost-longest recognition; ambiguous surfaces keep every target.
pub fn recognize(question: &str, kb: &KnowledgeBase) -> Vec<Mention> {
    kb.mentions()
        .find_all(question)
        .into_iter()
        .map(|m| Mention {
            surface: question[m.start..m.end].to_owned(),
            byte_span: (m.start, m.end),
            targets: m.targets.to_vec(),
        })
        .collect()
}

/// Replaces each entity mention with [`MASK_TOKEN`]. Literal-only mentions
/// stay in place.
pub fn mask(question: &str, mentions: &[Mention]) -> Result<MaskedQuestion, UnderstandingError> {
    let mut text = String::with_capacity(question.len());
    let mut mention_order = Vec::new();
    let mut cursor = 0;
    for (i, m) in mentions.iter().enumerate() {
        let (start, end) = m.byte_span;
        let matches = start >= cursor && question.get(start..end).is_some_and(|s| s == m.surface);
        if !matches {
            return Err(UnderstandingError::SpanMismatch {
                surface: m.surface.clone(),
                start,
                end,
            });
        }
        if !m.is_entity() {
            continue;
        }
        text.push_str(&question[cursor..start]);
        text.push_str(MASK_TOKEN);
        mention_order.push(i);
        cursor = end;
    }
    text.push_str(&question[cursor..]);
    Ok(MaskedQuestion { text, mention_order })
}

/// Reinserts the masked surfaces. Inverse of [`mask`] for questions that
/// do not themselves contain the mask token.
pub fn unmask(masked: &MaskedQuestion, mentions: &[Mention]) -> String {
    let mut out = String::with_capacity(masked.text.len());
    let mut pieces = masked.text.split(MASK_TOKEN);
    out.push_str(pieces.next().unwrap_or_default());
    for (piece, &idx) in pieces.zip(&masked.mention_order) {
        out.push_str(&mentions[idx].surface);
        out.push_str(piece);
    }
    out
}

/// Leaf chains of the classes of recognized entities, including classes
/// reached through one `member_of` hop. With no entity mentioned, every
/// chain of the model is a candidate.
pub fn candidate_chains(model: &KnowledgeModel, mentions: &[Mention]) -> Vec<PropertyChain> {
    let mut classes = Vec::new();
    for id in mentions.iter().flat_map(Mention::entity_ids) {
        let Some(entity) = model.entity(id.as_str()) else {
            continue;
        };
        let reps = entity
            .member_of
            .iter()
            .filter_map(|r| model.entity(r.as_str()))
            .map(|r| &r.instance_of);
        for class in std::iter::once(&entity.instance_of).chain(reps) {
            if !classes.contains(class) {
                classes.push(class.clone());
            }
        }
    }
    if mentions.iter().all(|m| !m.is_entity()) {
        return model.all_chains();
    }
    let mut seen = HashSet::new();
    classes
        .iter()
        .flat_map(|c| model.class_chains(c.as_str()))
        .filter(|chain| seen.insert(chain.clone()))
        .collect()
}

/// Maps a masked question onto scores for candidate property chains.
pub trait PropertyClassifier: Send + Sync {
    fn name(&self) -> &'static str;

    /// Unordered raw scores in `[0, 1]`, one per candidate.
    fn score_candidates(
        &self,
        masked: &MaskedQuestion,
        candidates: &[PropertyChain],
        model: &KnowledgeModel,
    ) -> Vec<f64>;

    /// Scores sorted descending, ties broken by chain key.
    fn classify(
        &self,
        masked: &MaskedQuestion,
        candidates: &[PropertyChain],
        model: &KnowledgeModel,
    ) -> Result<Vec<PropertyScore>, UnderstandingError> {
        if candidates.is_empty() {
            return Err(UnderstandingError::NoCandidates);
        }
        let raw = self.score_candidates(masked, candidates, model);
        let mut out: Vec<PropertyScore> = candidates
            .iter()
            .zip(raw)
            .map(|(chain, score)| PropertyScore {
                property_chain: chain.clone(),
                score: score.clamp(0.0, 1.0),
            })
            .collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.property_chain.key().cmp(&b.property_chain.key()))
        });
        Ok(out)
    }
}

/// Character n-gram profile (n = 2 and 3) over folded Unicode scalars.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgramProfile {
    grams: BTreeMap<String, u32>,
    norm: f64,
}

impl NgramProfile {
    pub fn of(text: &str) -> Self {
        let chars = normalize(text);
        let mut grams = BTreeMap::new();
        for n in [2, 3] {
            for window in chars.windows(n) {
                *grams.entry(window.iter().collect::<String>()).or_insert(0u32) += 1;
            }
        }
        let norm = grams.values().map(|&c| (c as f64) * (c as f64)).sum::<f64>().sqrt();
        Self { grams, norm }
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn cosine(&self, other: &NgramProfile) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let (small, large) = if self.grams.len() <= other.grams.len() {
            (self, other)
        } else {
            (other, self)
        };
        let dot: f64 = small
            .grams
            .iter()
            .filter_map(|(g, &a)| large.grams.get(g).map(|&b| a as f64 * b as f64))
            .sum();
        (dot / (self.norm * other.norm)).min(1.0)
    }
}

fn normalize(text: &str) -> Vec<char> {
    text.trim()
        .replace(MASK_TOKEN, &MASK_CHAR.to_string())
        .chars()
        .map(fold_char)
        .collect()
}

/// Default classifier: best n-gram cosine against the leaf's trigger
/// utterances, plus [`KEYWORD_BONUS`] when any property name on the chain
/// occurs in the masked text, capped at 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalClassifier;

impl LexicalClassifier {
    pub fn chain_score(&self, masked_text: &str, chain: &PropertyChain, model: &KnowledgeModel) -> f64 {
        let question = normalize(masked_text);
        let profile = NgramProfile::of(masked_text);
        let Some(leaf) = model.property(chain.leaf().as_str()) else {
            return 0.0;
        };
        let similarity = leaf
            .trigger_utterances
            .iter()
            .map(|u| {
                if normalize(u) == question {
                    1.0
                } else {
                    profile.cosine(&NgramProfile::of(u))
                }
            })
            .fold(0.0, f64::max);
        let folded: String = question.iter().collect();
        let keyword = chain.ids().iter().any(|id| {
            model.property(id.as_str()).is_some_and(|p| {
                let name: String = p.name.trim().chars().map(fold_char).collect();
                name.chars().count() >= 2 && folded.contains(&name)
            })
        });
        let bonus = if keyword { KEYWORD_BONUS } else { 0.0 };
        (similarity + bonus).min(1.0)
    }
}

impl PropertyClassifier for LexicalClassifier {
    fn name(&self) -> &'static str {
        "lexical"
    }

    fn score_candidates(
        &self,
        masked: &MaskedQuestion,
        candidates: &[PropertyChain],
        model: &KnowledgeModel,
    ) -> Vec<f64> {
        candidates
            .iter()
            .map(|chain| self.chain_score(&masked.text, chain, model))
            .collect()
    }
}

/// Built-in classifier by config name.
pub fn classifier_by_name(name: &str) -> Option<Box<dyn PropertyClassifier>> {
    match name {
        "lexical" => Some(Box::new(LexicalClassifier)),
        _ => None,
    }
}

/// Classifies with the default lexical scorer.
pub fn classify(
    masked: &MaskedQuestion,
    candidates: &[PropertyChain],
    model: &KnowledgeModel,
) -> Result<Vec<PropertyScore>, UnderstandingError> {
    LexicalClassifier.classify(masked, candidates, model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MentionTarget;

    fn mention(question: &str, surface: &str, entity: Option<&str>) -> Mention {
        let start = question.find(surface).unwrap();
        let targets = match entity {
            Some(e) => vec![MentionTarget::Entity { entity_id: e.into() }],
            None => vec![MentionTarget::Literal {
                value: surface.into(),
                schema_id: "s".into(),
                column: "c".into(),
            }],
        };
        Mention {
            surface: surface.into(),
            byte_span: (start, start + surface.len()),
            targets,
        }
    }

    #[test]
    fn masks_entities_only() {
        let q = "优惠券和单品宝能不能一起使用";
        let mentions = vec![
            mention(q, "优惠券", Some("coupon")),
            mention(q, "单品宝", Some("sku_bao")),
        ];
        let masked = mask(q, &mentions).unwrap();
        assert_eq!(masked.text, "<E>和<E>能不能一起使用");
        assert_eq!(masked.mention_order, vec![0, 1]);
        assert_eq!(unmask(&masked, &mentions), q);

        let q = "天猫的收费";
        let literal = vec![mention(q, "天猫", None)];
        assert_eq!(mask(q, &literal).unwrap().text, q);
    }

    #[test]
    fn no_mentions_leaves_text() {
        let masked = mask("随便问问", &[]).unwrap();
        assert_eq!(masked.text, "随便问问");
        assert!(masked.mention_order.is_empty());
    }

    #[test]
    fn span_mismatch_is_reported() {
        let mut m = mention("abc", "b", Some("x"));
        m.byte_span = (0, 1);
        assert!(matches!(
            mask("abc", &[m]),
            Err(UnderstandingError::SpanMismatch { .. })
        ));
    }

    #[test]
    fn profile_cosine_bounds() {
        let a = NgramProfile::of("怎么参加<E>的<E>");
        assert!((a.cosine(&a) - 1.0).abs() < 1e-12);
        let b = NgramProfile::of("完全不同的句子");
        let c = a.cosine(&b);
        assert!((0.0..=1.0).contains(&c));
        assert!(NgramProfile::of("<E>").is_empty());
        assert_eq!(NgramProfile::of("<E>").cosine(&a), 0.0);
    }

    #[test]
    fn mask_token_is_one_symbol() {
        assert_eq!(normalize("<E>的").len(), 2);
    }
}
