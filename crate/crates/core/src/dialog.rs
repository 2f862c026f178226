//! End-to-end question answering: recognize, mask, classify, generate,
//! bind, rank, execute; vague questions fall back to recommendations.

use std::collections::VecDeque;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{bind_constraints, generate, BindConfig, QueryGraph, DEFAULT_TAU};
use crate::model::{ClassId, EntityId, PropertyChain};
use crate::ranking::{rank, FeatureConfig, RankWeights, RankedGraph, DEFAULT_STOP_CHARS};
use crate::reasoning::{execute, Answer, EntityLabel, ExecutionContext, DEFAULT_MAX_DEPTH};
use crate::store::{KnowledgeBase, SnapshotStore};
use crate::templates::{fill, TemplateError, TemplateRegistry, Templates};
use crate::understanding::{
    candidate_chains, classifier_by_name, mask, recognize, Mention, PropertyClassifier, PropertyScore,
    UnderstandingError,
};

/// Upper bound on recommendations per response.
pub const MAX_RECOMMENDATIONS: usize = 3;
pub const SESSION_ENTITY_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub classifier: String,
    /// Minimum classifier score for a property to count as mentioned.
    pub property_threshold: f64,
    pub tau: f64,
    pub max_depth: usize,
    pub locale: String,
    pub stop_chars: String,
    pub session_ttl_secs: u64,
    pub recommendations: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            classifier: "lexical".into(),
            property_threshold: 0.5,
            tau: DEFAULT_TAU,
            max_depth: DEFAULT_MAX_DEPTH,
            locale: "zh".into(),
            stop_chars: DEFAULT_STOP_CHARS.into(),
            session_ttl_secs: 30 * 60,
            recommendations: MAX_RECOMMENDATIONS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Recognition,
    Masking,
    Classification,
    Execution,
}

#[derive(Debug, Error)]
pub enum DialogError {
    #[error("question is empty")]
    EmptyQuestion,
    #[error("knowledge base is not loaded yet")]
    Unavailable,
    #[error("unknown classifier `{0}`")]
    UnknownClassifier(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{stage:?} stage failed: {message}")]
    Internal { stage: Stage, message: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub top_k_override: Option<usize>,
    #[serde(default)]
    pub debug: bool,
}

impl AskRequest {
    pub fn new(question: impl Into<String>) -> Self {
        Self {
            question: question.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Answered,
    Recommended,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Recommendation {
    pub text: String,
    /// Question to submit back verbatim.
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DebugInfo {
    pub kb_version: u64,
    pub mentions: Vec<Mention>,
    pub masked: String,
    pub property_scores: Vec<PropertyScore>,
    pub graphs: Vec<RankedGraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AskResponse {
    pub status: Status,
    pub answer: Option<Answer>,
    pub recommendations: Vec<Recommendation>,
    pub debug: Option<DebugInfo>,
}

impl AskResponse {
    /// The graph that was executed, when debug output was requested.
    pub fn top_graph(&self) -> Option<&QueryGraph> {
        self.debug.as_ref()?.graphs.first().map(|r| &r.graph)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionContext {
    /// Most recent first.
    pub last_entities: VecDeque<EntityId>,
    pub last_class: Option<ClassId>,
    pub expires_at: Instant,
}

impl SessionContext {
    fn observe(&mut self, entities: &[EntityId], class: Option<ClassId>) {
        for e in entities.iter().rev() {
            self.last_entities.retain(|x| x != e);
            self.last_entities.push_front(e.clone());
        }
        self.last_entities.truncate(SESSION_ENTITY_LIMIT);
        if class.is_some() {
            self.last_class = class;
        }
    }
}

/// In-memory sessions with per-entry expiry.
#[derive(Debug)]
pub struct SessionStore {
    entries: DashMap<String, SessionContext>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            entries: DashMap::new(),
            ttl,
        }
    }

    /// Live context for `id`; expired entries are dropped and read as absent.
    pub fn get(&self, id: &str, now: Instant) -> Option<SessionContext> {
        let ctx = self.entries.get(id)?.clone();
        if ctx.expires_at <= now {
            self.entries.remove_if(id, |_, c| c.expires_at <= now);
            return None;
        }
        Some(ctx)
    }

    pub fn observe(&self, id: &str, entities: &[EntityId], class: Option<ClassId>, now: Instant) {
        let fresh = || SessionContext {
            last_entities: VecDeque::new(),
            last_class: None,
            expires_at: now,
        };
        let mut entry = self.entries.entry(id.to_owned()).or_insert_with(fresh);
        if entry.expires_at <= now {
            *entry = fresh();
        }
        entry.observe(entities, class);
        entry.expires_at = now + self.ttl;
    }

    pub fn purge_expired(&self, now: Instant) {
        self.entries.retain(|_, c| c.expires_at > now);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Everything the pipeline needs besides the question and the snapshot.
pub struct Pipeline<'a> {
    pub weights: &'a RankWeights,
    pub config: &'a EngineConfig,
    pub classifier: &'a dyn PropertyClassifier,
    pub templates: &'a Templates,
    pub features: &'a FeatureConfig,
}

/// What a request taught us about the session.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SessionUpdate {
    pub entities: Vec<EntityId>,
    pub class: Option<ClassId>,
}

struct Understood {
    question: String,
    mentions: Vec<Mention>,
    masked: String,
    scores: Vec<PropertyScore>,
    entities: Vec<EntityId>,
}

impl Pipeline<'_> {
    fn understand(&self, question: &str, kb: &KnowledgeBase) -> Result<Understood, DialogError> {
        let question = question.trim();
        if question.is_empty() {
            return Err(DialogError::EmptyQuestion);
        }
        let mentions = recognize(question, kb);
        let masked = mask(question, &mentions).map_err(|e| DialogError::Internal {
            stage: Stage::Masking,
            message: e.to_string(),
        })?;
        let candidates = candidate_chains(kb.model(), &mentions);
        let scores = match self.classifier.classify(&masked, &candidates, kb.model()) {
            Ok(scores) => scores,
            Err(UnderstandingError::NoCandidates) => Vec::new(),
            Err(e) => {
                return Err(DialogError::Internal {
                    stage: Stage::Classification,
                    message: e.to_string(),
                })
            }
        };
        let mut entities: Vec<EntityId> = Vec::new();
        for id in mentions.iter().flat_map(Mention::entity_ids) {
            if !entities.contains(id) {
                entities.push(id.clone());
            }
        }
        Ok(Understood {
            question: question.to_owned(),
            mentions,
            masked: masked.text,
            scores,
            entities,
        })
    }

    fn recognized<'s>(&self, scores: &'s [PropertyScore]) -> Vec<&'s PropertyScore> {
        scores
            .iter()
            .filter(|s| s.score >= self.config.property_threshold)
            .collect()
    }

    /// Generates, binds and ranks graphs for recognized entities and properties.
    fn interpret(&self, u: &Understood, kb: &KnowledgeBase) -> Vec<RankedGraph> {
        if u.entities.is_empty() {
            return Vec::new();
        }
        let recognized: Vec<PropertyScore> = self.recognized(&u.scores).into_iter().cloned().collect();
        if recognized.is_empty() {
            return Vec::new();
        }
        let Ok(graphs) = generate(&u.mentions, &recognized, kb.model()) else {
            return Vec::new();
        };
        let bind = BindConfig {
            tau: self.config.tau,
            max_depth: self.config.max_depth,
        };
        let bound: Vec<QueryGraph> = graphs
            .iter()
            .map(|g| bind_constraints(g, &u.question, &u.mentions, kb.model(), &bind))
            .collect();
        rank(&u.question, bound, self.weights, kb.model(), self.features)
    }

    fn execute_top(&self, ranked: &[RankedGraph], kb: &KnowledgeBase) -> Result<Option<Answer>, DialogError> {
        let Some(top) = ranked.first() else {
            return Ok(None);
        };
        let ctx = ExecutionContext {
            templates: self.templates,
            max_depth: self.config.max_depth,
        };
        execute(&top.graph, kb.model(), &ctx)
            .map(Some)
            .map_err(|e| DialogError::Internal {
                stage: Stage::Execution,
                message: e.to_string(),
            })
    }

    /// True when `question` alone, with no session, is answered.
    pub fn is_answered(&self, question: &str, kb: &KnowledgeBase) -> bool {
        let Ok(u) = self.understand(question, kb) else {
            return false;
        };
        let ranked = self.interpret(&u, kb);
        matches!(self.execute_top(&ranked, kb), Ok(Some(a)) if a.is_answered())
    }

    /// Runs the whole pipeline. Pure in `(req, kb, self, session)`.
    pub fn answer(
        &self,
        req: &AskRequest,
        kb: &KnowledgeBase,
        session: Option<&SessionContext>,
    ) -> Result<(AskResponse, SessionUpdate), DialogError> {
        let u = self.understand(&req.question, kb)?;
        let ranked = self.interpret(&u, kb);
        let answer = self.execute_top(&ranked, kb)?;
        let k = req
            .top_k_override
            .unwrap_or(self.config.recommendations)
            .min(MAX_RECOMMENDATIONS);

        let (status, recommendations) = match &answer {
            Some(a) if a.is_answered() => (Status::Answered, Vec::new()),
            Some(_) => (Status::NoMatch, Vec::new()),
            None => {
                let recs = self.recommend(&u.mentions, &u.scores, session, kb, k);
                let status = if recs.is_empty() {
                    Status::NoMatch
                } else {
                    Status::Recommended
                };
                (status, recs)
            }
        };

        let class = ranked
            .first()
            .map(|r| &r.graph.topic_entity)
            .or(u.entities.first())
            .and_then(|e| kb.entity(e.as_str()))
            .map(|e| e.instance_of.clone());
        let update = SessionUpdate {
            entities: u.entities.clone(),
            class,
        };
        let debug = req.debug.then(|| DebugInfo {
            kb_version: kb.version(),
            mentions: u.mentions.clone(),
            masked: u.masked.clone(),
            property_scores: u.scores.clone(),
            graphs: ranked,
        });
        Ok((
            AskResponse {
                status,
                answer,
                recommendations,
                debug,
            },
            update,
        ))
    }

    /// Up to `k` templated questions, each verified to be answered when
    /// submitted back on this snapshot.
    pub fn recommend(
        &self,
        mentions: &[Mention],
        scores: &[PropertyScore],
        session: Option<&SessionContext>,
        kb: &KnowledgeBase,
        k: usize,
    ) -> Vec<Recommendation> {
        let model = kb.model();
        let k = k.min(MAX_RECOMMENDATIONS);
        let session_entities: Vec<&EntityId> = session.map(|s| s.last_entities.iter().collect()).unwrap_or_default();
        let mut entity_ids: Vec<EntityId> = Vec::new();
        for id in mentions.iter().flat_map(Mention::entity_ids) {
            if !entity_ids.contains(id) {
                entity_ids.push(id.clone());
            }
        }
        let recognized = self.recognized(scores);

        // Each group is an anchor with its chains in preference order.
        let mut groups: Vec<(EntityId, Vec<PropertyChain>)> = Vec::new();
        if !entity_ids.is_empty() {
            for id in &entity_ids {
                let Some(m) = mentions.iter().find(|m| m.entity_ids().any(|e| e == id)) else {
                    continue;
                };
                let single = Mention {
                    targets: vec![crate::store::MentionTarget::Entity { entity_id: id.clone() }],
                    ..m.clone()
                };
                let mut chains = candidate_chains(model, std::slice::from_ref(&single));
                let position = |c: &PropertyChain| scores.iter().position(|s| &s.property_chain == c);
                chains.sort_by_key(|c| position(c).unwrap_or(usize::MAX));
                groups.push((id.clone(), chains));
            }
        } else {
            let ordered = session_entities
                .iter()
                .map(|e| (*e).clone())
                .chain(model.entities().iter().map(|e| e.id.clone()));
            let mut seen = Vec::new();
            for id in ordered {
                if seen.contains(&id) || model.entity(id.as_str()).is_none() {
                    continue;
                }
                seen.push(id.clone());
                let own = model
                    .entity(id.as_str())
                    .map(|e| model.class_chains(e.instance_of.as_str()))
                    .unwrap_or_default();
                let chains: Vec<PropertyChain> = if recognized.is_empty() {
                    own
                } else {
                    recognized
                        .iter()
                        .map(|s| s.property_chain.clone())
                        .filter(|c| own.contains(c) || self.reaches_by_hop(kb, &id, c))
                        .collect()
                };
                if !chains.is_empty() {
                    groups.push((id, chains));
                }
            }
        }

        let mut out: Vec<Recommendation> = Vec::new();
        let try_push = |entity: &EntityId, chain: &PropertyChain, out: &mut Vec<Recommendation>| {
            let Some(text) = self.render_recommendation(kb, entity, chain) else {
                return;
            };
            if out.iter().any(|r| r.payload == text) || !self.is_answered(&text, kb) {
                return;
            }
            out.push(Recommendation {
                text: text.clone(),
                payload: text,
            });
        };
        let single_anchor = !entity_ids.is_empty();
        if single_anchor {
            // One anchor per recognized entity: take its chains in order.
            'outer: for (entity, chains) in &groups {
                for chain in chains {
                    if out.len() >= k {
                        break 'outer;
                    }
                    try_push(entity, chain, &mut out);
                }
            }
        } else {
            // First one per entity, then fill from the remaining chains.
            let mut used = vec![0usize; groups.len()];
            for (g, (entity, chains)) in groups.iter().enumerate() {
                if out.len() >= k {
                    break;
                }
                for (i, chain) in chains.iter().enumerate() {
                    let before = out.len();
                    try_push(entity, chain, &mut out);
                    if out.len() > before {
                        used[g] = i + 1;
                        break;
                    }
                    used[g] = i + 1;
                }
            }
            'fill: for (g, (entity, chains)) in groups.iter().enumerate() {
                for chain in &chains[used[g]..] {
                    if out.len() >= k {
                        break 'fill;
                    }
                    try_push(entity, chain, &mut out);
                }
            }
        }
        out
    }

    fn reaches_by_hop(&self, kb: &KnowledgeBase, entity: &EntityId, chain: &PropertyChain) -> bool {
        let model = kb.model();
        let Some(domain) = model.property(chain.leaf().as_str()).map(|p| &p.domain_class) else {
            return false;
        };
        model.entity(entity.as_str()).is_some_and(|e| {
            e.member_of
                .iter()
                .filter_map(|r| model.entity(r.as_str()))
                .any(|r| &r.instance_of == domain)
        })
    }

    pub fn render_recommendation(
        &self,
        kb: &KnowledgeBase,
        entity: &EntityId,
        chain: &PropertyChain,
    ) -> Option<String> {
        let leaf = kb.property(chain.leaf().as_str())?;
        let label = EntityLabel::of(kb.model(), entity);
        Some(fill(
            &self.templates.recommendation,
            &[("entity", label.display(self.templates)), ("property", &leaf.name)],
        ))
    }
}

/// A long-lived engine over a reloadable snapshot with session memory.
pub struct Engine {
    store: Arc<SnapshotStore>,
    weights: RankWeights,
    config: EngineConfig,
    classifier: Box<dyn PropertyClassifier>,
    templates: TemplateRegistry,
    features: FeatureConfig,
    sessions: SessionStore,
}

impl Engine {
    pub fn new(store: Arc<SnapshotStore>, weights: RankWeights, config: EngineConfig) -> Result<Self, DialogError> {
        Self::with_templates(store, weights, config, TemplateRegistry::builtin())
    }

    pub fn with_templates(
        store: Arc<SnapshotStore>,
        weights: RankWeights,
        config: EngineConfig,
        templates: TemplateRegistry,
    ) -> Result<Self, DialogError> {
        let classifier = classifier_by_name(&config.classifier)
            .ok_or_else(|| DialogError::UnknownClassifier(config.classifier.clone()))?;
        templates.get(&config.locale)?;
        Ok(Self {
            store,
            weights,
            features: FeatureConfig::with_stop_chars(&config.stop_chars),
            sessions: SessionStore::new(Duration::from_secs(config.session_ttl_secs)),
            config,
            classifier,
            templates,
        })
    }

    pub fn store(&self) -> &Arc<SnapshotStore> {
        &self.store
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn weights(&self) -> &RankWeights {
        &self.weights
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    pub fn pipeline(&self) -> Pipeline<'_> {
        Pipeline {
            weights: &self.weights,
            config: &self.config,
            classifier: self.classifier.as_ref(),
            templates: self
                .templates
                .get(&self.config.locale)
                .expect("locale checked at construction"),
            features: &self.features,
        }
    }

    pub fn ask(&self, req: &AskRequest) -> Result<AskResponse, DialogError> {
        if req.question.trim().is_empty() {
            return Err(DialogError::EmptyQuestion);
        }
        let kb = self.store.load().ok_or(DialogError::Unavailable)?;
        self.ask_on(req, &kb)
    }

    /// Same as [`Engine::ask`] against a given snapshot.
    pub fn ask_on(&self, req: &AskRequest, kb: &KnowledgeBase) -> Result<AskResponse, DialogError> {
        let now = Instant::now();
        let session = req.session_id.as_deref().and_then(|id| self.sessions.get(id, now));
        let (response, update) = self.pipeline().answer(req, kb, session.as_ref())?;
        if let Some(id) = &req.session_id {
            self.sessions.observe(id, &update.entities, update.class, now);
        }
        Ok(response)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_expiry_and_bounds() {
        let store = SessionStore::new(Duration::from_secs(10));
        let t0 = Instant::now();
        let ids: Vec<EntityId> = (0..7).map(|i| EntityId::from(format!("e{i}"))).collect();
        store.observe("a", &ids, None, t0);
        let ctx = store.get("a", t0).unwrap();
        assert_eq!(ctx.last_entities.len(), SESSION_ENTITY_LIMIT);
        assert_eq!(ctx.last_entities[0], "e0");
        assert!(store.get("b", t0).is_none());
        assert!(store.get("a", t0 + Duration::from_secs(11)).is_none());
        assert!(store.is_empty());
    }

    #[test]
    fn expired_session_restarts_empty() {
        let store = SessionStore::new(Duration::from_secs(1));
        let t0 = Instant::now();
        store.observe("a", &["x".into()], None, t0);
        store.observe("a", &["y".into()], None, t0 + Duration::from_secs(5));
        let ctx = store.get("a", t0 + Duration::from_secs(5)).unwrap();
        assert_eq!(ctx.last_entities, VecDeque::from([EntityId::from("y")]));
    }

    #[test]
    fn default_config_values() {
        let c = EngineConfig::default();
        assert_eq!(c.session_ttl_secs, 1800);
        assert_eq!(c.recommendations, 3);
        assert_eq!(c.max_depth, 3);
    }
}
