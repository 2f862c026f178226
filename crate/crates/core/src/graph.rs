//! Candidate query graphs: basic `(e, p, v)` and CVT `(e, p, v_cvt, r, x)`
//! graphs, plus rule- and similarity-based constraint binding onto the
//! CVT node.

use std::collections::{HashSet, VecDeque};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{CellValue, ColumnRole, CvtSchema, EntityId, KnowledgeModel, PropertyChain, Value, ValueDomain};
use crate::store::MentionTarget;
use crate::understanding::{Mention, PropertyScore};

/// Default similarity threshold for fuzzy constraint matching.
pub const DEFAULT_TAU: f64 = 0.8;

/// Shortest cell value, in scalars, eligible for similarity matching.
pub const MIN_FUZZY_CHARS: usize = 2;

const SIMILARITY_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("no query graph could be generated")]
    NoGraphs,
}

/// One `member_of` step from a specific entity to a class representative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MemberHop {
    pub from: EntityId,
    pub to: EntityId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    #[serde(rename = "=")]
    Equal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub column: String,
    pub relation: Relation,
    /// Literal cell value; entity id for entity-ref columns.
    pub value: CellValue,
    pub source_mention: Mention,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphShape {
    Basic,
    Cvt {
        answer_column: String,
        constraints: Vec<Constraint>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub topic_mention: Mention,
    pub property_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryGraph {
    pub topic_entity: EntityId,
    pub chain: PropertyChain,
    pub shape: GraphShape,
    pub inferred_domain: Option<MemberHop>,
    pub inferred_range: Option<MemberHop>,
    pub provenance: Provenance,
}

impl QueryGraph {
    pub fn constraints(&self) -> &[Constraint] {
        match &self.shape {
            GraphShape::Basic => &[],
            GraphShape::Cvt { constraints, .. } => constraints,
        }
    }

    pub fn is_cvt(&self) -> bool {
        matches!(self.shape, GraphShape::Cvt { .. })
    }

    /// Number of `member_of` annotations on the graph.
    pub fn inference_hops(&self) -> usize {
        self.inferred_domain.is_some() as usize + self.inferred_range.is_some() as usize
    }

    /// Deterministic identity covering entity, chain, shape and constraints.
    pub fn key(&self) -> String {
        let shape = match &self.shape {
            GraphShape::Basic => "basic".to_string(),
            GraphShape::Cvt { constraints, .. } => {
                let mut parts: Vec<String> = constraints
                    .iter()
                    .map(|c| format!("{}={}", c.column, c.value))
                    .collect();
                parts.sort();
                format!("cvt[{}]", parts.join(","))
            }
        };
        format!("{}|{}|{}", self.topic_entity, self.chain.key(), shape)
    }
}

impl fmt::Display for QueryGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            GraphShape::Basic => write!(f, "({}, {}, v)", self.topic_entity, self.chain),
            GraphShape::Cvt {
                answer_column,
                constraints,
            } => {
                write!(f, "({}, {}, v_cvt, {answer_column}, x)", self.topic_entity, self.chain)?;
                for c in constraints {
                    write!(f, " + (v_cvt, {}, {})", c.column, c.value)?;
                }
                Ok(())
            }
        }
    }
}

/// Emits one graph per (recognized entity, scored chain) pair whose chain
/// belongs to the entity's class, or to the class of one of its
/// `member_of` targets. Duplicates on (entity, chain, shape) keep the first.
pub fn generate(
    mentions: &[Mention],
    property_scores: &[PropertyScore],
    model: &KnowledgeModel,
) -> Result<Vec<QueryGraph>, GraphError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for mention in mentions {
        for entity_id in mention.entity_ids() {
            let Some(entity) = model.entity(entity_id.as_str()) else {
                continue;
            };
            for scored in property_scores {
                let chain = &scored.property_chain;
                let leaf_id = chain.leaf().as_str();
                let Some(leaf) = model.property(leaf_id) else {
                    continue;
                };
                let via_hop: Vec<&EntityId> = entity
                    .member_of
                    .iter()
                    .filter(|r| {
                        model
                            .entity(r.as_str())
                            .is_some_and(|r| r.instance_of == leaf.domain_class)
                    })
                    .collect();
                let direct = entity.instance_of == leaf.domain_class;
                if !direct && via_hop.is_empty() {
                    continue;
                }
                let inferred_domain = if direct {
                    if leaf.infer_domain && !model.reifies(entity_id.as_str(), leaf_id) {
                        via_hop
                            .iter()
                            .find(|r| model.reifies(r.as_str(), leaf_id))
                            .map(|r| MemberHop {
                                from: entity_id.clone(),
                                to: (*r).clone(),
                            })
                    } else {
                        None
                    }
                } else {
                    let target = via_hop
                        .iter()
                        .find(|r| model.reifies(r.as_str(), leaf_id))
                        .unwrap_or(&via_hop[0]);
                    Some(MemberHop {
                        from: entity_id.clone(),
                        to: (*target).clone(),
                    })
                };
                let shape = match model.range_schema(leaf_id).and_then(CvtSchema::answer_column) {
                    Some(answer) => GraphShape::Cvt {
                        answer_column: answer.column_name.clone(),
                        constraints: Vec::new(),
                    },
                    None => GraphShape::Basic,
                };
                let graph = QueryGraph {
                    topic_entity: entity_id.clone(),
                    chain: chain.clone(),
                    shape,
                    inferred_domain,
                    inferred_range: None,
                    provenance: Provenance {
                        topic_mention: mention.clone(),
                        property_score: scored.score,
                    },
                };
                if seen.insert(graph.key()) {
                    out.push(graph);
                }
            }
        }
    }
    if out.is_empty() {
        Err(GraphError::NoGraphs)
    } else {
        Ok(out)
    }
}

/// `1 - levenshtein(a, b) / max(|a|, |b|)` over Unicode scalars.
pub fn similarity(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

/// Whether `sim` clears the threshold, tolerant to float rounding of
/// values like `1 - 1/5`.
pub fn passes_threshold(sim: f64, tau: f64) -> bool {
    sim + SIMILARITY_EPSILON >= tau
}

/// Breadth-first walk over `member_of` edges from `start` (depth 0) to the
/// shallowest entities accepted by `accept`, at most `max_depth` hops away.
/// Returns every accepted entity at that depth with its discovery path.
pub fn member_of_search(
    model: &KnowledgeModel,
    start: &EntityId,
    max_depth: usize,
    mut accept: impl FnMut(&EntityId) -> bool,
) -> Vec<(EntityId, Vec<MemberHop>)> {
    let mut frontier: VecDeque<(EntityId, Vec<MemberHop>)> = VecDeque::from([(start.clone(), Vec::new())]);
    let mut visited = HashSet::from([start.clone()]);
    for depth in 0..=max_depth {
        let found: Vec<_> = frontier.iter().filter(|(e, _)| accept(e)).cloned().collect();
        if !found.is_empty() || depth == max_depth {
            return found;
        }
        let mut next = VecDeque::new();
        for (entity, path) in frontier {
            let Some(e) = model.entity(entity.as_str()) else {
                continue;
            };
            for target in &e.member_of {
                if visited.insert(target.clone()) {
                    let mut path = path.clone();
                    path.push(MemberHop {
                        from: entity.clone(),
                        to: target.clone(),
                    });
                    next.push_back((target.clone(), path));
                }
            }
        }
        if next.is_empty() {
            return Vec::new();
        }
        frontier = next;
    }
    Vec::new()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BindConfig {
    pub tau: f64,
    pub max_depth: usize,
}

impl Default for BindConfig {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            max_depth: 3,
        }
    }
}

/// The entity whose table a CVT graph reads: the annotated generalization,
/// the topic itself, or the nearest reifying `member_of` ancestor.
pub fn table_owner(graph: &QueryGraph, model: &KnowledgeModel, max_depth: usize) -> Option<EntityId> {
    let leaf = graph.chain.leaf().as_str();
    let start = graph
        .inferred_domain
        .as_ref()
        .map(|h| &h.to)
        .unwrap_or(&graph.topic_entity);
    let found = member_of_search(model, start, max_depth, |e| model.reifies(e.as_str(), leaf));
    (found.len() == 1).then(|| found[0].0.clone())
}

struct Candidate {
    value: CellValue,
    surface: String,
    span: (usize, usize),
    targets: Vec<MentionTarget>,
    hop: Option<MemberHop>,
}

/// Attaches at most one equality constraint per condition column. The rule
/// pass takes recognized mentions whose target (or a `member_of` ancestor
/// of it) is a cell value of the column; the similarity pass then tries
/// question substrings against the column's distinct values. The topic
/// mention never binds, and a span binds at most one column.
pub fn bind_constraints(
    graph: &QueryGraph,
    question: &str,
    mentions: &[Mention],
    model: &KnowledgeModel,
    config: &BindConfig,
) -> QueryGraph {
    let mut out = graph.clone();
    out.inferred_range = None;
    let GraphShape::Cvt { constraints, .. } = &mut out.shape else {
        return out;
    };
    constraints.clear();
    let leaf = graph.chain.leaf().as_str();
    let (Some(schema), Some(owner)) = (model.range_schema(leaf), table_owner(graph, model, config.max_depth)) else {
        return out;
    };
    let Some(Value::CvtTable { rows, .. }) = model.value(owner.as_str(), leaf).map(|v| &v.value) else {
        return out;
    };

    let mut used: Vec<(usize, usize)> = vec![graph.provenance.topic_mention.byte_span];
    let free = |span: (usize, usize), used: &[(usize, usize)]| used.iter().all(|u| span.1 <= u.0 || u.1 <= span.0);
    let mut inferred_range = None;

    for column in schema.columns.iter().filter(|c| c.role == ColumnRole::Condition) {
        let mut values: Vec<&CellValue> = Vec::new();
        for row in rows {
            if let Some(v) = row.get(&column.column_name) {
                if !values.contains(&v) {
                    values.push(v);
                }
            }
        }
        let in_column = |text: &str| values.iter().any(|v| v.as_text() == Some(text));

        let mut rule: Option<Candidate> = None;
        let mut rule_generalized: Option<Candidate> = None;
        for m in mentions.iter().filter(|m| free(m.byte_span, &used)) {
            for target in &m.targets {
                let candidate = |value: &str, hop: Option<MemberHop>| Candidate {
                    value: CellValue::Text(value.to_owned()),
                    surface: m.surface.clone(),
                    span: m.byte_span,
                    targets: m.targets.clone(),
                    hop,
                };
                match (column.value_domain, target) {
                    (ValueDomain::Text, MentionTarget::Literal { value, .. }) if in_column(value) => {
                        rule.get_or_insert_with(|| candidate(value, None));
                    }
                    (ValueDomain::EntityRef, MentionTarget::Entity { entity_id }) => {
                        if in_column(entity_id.as_str()) {
                            rule.get_or_insert_with(|| candidate(entity_id.as_str(), None));
                        } else if rule_generalized.is_none() {
                            let found = member_of_search(model, entity_id, config.max_depth, |e| in_column(e.as_str()));
                            if let [(_, path)] = found.as_slice() {
                                rule_generalized = Some(candidate(
                                    entity_id.as_str(),
                                    Some(MemberHop {
                                        from: entity_id.clone(),
                                        to: path.last().expect("non-empty path").to.clone(),
                                    }),
                                ));
                            }
                        }
                    }
                    _ => {}
                }
            }
        }

        let chosen = rule.or(rule_generalized).or_else(|| {
            similarity_candidate(
                question,
                column.value_domain,
                &values,
                &used,
                model,
                config.tau,
                schema,
                &column.column_name,
            )
        });
        if let Some(c) = chosen {
            used.push(c.span);
            if inferred_range.is_none() {
                inferred_range = c.hop;
            }
            constraints.push(Constraint {
                column: column.column_name.clone(),
                relation: Relation::Equal,
                value: c.value,
                source_mention: Mention {
                    surface: c.surface,
                    byte_span: c.span,
                    targets: c.targets,
                },
            });
        }
    }
    out.inferred_range = inferred_range;
    out
}

#[allow(clippy::too_many_arguments)]
fn similarity_candidate(
    question: &str,
    domain: ValueDomain,
    values: &[&CellValue],
    used: &[(usize, usize)],
    model: &KnowledgeModel,
    tau: f64,
    schema: &CvtSchema,
    column: &str,
) -> Option<Candidate> {
    // (cell value, surface form to compare, mention target)
    let mut forms: Vec<(CellValue, String, MentionTarget)> = Vec::new();
    for value in values {
        match (domain, value) {
            (ValueDomain::Text, CellValue::Text(s)) => forms.push((
                (*value).clone(),
                s.clone(),
                MentionTarget::Literal {
                    value: s.clone(),
                    schema_id: schema.id.clone(),
                    column: column.to_owned(),
                },
            )),
            (ValueDomain::Integer, CellValue::Integer(i)) => forms.push((
                (*value).clone(),
                i.to_string(),
                MentionTarget::Literal {
                    value: i.to_string(),
                    schema_id: schema.id.clone(),
                    column: column.to_owned(),
                },
            )),
            (ValueDomain::EntityRef, CellValue::Text(id)) => {
                if let Some(entity) = model.entity(id) {
                    for form in entity.surface_forms() {
                        forms.push((
                            (*value).clone(),
                            form.to_owned(),
                            MentionTarget::Entity {
                                entity_id: entity.id.clone(),
                            },
                        ));
                    }
                }
            }
            _ => {}
        }
    }

    let boundaries: Vec<usize> = question
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(question.len()))
        .collect();
    let n = boundaries.len() - 1;
    let mut best: Option<(f64, usize, usize, Candidate)> = None;
    for (form_idx, (value, form, target)) in forms.iter().enumerate() {
        let len = form.chars().count();
        if len < MIN_FUZZY_CHARS {
            continue;
        }
        let min_len = ((len as f64) * tau).ceil().max(1.0) as usize;
        let max_len = ((len as f64) / tau).floor() as usize;
        for start in 0..n {
            for sub_len in min_len..=max_len.min(n - start) {
                let span = (boundaries[start], boundaries[start + sub_len]);
                if !used.iter().all(|u| span.1 <= u.0 || u.1 <= span.0) {
                    continue;
                }
                let surface = &question[span.0..span.1];
                let sim = similarity(&surface.to_lowercase(), &form.to_lowercase());
                if !passes_threshold(sim, tau) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some((s, st, fi, _)) => {
                        sim > *s + SIMILARITY_EPSILON
                            || ((sim - *s).abs() <= SIMILARITY_EPSILON && (span.0, form_idx) < (*st, *fi))
                    }
                };
                if better {
                    best = Some((
                        sim,
                        span.0,
                        form_idx,
                        Candidate {
                            value: value.clone(),
                            surface: surface.to_owned(),
                            span,
                            targets: vec![target.clone()],
                            hop: None,
                        },
                    ));
                }
            }
        }
    }
    best.map(|(_, _, _, c)| c)
}

/// Checks the structural invariants of a graph against the model.
pub fn validate_graph(graph: &QueryGraph, model: &KnowledgeModel) -> Result<(), String> {
    let leaf = graph.chain.leaf().as_str();
    if model.entity(graph.topic_entity.as_str()).is_none() {
        return Err(format!("unknown topic entity `{}`", graph.topic_entity));
    }
    let expected = crate::model::property_chain_of(leaf, model).map_err(|e| e.to_string())?;
    if expected != graph.chain {
        return Err(format!("chain {} is not the chain of its leaf", graph.chain));
    }
    match (&graph.shape, model.range_schema(leaf)) {
        (GraphShape::Basic, None) => Ok(()),
        (GraphShape::Basic, Some(_)) => Err("cvt-ranged leaf with basic shape".into()),
        (GraphShape::Cvt { .. }, None) => Err("cvt shape on a non-cvt leaf".into()),
        (
            GraphShape::Cvt {
                answer_column,
                constraints,
            },
            Some(schema),
        ) => {
            if schema.answer_column().map(|c| &c.column_name) != Some(answer_column) {
                return Err(format!("`{answer_column}` is not the answer column"));
            }
            let mut seen = HashSet::new();
            for c in constraints {
                let Some(column) = schema.column(&c.column) else {
                    return Err(format!("unknown column `{}`", c.column));
                };
                if column.role != ColumnRole::Condition {
                    return Err(format!("constraint on non-condition column `{}`", c.column));
                }
                if !seen.insert(&c.column) {
                    return Err(format!("two constraints on `{}`", c.column));
                }
                if !c.value.matches_domain(column.value_domain) {
                    return Err(format!("constraint value `{}` has the wrong type", c.value));
                }
            }
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity("淘抢购", "淘抢购"), 1.0);
        assert!((similarity("淘抢购啊", "淘抢购") - 0.75).abs() < 1e-12);
        assert!(passes_threshold(similarity("abcde", "abcdx"), 0.8));
        assert!(!passes_threshold(similarity("abcd", "abcx"), 0.8));
        assert_eq!(similarity("", ""), 1.0);
    }
}
