//! Brute-force reference implementations. Each one enumerates instead of
//! searching and shares no code with the engine beyond the data types.

use std::collections::{BTreeSet, HashMap, HashSet};

use kbqa_core::graph::{GraphShape, QueryGraph};
use kbqa_core::model::{CellValue, ColumnRole, CvtRow, EntityId, KnowledgeModel, PropertyChain};
use kbqa_core::ranking::{FeatureConfig, RankWeights};
use kbqa_core::store::fold_char;
use kbqa_core::understanding::{Mention, PropertyScore};

/// What the generator is expected to emit, as comparable tuples:
/// (topic entity, chain key, is_cvt, generalization target).
pub type GraphSignature = (String, String, bool, Option<String>);

pub fn signature(g: &QueryGraph) -> GraphSignature {
    (
        g.topic_entity.to_string(),
        g.chain.key(),
        g.is_cvt(),
        g.inferred_domain.as_ref().map(|h| h.to.to_string()),
    )
}

/// Crosses every entity with every chain in the model and keeps the pairs
/// that are mentioned, scored and domain-compatible.
pub fn expected_graphs(
    mentions: &[Mention],
    scores: &[PropertyScore],
    model: &KnowledgeModel,
) -> BTreeSet<GraphSignature> {
    let mentioned: HashSet<&EntityId> = mentions.iter().flat_map(|m| m.entity_ids()).collect();
    let scored: HashSet<&PropertyChain> = scores.iter().map(|s| &s.property_chain).collect();
    let mut out = BTreeSet::new();
    for entity in model.entities() {
        if !mentioned.contains(&entity.id) {
            continue;
        }
        for chain in model.all_chains() {
            if !scored.contains(&chain) {
                continue;
            }
            let leaf = model.property(chain.leaf().as_str()).unwrap();
            let domain = &leaf.domain_class;
            let reps_in_domain: Vec<&EntityId> = entity
                .member_of
                .iter()
                .filter(|r| model.entity(r.as_str()).map(|e| &e.instance_of) == Some(domain))
                .collect();
            let reifying_rep = reps_in_domain.iter().find(|r| {
                model
                    .values()
                    .iter()
                    .any(|v| v.entity_id == ***r && v.leaf_property_id == leaf.id)
            });
            let self_reifies = model
                .values()
                .iter()
                .any(|v| v.entity_id == entity.id && v.leaf_property_id == leaf.id);
            let target = if entity.instance_of == *domain {
                if leaf.infer_domain && !self_reifies {
                    reifying_rep.map(|r| r.to_string())
                } else {
                    None
                }
            } else if let Some(first) = reps_in_domain.first() {
                Some(reifying_rep.unwrap_or(first).to_string())
            } else {
                continue;
            };
            let is_cvt = matches!(leaf.range, Some(kbqa_core::model::ValueTypeSpec::Cvt { .. }));
            out.insert((entity.id.to_string(), chain.key(), is_cvt, target));
        }
    }
    out
}

/// Rows where every `(column, value)` pair holds, by scanning all rows.
pub fn scan_rows(rows: &[CvtRow], constraints: &[(String, CellValue)]) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut ok = true;
        for (col, value) in constraints {
            match row.cells.get(col) {
                Some(cell) if cell == value => {}
                _ => ok = false,
            }
        }
        if ok {
            out.push(i);
        }
    }
    out
}

/// Independent recount of the seven ranking features, in weight order.
pub fn recount_features(question: &str, g: &QueryGraph, model: &KnowledgeModel, config: &FeatureConfig) -> [f64; 7] {
    let surface = g.provenance.topic_mention.surface.chars().count() as f64;
    let name = model
        .entity(g.topic_entity.as_str())
        .map_or(surface, |e| e.name.chars().count() as f64);
    let entity_match = if surface == 0.0 {
        0.0
    } else {
        surface / surface.max(name)
    };

    let bound = g.constraints().len();
    let coverage = match &g.shape {
        GraphShape::Basic => 1.0,
        GraphShape::Cvt { .. } => {
            let conditions = model.range_schema(g.chain.leaf().as_str()).map_or(0, |s| {
                s.columns.iter().filter(|c| c.role == ColumnRole::Condition).count()
            });
            if conditions == 0 {
                1.0
            } else {
                bound as f64 / conditions as f64
            }
        }
    };

    let mut covered = vec![false; question.len()];
    let spans = std::iter::once(g.provenance.topic_mention.byte_span)
        .chain(g.constraints().iter().map(|c| c.source_mention.byte_span));
    for (s, e) in spans {
        for flag in &mut covered[s..e] {
            *flag = true;
        }
    }
    let (mut content, mut explained) = (0u32, 0u32);
    for (i, c) in question.char_indices() {
        if c.is_whitespace() || config.stop_chars.contains(&c) {
            continue;
        }
        content += 1;
        explained += covered[i] as u32;
    }
    let tokens = if content == 0 {
        0.0
    } else {
        explained as f64 / content as f64
    };

    [
        entity_match,
        g.provenance.property_score.clamp(0.0, 1.0),
        (bound as f64 / 4.0).min(1.0),
        coverage,
        tokens,
        if g.inferred_domain.is_some() || g.inferred_range.is_some() {
            1.0
        } else {
            0.0
        },
        if g.is_cvt() { 1.0 } else { 0.0 },
    ]
}

pub fn recount_score(features: &[f64; 7], w: &RankWeights) -> f64 {
    let w = [
        w.entity_match,
        w.property_score,
        w.constraint_count,
        w.constraint_coverage,
        w.token_coverage,
        w.inference_penalty,
        w.shape_is_cvt,
    ];
    let mut total = 0.0;
    for k in 0..7 {
        total += features[k] * w[k];
    }
    total
}

/// Orders graph keys by counting, for each graph, how many others beat it.
pub fn expected_order(
    question: &str,
    graphs: &[QueryGraph],
    weights: &RankWeights,
    model: &KnowledgeModel,
    config: &FeatureConfig,
) -> Vec<String> {
    let scored: Vec<(f64, usize, usize, String)> = graphs
        .iter()
        .map(|g| {
            let s = recount_score(&recount_features(question, g, model, config), weights);
            let hops = g.inferred_domain.is_some() as usize + g.inferred_range.is_some() as usize;
            (s, hops, g.constraints().len(), g.key())
        })
        .collect();
    let beats = |a: &(f64, usize, usize, String), b: &(f64, usize, usize, String)| {
        if a.0 != b.0 {
            return a.0 > b.0;
        }
        if a.1 != b.1 {
            return a.1 < b.1;
        }
        if a.2 != b.2 {
            return a.2 > b.2;
        }
        a.3 < b.3
    };
    let mut slots: Vec<Option<String>> = vec![None; scored.len()];
    for a in &scored {
        let position = scored.iter().filter(|b| beats(b, a)).count();
        slots[position] = Some(a.3.clone());
    }
    slots.into_iter().map(|s| s.expect("keys are distinct")).collect()
}

/// Outcome of walking `member_of` edges looking for an entity that
/// reifies a leaf.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Generalized {
    Found { target: String, depth: usize },
    Ambiguous(BTreeSet<String>),
    NotFound,
}

/// Enumerates every `member_of` path of length at most `max_depth` and
/// keeps the reifying endpoints at the smallest distance.
pub fn generalize_by_paths(model: &KnowledgeModel, entity: &str, leaf: &str, max_depth: usize) -> Generalized {
    let edges: HashMap<&str, Vec<&str>> = model
        .entities()
        .iter()
        .map(|e| (e.id.as_str(), e.member_of.iter().map(|t| t.as_str()).collect()))
        .collect();
    let mut distance: HashMap<String, usize> = HashMap::new();
    let mut stack: Vec<Vec<&str>> = vec![vec![entity]];
    while let Some(path) = stack.pop() {
        let last = *path.last().unwrap();
        let d = path.len() - 1;
        let best = distance.entry(last.to_owned()).or_insert(d);
        *best = (*best).min(d);
        if d == max_depth {
            continue;
        }
        for next in edges.get(last).into_iter().flatten() {
            if !path.contains(next) {
                let mut longer = path.clone();
                longer.push(next);
                stack.push(longer);
            }
        }
    }
    let reifies = |e: &str| {
        model
            .values()
            .iter()
            .any(|v| v.entity_id == e && v.leaf_property_id == leaf)
    };
    let Some(min) = distance.iter().filter(|(e, _)| reifies(e)).map(|(_, d)| *d).min() else {
        return Generalized::NotFound;
    };
    let at_min: BTreeSet<String> = distance
        .iter()
        .filter(|(e, d)| **d == min && reifies(e))
        .map(|(e, _)| e.clone())
        .collect();
    if at_min.len() == 1 {
        Generalized::Found {
            target: at_min.into_iter().next().unwrap(),
            depth: min,
        }
    } else {
        Generalized::Ambiguous(at_min)
    }
}

/// Leftmost-longest matches of `keys` in `text`, found by trying every end
/// position at every start. Keys compare under per-character folding.
pub fn scan_matches(keys: &HashSet<String>, text: &str) -> Vec<(usize, usize)> {
    let fold = |s: &str| s.chars().map(fold_char).collect::<String>();
    let folded: HashSet<String> = keys.iter().map(|k| fold(k)).collect();
    let bounds: Vec<usize> = text.char_indices().map(|(i, _)| i).chain([text.len()]).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < bounds.len() {
        let mut best = None;
        for j in i + 1..bounds.len() {
            if folded.contains(&fold(&text[bounds[i]..bounds[j]])) {
                best = Some(j);
            }
        }
        match best {
            Some(j) => {
                out.push((bounds[i], bounds[j]));
                i = j;
            }
            None => i += 1,
        }
    }
    out
}
