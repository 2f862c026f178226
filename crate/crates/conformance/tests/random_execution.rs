use std::sync::Arc;

use kbqa_conformance::oracle::{generalize_by_paths, scan_rows, Generalized};
use kbqa_conformance::random_kb;
use kbqa_core::graph::{Constraint, GraphShape, Provenance, QueryGraph, Relation};
use kbqa_core::model::{property_chain_of, CellValue, ColumnRole, Value};
use kbqa_core::reasoning::{execute, generalize, AnswerBody, ExecutionContext, ReasoningError, DEFAULT_MAX_DEPTH};
use kbqa_core::store::KnowledgeBase;
use kbqa_core::templates::TemplateRegistry;
use kbqa_core::understanding::Mention;
use kbqa_core::{AskRequest, Engine, EngineConfig, RankWeights, SnapshotStore};
use proptest::prelude::*;

fn no_mention() -> Mention {
    Mention {
        surface: String::new(),
        byte_span: (0, 0),
        targets: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn execution_filters_like_a_full_scan(seed in any::<u64>(), picks in prop::collection::vec(any::<prop::sample::Index>(), 8)) {
        let random = random_kb(seed);
        let kb = KnowledgeBase::from_documents(random.docs, 1).unwrap();
        let registry = TemplateRegistry::builtin();
        let ctx = ExecutionContext { templates: registry.get("en").unwrap(), max_depth: DEFAULT_MAX_DEPTH };
        for (n, v) in kb.values().iter().enumerate() {
            let Value::CvtTable { schema_id, rows } = &v.value else { continue };
            let schema = kb.schema(schema_id.as_str()).unwrap();
            let mut constraints = Vec::new();
            for (k, col) in schema.condition_columns().enumerate() {
                let pick = picks[(n + k) % picks.len()];
                // Bind from a random row, leave unbound, or use a value no row has.
                let value = match pick.index(4) {
                    0 | 1 => rows[pick.index(rows.len())].get(&col.column_name).cloned().unwrap(),
                    2 => continue,
                    _ => CellValue::Text("nobody".into()),
                };
                constraints.push((col.column_name.clone(), value));
            }
            let mut effective = constraints.clone();
            for col in schema.condition_columns() {
                if let (false, Some(d)) = (effective.iter().any(|(c, _)| *c == col.column_name), &col.default) {
                    effective.push((col.column_name.clone(), d.clone()));
                }
            }
            let graph = QueryGraph {
                topic_entity: v.entity_id.clone(),
                chain: property_chain_of(v.leaf_property_id.as_str(), kb.model()).unwrap(),
                shape: GraphShape::Cvt {
                    answer_column: schema.answer_column().unwrap().column_name.clone(),
                    constraints: constraints
                        .iter()
                        .map(|(c, value)| Constraint {
                            column: c.clone(),
                            relation: Relation::Equal,
                            value: value.clone(),
                            source_mention: no_mention(),
                        })
                        .collect(),
                },
                inferred_domain: None,
                inferred_range: None,
                provenance: Provenance { topic_mention: no_mention(), property_score: 1.0 },
            };
            let expected = scan_rows(rows, &effective);
            let answer = execute(&graph, kb.model(), &ctx).unwrap();
            match &answer.body {
                AnswerBody::NoAnswer { .. } => prop_assert!(expected.is_empty()),
                AnswerBody::TableAnswer { rows: got, highlighted_cell, missing_conditions, .. } => {
                    let want: Vec<_> = expected.iter().map(|&i| rows[i].clone()).collect();
                    prop_assert_eq!(got, &want);
                    for row in got {
                        for (c, value) in &effective {
                            prop_assert_eq!(row.get(c), Some(value));
                        }
                    }
                    prop_assert_eq!(highlighted_cell.is_some(), got.len() == 1);
                    if let Some(cell) = highlighted_cell {
                        prop_assert_eq!(schema.columns[cell.column].role, ColumnRole::Answer);
                    }
                    let unbound: Vec<String> = schema
                        .condition_columns()
                        .filter(|c| !effective.iter().any(|(e, _)| *e == c.column_name))
                        .map(|c| c.column_name.clone())
                        .collect();
                    if got.len() > 1 {
                        prop_assert_eq!(missing_conditions, &unbound);
                    } else {
                        prop_assert!(missing_conditions.is_empty());
                    }
                }
                other => prop_assert!(false, "unexpected answer {:?}", other),
            }
        }
    }

    #[test]
    fn generalization_matches_path_enumeration(seed in any::<u64>(), depth in 0usize..=3) {
        let random = random_kb(seed);
        let kb = KnowledgeBase::from_documents(random.docs, 1).unwrap();
        for entity in kb.entities() {
            for leaf in kb.leaf_properties() {
                let oracle = generalize_by_paths(kb.model(), entity.id.as_str(), leaf.id.as_str(), depth);
                match (generalize(entity.id.as_str(), leaf.id.as_str(), kb.model(), depth), oracle) {
                    (Ok((target, hops)), Generalized::Found { target: want, depth: d }) => {
                        prop_assert_eq!(target.as_str(), want.as_str());
                        prop_assert_eq!(hops.len(), d);
                        let mut at = entity.id.clone();
                        for hop in &hops {
                            prop_assert_eq!(&hop.from, &at);
                            prop_assert!(kb.entity(hop.from.as_str()).unwrap().member_of.contains(&hop.to));
                            at = hop.to.clone();
                        }
                        prop_assert_eq!(&at, &target);
                        prop_assert!(kb.reifies(target.as_str(), leaf.id.as_str()));
                    }
                    (Err(ReasoningError::AmbiguousAncestor { candidates, .. }), Generalized::Ambiguous(want)) => {
                        let got: std::collections::BTreeSet<String> = candidates.into_iter().collect();
                        prop_assert_eq!(got, want);
                    }
                    (Err(ReasoningError::NoReifyingAncestor { .. }), Generalized::NotFound) => {}
                    (got, want) => prop_assert!(false, "{}/{}: {:?} vs {:?}", entity.id, leaf.id, got, want),
                }
            }
        }
    }

    #[test]
    fn answering_leaves_the_snapshot_untouched(seed in any::<u64>()) {
        let random = random_kb(seed);
        let kb = KnowledgeBase::from_documents(random.docs.clone(), 1).unwrap();
        let before = kb.fingerprint();
        let engine = Engine::new(Arc::new(SnapshotStore::fixed(kb.clone())), RankWeights::default(), EngineConfig::default()).unwrap();
        for p in &random.planted {
            let _ = engine.ask_on(&AskRequest::new(p.question.clone()), &kb).unwrap();
            let _ = engine.ask(&AskRequest::new(p.question.clone())).unwrap();
        }
        for e in kb.entities() {
            let _ = engine.ask_on(&AskRequest::new(format!("{}是什么", e.name)), &kb).unwrap();
        }
        prop_assert_eq!(kb.fingerprint(), before);
        prop_assert_eq!(engine.store().load().unwrap().fingerprint(), before);
        prop_assert_eq!(kb.documents(), &random.docs);
    }
}
