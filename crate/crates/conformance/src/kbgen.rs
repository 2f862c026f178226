//! Seeded generator for small random knowledge bases.
//!
//! Every name is three characters drawn from a pool without reuse, so no
//! surface form is a substring of another and planted questions recognize
//! exactly the mentions they were built from.

use kbqa_core::model::{
    BuiltinType, CellValue, ClassDef, ColumnRole, CvtColumn, CvtRow, CvtSchema, Entity, EntityId, KbDocuments,
    KeyValueEntry, KnowledgeModel, PropertyChain, PropertyDef, PropertyId, ReifiedValue, SimpleValue, Value,
    ValueDomain, ValueTypeSpec,
};
use kbqa_core::ranking::DEFAULT_STOP_CHARS;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenConfig {
    pub max_entities: usize,
    pub max_leaves: usize,
    pub max_rows: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_entities: 10,
            max_leaves: 8,
            max_rows: 12,
        }
    }
}

/// A question built from one entity, one chain and optionally one literal
/// condition value the engine should bind.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedQuestion {
    pub question: String,
    pub entity: EntityId,
    pub chain: PropertyChain,
    pub literal: Option<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct RandomKb {
    pub seed: u64,
    pub docs: KbDocuments,
    pub planted: Vec<PlantedQuestion>,
}

struct Names {
    pool: Vec<char>,
    next: usize,
}

impl Names {
    fn new() -> Self {
        let pool = ('\u{4e00}'..='\u{9fa5}')
            .filter(|c| !DEFAULT_STOP_CHARS.contains(*c))
            .step_by(7)
            .collect();
        Self { pool, next: 0 }
    }

    fn take(&mut self) -> String {
        let s: String = self.pool[self.next..self.next + 3].iter().collect();
        self.next += 3;
        s
    }
}

pub fn random_kb(seed: u64) -> RandomKb {
    random_kb_with(seed, GenConfig::default())
}

pub fn random_kb_with(seed: u64, config: GenConfig) -> RandomKb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut names = Names::new();
    let class_count = rng.random_range(1..=3);
    let mut docs = KbDocuments::default();

    for c in 0..class_count {
        docs.classes.push(ClassDef {
            id: format!("C{c}").into(),
            name: names.take(),
            root_property_ids: Vec::new(),
        });
    }

    let literals: Vec<String> = (0..4).map(|_| names.take()).collect();

    let leaf_count = rng.random_range(1..=config.max_leaves);
    let mut group_roots: Vec<Option<PropertyId>> = vec![None; class_count];
    for l in 0..leaf_count {
        let c = rng.random_range(0..class_count);
        let class_id = docs.classes[c].id.clone();
        let parent = if rng.random_bool(0.3) {
            let root = group_roots[c].get_or_insert_with(|| {
                let id: PropertyId = format!("g{c}").into();
                docs.properties.push(PropertyDef {
                    id: id.clone(),
                    name: names.take(),
                    domain_class: class_id.clone(),
                    parent: None,
                    range: None,
                    infer_domain: false,
                    infer_range: false,
                    trigger_utterances: Vec::new(),
                });
                docs.classes[c].root_property_ids.push(id.clone());
                id
            });
            Some(root.clone())
        } else {
            None
        };
        let id: PropertyId = format!("p{l}").into();
        let range = match rng.random_range(0..5) {
            0 | 1 => ValueTypeSpec::Simple {
                builtin: BuiltinType::Text,
            },
            2 => ValueTypeSpec::KeyValueDoc,
            _ => {
                let schema_id = format!("s{l}");
                let mut columns = Vec::new();
                for k in 0..rng.random_range(1..=2) {
                    let text = rng.random_bool(0.5);
                    let default = (text && rng.random_bool(0.2))
                        .then(|| CellValue::Text(literals.choose(&mut rng).unwrap().clone()));
                    columns.push(CvtColumn {
                        column_name: format!("k{k}"),
                        role: ColumnRole::Condition,
                        value_domain: if text {
                            ValueDomain::Text
                        } else {
                            ValueDomain::EntityRef
                        },
                        default,
                    });
                }
                columns.push(CvtColumn {
                    column_name: "answer".into(),
                    role: ColumnRole::Answer,
                    value_domain: ValueDomain::Text,
                    default: None,
                });
                docs.cvt_schemas.push(CvtSchema {
                    id: schema_id.as_str().into(),
                    columns,
                });
                ValueTypeSpec::Cvt {
                    schema: schema_id.as_str().into(),
                }
            }
        };
        let name = names.take();
        if parent.is_none() {
            docs.classes[c].root_property_ids.push(id.clone());
        }
        docs.properties.push(PropertyDef {
            id,
            trigger_utterances: vec![format!("<E>的{name}"), format!("<E>{name}怎么样")],
            name,
            domain_class: class_id,
            parent,
            range: Some(range),
            infer_domain: rng.random_bool(0.5),
            infer_range: rng.random_bool(0.5),
        });
    }

    // Representatives first so instances can point at them.
    let entity_count = rng.random_range(class_count.min(config.max_entities).max(1)..=config.max_entities);
    let mut reps: Vec<(usize, EntityId)> = Vec::new();
    for c in 0..class_count {
        if docs.entities.len() < entity_count && rng.random_bool(0.7) {
            let id: EntityId = format!("r{c}").into();
            reps.push((c, id.clone()));
            docs.entities.push(Entity {
                id,
                name: docs.classes[c].name.clone(),
                aliases: Vec::new(),
                instance_of: docs.classes[c].id.clone(),
                member_of: Vec::new(),
                is_class_representative: true,
            });
        }
    }
    // Representatives may point at later representatives, which keeps the
    // member_of graph acyclic while allowing chains of length two.
    for i in 0..reps.len() {
        for (_, target) in &reps[i + 1..] {
            if rng.random_bool(0.3) {
                docs.entities[i].member_of.push(target.clone());
            }
        }
    }
    let mut n = 0;
    while docs.entities.len() < entity_count {
        let c = rng.random_range(0..class_count);
        let member_of: Vec<EntityId> = reps
            .iter()
            .filter(|(rc, _)| *rc != c)
            .filter(|_| rng.random_bool(0.5))
            .map(|(_, id)| id.clone())
            .collect();
        docs.entities.push(Entity {
            id: format!("e{n}").into(),
            name: names.take(),
            aliases: Vec::new(),
            instance_of: docs.classes[c].id.clone(),
            member_of,
            is_class_representative: false,
        });
        n += 1;
    }

    let entity_ids: Vec<EntityId> = docs.entities.iter().map(|e| e.id.clone()).collect();
    let mut answer_no = 0;
    for entity in &docs.entities {
        for p in docs.properties.iter().filter(|p| p.domain_class == entity.instance_of) {
            let Some(range) = &p.range else { continue };
            let chance = if entity.is_class_representative { 0.9 } else { 0.6 };
            if !rng.random_bool(chance) {
                continue;
            }
            let value = match range {
                ValueTypeSpec::Simple { .. } => Value::Simple {
                    value: SimpleValue::Text(format!("{}-{}", entity.id, p.id)),
                },
                ValueTypeSpec::KeyValueDoc => Value::KeyValueDoc {
                    entries: (0..rng.random_range(1..=3))
                        .map(|k| KeyValueEntry {
                            key: format!("key{k}"),
                            body: format!("{}-{}-{k}", entity.id, p.id),
                        })
                        .collect(),
                },
                ValueTypeSpec::Cvt { schema } => {
                    let s = docs.cvt_schemas.iter().find(|s| s.id == *schema).unwrap();
                    let rows = (0..rng.random_range(1..=config.max_rows))
                        .map(|_| {
                            let mut row = CvtRow::default();
                            for col in &s.columns {
                                let cell = match (col.role, col.value_domain) {
                                    (ColumnRole::Answer, _) => {
                                        answer_no += 1;
                                        CellValue::Text(format!("ans{answer_no}"))
                                    }
                                    (_, ValueDomain::EntityRef) => {
                                        CellValue::Text(entity_ids.choose(&mut rng).unwrap().to_string())
                                    }
                                    _ => CellValue::Text(literals.choose(&mut rng).unwrap().clone()),
                                };
                                row.cells.insert(col.column_name.clone(), cell);
                            }
                            row
                        })
                        .collect();
                    Value::CvtTable {
                        schema_id: schema.clone(),
                        rows,
                    }
                }
            };
            docs.values.push(ReifiedValue {
                entity_id: entity.id.clone(),
                leaf_property_id: p.id.clone(),
                value,
                tips: None,
            });
        }
    }

    let planted = plant(&docs, &mut rng);
    RandomKb { seed, docs, planted }
}

/// Up to three questions "<entity>的<property>[<literal>]" over chains the
/// entity can reach, preferring ones whose table owner is unambiguous.
fn plant(docs: &KbDocuments, rng: &mut ChaCha8Rng) -> Vec<PlantedQuestion> {
    let model = KnowledgeModel::new(docs.clone()).expect("generated documents are valid");
    let mut out = Vec::new();
    for _ in 0..3 {
        let entity = docs.entities.choose(rng).unwrap();
        let mut reachable: Vec<PropertyChain> = model.class_chains(entity.instance_of.as_str());
        for rep in &entity.member_of {
            if let Some(r) = model.entity(rep.as_str()) {
                reachable.extend(model.class_chains(r.instance_of.as_str()));
            }
        }
        reachable.sort();
        reachable.dedup();
        let Some(chain) = reachable.choose(rng).cloned() else {
            continue;
        };
        let leaf = model.property(chain.leaf().as_str()).unwrap();
        let mut question = format!("{}的{}", entity.name, leaf.name);
        let mut literal = None;
        let owner = if model.reifies(entity.id.as_str(), leaf.id.as_str()) {
            Some(entity.id.clone())
        } else {
            entity
                .member_of
                .iter()
                .find(|r| model.reifies(r.as_str(), leaf.id.as_str()))
                .cloned()
        };
        if let (Some(owner), Some(schema)) = (owner, model.range_schema(leaf.id.as_str())) {
            let text_cols: Vec<&CvtColumn> = schema
                .condition_columns()
                .filter(|c| c.value_domain == ValueDomain::Text)
                .collect();
            if let (Some(col), true) = (text_cols.choose(rng), rng.random_bool(0.6)) {
                if let Some(Value::CvtTable { rows, .. }) =
                    model.value(owner.as_str(), leaf.id.as_str()).map(|v| &v.value)
                {
                    if let Some(CellValue::Text(v)) = rows.choose(rng).and_then(|r| r.get(&col.column_name)) {
                        question.push_str(v);
                        literal = Some((col.column_name.clone(), v.clone()));
                    }
                }
            }
        }
        out.push(PlantedQuestion {
            question,
            entity: entity.id.clone(),
            chain,
            literal,
        });
    }
    out
}
