//! The extended ontology: classes own trees of hierarchical properties,
//! leaf properties carry a value type (simple, key-value document, or a
//! compound value table), and entities reify leaf properties of their class.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }
    };
}

id_type!(
    /// Identifier of an ontology class.
    ClassId
);
id_type!(
    /// Identifier of a (root, internal or leaf) property.
    PropertyId
);
id_type!(
    /// Identifier of an entity.
    EntityId
);
id_type!(
    /// Identifier of a compound value type schema.
    SchemaId
);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDef {
    pub id: ClassId,
    pub name: String,
    #[serde(default)]
    pub root_property_ids: Vec<PropertyId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyDef {
    pub id: PropertyId,
    pub name: String,
    pub domain_class: ClassId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<PropertyId>,
    /// Present on leaf properties only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range: Option<ValueTypeSpec>,
    #[serde(default)]
    pub infer_domain: bool,
    #[serde(default)]
    pub infer_range: bool,
    /// Example questions with entity mentions replaced by the mask token.
    #[serde(default)]
    pub trigger_utterances: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinType {
    Text,
    Integer,
    Decimal,
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValueTypeSpec {
    Simple { builtin: BuiltinType },
    KeyValueDoc,
    Cvt { schema: SchemaId },
}

impl ValueTypeSpec {
    pub fn cvt_schema(&self) -> Option<&SchemaId> {
        match self {
            ValueTypeSpec::Cvt { schema } => Some(schema),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    Answer,
    Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDomain {
    Text,
    Integer,
    Boolean,
    EntityRef,
}

/// A typed cell. Entity-ref cells hold the referenced entity id as text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellValue {
    Boolean(bool),
    Integer(i64),
    Text(String),
}

impl CellValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            CellValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn matches_domain(&self, domain: ValueDomain) -> bool {
        matches!(
            (self, domain),
            (CellValue::Text(_), ValueDomain::Text | ValueDomain::EntityRef)
                | (CellValue::Integer(_), ValueDomain::Integer)
                | (CellValue::Boolean(_), ValueDomain::Boolean)
        )
    }
}

impl fmt::Display for CellValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellValue::Boolean(b) => write!(f, "{b}"),
            CellValue::Integer(i) => write!(f, "{i}"),
            CellValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvtColumn {
    pub column_name: String,
    pub role: ColumnRole,
    pub value_domain: ValueDomain,
    /// Applied to an unbound condition column at execution time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<CellValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvtSchema {
    pub id: SchemaId,
    pub columns: Vec<CvtColumn>,
}

impl CvtSchema {
    /// The single answer column. Validation guarantees exactly one exists.
    pub fn answer_column(&self) -> Option<&CvtColumn> {
        self.columns.iter().find(|c| c.role == ColumnRole::Answer)
    }

    pub fn condition_columns(&self) -> impl Iterator<Item = &CvtColumn> {
        self.columns.iter().filter(|c| c.role == ColumnRole::Condition)
    }

    pub fn column(&self, name: &str) -> Option<&CvtColumn> {
        self.columns.iter().find(|c| c.column_name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    #[serde(default)]
    pub aliases: Vec<String>,
    pub instance_of: ClassId,
    #[serde(default)]
    pub member_of: Vec<EntityId>,
    #[serde(default)]
    pub is_class_representative: bool,
}

impl Entity {
    pub fn surface_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.name.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SimpleValue {
    Boolean(bool),
    Integer(i64),
    Decimal(f64),
    Text(String),
}

impl SimpleValue {
    fn matches(&self, builtin: BuiltinType) -> bool {
        matches!(
            (self, builtin),
            (SimpleValue::Text(_), BuiltinType::Text)
                | (SimpleValue::Integer(_), BuiltinType::Integer)
                | (SimpleValue::Integer(_) | SimpleValue::Decimal(_), BuiltinType::Decimal)
                | (SimpleValue::Boolean(_), BuiltinType::Boolean)
        )
    }
}

impl fmt::Display for SimpleValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleValue::Boolean(b) => write!(f, "{b}"),
            SimpleValue::Integer(i) => write!(f, "{i}"),
            SimpleValue::Decimal(d) => write!(f, "{d}"),
            SimpleValue::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyValueEntry {
    pub key: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CvtRow {
    pub cells: IndexMap<String, CellValue>,
}

impl CvtRow {
    pub fn get(&self, column: &str) -> Option<&CellValue> {
        self.cells.get(column)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Value {
    Simple { value: SimpleValue },
    KeyValueDoc { entries: Vec<KeyValueEntry> },
    CvtTable { schema_id: SchemaId, rows: Vec<CvtRow> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReifiedValue {
    pub entity_id: EntityId,
    pub leaf_property_id: PropertyId,
    pub value: Value,
    /// Optional hint shown alongside the answer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tips: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KbMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qa_count: Option<u64>,
}

/// The raw, authoring-ordered content of a knowledge base, exactly as it
/// appears in the JSON documents.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KbDocuments {
    pub classes: Vec<ClassDef>,
    pub properties: Vec<PropertyDef>,
    pub entities: Vec<Entity>,
    pub values: Vec<ReifiedValue>,
    pub cvt_schemas: Vec<CvtSchema>,
    pub meta: KbMeta,
}

/// Root-to-leaf path of property ids.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PropertyChain(pub Vec<PropertyId>);

impl PropertyChain {
    pub fn leaf(&self) -> &PropertyId {
        self.0.last().expect("property chains are never empty")
    }

    pub fn root(&self) -> &PropertyId {
        &self.0[0]
    }

    pub fn ids(&self) -> &[PropertyId] {
        &self.0
    }

    /// Stable textual key used for deterministic tie-breaking.
    pub fn key(&self) -> String {
        self.0.iter().map(PropertyId::as_str).collect::<Vec<_>>().join("/")
    }
}

impl fmt::Display for PropertyChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.iter().map(PropertyId::as_str).collect::<Vec<_>>().join(" - "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
    #[error("property `{0}` has children and is not a leaf")]
    NotALeaf(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IdKind {
    Class,
    Property,
    Entity,
    Schema,
}

impl fmt::Display for IdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdKind::Class => "class",
            IdKind::Property => "property",
            IdKind::Entity => "entity",
            IdKind::Schema => "cvt schema",
        })
    }
}

/// One broken invariant found while validating a document set.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: IdKind, id: String },
    #[error("{from} references missing {kind} `{to}`")]
    DanglingReference { from: String, kind: IdKind, to: String },
    #[error("property parent cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("root property `{property}` of class `{class}`: {reason}")]
    RootMismatch {
        class: String,
        property: String,
        reason: String,
    },
    #[error("property `{property}` has domain `{domain}` but its parent `{parent}` has domain `{parent_domain}`")]
    TreeDomainMismatch {
        property: String,
        domain: String,
        parent: String,
        parent_domain: String,
    },
    #[error("leaf property `{property}` has no range")]
    LeafWithoutRange { property: String },
    #[error("internal property `{property}` must not carry a range")]
    InternalWithRange { property: String },
    #[error("cvt schema `{schema}` has {count} answer columns, expected exactly one")]
    AnswerColumnCount { schema: String, count: usize },
    #[error("cvt schema `{schema}` repeats column `{column}`")]
    DuplicateColumn { schema: String, column: String },
    #[error("cvt schema `{schema}` column `{column}`: {reason}")]
    BadColumnDefault {
        schema: String,
        column: String,
        reason: String,
    },
    #[error("entity `{entity}` is member of `{target}`, which is not a class representative")]
    NotClassRepresentative { entity: String, target: String },
    #[error("class representative `{entity}` is named `{name}` but its class is named `{class_name}`")]
    RepresentativeName {
        entity: String,
        name: String,
        class_name: String,
    },
    #[error("duplicate value for entity `{entity}` and property `{property}`")]
    DuplicateValue { entity: String, property: String },
    #[error("value for entity `{entity}` targets non-leaf property `{property}`")]
    ValueOnInternalProperty { entity: String, property: String },
    #[error("entity `{entity}` of class `{class}` cannot reify `{property}` of class `{domain}`")]
    ForeignProperty {
        entity: String,
        class: String,
        property: String,
        domain: String,
    },
    #[error("value for `{entity}`/`{property}` does not match its range: {detail}")]
    ShapeMismatch {
        entity: String,
        property: String,
        detail: String,
    },
    #[error("row {row} of `{entity}`/`{property}` is missing column `{column}`")]
    MissingCell {
        entity: String,
        property: String,
        row: usize,
        column: String,
    },
    #[error("row {row} of `{entity}`/`{property}` column `{column}`: {detail}")]
    BadCell {
        entity: String,
        property: String,
        row: usize,
        column: String,
        detail: String,
    },
}

/// Validated, indexed model. Immutable once built.
#[derive(Debug, Clone)]
pub struct KnowledgeModel {
    docs: KbDocuments,
    classes: HashMap<ClassId, usize>,
    properties: HashMap<PropertyId, usize>,
    children: HashMap<PropertyId, Vec<PropertyId>>,
    entities: HashMap<EntityId, usize>,
    values: HashMap<EntityId, HashMap<PropertyId, usize>>,
    schemas: HashMap<SchemaId, usize>,
}

impl KnowledgeModel {
    /// Validates `docs` and builds the lookup indexes.
    pub fn new(docs: KbDocuments) -> Result<Self, Vec<Violation>> {
        let violations = validate(&docs);
        if !violations.is_empty() {
            return Err(violations);
        }
        Ok(Self::index(docs))
    }

    fn index(docs: KbDocuments) -> Self {
        let classes = docs
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        let properties = docs
            .properties
            .iter()
            .enumerate()
            .map(|(i, p)| (p.id.clone(), i))
            .collect();
        let children = children_map(&docs.properties);
        let entities = docs
            .entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();
        let mut values: HashMap<EntityId, HashMap<PropertyId, usize>> = HashMap::new();
        for (i, v) in docs.values.iter().enumerate() {
            values
                .entry(v.entity_id.clone())
                .or_default()
                .insert(v.leaf_property_id.clone(), i);
        }
        let schemas = docs
            .cvt_schemas
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.clone(), i))
            .collect();
        Self {
            docs,
            classes,
            properties,
            children,
            entities,
            values,
            schemas,
        }
    }

    pub fn documents(&self) -> &KbDocuments {
        &self.docs
    }

    pub fn into_documents(self) -> KbDocuments {
        self.docs
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.docs.classes
    }

    pub fn properties(&self) -> &[PropertyDef] {
        &self.docs.properties
    }

    pub fn entities(&self) -> &[Entity] {
        &self.docs.entities
    }

    pub fn values(&self) -> &[ReifiedValue] {
        &self.docs.values
    }

    pub fn cvt_schemas(&self) -> &[CvtSchema] {
        &self.docs.cvt_schemas
    }

    pub fn class(&self, id: &str) -> Option<&ClassDef> {
        self.classes.get(id).map(|&i| &self.docs.classes[i])
    }

    pub fn property(&self, id: &str) -> Option<&PropertyDef> {
        self.properties.get(id).map(|&i| &self.docs.properties[i])
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.get(id).map(|&i| &self.docs.entities[i])
    }

    pub fn schema(&self, id: &str) -> Option<&CvtSchema> {
        self.schemas.get(id).map(|&i| &self.docs.cvt_schemas[i])
    }

    /// Position of an entity in authoring order.
    pub fn entity_position(&self, id: &str) -> Option<usize> {
        self.entities.get(id).copied()
    }

    pub fn children(&self, id: &str) -> &[PropertyId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_leaf(&self, id: &str) -> bool {
        self.children(id).is_empty()
    }

    pub fn value(&self, entity: &str, leaf: &str) -> Option<&ReifiedValue> {
        self.values
            .get(entity)
            .and_then(|m| m.get(leaf))
            .map(|&i| &self.docs.values[i])
    }

    pub fn reifies(&self, entity: &str, leaf: &str) -> bool {
        self.value(entity, leaf).is_some()
    }

    /// Schema of a CVT-ranged leaf property.
    pub fn range_schema(&self, leaf: &str) -> Option<&CvtSchema> {
        self.property(leaf)
            .and_then(|p| p.range.as_ref())
            .and_then(ValueTypeSpec::cvt_schema)
            .and_then(|s| self.schema(s.as_str()))
    }

    /// Every leaf chain of a class, in pre-order over its root properties.
    pub fn class_chains(&self, class: &str) -> Vec<PropertyChain> {
        let Some(c) = self.class(class) else {
            return Vec::new();
        };
        c.root_property_ids
            .iter()
            .flat_map(|root| leaves_under(root.as_str(), self).unwrap_or_default())
            .map(|leaf| property_chain_of(leaf.as_str(), self).expect("leaf from a validated tree"))
            .collect()
    }

    /// All leaf chains of the model, in class then pre-order.
    pub fn all_chains(&self) -> Vec<PropertyChain> {
        self.docs
            .classes
            .iter()
            .flat_map(|c| self.class_chains(c.id.as_str()))
            .collect()
    }

    /// Leaf property ids of the model.
    pub fn leaf_properties(&self) -> impl Iterator<Item = &PropertyDef> {
        self.docs.properties.iter().filter(|p| self.is_leaf(p.id.as_str()))
    }
}

fn children_map(properties: &[PropertyDef]) -> HashMap<PropertyId, Vec<PropertyId>> {
    let mut children: HashMap<PropertyId, Vec<PropertyId>> = HashMap::new();
    for p in properties {
        if let Some(parent) = &p.parent {
            children.entry(parent.clone()).or_default().push(p.id.clone());
        }
    }
    children
}

/// Ordered root-to-leaf property ids ending at `leaf`.
pub fn property_chain_of(leaf: &str, model: &KnowledgeModel) -> Result<PropertyChain, ModelError> {
    let mut current = model
        .property(leaf)
        .ok_or_else(|| ModelError::UnknownProperty(leaf.to_owned()))?;
    if !model.is_leaf(leaf) {
        return Err(ModelError::NotALeaf(leaf.to_owned()));
    }
    let mut path = vec![current.id.clone()];
    let mut seen = HashSet::from([current.id.clone()]);
    while let Some(parent) = &current.parent {
        current = model
            .property(parent.as_str())
            .ok_or_else(|| ModelError::UnknownProperty(parent.to_string()))?;
        if !seen.insert(current.id.clone()) {
            break;
        }
        path.push(current.id.clone());
    }
    path.reverse();
    Ok(PropertyChain(path))
}

/// Leaf descendants of `property` in pre-order; a leaf yields itself.
pub fn leaves_under(property: &str, model: &KnowledgeModel) -> Result<Vec<PropertyId>, ModelError> {
    let root = model
        .property(property)
        .ok_or_else(|| ModelError::UnknownProperty(property.to_owned()))?;
    let mut out = Vec::new();
    let mut stack = vec![root.id.clone()];
    let mut seen = HashSet::new();
    while let Some(id) = stack.pop() {
        if !seen.insert(id.clone()) {
            continue;
        }
        let kids = model.children(id.as_str());
        if kids.is_empty() {
            out.push(id);
        } else {
            stack.extend(kids.iter().rev().cloned());
        }
    }
    Ok(out)
}

/// Checks every model invariant and returns all violations found.
pub fn validate(docs: &KbDocuments) -> Vec<Violation> {
    let mut out = Vec::new();

    let classes = unique_index(&docs.classes, |c| c.id.as_str(), IdKind::Class, &mut out);
    let properties = unique_index(&docs.properties, |p| p.id.as_str(), IdKind::Property, &mut out);
    let entities = unique_index(&docs.entities, |e| e.id.as_str(), IdKind::Entity, &mut out);
    let schemas = unique_index(&docs.cvt_schemas, |s| s.id.as_str(), IdKind::Schema, &mut out);
    let children = children_map(&docs.properties);

    for schema in &docs.cvt_schemas {
        validate_schema(schema, &mut out);
    }

    for p in &docs.properties {
        let from = format!("property `{}`", p.id);
        if !classes.contains_key(p.domain_class.as_str()) {
            out.push(dangling(&from, IdKind::Class, p.domain_class.as_str()));
        }
        match &p.parent {
            Some(parent) => match properties.get(parent.as_str()) {
                None => out.push(dangling(&from, IdKind::Property, parent.as_str())),
                Some(parent_def) => {
                    if parent_def.domain_class != p.domain_class {
                        out.push(Violation::TreeDomainMismatch {
                            property: p.id.to_string(),
                            domain: p.domain_class.to_string(),
                            parent: parent.to_string(),
                            parent_domain: parent_def.domain_class.to_string(),
                        });
                    }
                }
            },
            None => {
                if let Some(class) = classes.get(p.domain_class.as_str()) {
                    if !class.root_property_ids.contains(&p.id) {
                        out.push(Violation::RootMismatch {
                            class: class.id.to_string(),
                            property: p.id.to_string(),
                            reason: "root property is not listed by its domain class".into(),
                        });
                    }
                }
            }
        }
        let is_leaf = !children.contains_key(&p.id);
        match (&p.range, is_leaf) {
            (None, true) => out.push(Violation::LeafWithoutRange {
                property: p.id.to_string(),
            }),
            (Some(_), false) => out.push(Violation::InternalWithRange {
                property: p.id.to_string(),
            }),
            (Some(ValueTypeSpec::Cvt { schema }), true) if !schemas.contains_key(schema.as_str()) => {
                out.push(dangling(&from, IdKind::Schema, schema.as_str()))
            }
            _ => {}
        }
    }

    out.extend(find_cycles(&docs.properties, &properties));

    for c in &docs.classes {
        for root in &c.root_property_ids {
            match properties.get(root.as_str()) {
                None => out.push(dangling(&format!("class `{}`", c.id), IdKind::Property, root.as_str())),
                Some(p) => {
                    if p.parent.is_some() {
                        out.push(Violation::RootMismatch {
                            class: c.id.to_string(),
                            property: root.to_string(),
                            reason: "listed root property has a parent".into(),
                        });
                    }
                    if p.domain_class != c.id {
                        out.push(Violation::RootMismatch {
                            class: c.id.to_string(),
                            property: root.to_string(),
                            reason: format!("domain class is `{}`", p.domain_class),
                        });
                    }
                }
            }
        }
    }

    for e in &docs.entities {
        let from = format!("entity `{}`", e.id);
        match classes.get(e.instance_of.as_str()) {
            None => out.push(dangling(&from, IdKind::Class, e.instance_of.as_str())),
            Some(class) => {
                if e.is_class_representative && e.name != class.name {
                    out.push(Violation::RepresentativeName {
                        entity: e.id.to_string(),
                        name: e.name.clone(),
                        class_name: class.name.clone(),
                    });
                }
            }
        }
        for target in &e.member_of {
            match entities.get(target.as_str()) {
                None => out.push(dangling(&from, IdKind::Entity, target.as_str())),
                Some(t) if !t.is_class_representative => out.push(Violation::NotClassRepresentative {
                    entity: e.id.to_string(),
                    target: target.to_string(),
                }),
                Some(_) => {}
            }
        }
    }

    let mut seen_values = HashSet::new();
    for v in &docs.values {
        let entity_key = v.entity_id.to_string();
        let property_key = v.leaf_property_id.to_string();
        let from = format!("value `{entity_key}`/`{property_key}`");
        if !seen_values.insert((entity_key.clone(), property_key.clone())) {
            out.push(Violation::DuplicateValue {
                entity: entity_key.clone(),
                property: property_key.clone(),
            });
        }
        let entity = entities.get(v.entity_id.as_str());
        if entity.is_none() {
            out.push(dangling(&from, IdKind::Entity, v.entity_id.as_str()));
        }
        let Some(property) = properties.get(v.leaf_property_id.as_str()) else {
            out.push(dangling(&from, IdKind::Property, v.leaf_property_id.as_str()));
            continue;
        };
        if children.contains_key(&property.id) {
            out.push(Violation::ValueOnInternalProperty {
                entity: entity_key,
                property: property_key,
            });
            continue;
        }
        if let Some(entity) = entity {
            if entity.instance_of != property.domain_class {
                out.push(Violation::ForeignProperty {
                    entity: entity_key.clone(),
                    class: entity.instance_of.to_string(),
                    property: property_key.clone(),
                    domain: property.domain_class.to_string(),
                });
            }
        }
        if let Some(range) = &property.range {
            validate_shape(v, range, &schemas, &entities, &mut out);
        }
    }

    out
}

fn dangling(from: &str, kind: IdKind, to: &str) -> Violation {
    Violation::DanglingReference {
        from: from.to_owned(),
        kind,
        to: to.to_owned(),
    }
}

fn unique_index<'a, T>(
    items: &'a [T],
    id: impl Fn(&T) -> &str,
    kind: IdKind,
    out: &mut Vec<Violation>,
) -> HashMap<&'a str, &'a T> {
    let mut map = HashMap::new();
    for item in items {
        let key = id(item);
        if map.insert(key, item).is_some() {
            out.push(Violation::DuplicateId {
                kind,
                id: key.to_owned(),
            });
        }
    }
    map
}

fn validate_schema(schema: &CvtSchema, out: &mut Vec<Violation>) {
    let answers = schema.columns.iter().filter(|c| c.role == ColumnRole::Answer).count();
    if answers != 1 {
        out.push(Violation::AnswerColumnCount {
            schema: schema.id.to_string(),
            count: answers,
        });
    }
    let mut names = HashSet::new();
    for column in &schema.columns {
        if !names.insert(column.column_name.as_str()) {
            out.push(Violation::DuplicateColumn {
                schema: schema.id.to_string(),
                column: column.column_name.clone(),
            });
        }
        if let Some(default) = &column.default {
            let reason = if column.role == ColumnRole::Answer {
                Some("answer column cannot declare a default")
            } else if !default.matches_domain(column.value_domain) {
                Some("default does not match the column value domain")
            } else {
                None
            };
            if let Some(reason) = reason {
                out.push(Violation::BadColumnDefault {
                    schema: schema.id.to_string(),
                    column: column.column_name.clone(),
                    reason: reason.into(),
                });
            }
        }
    }
}

fn find_cycles(properties: &[PropertyDef], index: &HashMap<&str, &PropertyDef>) -> Vec<Violation> {
    let mut out = Vec::new();
    // 0 = unvisited, 1 = on current walk, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    for start in properties {
        if state.get(start.id.as_str()).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut walk: Vec<&str> = Vec::new();
        let mut current = Some(start.id.as_str());
        while let Some(id) = current {
            match state.get(id).copied().unwrap_or(0) {
                1 => {
                    let pos = walk.iter().position(|w| *w == id).unwrap_or(0);
                    let mut path: Vec<String> = walk[pos..].iter().rev().map(|s| s.to_string()).collect();
                    path.push(path[0].clone());
                    out.push(Violation::Cycle { path });
                    break;
                }
                2 => break,
                _ => {}
            }
            state.insert(id, 1);
            walk.push(id);
            current = index.get(id).and_then(|p| p.parent.as_ref()).map(PropertyId::as_str);
            if current.is_some_and(|c| !index.contains_key(c)) {
                break;
            }
        }
        for id in walk {
            state.insert(id, 2);
        }
    }
    out
}

fn validate_shape(
    v: &ReifiedValue,
    range: &ValueTypeSpec,
    schemas: &HashMap<&str, &CvtSchema>,
    entities: &HashMap<&str, &Entity>,
    out: &mut Vec<Violation>,
) {
    let entity = v.entity_id.to_string();
    let property = v.leaf_property_id.to_string();
    let mismatch = |detail: String| Violation::ShapeMismatch {
        entity: entity.clone(),
        property: property.clone(),
        detail,
    };
    match (range, &v.value) {
        (ValueTypeSpec::Simple { builtin }, Value::Simple { value }) => {
            if !value.matches(*builtin) {
                out.push(mismatch(format!("expected {builtin:?}, found `{value}`")));
            }
        }
        (ValueTypeSpec::KeyValueDoc, Value::KeyValueDoc { entries }) => {
            let mut keys = HashSet::new();
            for entry in entries {
                if !keys.insert(entry.key.as_str()) {
                    out.push(mismatch(format!("duplicate key `{}`", entry.key)));
                }
            }
        }
        (ValueTypeSpec::Cvt { schema }, Value::CvtTable { schema_id, rows }) => {
            if schema != schema_id {
                out.push(mismatch(format!(
                    "table uses schema `{schema_id}`, range is `{schema}`"
                )));
                return;
            }
            let Some(schema) = schemas.get(schema.as_str()) else {
                return;
            };
            for (row_idx, row) in rows.iter().enumerate() {
                for column in &schema.columns {
                    let name = &column.column_name;
                    match row.get(name) {
                        None => out.push(Violation::MissingCell {
                            entity: entity.clone(),
                            property: property.clone(),
                            row: row_idx,
                            column: name.clone(),
                        }),
                        Some(cell) => {
                            let detail = if !cell.matches_domain(column.value_domain) {
                                Some(format!("expected {:?}, found `{cell}`", column.value_domain))
                            } else if column.value_domain == ValueDomain::EntityRef
                                && !entities.contains_key(cell.as_text().unwrap_or_default())
                            {
                                Some(format!("references missing entity `{cell}`"))
                            } else {
                                None
                            };
                            if let Some(detail) = detail {
                                out.push(Violation::BadCell {
                                    entity: entity.clone(),
                                    property: property.clone(),
                                    row: row_idx,
                                    column: name.clone(),
                                    detail,
                                });
                            }
                        }
                    }
                }
                for name in row.cells.keys() {
                    if schema.column(name).is_none() {
                        out.push(Violation::BadCell {
                            entity: entity.clone(),
                            property: property.clone(),
                            row: row_idx,
                            column: name.clone(),
                            detail: "column not in schema".into(),
                        });
                    }
                }
            }
        }
        (expected, found) => out.push(mismatch(format!(
            "expected {}, found {}",
            spec_name(expected),
            value_name(found)
        ))),
    }
}

fn spec_name(spec: &ValueTypeSpec) -> &'static str {
    match spec {
        ValueTypeSpec::Simple { .. } => "a simple value",
        ValueTypeSpec::KeyValueDoc => "a key-value document",
        ValueTypeSpec::Cvt { .. } => "a cvt table",
    }
}

fn value_name(value: &Value) -> &'static str {
    match value {
        Value::Simple { .. } => "a simple value",
        Value::KeyValueDoc { .. } => "a key-value document",
        Value::CvtTable { .. } => "a cvt table",
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn prop(id: &str, class: &str, parent: Option<&str>, range: Option<ValueTypeSpec>) -> PropertyDef {
        PropertyDef {
            id: id.into(),
            name: id.into(),
            domain_class: class.into(),
            parent: parent.map(Into::into),
            range,
            infer_domain: false,
            infer_range: false,
            trigger_utterances: Vec::new(),
        }
    }

    pub(crate) fn text() -> Option<ValueTypeSpec> {
        Some(ValueTypeSpec::Simple {
            builtin: BuiltinType::Text,
        })
    }

    fn store_bao() -> KbDocuments {
        KbDocuments {
            classes: vec![ClassDef {
                id: "promotion_tool".into(),
                name: "营销工具".into(),
                root_property_ids: vec!["discount_regulation".into(), "definition".into()],
            }],
            properties: vec![
                prop("discount_regulation", "promotion_tool", None, None),
                prop(
                    "discount_conjunction",
                    "promotion_tool",
                    Some("discount_regulation"),
                    text(),
                ),
                prop(
                    "discount_purchase_limitation",
                    "promotion_tool",
                    Some("discount_regulation"),
                    text(),
                ),
                prop("definition", "promotion_tool", None, text()),
            ],
            entities: vec![Entity {
                id: "store_bao".into(),
                name: "店铺宝".into(),
                aliases: vec!["Store-Bao".into()],
                instance_of: "promotion_tool".into(),
                member_of: vec![],
                is_class_representative: false,
            }],
            values: vec![ReifiedValue {
                entity_id: "store_bao".into(),
                leaf_property_id: "discount_conjunction".into(),
                value: Value::Simple {
                    value: SimpleValue::Text("可以叠加".into()),
                },
                tips: None,
            }],
            ..Default::default()
        }
    }

    #[test]
    fn chain_of_second_level_leaf() {
        let model = KnowledgeModel::new(store_bao()).unwrap();
        let chain = property_chain_of("discount_conjunction", &model).unwrap();
        assert_eq!(chain.key(), "discount_regulation/discount_conjunction");
        assert_eq!(chain.root(), "discount_regulation");
    }

    #[test]
    fn root_leaf_is_its_own_chain() {
        let model = KnowledgeModel::new(store_bao()).unwrap();
        let chain = property_chain_of("definition", &model).unwrap();
        assert_eq!(chain.ids(), &[PropertyId::from("definition")]);
    }

    #[test]
    fn chain_errors() {
        let model = KnowledgeModel::new(store_bao()).unwrap();
        assert_eq!(
            property_chain_of("nope", &model),
            Err(ModelError::UnknownProperty("nope".into()))
        );
        assert_eq!(
            property_chain_of("discount_regulation", &model),
            Err(ModelError::NotALeaf("discount_regulation".into()))
        );
    }

    #[test]
    fn leaves_in_preorder() {
        let model = KnowledgeModel::new(store_bao()).unwrap();
        assert_eq!(
            leaves_under("discount_regulation", &model).unwrap(),
            vec![
                PropertyId::from("discount_conjunction"),
                PropertyId::from("discount_purchase_limitation")
            ]
        );
        assert_eq!(
            leaves_under("definition", &model).unwrap(),
            vec![PropertyId::from("definition")]
        );
        assert!(leaves_under("missing", &model).is_err());
        assert_eq!(model.class_chains("promotion_tool").len(), 3);
    }

    #[test]
    fn detects_parent_cycle() {
        let mut docs = store_bao();
        docs.properties[0].parent = Some("discount_conjunction".into());
        let violations = validate(&docs);
        assert!(
            violations.iter().any(|v| matches!(v, Violation::Cycle { path }
                if path.contains(&"discount_regulation".to_string())
                    && path.contains(&"discount_conjunction".to_string()))),
            "{violations:?}"
        );
    }

    #[test]
    fn detects_shape_mismatch_and_duplicates() {
        let mut docs = store_bao();
        docs.values[0].value = Value::KeyValueDoc { entries: vec![] };
        docs.values.push(docs.values[0].clone());
        let violations = validate(&docs);
        assert!(violations.iter().any(|v| matches!(v, Violation::ShapeMismatch { .. })));
        assert!(violations.iter().any(|v| matches!(v, Violation::DuplicateValue { .. })));
    }

    #[test]
    fn answer_column_count_enforced() {
        let mut docs = store_bao();
        docs.cvt_schemas.push(CvtSchema {
            id: "t".into(),
            columns: vec![
                CvtColumn {
                    column_name: "a".into(),
                    role: ColumnRole::Answer,
                    value_domain: ValueDomain::Text,
                    default: None,
                },
                CvtColumn {
                    column_name: "b".into(),
                    role: ColumnRole::Answer,
                    value_domain: ValueDomain::Text,
                    default: None,
                },
            ],
        });
        let violations = validate(&docs);
        assert_eq!(
            violations,
            vec![Violation::AnswerColumnCount {
                schema: "t".into(),
                count: 2
            }]
        );
    }

    #[test]
    fn member_of_requires_representative() {
        let mut docs = store_bao();
        docs.entities.push(Entity {
            id: "other".into(),
            name: "其他".into(),
            aliases: vec![],
            instance_of: "promotion_tool".into(),
            member_of: vec!["store_bao".into()],
            is_class_representative: false,
        });
        let violations = validate(&docs);
        assert!(matches!(violations[..], [Violation::NotClassRepresentative { .. }]));
    }

    #[test]
    fn leaf_and_internal_ranges() {
        let mut docs = store_bao();
        docs.properties[0].range = text();
        docs.properties[3].range = None;
        let violations = validate(&docs);
        assert!(violations.contains(&Violation::InternalWithRange {
            property: "discount_regulation".into()
        }));
        assert!(violations.contains(&Violation::LeafWithoutRange {
            property: "definition".into()
        }));
    }
}
