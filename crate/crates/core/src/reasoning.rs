//! Executes a ranked query graph: `member_of` type generalization, CVT row
//! filtering, and templated explanations of every step taken.

use serde::Serialize;
use thiserror::Error;

use crate::graph::{member_of_search, GraphShape, MemberHop, QueryGraph};
use crate::model::{
    CellValue, ColumnRole, CvtRow, CvtSchema, EntityId, KeyValueEntry, KnowledgeModel, PropertyId, Value, ValueDomain,
};
use crate::templates::{fill, TemplateError, TemplateRegistry, Templates};

pub const DEFAULT_MAX_DEPTH: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasoningError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("no ancestor of `{entity}` within {max_depth} hops configures `{property}`")]
    NoReifyingAncestor {
        entity: String,
        property: String,
        max_depth: usize,
    },
    #[error("`{entity}` generalizes to several entities configuring `{property}`: {}", candidates.join(", "))]
    AmbiguousAncestor {
        entity: String,
        property: String,
        candidates: Vec<String>,
    },
    #[error("graph does not fit the knowledge base: {0}")]
    DanglingGraph(String),
}

/// Walks `member_of` breadth-first until an entity configuring `leaf` is
/// found; zero hops when `entity` configures it itself.
pub fn generalize(
    entity: &str,
    leaf: &str,
    model: &KnowledgeModel,
    max_depth: usize,
) -> Result<(EntityId, Vec<MemberHop>), ReasoningError> {
    let start = model
        .entity(entity)
        .ok_or_else(|| ReasoningError::UnknownEntity(entity.to_owned()))?;
    let mut found = member_of_search(model, &start.id, max_depth, |e| model.reifies(e.as_str(), leaf));
    match found.len() {
        0 => Err(ReasoningError::NoReifyingAncestor {
            entity: entity.to_owned(),
            property: leaf.to_owned(),
            max_depth,
        }),
        1 => Ok(found.pop().expect("one result")),
        _ => Err(ReasoningError::AmbiguousAncestor {
            entity: entity.to_owned(),
            property: leaf.to_owned(),
            candidates: found.into_iter().map(|(e, _)| e.to_string()).collect(),
        }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityLabel {
    pub id: EntityId,
    pub name: String,
    /// First all-ASCII alias, used by locales preferring Latin names.
    pub latin: Option<String>,
}

impl EntityLabel {
    pub fn of(model: &KnowledgeModel, id: &EntityId) -> Self {
        match model.entity(id.as_str()) {
            Some(e) => Self {
                id: id.clone(),
                name: e.name.clone(),
                latin: std::iter::once(&e.name)
                    .chain(&e.aliases)
                    .find(|a| a.is_ascii())
                    .cloned(),
            },
            None => Self {
                id: id.clone(),
                name: id.to_string(),
                latin: None,
            },
        }
    }

    pub fn display(&self, templates: &Templates) -> &str {
        match (&self.latin, templates.prefer_latin_names) {
            (Some(latin), true) => latin,
            _ => &self.name,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Generalization,
    TableLookup,
    DirectValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionBinding {
    pub column: String,
    pub value: String,
    pub value_label: Option<EntityLabel>,
    pub defaulted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepBindings {
    Generalization {
        from: EntityLabel,
        to: EntityLabel,
    },
    TableLookup {
        table: String,
        entity: EntityLabel,
        conditions: Vec<ConditionBinding>,
        matched_rows: usize,
        answer: Option<String>,
    },
    DirectValue {
        entity: EntityLabel,
        property: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplanationStep {
    pub step_kind: StepKind,
    pub text: String,
    pub bindings: StepBindings,
}

impl ExplanationStep {
    fn new(bindings: StepBindings, templates: &Templates) -> Self {
        let step_kind = match &bindings {
            StepBindings::Generalization { .. } => StepKind::Generalization,
            StepBindings::TableLookup { .. } => StepKind::TableLookup,
            StepBindings::DirectValue { .. } => StepKind::DirectValue,
        };
        let text = render_step(&bindings, templates);
        Self {
            step_kind,
            text,
            bindings,
        }
    }
}

/// One sentence for one step, on a single line.
pub fn render_step(bindings: &StepBindings, t: &Templates) -> String {
    let sentence = match bindings {
        StepBindings::Generalization { from, to } => {
            fill(&t.generalization, &[("from", from.display(t)), ("to", to.display(t))])
        }
        StepBindings::TableLookup {
            table,
            entity,
            conditions,
            matched_rows,
            answer,
        } => {
            let rows = matched_rows.to_string();
            let outcome = match (answer, matched_rows) {
                (Some(a), 1) => a.clone(),
                (_, 0) => t.outcome_none.clone(),
                _ => fill(&t.outcome_rows, &[("rows", &rows)]),
            };
            let rendered: Vec<String> = conditions
                .iter()
                .map(|c| {
                    let value = c.value_label.as_ref().map_or(c.value.as_str(), |l| l.display(t));
                    let template = if c.defaulted {
                        &t.default_condition
                    } else {
                        &t.condition
                    };
                    fill(template, &[("column", &c.column), ("value", value)])
                })
                .collect();
            if rendered.is_empty() {
                fill(
                    &t.table_scan,
                    &[("table", table), ("entity", entity.display(t)), ("outcome", &outcome)],
                )
            } else {
                fill(
                    &t.table_lookup,
                    &[
                        ("table", table),
                        ("entity", entity.display(t)),
                        ("conditions", &rendered.join(&t.condition_separator)),
                        ("outcome", &outcome),
                    ],
                )
            }
        }
        StepBindings::DirectValue { entity, property } => fill(
            &t.direct_value,
            &[("entity", entity.display(t)), ("property", property)],
        ),
    };
    sentence.replace(['\n', '\r'], " ")
}

/// Renders steps in order, one sentence per line.
pub fn render_explanation(
    steps: &[ExplanationStep],
    locale: &str,
    registry: &TemplateRegistry,
) -> Result<String, TemplateError> {
    let t = registry.get(locale)?;
    Ok(steps
        .iter()
        .map(|s| render_step(&s.bindings, t))
        .collect::<Vec<_>>()
        .join("\n"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HighlightedCell {
    pub row: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnswerBody {
    SimpleText {
        text: String,
    },
    KeyValueTabs {
        tabs: Vec<KeyValueEntry>,
    },
    TableAnswer {
        schema: CvtSchema,
        rows: Vec<CvtRow>,
        /// Row index into `rows` and column index into `schema.columns`.
        highlighted_cell: Option<HighlightedCell>,
        missing_conditions: Vec<String>,
    },
    NoAnswer {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Answer {
    #[serde(flatten)]
    pub body: AnswerBody,
    pub explanation: Vec<ExplanationStep>,
    pub tips: Option<String>,
}

impl Answer {
    pub fn is_answered(&self) -> bool {
        !matches!(self.body, AnswerBody::NoAnswer { .. })
    }

    /// The highlighted cell's text, if exactly one row survived.
    pub fn highlighted_text(&self) -> Option<&str> {
        match &self.body {
            AnswerBody::TableAnswer {
                schema,
                rows,
                highlighted_cell: Some(cell),
                ..
            } => rows[cell.row]
                .get(&schema.columns[cell.column].column_name)
                .and_then(CellValue::as_text),
            _ => None,
        }
    }
}

pub struct ExecutionContext<'a> {
    pub templates: &'a Templates,
    pub max_depth: usize,
}

fn no_answer(reason: String, explanation: Vec<ExplanationStep>) -> Answer {
    Answer {
        body: AnswerBody::NoAnswer { reason },
        explanation,
        tips: None,
    }
}

/// Equality filter over all `(column, value)` pairs; returns surviving row indices.
pub fn filter_rows(rows: &[CvtRow], constraints: &[(String, CellValue)]) -> Vec<usize> {
    rows.iter()
        .enumerate()
        .filter(|(_, row)| constraints.iter().all(|(col, v)| row.get(col) == Some(v)))
        .map(|(i, _)| i)
        .collect()
}

/// Runs a graph against the model. Read-only.
pub fn execute(
    graph: &QueryGraph,
    model: &KnowledgeModel,
    ctx: &ExecutionContext<'_>,
) -> Result<Answer, ReasoningError> {
    let t = ctx.templates;
    let leaf_id: &PropertyId = graph.chain.leaf();
    let leaf = model
        .property(leaf_id.as_str())
        .ok_or_else(|| ReasoningError::DanglingGraph(format!("unknown property `{leaf_id}`")))?;
    if !model.is_leaf(leaf_id.as_str()) {
        return Err(ReasoningError::DanglingGraph(format!("`{leaf_id}` is not a leaf")));
    }
    if model.entity(graph.topic_entity.as_str()).is_none() {
        return Err(ReasoningError::DanglingGraph(format!(
            "unknown entity `{}`",
            graph.topic_entity
        )));
    }

    let mut steps = Vec::new();
    let mut hops = Vec::new();
    let mut start = graph.topic_entity.clone();
    let mut depth_left = ctx.max_depth;
    if let Some(hop) = &graph.inferred_domain {
        let edge_exists = hop.from == graph.topic_entity
            && model
                .entity(hop.from.as_str())
                .is_some_and(|e| e.member_of.contains(&hop.to));
        if !edge_exists {
            return Err(ReasoningError::DanglingGraph(format!(
                "no member_of edge {} -> {}",
                hop.from, hop.to
            )));
        }
        hops.push(hop.clone());
        start = hop.to.clone();
        depth_left = depth_left.saturating_sub(1);
    }
    match generalize(start.as_str(), leaf_id.as_str(), model, depth_left) {
        Ok((_, more)) => hops.extend(more),
        Err(e) => return Ok(no_answer(e.to_string(), steps)),
    }
    let owner = hops.last().map_or(start, |h| h.to.clone());
    for hop in &hops {
        steps.push(ExplanationStep::new(
            StepBindings::Generalization {
                from: EntityLabel::of(model, &hop.from),
                to: EntityLabel::of(model, &hop.to),
            },
            t,
        ));
    }

    let reified = model
        .value(owner.as_str(), leaf_id.as_str())
        .expect("generalize returns an entity that reifies the leaf");
    let owner_label = EntityLabel::of(model, &owner);
    let tips = reified.tips.clone();

    match (&graph.shape, &reified.value) {
        (GraphShape::Basic, Value::Simple { value }) => {
            steps.push(ExplanationStep::new(
                StepBindings::DirectValue {
                    entity: owner_label,
                    property: leaf.name.clone(),
                },
                t,
            ));
            Ok(Answer {
                body: AnswerBody::SimpleText {
                    text: value.to_string(),
                },
                explanation: steps,
                tips,
            })
        }
        (GraphShape::Basic, Value::KeyValueDoc { entries }) => {
            steps.push(ExplanationStep::new(
                StepBindings::DirectValue {
                    entity: owner_label,
                    property: leaf.name.clone(),
                },
                t,
            ));
            Ok(Answer {
                body: AnswerBody::KeyValueTabs { tabs: entries.clone() },
                explanation: steps,
                tips,
            })
        }
        (GraphShape::Cvt { constraints, .. }, Value::CvtTable { schema_id, rows }) => {
            let schema = model
                .schema(schema_id.as_str())
                .ok_or_else(|| ReasoningError::DanglingGraph(format!("unknown schema `{schema_id}`")))?;
            let mut effective: Vec<(String, CellValue)> = Vec::new();
            let mut bindings: Vec<ConditionBinding> = Vec::new();
            for c in constraints {
                let column = schema
                    .column(&c.column)
                    .filter(|col| col.role == ColumnRole::Condition)
                    .ok_or_else(|| {
                        ReasoningError::DanglingGraph(format!("`{}` is not a condition column", c.column))
                    })?;
                let mut value = c.value.clone();
                if column.value_domain == ValueDomain::EntityRef {
                    let present = rows.iter().any(|r| r.get(&c.column) == Some(&value));
                    if let (false, Some(id)) = (present, value.as_text().map(EntityId::from)) {
                        let found = member_of_search(model, &id, ctx.max_depth, |e| {
                            rows.iter()
                                .any(|r| r.get(&c.column).and_then(CellValue::as_text) == Some(e.as_str()))
                        });
                        match found.as_slice() {
                            [(target, path)] => {
                                for hop in path {
                                    steps.push(ExplanationStep::new(
                                        StepBindings::Generalization {
                                            from: EntityLabel::of(model, &hop.from),
                                            to: EntityLabel::of(model, &hop.to),
                                        },
                                        t,
                                    ));
                                }
                                value = CellValue::Text(target.to_string());
                            }
                            [] => {}
                            several => {
                                let names: Vec<String> = several.iter().map(|(e, _)| e.to_string()).collect();
                                return Ok(no_answer(
                                    format!(
                                        "constraint value `{}` generalizes ambiguously to {}",
                                        c.value,
                                        names.join(", ")
                                    ),
                                    steps,
                                ));
                            }
                        }
                    }
                }
                bindings.push(condition_binding(model, &c.column, &value, column.value_domain, false));
                effective.push((c.column.clone(), value));
            }
            for column in schema.condition_columns() {
                if effective.iter().any(|(name, _)| *name == column.column_name) {
                    continue;
                }
                if let Some(default) = &column.default {
                    bindings.push(condition_binding(
                        model,
                        &column.column_name,
                        default,
                        column.value_domain,
                        true,
                    ));
                    effective.push((column.column_name.clone(), default.clone()));
                }
            }

            let surviving = filter_rows(rows, &effective);
            let answer_idx = schema
                .columns
                .iter()
                .position(|c| c.role == ColumnRole::Answer)
                .ok_or_else(|| ReasoningError::DanglingGraph(format!("schema `{schema_id}` has no answer column")))?;
            let answer_name = &schema.columns[answer_idx].column_name;
            let answer_text = (surviving.len() == 1)
                .then(|| rows[surviving[0]].get(answer_name).map(ToString::to_string))
                .flatten();
            steps.push(ExplanationStep::new(
                StepBindings::TableLookup {
                    table: schema_id.to_string(),
                    entity: owner_label,
                    conditions: bindings,
                    matched_rows: surviving.len(),
                    answer: answer_text,
                },
                t,
            ));

            if surviving.is_empty() {
                let mut prefix: Vec<(String, CellValue)> = Vec::new();
                let mut failing = None;
                for constraint in &effective {
                    prefix.push(constraint.clone());
                    if filter_rows(rows, &prefix).is_empty() {
                        failing = Some(constraint.clone());
                        break;
                    }
                }
                let reason = match failing {
                    Some((column, value)) => format!("no row of `{schema_id}` has {column} = {value}"),
                    None => format!("table `{schema_id}` is empty"),
                };
                return Ok(no_answer(reason, steps));
            }

            let missing_conditions = if surviving.len() > 1 {
                schema
                    .condition_columns()
                    .filter(|c| !effective.iter().any(|(name, _)| *name == c.column_name))
                    .map(|c| c.column_name.clone())
                    .collect()
            } else {
                Vec::new()
            };
            let highlighted_cell = (surviving.len() == 1).then_some(HighlightedCell {
                row: 0,
                column: answer_idx,
            });
            Ok(Answer {
                body: AnswerBody::TableAnswer {
                    schema: schema.clone(),
                    rows: surviving.iter().map(|&i| rows[i].clone()).collect(),
                    highlighted_cell,
                    missing_conditions,
                },
                explanation: steps,
                tips,
            })
        }
        (shape, _) => Err(ReasoningError::DanglingGraph(format!(
            "graph shape {} does not match the stored value of `{owner}`/`{leaf_id}`",
            if matches!(shape, GraphShape::Basic) {
                "basic"
            } else {
                "cvt"
            }
        ))),
    }
}

fn condition_binding(
    model: &KnowledgeModel,
    column: &str,
    value: &CellValue,
    domain: ValueDomain,
    defaulted: bool,
) -> ConditionBinding {
    let value_label = match (domain, value) {
        (ValueDomain::EntityRef, CellValue::Text(id)) => Some(EntityLabel::of(model, &EntityId::from(id.as_str()))),
        _ => None,
    };
    ConditionBinding {
        column: column.to_owned(),
        value: value.to_string(),
        value_label,
        defaulted,
    }
}
