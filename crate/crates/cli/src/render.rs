//! Plain-text rendering of responses. Field order is fixed so output can
//! be compared byte for byte.

use std::fmt::Write;

use kbqa_core::model::{CellValue, ValueDomain};
use kbqa_core::reasoning::{AnswerBody, EntityLabel};
use kbqa_core::store::KnowledgeBase;
use kbqa_core::templates::Templates;
use kbqa_core::{AskResponse, Status};

pub fn response(resp: &AskResponse, kb: &KnowledgeBase, templates: &Templates) -> String {
    let mut out = String::new();
    let status = match resp.status {
        Status::Answered => "answered",
        Status::Recommended => "recommended",
        Status::NoMatch => "no_match",
    };
    let _ = writeln!(out, "status: {status}");
    if let Some(answer) = &resp.answer {
        match &answer.body {
            AnswerBody::SimpleText { text } => {
                let _ = writeln!(out, "answer: {text}");
            }
            AnswerBody::KeyValueTabs { tabs } => {
                out.push_str("answer:\n");
                for tab in tabs {
                    let _ = writeln!(out, "  [{}] {}", tab.key, tab.body);
                }
            }
            AnswerBody::TableAnswer {
                schema,
                rows,
                highlighted_cell,
                missing_conditions,
            } => {
                let _ = writeln!(out, "answer: table {}", schema.id);
                let header: Vec<&str> = schema.columns.iter().map(|c| c.column_name.as_str()).collect();
                let _ = writeln!(out, "  {}", header.join(" | "));
                for (r, row) in rows.iter().enumerate() {
                    let cells: Vec<String> = schema
                        .columns
                        .iter()
                        .enumerate()
                        .map(|(c, col)| {
                            let text = match row.get(&col.column_name) {
                                Some(CellValue::Text(id)) if col.value_domain == ValueDomain::EntityRef => {
                                    EntityLabel::of(kb.model(), &id.as_str().into())
                                        .display(templates)
                                        .to_owned()
                                }
                                Some(v) => v.to_string(),
                                None => String::new(),
                            };
                            let hit = highlighted_cell.is_some_and(|h| h.row == r && h.column == c);
                            if hit {
                                format!("[{text}]")
                            } else {
                                text
                            }
                        })
                        .collect();
                    let _ = writeln!(out, "  {}", cells.join(" | "));
                }
                if !missing_conditions.is_empty() {
                    let _ = writeln!(out, "missing conditions: {}", missing_conditions.join(", "));
                }
            }
            AnswerBody::NoAnswer { reason } => {
                let _ = writeln!(out, "answer: none ({reason})");
            }
        }
        if let Some(tips) = &answer.tips {
            let _ = writeln!(out, "tips: {tips}");
        }
        if !answer.explanation.is_empty() {
            out.push_str("explanation:\n");
            for step in &answer.explanation {
                let _ = writeln!(out, "  {}", step.text);
            }
        }
    }
    if !resp.recommendations.is_empty() {
        out.push_str("recommendations:\n");
        for (i, r) in resp.recommendations.iter().enumerate() {
            let _ = writeln!(out, "  {}. {}", i + 1, r.text);
        }
    }
    if let Some(debug) = &resp.debug {
        let _ = writeln!(out, "debug: kb_version {}", debug.kb_version);
        let _ = writeln!(out, "  masked: {}", debug.masked);
        for s in &debug.property_scores {
            let _ = writeln!(out, "  property {} {:.4}", s.property_chain.key(), s.score);
        }
        for g in &debug.graphs {
            let _ = writeln!(out, "  graph {:.4} {}", g.score, g.graph.key());
        }
    }
    out
}
