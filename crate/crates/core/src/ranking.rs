//! Feature extraction `f(q, g)`, a linear scorer, deterministic ranking,
//! and a pairwise-logistic weight trainer.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphShape, QueryGraph};
use crate::model::KnowledgeModel;

pub const FEATURE_COUNT: usize = 7;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "entity_match",
    "property_score",
    "constraint_count",
    "constraint_coverage",
    "token_coverage",
    "inference_penalty",
    "shape_is_cvt",
];

/// Constraint counts are divided by this and capped at 1.
pub const CONSTRAINT_COUNT_CAP: f64 = 4.0;

/// Particles and punctuation ignored by `token_coverage`.
pub const DEFAULT_STOP_CHARS: &str = "的了吗呢啊吧么是和与及或在把被就都也还请问？?！!，,。.、：:；;\"'“”‘’()（）";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureVector {
    pub entity_match: f64,
    pub property_score: f64,
    pub constraint_count: u32,
    pub constraint_coverage: f64,
    pub token_coverage: f64,
    pub inference_penalty: f64,
    pub shape_is_cvt: f64,
}

impl FeatureVector {
    /// Normalized feature values in [`FEATURE_NAMES`] order; the space both
    /// scoring and training operate in.
    pub fn values(&self) -> [f64; FEATURE_COUNT] {
        [
            self.entity_match,
            self.property_score,
            (self.constraint_count as f64 / CONSTRAINT_COUNT_CAP).min(1.0),
            self.constraint_coverage,
            self.token_coverage,
            self.inference_penalty,
            self.shape_is_cvt,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankWeights {
    pub entity_match: f64,
    pub property_score: f64,
    pub constraint_count: f64,
    pub constraint_coverage: f64,
    pub token_coverage: f64,
    pub inference_penalty: f64,
    pub shape_is_cvt: f64,
}

impl Default for RankWeights {
    fn default() -> Self {
        Self {
            entity_match: 1.0,
            property_score: 2.0,
            constraint_count: 0.25,
            constraint_coverage: 1.5,
            token_coverage: 1.0,
            inference_penalty: -0.25,
            shape_is_cvt: 0.0,
        }
    }
}

impl RankWeights {
    pub fn zero() -> Self {
        Self::from_array([0.0; FEATURE_COUNT])
    }

    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.entity_match,
            self.property_score,
            self.constraint_count,
            self.constraint_coverage,
            self.token_coverage,
            self.inference_penalty,
            self.shape_is_cvt,
        ]
    }

    pub fn from_array(w: [f64; FEATURE_COUNT]) -> Self {
        Self {
            entity_match: w[0],
            property_score: w[1],
            constraint_count: w[2],
            constraint_coverage: w[3],
            token_coverage: w[4],
            inference_penalty: w[5],
            shape_is_cvt: w[6],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|w| w.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    pub stop_chars: HashSet<char>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self::with_stop_chars(DEFAULT_STOP_CHARS)
    }
}

impl FeatureConfig {
    pub fn with_stop_chars(chars: &str) -> Self {
        Self {
            stop_chars: chars.chars().collect(),
        }
    }

    pub fn is_filler(&self, c: char) -> bool {
        c.is_whitespace() || self.stop_chars.contains(&c)
    }
}

/// Builds `f(q, g)` from the graph's provenance and bound constraints.
pub fn extract_features(
    question: &str,
    graph: &QueryGraph,
    model: &KnowledgeModel,
    config: &FeatureConfig,
) -> FeatureVector {
    let topic = &graph.provenance.topic_mention;
    let surface_len = topic.surface.chars().count();
    let name_len = model
        .entity(graph.topic_entity.as_str())
        .map_or(surface_len, |e| e.name.chars().count());
    let entity_match = if surface_len == 0 {
        0.0
    } else {
        surface_len as f64 / surface_len.max(name_len) as f64
    };

    let constraints = graph.constraints();
    let constraint_coverage = match &graph.shape {
        GraphShape::Basic => 1.0,
        GraphShape::Cvt { .. } => {
            let total = model
                .range_schema(graph.chain.leaf().as_str())
                .map_or(0, |s| s.condition_columns().count());
            if total == 0 {
                1.0
            } else {
                constraints.len() as f64 / total as f64
            }
        }
    };

    let mut spans = vec![topic.byte_span];
    spans.extend(constraints.iter().map(|c| c.source_mention.byte_span));
    let mut content = 0usize;
    let mut explained = 0usize;
    for (i, c) in question.char_indices() {
        if config.is_filler(c) {
            continue;
        }
        content += 1;
        if spans.iter().any(|&(s, e)| s <= i && i < e) {
            explained += 1;
        }
    }
    let token_coverage = if content == 0 {
        0.0
    } else {
        explained as f64 / content as f64
    };

    FeatureVector {
        entity_match,
        property_score: graph.provenance.property_score.clamp(0.0, 1.0),
        constraint_count: constraints.len() as u32,
        constraint_coverage,
        token_coverage,
        inference_penalty: if graph.inference_hops() > 0 { 1.0 } else { 0.0 },
        shape_is_cvt: if graph.is_cvt() { 1.0 } else { 0.0 },
    }
}

/// Dot product of normalized features and weights.
pub fn score(features: &FeatureVector, weights: &RankWeights) -> f64 {
    dot(&features.values(), &weights.to_array())
}

fn dot(a: &[f64; FEATURE_COUNT], b: &[f64; FEATURE_COUNT]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedGraph {
    pub graph: QueryGraph,
    pub features: FeatureVector,
    pub score: f64,
}

/// Sorts by score, then fewer inference hops, more bound constraints and
/// finally the graph key.
pub fn rank(
    question: &str,
    graphs: Vec<QueryGraph>,
    weights: &RankWeights,
    model: &KnowledgeModel,
    config: &FeatureConfig,
) -> Vec<RankedGraph> {
    let mut ranked: Vec<(String, RankedGraph)> = graphs
        .into_iter()
        .map(|graph| {
            let features = extract_features(question, &graph, model, config);
            let score = score(&features, weights);
            (graph.key(), RankedGraph { graph, features, score })
        })
        .collect();
    ranked.sort_by(|(ka, a), (kb, b)| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.graph.inference_hops().cmp(&b.graph.inference_hops()))
            .then_with(|| b.graph.constraints().len().cmp(&a.graph.constraints().len()))
            .then_with(|| ka.cmp(kb))
    });
    ranked.into_iter().map(|(_, r)| r).collect()
}

#[derive(Debug, Error)]
pub enum WeightsError {
    #[error("cannot read weights file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid weights file {path}: {message}")]
    Invalid { path: String, message: String },
}

impl RankWeights {
    /// Reads a JSON object of feature name to weight. Missing features keep
    /// their default weight; unknown names and non-finite values are rejected.
    pub fn from_json_file(path: &Path) -> Result<Self, WeightsError> {
        let text = std::fs::read_to_string(path).map_err(|source| WeightsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|message| WeightsError::Invalid {
            path: path.display().to_string(),
            message,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let w: RankWeights = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if !w.is_finite() {
            return Err("weights must be finite".into());
        }
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainingError {
    #[error("training set is empty")]
    EmptyTrainingSet,
}

/// A preference between two graphs generated from the same question.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub question: String,
    pub preferred: QueryGraph,
    pub rejected: QueryGraph,
}

/// Preferred and rejected feature vectors of one pair.
pub type FeaturePair = (FeatureVector, FeatureVector);

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub weights: RankWeights,
    /// Mean loss before training, then after each epoch.
    pub losses: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Mean of `log(1 + exp(-(s_pref - s_rej)))` over the pairs.
pub fn pairwise_loss(weights: &RankWeights, pairs: &[FeaturePair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let w = weights.to_array();
    pairs
        .iter()
        .map(|(p, r)| softplus(-(dot(&p.values(), &w) - dot(&r.values(), &w))))
        .sum::<f64>()
        / pairs.len() as f64
}

/// Analytic gradient of [`pairwise_loss`] with respect to the weights.
pub fn pairwise_gradient(weights: &RankWeights, pairs: &[FeaturePair]) -> [f64; FEATURE_COUNT] {
    let mut grad = [0.0; FEATURE_COUNT];
    if pairs.is_empty() {
        return grad;
    }
    let w = weights.to_array();
    for (p, r) in pairs {
        let (xp, xr) = (p.values(), r.values());
        let margin = dot(&xp, &w) - dot(&xr, &w);
        // d/dm softplus(-m) = -sigmoid(-m)
        let coef = -1.0 / (1.0 + margin.exp());
        for k in 0..FEATURE_COUNT {
            grad[k] += coef * (xp[k] - xr[k]);
        }
    }
    let n = pairs.len() as f64;
    grad.map(|g| g / n)
}

/// Fraction of pairs where the preferred graph scores strictly higher.
pub fn pairwise_accuracy(weights: &RankWeights, pairs: &[FeaturePair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let correct = pairs
        .iter()
        .filter(|(p, r)| score(p, weights) > score(r, weights))
        .count();
    correct as f64 / pairs.len() as f64
}

/// Full-batch projected gradient descent on the pairwise logistic loss.
/// The inference-penalty weight is kept non-positive.
pub fn train_on_features(
    pairs: &[FeaturePair],
    initial: RankWeights,
    epochs: usize,
    learning_rate: f64,
) -> Result<TrainingOutcome, TrainingError> {
    if pairs.is_empty() {
        return Err(TrainingError::EmptyTrainingSet);
    }
    let mut w = initial.to_array();
    let mut losses = vec![pairwise_loss(&initial, pairs)];
    for _ in 0..epochs {
        let grad = pairwise_gradient(&RankWeights::from_array(w), pairs);
        for k in 0..FEATURE_COUNT {
            w[k] -= learning_rate * grad[k];
        }
        w[5] = w[5].min(0.0);
        losses.push(pairwise_loss(&RankWeights::from_array(w), pairs));
    }
    Ok(TrainingOutcome {
        weights: RankWeights::from_array(w),
        losses,
    })
}

/// Extracts features for each pair and trains from `initial`.
pub fn train_pairwise(
    examples: &[TrainingPair],
    model: &KnowledgeModel,
    config: &FeatureConfig,
    initial: RankWeights,
    epochs: usize,
    learning_rate: f64,
) -> Result<TrainingOutcome, TrainingError> {
    let pairs: Vec<FeaturePair> = examples
        .iter()
        .map(|ex| {
            (
                extract_features(&ex.question, &ex.preferred, model, config),
                extract_features(&ex.question, &ex.rejected, model, config),
            )
        })
        .collect();
    train_on_features(&pairs, initial, epochs, learning_rate)
}
