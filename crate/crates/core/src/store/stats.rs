//! Knowledge-management metrics: compression ratios against a legacy
//! QA-pair corpus, the CVT share of properties, and session resolution rate.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::model::{KnowledgeModel, ValueTypeSpec};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatsError {
    #[error("input must not be empty")]
    EmptyInput,
}

/// An exact non-negative rational with half-up decimal rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExactRatio(Ratio<u64>);

impl ExactRatio {
    /// `None` when the denominator is zero.
    pub fn new(numerator: u64, denominator: u64) -> Option<Self> {
        (denominator != 0).then(|| Self(Ratio::new(numerator, denominator)))
    }

    pub fn numerator(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denominator(&self) -> u64 {
        *self.0.denom()
    }

    pub fn as_ratio(&self) -> Ratio<u64> {
        self.0
    }

    pub fn to_f64(&self) -> f64 {
        self.numerator() as f64 / self.denominator() as f64
    }

    /// Decimal string rounded half-up to `places` digits.
    pub fn rounded(&self, places: u32) -> String {
        Self::render(self.numerator() as u128, self.denominator() as u128, places)
    }

    /// Percentage string rounded half-up to `places` digits, with `%`.
    pub fn percent(&self, places: u32) -> String {
        format!(
            "{}%",
            Self::render(self.numerator() as u128 * 100, self.denominator() as u128, places)
        )
    }

    fn render(numerator: u128, denominator: u128, places: u32) -> String {
        let scale = 10u128.pow(places);
        let scaled = numerator * scale;
        let mut q = scaled / denominator;
        if 2 * (scaled % denominator) >= denominator {
            q += 1;
        }
        if places == 0 {
            return q.to_string();
        }
        format!("{}.{:0width$}", q / scale, q % scale, width = places as usize)
    }
}

impl fmt::Display for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numerator(), self.denominator())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbStats {
    pub qa_count: u64,
    pub entity_count: u64,
    /// Leaf properties only.
    pub property_count: u64,
    pub cvt_property_count: u64,
    pub compr1: Option<ExactRatio>,
    pub compr2: Option<ExactRatio>,
    pub cvt_ratio: Option<ExactRatio>,
}

#[derive(Serialize)]
struct RatioReport {
    numerator: u64,
    denominator: u64,
    value: String,
}

impl Serialize for KbStats {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            qa_count: u64,
            entity_count: u64,
            property_count: u64,
            cvt_property_count: u64,
            compr1: Option<RatioReport>,
            compr2: Option<RatioReport>,
            cvt_ratio: Option<RatioReport>,
        }
        let report = |r: &Option<ExactRatio>, percent: bool| {
            r.map(|r| RatioReport {
                numerator: r.numerator(),
                denominator: r.denominator(),
                value: if percent { r.percent(2) } else { r.rounded(2) },
            })
        };
        Repr {
            qa_count: self.qa_count,
            entity_count: self.entity_count,
            property_count: self.property_count,
            cvt_property_count: self.cvt_property_count,
            compr1: report(&self.compr1, false),
            compr2: report(&self.compr2, false),
            cvt_ratio: report(&self.cvt_ratio, true),
        }
        .serialize(serializer)
    }
}

impl fmt::Display for KbStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |r: &Option<ExactRatio>, percent: bool| match r {
            Some(r) if percent => format!("{} ({r})", r.percent(2)),
            Some(r) => format!("{} ({r})", r.rounded(2)),
            None => "undefined".to_string(),
        };
        writeln!(f, "#QA {}", self.qa_count)?;
        writeln!(f, "#Entity {}", self.entity_count)?;
        writeln!(f, "#Property {}", self.property_count)?;
        writeln!(f, "#CVTProperty {}", self.cvt_property_count)?;
        writeln!(f, "Compr1 {}", show(&self.compr1, false))?;
        writeln!(f, "Compr2 {}", show(&self.compr2, false))?;
        writeln!(f, "CVTr {}", show(&self.cvt_ratio, true))
    }
}

/// Computes the compression and CVT ratios for `model` against a legacy
/// corpus of `qa_count` question-answer pairs.
pub fn compute_stats(model: &KnowledgeModel, qa_count: u64) -> KbStats {
    let entity_count = model.entities().len() as u64;
    let mut property_count = 0;
    let mut cvt_property_count = 0;
    for p in model.leaf_properties() {
        property_count += 1;
        if matches!(p.range, Some(ValueTypeSpec::Cvt { .. })) {
            cvt_property_count += 1;
        }
    }
    KbStats {
        qa_count,
        entity_count,
        property_count,
        cvt_property_count,
        compr1: ExactRatio::new(qa_count, property_count),
        compr2: ExactRatio::new(qa_count, entity_count + property_count),
        cvt_ratio: ExactRatio::new(cvt_property_count, property_count),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    #[serde(default)]
    pub disliked: bool,
    #[serde(default)]
    pub no_answer: bool,
    #[serde(default)]
    pub requested_staff: bool,
}

impl SessionRecord {
    pub fn is_unsolved(&self) -> bool {
        self.disliked || self.no_answer || self.requested_staff
    }
}

/// `1 - unsolved / total`.
pub fn resolution_rate(sessions: &[SessionRecord]) -> Result<ExactRatio, StatsError> {
    let total = sessions.len() as u64;
    let unsolved = sessions.iter().filter(|s| s.is_unsolved()).count() as u64;
    ExactRatio::new(total - unsolved, total).ok_or(StatsError::EmptyInput)
}

/// QA pairs needed to enumerate every pairwise combination of the kinds
/// of each class, versus structured items: one property, the class-level
/// regulations (`regulation_pairs`, default classes squared) and one
/// instance/member tuple per kind.
pub fn regulation_compression(
    kinds_per_class: &[u64],
    regulation_pairs: Option<u64>,
) -> Result<(u64, u64), StatsError> {
    if kinds_per_class.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let kinds: u64 = kinds_per_class.iter().sum();
    let classes = kinds_per_class.len() as u64;
    let regulations = regulation_pairs.unwrap_or(classes * classes);
    Ok((kinds * kinds, 1 + regulations + kinds))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_rounding() {
        assert_eq!(ExactRatio::new(1, 8).unwrap().rounded(2), "0.13");
        assert_eq!(ExactRatio::new(1, 200).unwrap().rounded(2), "0.01");
        assert_eq!(ExactRatio::new(1, 3).unwrap().rounded(2), "0.33");
        assert_eq!(ExactRatio::new(2, 1).unwrap().rounded(2), "2.00");
        assert_eq!(ExactRatio::new(45, 72).unwrap().percent(2), "62.50%");
        assert_eq!(ExactRatio::new(0, 5).unwrap().rounded(2), "0.00");
    }

    #[test]
    fn zero_denominator_is_undefined() {
        assert_eq!(ExactRatio::new(3, 0), None);
    }

    #[test]
    fn resolution_rate_direct() {
        let mut sessions: Vec<SessionRecord> = (0..10)
            .map(|i| SessionRecord {
                session_id: i.to_string(),
                disliked: false,
                no_answer: false,
                requested_staff: false,
            })
            .collect();
        sessions[3].requested_staff = true;
        assert_eq!(resolution_rate(&sessions).unwrap().to_f64(), 0.9);
        for s in &mut sessions {
            s.disliked = true;
        }
        assert_eq!(resolution_rate(&sessions).unwrap().to_f64(), 0.0);
        assert_eq!(resolution_rate(&[]), Err(StatsError::EmptyInput));
    }

    #[test]
    fn regulation_arithmetic() {
        assert_eq!(regulation_compression(&[15, 12, 5], None), Ok((1024, 42)));
        assert_eq!(regulation_compression(&[1], None), Ok((1, 3)));
        assert_eq!(regulation_compression(&[15, 12, 5], Some(9)), Ok((1024, 42)));
        assert_eq!(regulation_compression(&[], None), Err(StatsError::EmptyInput));
    }
}
