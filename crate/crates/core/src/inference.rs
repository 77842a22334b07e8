//! Decoding question answers into relations: the hard converter, soft
//! relation distributions, argmax prediction, decoding against another
//! schema, fixed label mappings between schemas and the rule-based
//! aggregation of LLM answers about start and end points.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logic::{self, Assignment, Gradient, QVector};
use crate::par;
use crate::point::PointRelation;
use crate::schema::{builtin, RelationSchema};

/// Outcome of matching a binary assignment against a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Conversion<'a> {
    pub relation: &'a str,
    pub index: usize,
    /// True when zero or several expressions held and the Vague fallback was used.
    pub ambiguous: bool,
    /// Indices of every relation whose expression held.
    pub matched: Vec<usize>,
}

/// Find the unique relation whose expression holds; fall back to the schema's
/// Vague relation (flagged) when there is not exactly one.
pub fn convert(m: Assignment, s: &RelationSchema) -> Conversion<'_> {
    let matched = s.matching(m);
    let (index, ambiguous) = match matched.as_slice() {
        [only] => (*only, false),
        _ => (s.vague_index(), true),
    };
    Conversion {
        relation: &s.relation_names()[index],
        index,
        ambiguous,
        matched,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// Product / probabilistic-sum / complement operators on the expression tree.
    #[default]
    Product,
    /// Exact probability of the expression's minterms under independent atoms.
    ProbSum,
}

impl Semantics {
    pub fn as_str(self) -> &'static str {
        match self {
            Semantics::Product => "product",
            Semantics::ProbSum => "prob_sum",
        }
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Semantics {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "product" | "soft" => Ok(Semantics::Product),
            "prob_sum" | "prob-sum" => Ok(Semantics::ProbSum),
            other => Err(Error::InvalidConfig(format!("unknown semantics `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub relation: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDistribution {
    pub schema: String,
    pub semantics: Semantics,
    /// Schema order, Vague last.
    pub values: Vec<RelationScore>,
}

impl RelationDistribution {
    pub fn get(&self, relation: &str) -> Option<f64> {
        self.values.iter().find(|v| v.relation == relation).map(|v| v.p)
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.p).collect()
    }

    /// Highest-valued relation; ties go to the earlier relation in schema order.
    pub fn argmax(&self) -> &str {
        &self.values[argmax(self.values.iter().map(|v| v.p))].relation
    }
}

pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-relation values in schema order.
pub fn relation_values(q: &QVector, s: &RelationSchema, semantics: Semantics) -> Vec<f64> {
    let c = s.compiled();
    match semantics {
        Semantics::Product => c.exprs.iter().map(|e| logic::eval_soft(e, q)).collect(),
        Semantics::ProbSum => c.minterms.iter().map(|m| logic::prob_sum_of(m, q)).collect(),
    }
}

/// Per-relation values and their gradients with respect to the eight atoms.
pub fn relation_values_with_grad(q: &QVector, s: &RelationSchema, semantics: Semantics) -> (Vec<f64>, Vec<Gradient>) {
    let c = s.compiled();
    let pairs: Vec<(f64, Gradient)> = match semantics {
        Semantics::Product => c.exprs.iter().map(|e| logic::grad_soft(e, q)).collect(),
        Semantics::ProbSum => c.minterms.iter().map(|m| logic::grad_prob_sum_of(m, q)).collect(),
    };
    pairs.into_iter().unzip()
}

pub fn soft_distribution(q: &QVector, s: &RelationSchema, semantics: Semantics) -> RelationDistribution {
    let values = relation_values(q, s, semantics)
        .into_iter()
        .zip(s.relation_names())
        .map(|(p, name)| RelationScore {
            relation: name.clone(),
            p,
        })
        .collect();
    RelationDistribution {
        schema: s.name().to_string(),
        semantics,
        values,
    }
}

/// Soft argmax, ties to the earlier relation. Binary inputs go through
/// [`convert`] so that ambiguous assignments fall back to Vague.
pub fn predict<'a>(q: &QVector, s: &'a RelationSchema, semantics: Semantics) -> &'a str {
    if q.is_binary() {
        return convert(q.threshold(), s).relation;
    }
    &s.relation_names()[argmax(relation_values(q, s, semantics))]
}

pub fn predict_batch<'a>(qs: &[QVector], s: &'a RelationSchema, semantics: Semantics) -> Vec<&'a str> {
    par::map(qs, |q| predict(q, s, semantics))
}

pub fn convert_batch<'a>(ms: &[Assignment], s: &'a RelationSchema) -> Vec<&'a str> {
    par::map(ms, |m| convert(*m, s).relation)
}

/// Question-layer input to decoding: probabilities or already thresholded answers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuestionInput {
    Probabilities(QVector),
    Answers(Assignment),
}

/// Decode question-layer output against any schema. The question layer is
/// schema-agnostic, so no source schema is involved.
pub fn transfer_decode<'a>(input: &QuestionInput, target: &'a RelationSchema, semantics: Semantics) -> &'a str {
    match input {
        QuestionInput::Probabilities(q) => predict(q, target, semantics),
        QuestionInput::Answers(m) => convert(*m, target).relation,
    }
}

/// Total function from one schema's relation names to another's.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMapping {
    pub name: String,
    pub source: String,
    pub target: String,
    pub mapping: BTreeMap<String, String>,
}

impl LabelMapping {
    /// Parse a JSON mapping and check it is total over `source` and lands in `target`.
    pub fn from_json(text: &str, source: &RelationSchema, target: &RelationSchema) -> Result<Self> {
        let m: LabelMapping = serde_json::from_str(text)?;
        m.check(source, target)?;
        Ok(m)
    }

    pub fn check(&self, source: &RelationSchema, target: &RelationSchema) -> Result<()> {
        for r in source.relation_names() {
            let t = self.mapping.get(r).ok_or_else(|| Error::UnknownRelation {
                relation: r.clone(),
                context: Some(format!("mapping `{}` has no entry", self.name)),
            })?;
            target.require_index(t)?;
        }
        for r in self.mapping.keys() {
            source.require_index(r)?;
        }
        Ok(())
    }
}

pub const MAPPING1_JSON: &str = include_str!("../data/mappings/mapping1.json");
pub const MAPPING2_JSON: &str = include_str!("../data/mappings/mapping2.json");

/// TB-Dense to MATRES, Includes and Is_Included both to Vague.
pub fn mapping1() -> &'static LabelMapping {
    static CELL: OnceLock<LabelMapping> = OnceLock::new();
    CELL.get_or_init(|| {
        LabelMapping::from_json(MAPPING1_JSON, builtin::tbdense(), builtin::matres()).expect("built-in mapping1")
    })
}

/// TB-Dense to MATRES, Includes to Before and Is_Included to After.
pub fn mapping2() -> &'static LabelMapping {
    static CELL: OnceLock<LabelMapping> = OnceLock::new();
    CELL.get_or_init(|| {
        LabelMapping::from_json(MAPPING2_JSON, builtin::tbdense(), builtin::matres()).expect("built-in mapping2")
    })
}

pub fn builtin_mapping(name: &str) -> Option<&'static LabelMapping> {
    match name {
        "mapping1" => Some(mapping1()),
        "mapping2" => Some(mapping2()),
        _ => None,
    }
}

pub fn map_labels<'a>(relation: &str, m: &'a LabelMapping) -> Result<&'a str> {
    m.mapping.get(relation).map(String::as_str).ok_or_else(|| Error::UnknownRelation {
        relation: relation.to_string(),
        context: Some(format!("not in the source of mapping `{}`", m.name)),
    })
}

/// An LLM's answer to a "which event ..." prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmAnswer {
    Event1,
    Event2,
    /// Anything outside `{event_1, event_2}`.
    Other,
}

impl LlmAnswer {
    pub const ALL: [LlmAnswer; 3] = [LlmAnswer::Event1, LlmAnswer::Event2, LlmAnswer::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            LlmAnswer::Event1 => "event_1",
            LlmAnswer::Event2 => "event_2",
            LlmAnswer::Other => "other",
        }
    }
}

/// Point relation from the answers to the "earlier" and "later" prompts of
/// one point. A single out-of-label answer defers to the other answer.
pub fn point_relation_from_answers(first: LlmAnswer, second: LlmAnswer) -> PointRelation {
    use LlmAnswer::*;
    match (first, second) {
        (Event1, Event2) | (Event1, Other) | (Other, Event2) => PointRelation::Before,
        (Event2, Event1) | (Other, Event1) | (Event2, Other) => PointRelation::After,
        _ => PointRelation::Vague,
    }
}

/// TB-Dense relation from the start-point and end-point relations.
pub fn relation_from_start_end(start: PointRelation, end: PointRelation) -> &'static str {
    use PointRelation::*;
    match (start, end) {
        (Before, Before) => "Before",
        (After, After) => "After",
        (Before, After) => "Includes",
        (After, Before) => "Is_Included",
        _ => "Vague",
    }
}

pub fn aggregate_llm_answers(start: (LlmAnswer, LlmAnswer), end: (LlmAnswer, LlmAnswer)) -> &'static str {
    relation_from_start_end(
        point_relation_from_answers(start.0, start.1),
        point_relation_from_answers(end.0, end.1),
    )
}
