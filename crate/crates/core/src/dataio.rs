//! JSONL pair records and prediction records, symmetry augmentation and
//! seeded subsampling.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::RelationDistribution;
use crate::learner::LabeledPair;
use crate::point::PointConfiguration;
use crate::schema::RelationSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[default]
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub id: String,
    #[serde(default)]
    pub split: Split,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PointConfiguration>,
}

impl PairRecord {
    pub fn from_labeled(ex: &LabeledPair, split: Split) -> Self {
        PairRecord {
            id: ex.id.clone(),
            split,
            gold: ex.gold.clone(),
            features: Some(ex.features.clone()),
            config: ex.gold_config,
        }
    }

    pub fn to_labeled(&self) -> Result<LabeledPair> {
        let features = self
            .features
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("record `{}` has no features", self.id)))?;
        Ok(LabeledPair {
            id: self.id.clone(),
            features,
            gold: self.gold.clone(),
            gold_config: self.config,
        })
    }
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<(usize, T)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.column(), e.to_string()))?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parse pair records, rejecting duplicate ids and labels outside `schema`.
pub fn parse_pairs(text: &str, schema: &RelationSchema) -> Result<Vec<PairRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (_, rec) in parse_jsonl::<PairRecord>(text)? {
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        if !schema.has_relation(&rec.gold) {
            return Err(Error::UnknownRelation {
                relation: rec.gold,
                context: Some(format!("record `{}`", rec.id)),
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_pairs(path: impl AsRef<Path>, schema: &RelationSchema) -> Result<Vec<PairRecord>> {
    parse_pairs(&fs::read_to_string(path)?, schema)
}

pub fn pairs_to_jsonl(records: &[PairRecord]) -> Result<String> {
    to_jsonl(records)
}

pub fn write_pairs(path: impl AsRef<Path>, records: &[PairRecord]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(pairs_to_jsonl(records)?.as_bytes())?;
    Ok(())
}

pub const SYMMETRY_SUFFIX: &str = "#sym";

/// Exchange the two halves of an even-length feature vector (the two event
/// embeddings of a concatenated pair representation). Odd lengths are
/// returned unchanged.
pub fn swap_feature_halves(features: &[f64]) -> Vec<f64> {
    if features.len() % 2 != 0 {
        return features.to_vec();
    }
    let (a, b) = features.split_at(features.len() / 2);
    b.iter().chain(a).copied().collect()
}

fn swapped_record(r: &PairRecord, schema: &RelationSchema) -> Result<PairRecord> {
    let features = r.features.as_ref().map(|f| {
        if f.len() % 2 != 0 {
            log::warn!("record `{}` has odd feature length {}; reusing features for its swapped copy", r.id, f.len());
        }
        swap_feature_halves(f)
    });
    Ok(PairRecord {
        id: format!("{}{SYMMETRY_SUFFIX}", r.id),
        split: r.split,
        gold: schema.symmetric(&r.gold)?.to_string(),
        features,
        config: r.config.map(|c| c.swap_events()),
    })
}

/// Originals followed by their event-swapped copies. Only train records may
/// be augmented.
pub fn symmetry_augment(data: &[PairRecord], schema: &RelationSchema) -> Result<Vec<PairRecord>> {
    if let Some(r) = data.iter().find(|r| r.split != Split::Train) {
        return Err(Error::SplitViolation {
            id: r.id.clone(),
            split: r.split.as_str().to_string(),
        });
    }
    let mut out = data.to_vec();
    for r in data {
        out.push(swapped_record(r, schema)?);
    }
    Ok(out)
}

/// Seeded uniform sample of `max(1, floor(n * fraction))` records without
/// replacement, in original order.
pub fn split_sample<T: Clone>(data: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!("sample fraction {fraction} outside (0, 1]")));
    }
    if data.is_empty() {
        return Ok(Vec::new());
    }
    let k = ((data.len() as f64 * fraction).floor() as usize).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, data.len(), k).into_vec();
    idx.sort_unstable();
    Ok(idx.into_iter().map(|i| data[i].clone()).collect())
}

/// A prediction-file line: question probabilities, a relation, or both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<RelationDistribution>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ambiguous: bool,
}

impl PredictionRecord {
    pub fn relation(id: impl Into<String>, relation: impl Into<String>) -> Self {
        PredictionRecord {
            id: id.into(),
            q: None,
            relation: Some(relation.into()),
            distribution: None,
            ambiguous: false,
        }
    }

    pub fn q(id: impl Into<String>, q: Vec<f64>) -> Self {
        PredictionRecord {
            id: id.into(),
            q: Some(q),
            relation: None,
            distribution: None,
            ambiguous: false,
        }
    }
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, rec) in parse_jsonl::<PredictionRecord>(text)? {
        if rec.q.is_none() && rec.relation.is_none() {
            return Err(Error::parse(line, 1, format!("record `{}` has neither `q` nor `relation`", rec.id)));
        }
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    parse_predictions(&fs::read_to_string(path)?)
}

pub fn predictions_to_jsonl(records: &[PredictionRecord]) -> Result<String> {
    to_jsonl(records)
}

pub fn write_predictions(path: impl AsRef<Path>, records: &[PredictionRecord]) -> Result<()> {
    fs::write(path, predictions_to_jsonl(records)?)?;
    Ok(())
}
