//! Evaluation metrics: Vague-excluded micro P/R/F1, one-vs-rest macro F1,
//! confusion matrices and the split of errors on non-Vague gold instances
//! into "predicted Vague" versus "predicted another relation".
//!
//! Every ratio with a zero denominator is 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::RelationSchema;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(correct: usize, predicted: usize, actual: usize) -> Self {
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, actual);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths<S>(gold: &[S], pred: &[S]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    Ok(())
}

pub fn micro_f1_excluding_vague<S: AsRef<str>>(gold: &[S], pred: &[S], vague: &str) -> Result<Prf> {
    check_lengths(gold, pred)?;
    let mut correct = 0;
    let mut predicted = 0;
    let mut actual = 0;
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (g.as_ref(), p.as_ref());
        if p != vague {
            predicted += 1;
            if p == g {
                correct += 1;
            }
        }
        if g != vague {
            actual += 1;
        }
    }
    Ok(Prf::from_counts(correct, predicted, actual))
}

/// One-vs-rest precision/recall/F1 for a single relation.
pub fn relation_prf<S: AsRef<str>>(gold: &[S], pred: &[S], relation: &str) -> Result<Prf> {
    check_lengths(gold, pred)?;
    let mut tp = 0;
    let mut predicted = 0;
    let mut actual = 0;
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (g.as_ref() == relation, p.as_ref() == relation);
        tp += usize::from(g && p);
        predicted += usize::from(p);
        actual += usize::from(g);
    }
    Ok(Prf::from_counts(tp, predicted, actual))
}

/// Unweighted mean of per-relation F1 over `relations`.
pub fn macro_f1<S: AsRef<str>, R: AsRef<str>>(gold: &[S], pred: &[S], relations: &[R]) -> Result<f64> {
    check_lengths(gold, pred)?;
    if relations.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for r in relations {
        sum += relation_prf(gold, pred, r.as_ref())?.f1;
    }
    Ok(sum / relations.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VagueErrorSplit {
    /// Gold non-Vague, predicted Vague.
    pub to_vague: usize,
    /// Gold non-Vague, predicted a different non-Vague relation.
    pub not_vague: usize,
}

pub fn error_breakdown<S: AsRef<str>>(gold: &[S], pred: &[S], vague: &str) -> Result<VagueErrorSplit> {
    check_lengths(gold, pred)?;
    let mut split = VagueErrorSplit::default();
    for (g, p) in gold.iter().zip(pred) {
        let (g, p) = (g.as_ref(), p.as_ref());
        if g == vague || g == p {
            continue;
        }
        if p == vague {
            split.to_vague += 1;
        } else {
            split.not_vague += 1;
        }
    }
    Ok(split)
}

/// Gold (rows) by predicted (columns) counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Labels not in `labels` are appended in order of first appearance.
    pub fn new<S: AsRef<str>>(gold: &[S], pred: &[S], labels: &[String]) -> Result<Self> {
        check_lengths(gold, pred)?;
        let mut labels = labels.to_vec();
        for l in gold.iter().chain(pred) {
            if !labels.iter().any(|x| x == l.as_ref()) {
                labels.push(l.as_ref().to_string());
            }
        }
        let n = labels.len();
        let mut counts = vec![vec![0; n]; n];
        let idx = |s: &str| labels.iter().position(|x| x == s).expect("label registered above");
        for (g, p) in gold.iter().zip(pred) {
            counts[idx(g.as_ref())][idx(p.as_ref())] += 1;
        }
        Ok(ConfusionMatrix { labels, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sum(&self, label: &str) -> usize {
        self.index(label).map_or(0, |i| self.counts[i].iter().sum())
    }

    pub fn column_sum(&self, label: &str) -> usize {
        self.index(label).map_or(0, |j| self.counts.iter().map(|row| row[j]).sum())
    }

    pub fn get(&self, gold: &str, pred: &str) -> usize {
        match (self.index(gold), self.index(pred)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|x| x == label)
    }

    /// Diagonal restricted to rows other than `vague`.
    pub fn trace_excluding(&self, vague: &str) -> usize {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] != vague)
            .map(|i| self.counts[i][i])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationReport {
    pub relation: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub instances: usize,
    pub micro: Prf,
    pub macro_f1: f64,
    pub macro_includes_vague: bool,
    pub per_relation: Vec<RelationReport>,
    pub confusion: ConfusionMatrix,
    pub vague_error_split: VagueErrorSplit,
}

impl EvalReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("schema     {}\n", self.schema));
        out.push_str(&format!("instances  {}\n", self.instances));
        out.push_str(&format!(
            "micro      P={:.4} R={:.4} F1={:.4}  (Vague excluded)\n",
            self.micro.precision, self.micro.recall, self.micro.f1
        ));
        out.push_str(&format!(
            "macro F1   {:.4}  ({})\n",
            self.macro_f1,
            if self.macro_includes_vague { "with Vague" } else { "Vague excluded" }
        ));
        out.push_str(&format!(
            "errors     to_vague={} not_vague={}\n\n",
            self.vague_error_split.to_vague, self.vague_error_split.not_vague
        ));
        let width = self.confusion.labels.iter().map(String::len).max().unwrap_or(4).max(8);
        out.push_str(&format!("{:<width$}  {:>9} {:>9} {:>9} {:>7}\n", "relation", "precision", "recall", "f1", "support"));
        for r in &self.per_relation {
            out.push_str(&format!(
                "{:<width$}  {:>9.4} {:>9.4} {:>9.4} {:>7}\n",
                r.relation, r.precision, r.recall, r.f1, r.support
            ));
        }
        out.push_str(&format!("\n{:<width$}", "gold\\pred"));
        for l in &self.confusion.labels {
            out.push_str(&format!(" {l:>width$}"));
        }
        out.push('\n');
        for (l, row) in self.confusion.labels.iter().zip(&self.confusion.counts) {
            out.push_str(&format!("{l:<width$}"));
            for c in row {
                out.push_str(&format!(" {c:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Full report. Macro F1 averages the non-Vague relations unless
/// `macro_includes_vague` is set.
pub fn evaluate<S: AsRef<str>>(
    gold: &[S],
    pred: &[S],
    schema: &RelationSchema,
    macro_includes_vague: bool,
) -> Result<EvalReport> {
    check_lengths(gold, pred)?;
    for label in gold.iter().chain(pred) {
        schema.require_index(label.as_ref())?;
    }
    let vague = schema.vague_name();
    let macro_set: &[String] = if macro_includes_vague {
        schema.relation_names()
    } else {
        schema.non_vague_names()
    };
    let per_relation = schema
        .relation_names()
        .iter()
        .map(|r| {
            let prf = relation_prf(gold, pred, r)?;
            Ok(RelationReport {
                relation: r.clone(),
                precision: prf.precision,
                recall: prf.recall,
                f1: prf.f1,
                support: gold.iter().filter(|g| g.as_ref() == r).count(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        schema: schema.name().to_string(),
        instances: gold.len(),
        micro: micro_f1_excluding_vague(gold, pred, vague)?,
        macro_f1: macro_f1(gold, pred, macro_set)?,
        macro_includes_vague,
        per_relation,
        confusion: ConfusionMatrix::new(gold, pred, schema.relation_names())?,
        vague_error_split: error_breakdown(gold, pred, vague)?,
    })
}
