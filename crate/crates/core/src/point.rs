//! Time-point vocabulary: the four point relations, the four cross-event point
//! pairs, the two-question encoding of a point relation and whole-pair
//! configurations with their interval-consistency checks.
//!
//! Events are proper intervals `[s, e]` with `s < e`. A configuration assigns
//! one relation to each of `(t1s,t2s)`, `(t1e,t2e)`, `(t1s,t2e)` and
//! `(t1e,t2s)`; consistency is decided by brute force over the 75 weak
//! orderings of the four time points.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relation between two time points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointRelation {
    Before,
    After,
    Equal,
    Vague,
}

impl PointRelation {
    pub const ALL: [PointRelation; 4] = [
        PointRelation::Before,
        PointRelation::After,
        PointRelation::Equal,
        PointRelation::Vague,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Relation seen from the other point: before and after trade places.
    pub fn invert(self) -> Self {
        match self {
            PointRelation::Before => PointRelation::After,
            PointRelation::After => PointRelation::Before,
            other => other,
        }
    }

    /// Inverse of [`QuestionAnswers::relation`].
    pub fn answers(self) -> QuestionAnswers {
        let (q1, q2) = match self {
            PointRelation::Before => (true, false),
            PointRelation::After => (false, true),
            PointRelation::Equal => (false, false),
            PointRelation::Vague => (true, true),
        };
        QuestionAnswers { q1, q2 }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointRelation::Before => "before",
            PointRelation::After => "after",
            PointRelation::Equal => "equal",
            PointRelation::Vague => "vague",
        }
    }

    fn compare<T: PartialOrd>(a: &T, b: &T) -> Self {
        if a < b {
            PointRelation::Before
        } else if a > b {
            PointRelation::After
        } else {
            PointRelation::Equal
        }
    }
}

impl fmt::Display for PointRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointRelation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "before" => Ok(PointRelation::Before),
            "after" => Ok(PointRelation::After),
            "equal" => Ok(PointRelation::Equal),
            "vague" => Ok(PointRelation::Vague),
            _ => Err(Error::UnknownPointRelation(s.to_string())),
        }
    }
}

/// One of the four cross-event time-point pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointPair {
    /// `(t1s, t2s)`
    SS,
    /// `(t1e, t2e)`
    EE,
    /// `(t1s, t2e)`
    SE,
    /// `(t1e, t2s)`
    ES,
}

impl PointPair {
    pub const ALL: [PointPair; 4] = [PointPair::SS, PointPair::EE, PointPair::SE, PointPair::ES];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PointPair::SS => "ss",
            PointPair::EE => "ee",
            PointPair::SE => "se",
            PointPair::ES => "es",
        }
    }

    /// The pair that plays this role once the two events are swapped.
    pub fn swapped(self) -> Self {
        match self {
            PointPair::SE => PointPair::ES,
            PointPair::ES => PointPair::SE,
            other => other,
        }
    }

    /// Indices into `[t1s, t1e, t2s, t2e]`.
    fn points(self) -> (usize, usize) {
        match self {
            PointPair::SS => (0, 2),
            PointPair::EE => (1, 3),
            PointPair::SE => (0, 3),
            PointPair::ES => (1, 2),
        }
    }
}

impl fmt::Display for PointPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PointPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(PointPair::SS),
            "ee" => Ok(PointPair::EE),
            "se" => Ok(PointPair::SE),
            "es" => Ok(PointPair::ES),
            _ => Err(Error::UnknownPointPair(s.to_string())),
        }
    }
}

/// Yes/no answers to "can the first point be earlier?" (`q1`) and "can the
/// second point be earlier?" (`q2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuestionAnswers {
    pub q1: bool,
    pub q2: bool,
}

impl QuestionAnswers {
    pub fn new(q1: bool, q2: bool) -> Self {
        QuestionAnswers { q1, q2 }
    }

    pub fn relation(self) -> PointRelation {
        match (self.q1, self.q2) {
            (true, false) => PointRelation::Before,
            (false, true) => PointRelation::After,
            (false, false) => PointRelation::Equal,
            (true, true) => PointRelation::Vague,
        }
    }
}

pub fn answers_to_relation(a: QuestionAnswers) -> PointRelation {
    a.relation()
}

pub fn relation_to_answers(z: PointRelation) -> QuestionAnswers {
    z.answers()
}

/// Probabilities of answering yes to the two questions of one point pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionProbabilities {
    p1: f64,
    p2: f64,
}

impl QuestionProbabilities {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        for p in [p1, p2] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        Ok(QuestionProbabilities { p1, p2 })
    }

    pub fn p1(&self) -> f64 {
        self.p1
    }

    pub fn p2(&self) -> f64 {
        self.p2
    }

    /// Thresholded answers: strictly greater than one half means yes.
    pub fn answers(&self) -> QuestionAnswers {
        QuestionAnswers::new(self.p1 > 0.5, self.p2 > 0.5)
    }
}

/// How a configuration's Vague pairs are treated when checking consistency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyMode {
    /// Vague pairs are unconstrained.
    #[default]
    Satisfiable,
    /// Vague pairs must be genuinely open: both strict orders of the pair
    /// must be realizable by some satisfying ordering.
    RealizableVague,
}

/// A relation for each of the four point pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PointConfiguration {
    pub ss: PointRelation,
    pub ee: PointRelation,
    pub se: PointRelation,
    pub es: PointRelation,
}

impl PointConfiguration {
    pub fn new(ss: PointRelation, ee: PointRelation, se: PointRelation, es: PointRelation) -> Self {
        PointConfiguration { ss, ee, se, es }
    }

    pub fn uniform(z: PointRelation) -> Self {
        Self::new(z, z, z, z)
    }

    pub fn get(&self, pair: PointPair) -> PointRelation {
        match pair {
            PointPair::SS => self.ss,
            PointPair::EE => self.ee,
            PointPair::SE => self.se,
            PointPair::ES => self.es,
        }
    }

    pub fn set(&mut self, pair: PointPair, z: PointRelation) {
        match pair {
            PointPair::SS => self.ss = z,
            PointPair::EE => self.ee = z,
            PointPair::SE => self.se = z,
            PointPair::ES => self.es = z,
        }
    }

    pub fn relations(&self) -> [PointRelation; 4] {
        [self.ss, self.ee, self.se, self.es]
    }

    /// Position in the canonical order: lexicographic over `(ss, ee, se, es)`
    /// with `before < after < equal < vague`.
    pub fn index(&self) -> usize {
        self.relations().iter().fold(0, |acc, z| acc * 4 + z.index())
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < 256, "configuration index out of range: {index}");
        let digit = |shift: usize| PointRelation::ALL[(index >> shift) & 3];
        Self::new(digit(6), digit(4), digit(2), digit(0))
    }

    /// Configuration seen with the two events exchanged.
    pub fn swap_events(&self) -> Self {
        Self::new(self.ss.invert(), self.ee.invert(), self.es.invert(), self.se.invert())
    }

    /// Relations read off two proper intervals `[s1, e1]` and `[s2, e2]`.
    pub fn from_intervals<T: PartialOrd + fmt::Debug>(s1: T, e1: T, s2: T, e2: T) -> Result<Self> {
        if s1.partial_cmp(&e1) != Some(std::cmp::Ordering::Less) {
            return Err(Error::ImproperInterval(format!("event 1: [{s1:?}, {e1:?}]")));
        }
        if s2.partial_cmp(&e2) != Some(std::cmp::Ordering::Less) {
            return Err(Error::ImproperInterval(format!("event 2: [{s2:?}, {e2:?}]")));
        }
        let points = [&s1, &e1, &s2, &e2];
        Ok(Self::from_points(|pair| {
            let (a, b) = pair.points();
            PointRelation::compare(points[a], points[b])
        }))
    }

    fn from_points(mut rel: impl FnMut(PointPair) -> PointRelation) -> Self {
        Self::new(
            rel(PointPair::SS),
            rel(PointPair::EE),
            rel(PointPair::SE),
            rel(PointPair::ES),
        )
    }

    pub fn has_vague(&self) -> bool {
        self.relations().contains(&PointRelation::Vague)
    }

    pub fn is_consistent(&self, mode: ConsistencyMode) -> bool {
        let satisfying: Vec<&PointConfiguration> = proper_orderings()
            .iter()
            .filter(|o| {
                PointPair::ALL
                    .iter()
                    .all(|&p| self.get(p) == PointRelation::Vague || self.get(p) == o.get(p))
            })
            .collect();
        if satisfying.is_empty() {
            return false;
        }
        match mode {
            ConsistencyMode::Satisfiable => true,
            ConsistencyMode::RealizableVague => PointPair::ALL
                .iter()
                .filter(|&&p| self.get(p) == PointRelation::Vague)
                .all(|&p| {
                    satisfying.iter().any(|o| o.get(p) == PointRelation::Before)
                        && satisfying.iter().any(|o| o.get(p) == PointRelation::After)
                }),
        }
    }
}

impl Default for PointConfiguration {
    fn default() -> Self {
        Self::uniform(PointRelation::Vague)
    }
}

impl fmt::Display for PointConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(ss={}, ee={}, se={}, es={})", self.ss, self.ee, self.se, self.es)
    }
}

/// All weak orderings of `[t1s, t1e, t2s, t2e]` as dense rank vectors.
pub fn weak_orderings() -> &'static [[u8; 4]] {
    static ORDERINGS: OnceLock<Vec<[u8; 4]>> = OnceLock::new();
    ORDERINGS.get_or_init(|| {
        let mut out = Vec::with_capacity(75);
        for code in 0..256usize {
            let ranks = [code >> 6 & 3, code >> 4 & 3, code >> 2 & 3, code & 3].map(|r| r as u8);
            let max = *ranks.iter().max().unwrap();
            if (0..=max).all(|r| ranks.contains(&r)) {
                out.push(ranks);
            }
        }
        out
    })
}

/// Point configurations of the weak orderings with `t1s < t1e` and `t2s < t2e`.
fn proper_orderings() -> &'static [PointConfiguration] {
    static PROPER: OnceLock<Vec<PointConfiguration>> = OnceLock::new();
    PROPER.get_or_init(|| {
        weak_orderings()
            .iter()
            .filter(|r| r[0] < r[1] && r[2] < r[3])
            .map(|r| {
                PointConfiguration::from_intervals(r[0], r[1], r[2], r[3])
                    .expect("filtered to proper intervals")
            })
            .collect()
    })
}

/// Every configuration passing `is_consistent(mode)`, in canonical order.
pub fn enumerate_consistent_configurations(mode: ConsistencyMode) -> Vec<PointConfiguration> {
    (0..256)
        .map(PointConfiguration::from_index)
        .filter(|c| c.is_consistent(mode))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use PointRelation::*;

    #[test]
    fn question_table_rows() {
        assert_eq!(answers_to_relation(QuestionAnswers::new(true, false)), Before);
        assert_eq!(answers_to_relation(QuestionAnswers::new(false, true)), After);
        assert_eq!(answers_to_relation(QuestionAnswers::new(false, false)), Equal);
        assert_eq!(answers_to_relation(QuestionAnswers::new(true, true)), Vague);
        assert_eq!(relation_to_answers(After), QuestionAnswers::new(false, true));
        assert_eq!(relation_to_answers(Equal), QuestionAnswers::new(false, false));
        for z in PointRelation::ALL {
            assert_eq!(answers_to_relation(relation_to_answers(z)), z);
        }
    }

    #[test]
    fn invert_involution() {
        assert_eq!(Before.invert(), After);
        assert_eq!(Equal.invert(), Equal);
        assert_eq!(Vague.invert(), Vague);
        for z in PointRelation::ALL {
            assert_eq!(z.invert().invert(), z);
        }
    }

    #[test]
    fn intervals_by_direct_comparison() {
        let c = PointConfiguration::from_intervals(1, 2, 3, 4).unwrap();
        assert_eq!(c, PointConfiguration::uniform(Before));
        let c = PointConfiguration::from_intervals(1, 4, 2, 3).unwrap();
        assert_eq!(c, PointConfiguration::new(Before, After, Before, After));
        let c = PointConfiguration::from_intervals(1, 2, 1, 2).unwrap();
        assert_eq!(c, PointConfiguration::new(Equal, Equal, Before, After));
    }

    #[test]
    fn improper_intervals_rejected() {
        assert!(matches!(
            PointConfiguration::from_intervals(2, 2, 3, 4),
            Err(Error::ImproperInterval(_))
        ));
        assert!(matches!(
            PointConfiguration::from_intervals(1, 2, 5, 4),
            Err(Error::ImproperInterval(_))
        ));
        assert!(PointConfiguration::from_intervals(0.0, f64::NAN, 1.0, 2.0).is_err());
    }

    #[test]
    fn swap_examples() {
        let all_eq = PointConfiguration::uniform(Equal);
        assert_eq!(all_eq.swap_events(), all_eq);
        let c = PointConfiguration::uniform(Before);
        assert_eq!(c.swap_events(), PointConfiguration::uniform(After));
        assert_eq!(
            c.swap_events(),
            PointConfiguration::from_intervals(3, 4, 1, 2).unwrap()
        );
    }

    #[test]
    fn consistency_examples() {
        assert!(PointConfiguration::uniform(Before).is_consistent(ConsistencyMode::Satisfiable));
        let bad = PointConfiguration::new(Before, Before, After, Before);
        assert!(!bad.is_consistent(ConsistencyMode::Satisfiable));
        assert!(PointConfiguration::uniform(Vague).is_consistent(ConsistencyMode::Satisfiable));
        assert!(PointConfiguration::uniform(Vague).is_consistent(ConsistencyMode::RealizableVague));
    }

    #[test]
    fn realizable_mode_rejects_forced_vague() {
        // ss before and ee before force t1s < t2e, so se cannot be genuinely vague.
        let c = PointConfiguration::new(Before, Before, Vague, Vague);
        assert!(c.is_consistent(ConsistencyMode::Satisfiable));
        assert!(!c.is_consistent(ConsistencyMode::RealizableVague));
    }

    #[test]
    fn seventy_five_weak_orderings() {
        assert_eq!(weak_orderings().len(), 75);
        assert_eq!(proper_orderings().len(), 13);
    }

    #[test]
    fn index_round_trip() {
        for i in 0..256 {
            assert_eq!(PointConfiguration::from_index(i).index(), i);
        }
    }

    #[test]
    fn question_probabilities_bounds() {
        assert!(QuestionProbabilities::new(0.0, 1.0).is_ok());
        assert!(QuestionProbabilities::new(-0.1, 0.5).is_err());
        assert!(QuestionProbabilities::new(0.5, 1.5).is_err());
        let p = QuestionProbabilities::new(0.5, 0.7).unwrap();
        assert_eq!(p.answers(), QuestionAnswers::new(false, true));
    }
}
