//! Question-level logic: the eight atoms `Q{1,2}_{ss,ee,se,es}`, hard and soft
//! evaluation of expressions over them, exact gradients of the soft value and
//! the exact independent-atom probability via minterm expansion.
//!
//! Soft operators: `a & b = a*b`, `a | b = a + b - a*b`, `!a = 1 - a`. N-ary
//! conjunction is the product of the children; n-ary disjunction is
//! `1 - prod(1 - child)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, AtomParser, Expr, Lexer, Token, TokenKind};
use crate::point::{PointConfiguration, PointPair, PointRelation, QuestionAnswers};

pub const NUM_ATOMS: usize = 8;
pub const NUM_ASSIGNMENTS: usize = 1 << NUM_ATOMS;

/// Which of the two questions asked about a point pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Question {
    /// Can the first point occur earlier?
    First,
    /// Can the second point occur earlier?
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Atom {
    pub pair: PointPair,
    pub question: Question,
}

impl Atom {
    pub const fn new(pair: PointPair, question: Question) -> Self {
        Atom { pair, question }
    }

    /// `pair * 2 + question`, i.e. `Q1_ss, Q2_ss, Q1_ee, ... , Q2_es`.
    pub fn index(self) -> usize {
        self.pair.index() * 2 + self.question as usize
    }

    pub fn from_index(i: usize) -> Self {
        let q = if i % 2 == 0 { Question::First } else { Question::Second };
        Atom::new(PointPair::ALL[i / 2], q)
    }

    pub fn all() -> impl Iterator<Item = Atom> {
        (0..NUM_ATOMS).map(Atom::from_index)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self.question {
            Question::First => 1,
            Question::Second => 2,
        };
        write!(f, "Q{n}_{}", self.pair)
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::parse(1, 1, format!("unknown atom `{s}`"));
        let rest = s.strip_prefix('Q').or_else(|| s.strip_prefix('q')).ok_or_else(bad)?;
        let (n, pair) = rest.split_once('_').ok_or_else(bad)?;
        let question = match n {
            "1" => Question::First,
            "2" => Question::Second,
            _ => return Err(bad()),
        };
        let pair = pair.parse::<PointPair>().map_err(|_| bad())?;
        Ok(Atom::new(pair, question))
    }
}

pub type LogicExpr = Expr<Atom>;

struct QAtoms;

impl AtomParser for QAtoms {
    type Atom = Atom;

    fn parse_atom(&self, lex: &mut Lexer) -> Result<Atom> {
        let column = lex.column();
        match lex.next_token() {
            Some(Token { kind: TokenKind::Ident(id), .. }) => id
                .parse::<Atom>()
                .map_err(|_| lex.error(column, format!("unknown atom `{id}`"))),
            Some(t) => Err(lex.error(t.column, format!("expected an atom, found {:?}", t.kind))),
            None => Err(lex.error(column, "expected an atom, found end of input")),
        }
    }
}

/// Parse `Q1_ss & !Q2_ss | true` style text.
pub fn parse_logic(text: &str) -> Result<LogicExpr> {
    expr::parse(text, 1, 1, &QAtoms)
}

/// A full binary assignment of the eight atoms; bit `atom.index()` set means yes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment(pub u8);

impl Assignment {
    pub fn all() -> impl Iterator<Item = Assignment> {
        (0..NUM_ASSIGNMENTS).map(|m| Assignment(m as u8))
    }

    pub fn get(self, atom: Atom) -> bool {
        self.0 >> atom.index() & 1 == 1
    }

    pub fn answers(self, pair: PointPair) -> QuestionAnswers {
        QuestionAnswers::new(
            self.get(Atom::new(pair, Question::First)),
            self.get(Atom::new(pair, Question::Second)),
        )
    }

    /// Encode each pair's relation through the question table.
    pub fn from_configuration(c: &PointConfiguration) -> Self {
        let mut bits = 0u8;
        for pair in PointPair::ALL {
            let a = c.get(pair).answers();
            bits |= (a.q1 as u8) << Atom::new(pair, Question::First).index();
            bits |= (a.q2 as u8) << Atom::new(pair, Question::Second).index();
        }
        Assignment(bits)
    }

    pub fn configuration(self) -> PointConfiguration {
        let z = |pair| self.answers(pair).relation();
        PointConfiguration::new(z(PointPair::SS), z(PointPair::EE), z(PointPair::SE), z(PointPair::ES))
    }
}

/// Truth values (probabilities or 0/1) for the eight atoms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QVector([f64; NUM_ATOMS]);

impl QVector {
    pub fn new(values: [f64; NUM_ATOMS]) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::ProbabilityOutOfRange(bad));
        }
        Ok(QVector(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; NUM_ATOMS] = values.try_into().map_err(|_| Error::DimensionMismatch {
            expected: NUM_ATOMS,
            found: values.len(),
        })?;
        Self::new(arr)
    }

    pub fn uniform(p: f64) -> Self {
        Self::new([p; NUM_ATOMS]).expect("uniform value must lie in [0, 1]")
    }

    pub fn get(&self, atom: Atom) -> f64 {
        self.0[atom.index()]
    }

    pub fn set(&mut self, atom: Atom, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange(value));
        }
        self.0[atom.index()] = value;
        Ok(())
    }

    pub fn values(&self) -> &[f64; NUM_ATOMS] {
        &self.0
    }

    pub fn is_binary(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Threshold each value: strictly above one half is yes.
    pub fn threshold(&self) -> Assignment {
        let bits = self
            .0
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &v)| acc | ((v > 0.5) as u8) << i);
        Assignment(bits)
    }
}

impl From<Assignment> for QVector {
    fn from(m: Assignment) -> Self {
        let mut v = [0.0; NUM_ATOMS];
        for (i, slot) in v.iter_mut().enumerate() {
            *slot = f64::from(m.0 >> i & 1);
        }
        QVector(v)
    }
}

pub type Gradient = [f64; NUM_ATOMS];

pub fn eval_hard(e: &LogicExpr, m: Assignment) -> bool {
    e.eval(&|a: &Atom| m.get(*a))
}

pub fn eval_soft(e: &LogicExpr, q: &QVector) -> f64 {
    match e {
        Expr::Atom(a) => q.get(*a),
        Expr::Const(b) => f64::from(u8::from(*b)),
        Expr::Not(c) => 1.0 - eval_soft(c, q),
        Expr::And(cs) => cs.iter().map(|c| eval_soft(c, q)).product(),
        Expr::Or(cs) => 1.0 - cs.iter().map(|c| 1.0 - eval_soft(c, q)).product::<f64>(),
    }
}

/// Soft value and its exact gradient with respect to the eight atoms, in one
/// post-order pass.
pub fn grad_soft(e: &LogicExpr, q: &QVector) -> (f64, Gradient) {
    match e {
        Expr::Atom(a) => {
            let mut g = [0.0; NUM_ATOMS];
            g[a.index()] = 1.0;
            (q.get(*a), g)
        }
        Expr::Const(b) => (f64::from(u8::from(*b)), [0.0; NUM_ATOMS]),
        Expr::Not(c) => {
            let (v, g) = grad_soft(c, q);
            (1.0 - v, g.map(|x| -x))
        }
        Expr::And(cs) => {
            let parts: Vec<(f64, Gradient)> = cs.iter().map(|c| grad_soft(c, q)).collect();
            product_rule(&parts)
        }
        Expr::Or(cs) => {
            // 1 - prod(1 - v_i): differentiate the product of complements.
            let parts: Vec<(f64, Gradient)> = cs
                .iter()
                .map(|c| {
                    let (v, g) = grad_soft(c, q);
                    (1.0 - v, g.map(|x| -x))
                })
                .collect();
            let (p, g) = product_rule(&parts);
            (1.0 - p, g.map(|x| -x))
        }
    }
}

/// Value and gradient of `prod v_i` given child values/gradients, using
/// prefix and suffix products so zero factors need no division.
fn product_rule(parts: &[(f64, Gradient)]) -> (f64, Gradient) {
    let n = parts.len();
    let mut prefix = vec![1.0; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * parts[i].0;
    }
    let mut suffix = 1.0;
    let mut grad = [0.0; NUM_ATOMS];
    for i in (0..n).rev() {
        let others = prefix[i] * suffix;
        for (g, dg) in grad.iter_mut().zip(parts[i].1.iter()) {
            *g += others * dg;
        }
        suffix *= parts[i].0;
    }
    (prefix[n], grad)
}

/// Set of full assignments, one bit per assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MintermSet([u64; 4]);

impl MintermSet {
    pub fn empty() -> Self {
        MintermSet([0; 4])
    }

    pub fn full() -> Self {
        MintermSet([u64::MAX; 4])
    }

    pub fn insert(&mut self, m: Assignment) {
        self.0[m.0 as usize / 64] |= 1 << (m.0 % 64);
    }

    pub fn contains(&self, m: Assignment) -> bool {
        self.0[m.0 as usize / 64] >> (m.0 % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        MintermSet(std::array::from_fn(|i| self.0[i] & other.0[i]))
    }

    pub fn union(&self, other: &Self) -> Self {
        MintermSet(std::array::from_fn(|i| self.0[i] | other.0[i]))
    }

    pub fn iter(&self) -> impl Iterator<Item = Assignment> + '_ {
        Assignment::all().filter(|m| self.contains(*m))
    }
}

impl FromIterator<Assignment> for MintermSet {
    fn from_iter<I: IntoIterator<Item = Assignment>>(iter: I) -> Self {
        let mut s = MintermSet::empty();
        for m in iter {
            s.insert(m);
        }
        s
    }
}

pub fn expand_minterms(e: &LogicExpr) -> MintermSet {
    Assignment::all().filter(|&m| eval_hard(e, m)).collect()
}

fn minterm_probability(m: Assignment, q: &QVector) -> f64 {
    Atom::all()
        .map(|a| if m.get(a) { q.get(a) } else { 1.0 - q.get(a) })
        .product()
}

/// Exact probability that `e` holds when atoms are independent with the given
/// marginals.
pub fn eval_prob_sum(e: &LogicExpr, q: &QVector) -> f64 {
    prob_sum_of(&expand_minterms(e), q)
}

pub fn prob_sum_of(minterms: &MintermSet, q: &QVector) -> f64 {
    minterms.iter().map(|m| minterm_probability(m, q)).sum()
}

/// Value and gradient of the minterm probability sum.
pub fn grad_prob_sum_of(minterms: &MintermSet, q: &QVector) -> (f64, Gradient) {
    let mut value = 0.0;
    let mut grad = [0.0; NUM_ATOMS];
    for m in minterms.iter() {
        let factors: [f64; NUM_ATOMS] =
            std::array::from_fn(|i| if m.0 >> i & 1 == 1 { q.0[i] } else { 1.0 - q.0[i] });
        value += factors.iter().product::<f64>();
        for (i, g) in grad.iter_mut().enumerate() {
            let others: f64 = (0..NUM_ATOMS).filter(|&j| j != i).map(|j| factors[j]).product();
            *g += if m.0 >> i & 1 == 1 { others } else { -others };
        }
    }
    (value, grad)
}

/// Question-level expression equivalent to "the pair's relation is `z`".
pub fn relation_minterm(pair: PointPair, z: PointRelation) -> LogicExpr {
    let a = z.answers();
    let lit = |question, positive: bool| {
        let atom = Expr::Atom(Atom::new(pair, question));
        if positive {
            atom
        } else {
            Expr::not(atom)
        }
    };
    Expr::and([lit(Question::First, a.q1), lit(Question::Second, a.q2)])
}
